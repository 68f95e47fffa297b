#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace foundry {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Dense row-major float64 tensor. Model code uses rank-2 tensors throughout;
/// the container itself is rank-agnostic so the FTEN file format can carry
/// vectors (labels) and matrices alike.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::size_t r, std::size_t c);
    static Tensor full(std::size_t r, std::size_t c, double v);
    static Tensor identity(std::size_t n);
    static Tensor row(std::vector<double> v);      // 1 x n
    static Tensor column(std::vector<double> v);   // n x 1
    static Tensor scalar(double v);                // 1 x 1

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    double scalar_value() const;

    std::string shape_str() const;
};

// Binary tensor container: magic "FTEN", u8 rank, u64 little-endian extents,
// float64 payload row-major.
void write_ften(std::ostream& os, const Tensor& t);
Tensor read_ften(std::istream& is);
void save_ften(const std::string& path, const Tensor& t);
Tensor load_ften(const std::string& path);

}  // namespace foundry
