#include "foundry/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace foundry {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(shape_product(shape), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_product(shape) != data.size()) {
        throw DimensionError("tensor: shape/data length mismatch");
    }
}

Tensor Tensor::zeros(std::size_t r, std::size_t c) { return Tensor({r, c}); }

Tensor Tensor::full(std::size_t r, std::size_t c, double v) {
    Tensor t({r, c});
    t.data.assign(r * c, v);
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data[i * n + i] = 1.0;
    return t;
}

Tensor Tensor::row(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({1, n}, std::move(v));
}

Tensor Tensor::column(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({n, 1}, std::move(v));
}

Tensor Tensor::scalar(double v) { return Tensor({1, 1}, {v}); }

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("tensor: rows() needs rank 2, got " + shape_str());
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("tensor: cols() needs rank 2, got " + shape_str());
    return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::scalar_value() const {
    if (size() != 1) throw DimensionError("tensor: scalar_value() on non-scalar " + shape_str());
    return data[0];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

void put_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("ften: truncated extent");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_f64_le(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64_le(os, v);
}

double get_f64_le(std::istream& is) {
    std::uint64_t v = get_u64_le(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace

void write_ften(std::ostream& os, const Tensor& t) {
    os.write("FTEN", 4);
    if (t.rank() > 255) throw IoError("ften: rank too large");
    unsigned char rank = static_cast<unsigned char>(t.rank());
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (auto e : t.shape) put_u64_le(os, e);
    for (double v : t.data) put_f64_le(os, v);
    if (!os) throw IoError("ften: write failed");
}

Tensor read_ften(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FTEN", 4) != 0) throw IoError("ften: bad magic");
    unsigned char rank = 0;
    is.read(reinterpret_cast<char*>(&rank), 1);
    if (!is) throw IoError("ften: truncated rank");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
        e = static_cast<std::size_t>(get_u64_le(is));
        n *= e;
    }
    std::vector<double> data(n);
    for (auto& v : data) v = get_f64_le(is);
    return Tensor(std::move(shape), std::move(data));
}

void save_ften(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("ften: cannot open for write: " + path);
    write_ften(os, t);
}

Tensor load_ften(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("ften: cannot open for read: " + path);
    return read_ften(is);
}

}  // namespace foundry
