#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "foundry/tokenizer.hpp"

namespace foundry {

constexpr std::size_t kNumShapeClasses = 5;  // sphere, cube, cylinder, plane, torus
constexpr std::size_t kNumCountClasses = 3;  // 1, 2 or 3 shapes per cloud

const char* shape_name(std::size_t shape_id);

/// One surface-sampled shape with Gaussian jitter, normalized to the unit
/// sphere. Labels match the shape id.
PointCloud make_shape(std::mt19937_64& rng, std::size_t shape_id, std::size_t points,
                      double jitter = 0.01);

/// Balanced five-class dataset (labels cycle through the shapes).
std::vector<PointCloud> make_class_dataset(std::uint64_t seed, std::size_t n, std::size_t points);

/// Counting task: each cloud contains 1 to 3 shrunken shapes at random
/// offsets; the label is the count minus one.
std::vector<PointCloud> make_count_dataset(std::uint64_t seed, std::size_t n, std::size_t points);

/// Random anisotropic scale in [0.8, 1.2) per axis and a rotation about the
/// y axis, then renormalized.
PointCloud augment(std::mt19937_64& rng, const PointCloud& cloud);

/// Dataset container: a labels column followed by one FTEN tensor per cloud.
void save_dataset(const std::string& path, const std::vector<PointCloud>& clouds);
std::vector<PointCloud> load_dataset(const std::string& path);

}  // namespace foundry
