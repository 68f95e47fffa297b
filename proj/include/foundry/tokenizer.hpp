#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "foundry/autodiff.hpp"
#include "foundry/params.hpp"
#include "foundry/tensor.hpp"

namespace foundry {

struct PointCloud {
    Tensor points;  // p x 3, normalized into the unit sphere
    std::optional<std::size_t> label;

    std::size_t num_points() const { return points.rows(); }
};

/// Center on the centroid and scale so the farthest point has norm 1.
/// Idempotent: normalizing a normalized cloud is a no-op (up to fp rounding),
/// and uniform rescaling of the input does not change the result.
Tensor normalize_to_unit_sphere(const Tensor& points);

/// Greedy max-min farthest point sampling; the first selected index is 0 so
/// fixtures are reproducible.
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t c);

/// Per center, the k nearest points by Euclidean distance, ties broken by
/// lower point index, sorted ascending by distance.
std::vector<std::vector<std::size_t>> knn_group(const PointCloud& cloud,
                                                const std::vector<std::size_t>& centers,
                                                std::size_t k);

struct TokenizerConfig {
    std::size_t c = 16;  // tokens per cloud
    std::size_t k = 8;   // group size
    std::size_t d = 32;  // embedding dim
};

/// Shared per-point MLP (3 -> d -> d, GELU) + max-pool token embedder and a
/// positional MLP of the same shape applied to centers.
struct TokenizerParams {
    TokenizerConfig config;
    ad::Var w1, b1, w2, b2;          // token embedder
    ad::Var pw1, pb1, pw2, pb2;      // positional embedder
    ParamSet params;

    static TokenizerParams init(const TokenizerConfig& cfg, std::uint64_t seed);
};

struct TokenizedInput {
    std::vector<std::size_t> centers;           // c point indices
    std::vector<std::vector<std::size_t>> groups;  // c x k point indices
    ad::Var tokens;      // c x d
    ad::Var pos_embed;   // c x d
};

/// Token embeddings for pre-grouped points: subtract center, shared MLP per
/// point, max-pool over the group.
ad::Var embed_tokens(ad::Tape& tape, const PointCloud& cloud,
                     const std::vector<std::size_t>& centers,
                     const std::vector<std::vector<std::size_t>>& groups,
                     const TokenizerParams& params);

ad::Var embed_positions(ad::Tape& tape, const Tensor& centers_xyz, const TokenizerParams& params);

/// Full pipeline: FPS centers, kNN groups, token + positional embeddings.
TokenizedInput tokenize(ad::Tape& tape, const PointCloud& cloud, const TokenizerParams& params);

/// Variant with explicit (c, k), used by the group-size inference baseline.
TokenizedInput tokenize_with(ad::Tape& tape, const PointCloud& cloud, const TokenizerParams& params,
                             std::size_t c, std::size_t k);

}  // namespace foundry
