#include "foundry/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "foundry/rng.hpp"

namespace foundry {

Tensor normalize_to_unit_sphere(const Tensor& points) {
    const std::size_t p = points.rows();
    if (points.cols() != 3) throw DimensionError("normalize: points must be p x 3");
    Tensor out = points;
    double cx = 0, cy = 0, cz = 0;
    for (std::size_t i = 0; i < p; ++i) {
        cx += out.at(i, 0);
        cy += out.at(i, 1);
        cz += out.at(i, 2);
    }
    cx /= static_cast<double>(p);
    cy /= static_cast<double>(p);
    cz /= static_cast<double>(p);
    double max_norm = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        out.at(i, 0) -= cx;
        out.at(i, 1) -= cy;
        out.at(i, 2) -= cz;
        const double n2 = out.at(i, 0) * out.at(i, 0) + out.at(i, 1) * out.at(i, 1) +
                          out.at(i, 2) * out.at(i, 2);
        max_norm = std::max(max_norm, n2);
    }
    max_norm = std::sqrt(max_norm);
    if (max_norm > 0.0) {
        for (auto& v : out.data) v /= max_norm;
    }
    return out;
}

namespace {

double sq_dist(const Tensor& pts, std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        const double d = pts.at(a, j) - pts.at(b, j);
        acc += d * d;
    }
    return acc;
}

}  // namespace

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t c) {
    const std::size_t p = cloud.num_points();
    if (c > p) throw ArgumentError("farthest_point_sample: c > point count");
    std::vector<std::size_t> selected;
    selected.reserve(c);
    if (c == 0) return selected;
    selected.push_back(0);
    std::vector<double> min_d(p, std::numeric_limits<double>::infinity());
    for (std::size_t step = 1; step < c; ++step) {
        const std::size_t last = selected.back();
        for (std::size_t i = 0; i < p; ++i)
            min_d[i] = std::min(min_d[i], sq_dist(cloud.points, i, last));
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < p; ++i) {
            if (min_d[i] > best_d) {
                best_d = min_d[i];
                best = i;
            }
        }
        selected.push_back(best);
    }
    return selected;
}

std::vector<std::vector<std::size_t>> knn_group(const PointCloud& cloud,
                                                const std::vector<std::size_t>& centers,
                                                std::size_t k) {
    const std::size_t p = cloud.num_points();
    if (k > p) throw ArgumentError("knn_group: k > point count");
    std::vector<std::vector<std::size_t>> groups;
    groups.reserve(centers.size());
    std::vector<std::pair<double, std::size_t>> dist(p);
    for (std::size_t ci : centers) {
        for (std::size_t i = 0; i < p; ++i) dist[i] = {sq_dist(cloud.points, i, ci), i};
        std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
        std::vector<std::size_t> g(k);
        for (std::size_t i = 0; i < k; ++i) g[i] = dist[i].second;
        groups.push_back(std::move(g));
    }
    return groups;
}

TokenizerParams TokenizerParams::init(const TokenizerConfig& cfg, std::uint64_t seed) {
    auto rng = make_stream(seed, "tokenizer-init");
    // Fan-in-scaled truncated normal so raw tokens come out at unit scale;
    // near-zero embeddings would starve the affinity scores downstream.
    const double s_in = std::sqrt(2.0 / 3.0);
    const double s_hidden = std::sqrt(2.0 / static_cast<double>(cfg.d));
    TokenizerParams tp;
    tp.config = cfg;
    tp.w1 = tp.params.add("tok.w1", trunc_normal_tensor(rng, 3, cfg.d, s_in));
    tp.b1 = tp.params.add("tok.b1", Tensor::zeros(1, cfg.d));
    tp.w2 = tp.params.add("tok.w2", trunc_normal_tensor(rng, cfg.d, cfg.d, s_hidden));
    tp.b2 = tp.params.add("tok.b2", Tensor::zeros(1, cfg.d));
    tp.pw1 = tp.params.add("pos.w1", trunc_normal_tensor(rng, 3, cfg.d, s_in));
    tp.pb1 = tp.params.add("pos.b1", Tensor::zeros(1, cfg.d));
    tp.pw2 = tp.params.add("pos.w2", trunc_normal_tensor(rng, cfg.d, cfg.d, s_hidden));
    tp.pb2 = tp.params.add("pos.b2", Tensor::zeros(1, cfg.d));
    return tp;
}

ad::Var embed_tokens(ad::Tape& tape, const PointCloud& cloud,
                     const std::vector<std::size_t>& centers,
                     const std::vector<std::vector<std::size_t>>& groups,
                     const TokenizerParams& params) {
    std::vector<ad::Var> rows;
    rows.reserve(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        Tensor offsets({g.size(), 3});
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = 0; j < 3; ++j)
                offsets.at(i, j) = cloud.points.at(g[i], j) - cloud.points.at(centers[gi], j);
        ad::Var x = tape.constant(std::move(offsets));
        ad::Var h = tape.gelu(tape.add_rowvec(tape.matmul(x, params.w1), params.b1));
        ad::Var y = tape.add_rowvec(tape.matmul(h, params.w2), params.b2);
        rows.push_back(tape.max_rows(y));
    }
    return tape.concat_rows(rows);
}

ad::Var embed_positions(ad::Tape& tape, const Tensor& centers_xyz, const TokenizerParams& params) {
    ad::Var x = tape.constant(centers_xyz);
    ad::Var h = tape.gelu(tape.add_rowvec(tape.matmul(x, params.pw1), params.pb1));
    return tape.add_rowvec(tape.matmul(h, params.pw2), params.pb2);
}

TokenizedInput tokenize_with(ad::Tape& tape, const PointCloud& cloud, const TokenizerParams& params,
                             std::size_t c, std::size_t k) {
    TokenizedInput ti;
    ti.centers = farthest_point_sample(cloud, c);
    ti.groups = knn_group(cloud, ti.centers, k);
    ti.tokens = embed_tokens(tape, cloud, ti.centers, ti.groups, params);
    Tensor centers_xyz({c, 3});
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < 3; ++j) centers_xyz.at(i, j) = cloud.points.at(ti.centers[i], j);
    ti.pos_embed = embed_positions(tape, centers_xyz, params);
    return ti;
}

TokenizedInput tokenize(ad::Tape& tape, const PointCloud& cloud, const TokenizerParams& params) {
    return tokenize_with(tape, cloud, params, params.config.c, params.config.k);
}

}  // namespace foundry
