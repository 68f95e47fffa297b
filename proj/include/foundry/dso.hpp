#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "foundry/autodiff.hpp"
#include "foundry/params.hpp"

namespace foundry {

enum class CamMode { Train, Eval };

struct DsoConfig {
    std::size_t s = 4;   // supertoken count
    std::size_t d = 32;  // token dim
    bool qkv_bias = false;
    bool soft_assign = false;  // ablation: softmax assignment instead of argmax
    double tau = 1.0;          // relaxation temperature
};

/// Learnable supertoken bank plus the Q/K/V projections that score
/// token-to-supertoken affinity.
struct DsoParams {
    DsoConfig config;
    ad::Var supertokens;       // s x d
    ad::Var w_q, w_k, w_v;     // d x d each
    ad::Var b_q, b_k, b_v;     // 1 x d, only when qkv_bias
    ParamSet params;

    static DsoParams init(const DsoConfig& cfg, std::uint64_t seed);
};

/// Cross-attention map from tokens to supertokens.
struct Assignment {
    ad::Var cam;                        // c x s, rows sum to 1
    Tensor hard;                        // c x s one-hot over noisy argmax
    std::vector<std::size_t> group_of;  // c, supertoken index per token
};

/// Scores are (T W_K)(S W_Q)^T / sqrt(d) over content tokens only.
/// Hard mode: one-hot argmax (lowest index on ties); in Train, Gumbel noise
/// perturbs the scores and the straight-through estimator routes gradients
/// through softmax(scores / tau). Soft mode: the softmax itself is the map.
/// `noise_rng` is required in Train mode and ignored in Eval.
Assignment compute_cam(ad::Tape& tape, const ad::Var& tokens, const DsoParams& params,
                       CamMode mode, std::mt19937_64* noise_rng = nullptr);

/// Per-supertoken mean of assigned rows: (CAM^T V) / max(count, 1).
/// Empty groups come out as zero rows.
ad::Var group_average(ad::Tape& tape, const ad::Var& cam, const ad::Var& values);

struct DsoOutput {
    Assignment assign;
    ad::Var supertokens;  // s x d, grouped content + grouped raw positions
};

/// Full compression step: score on content tokens, group-average the value
/// projection, group-average raw positional embeddings with the same map,
/// and add the two.
DsoOutput dso_forward(ad::Tape& tape, const ad::Var& tokens, const ad::Var& pos_embed,
                      const DsoParams& params, CamMode mode,
                      std::mt19937_64* noise_rng = nullptr);

}  // namespace foundry
