#pragma once

#include <cstdint>

#include "foundry/autodiff.hpp"
#include "foundry/params.hpp"

namespace foundry {

struct EncoderConfig {
    std::size_t layers = 4;
    std::size_t d = 32;
    std::size_t heads = 4;
    std::size_t mlp_ratio = 4;

    std::size_t head_dim() const {
        if (heads == 0 || d % heads != 0)
            throw ArgumentError("encoder: d must be divisible by head count");
        return d / heads;
    }
};

struct EncoderLayerParams {
    ad::Var ln1_g, ln1_b;
    ad::Var w_qkv, b_qkv;  // d x 3d
    ad::Var w_o, b_o;      // d x d, residual-rescaled init
    ad::Var ln2_g, ln2_b;
    ad::Var w_fc1, b_fc1;  // d x 4d
    ad::Var w_fc2, b_fc2;  // 4d x d, residual-rescaled init
};

struct EncoderParams {
    EncoderConfig config;
    std::vector<EncoderLayerParams> layers;
    ParamSet params;

    /// Truncated normal (sigma 0.02, hard cutoff at 2 sigma), biases zero,
    /// layer-norm scales one. Residual-branch output projections are scaled
    /// by 1/sqrt(2L) after sampling.
    static EncoderParams init(const EncoderConfig& cfg, std::uint64_t seed);

    /// Deep copy of the first `layer_count` layers with independent leaves
    /// (used for the student core). Defaults to all layers.
    EncoderParams clone(const std::string& prefix, std::size_t layer_count = SIZE_MAX) const;
};

/// Pre-norm transformer: x += MHSA(LN(x)); x += MLP(LN(x)). L = 0 is the
/// identity. No class token, no final layer norm.
ad::Var encode(ad::Tape& tape, const ad::Var& tokens, const EncoderParams& params);

}  // namespace foundry
