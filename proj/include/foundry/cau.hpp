#pragma once

#include <cstdint>

#include "foundry/autodiff.hpp"
#include "foundry/params.hpp"

namespace foundry {

struct CauConfig {
    std::size_t d = 32;
    bool output_ln = false;  // ablation: layer norm after the MLP
};

/// Reconstruction head: per-token MLP (d -> d -> d, GELU) over the residual
/// sum of the raw token and its broadcast supertoken.
struct CauParams {
    CauConfig config;
    ad::Var w1, b1, w2, b2;
    ad::Var ln_g, ln_b;  // only when output_ln
    ParamSet params;

    static CauParams init(const CauConfig& cfg, std::uint64_t seed);
};

/// Yhat = MLP(T + CAM * S_out). When `require_hard` is set (the normal path)
/// the map must be exactly one-hot per row; a relaxed map is a contract
/// violation. Soft maps are permitted only for the softmax ablation and for
/// finite-difference checks.
ad::Var cau_forward(ad::Tape& tape, const ad::Var& tokens, const ad::Var& cam,
                    const ad::Var& supertokens, const CauParams& params,
                    bool require_hard = true);

}  // namespace foundry
