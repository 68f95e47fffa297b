#pragma once

#include <cstdint>
#include <vector>

#include "foundry/autodiff.hpp"
#include "foundry/params.hpp"

namespace foundry {

struct GateConfig {
    std::size_t d = 32;
    std::size_t hidden = 128;
};

/// Two-layer scoring MLP (d -> hidden -> 1, GELU, sigmoid output) producing a
/// per-token fuse probability.
struct GateParams {
    GateConfig config;
    ad::Var w1, b1, w2, b2;
    ParamSet params;

    static GateParams init(const GateConfig& cfg, std::uint64_t seed);
};

/// Fuse probabilities pi in (0, 1), one row per token (c x 1).
ad::Var gate_probs(ad::Tape& tape, const ad::Var& tokens, const GateParams& params);

/// Sparsity pressure: -lambda * sum(pi). Negative sign rewards fusing.
ad::Var gate_regularizer(ad::Tape& tape, const ad::Var& probs, double lambda);

/// Outcome of the budget selection rule for one cloud.
struct BudgetDecision {
    std::vector<std::size_t> fused;  // token indices routed through supertokens
    std::vector<std::size_t> kept;   // token indices passed through, ascending
    double threshold = 1.0;          // pi strictly above this is fused
    std::size_t encoder_input_count = 0;
    bool overshoot = false;  // ties pushed the encoder input above budget
};

/// Pick which tokens to fuse so the encoder sees at most `budget` inputs
/// (s supertokens plus kept tokens). With c <= budget nothing is fused and no
/// supertokens are appended. Otherwise the threshold is the (need + 2)-th
/// largest probability where need = c - budget + s, so one more token than
/// strictly necessary is fused and the encoder sees budget - 1 inputs.
/// need = c means fuse everything. The threshold index is clamped to the last
/// element when need = c - 1. Tied probabilities at the threshold stay kept,
/// which can leave the encoder over budget; that is reported, not repaired.
BudgetDecision budget_select(const Tensor& probs, std::size_t budget, std::size_t s);

}  // namespace foundry
