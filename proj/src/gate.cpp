#include "foundry/gate.hpp"

#include <algorithm>
#include <functional>

#include "foundry/rng.hpp"

namespace foundry {

GateParams GateParams::init(const GateConfig& cfg, std::uint64_t seed) {
    auto rng = make_stream(seed, "gate-init");
    const double sigma = 0.02;
    GateParams gp;
    gp.config = cfg;
    gp.w1 = gp.params.add("gate.w1", trunc_normal_tensor(rng, cfg.d, cfg.hidden, sigma));
    gp.b1 = gp.params.add("gate.b1", Tensor::zeros(1, cfg.hidden));
    gp.w2 = gp.params.add("gate.w2", trunc_normal_tensor(rng, cfg.hidden, 1, sigma));
    gp.b2 = gp.params.add("gate.b2", Tensor::zeros(1, 1));
    return gp;
}

ad::Var gate_probs(ad::Tape& tape, const ad::Var& tokens, const GateParams& params) {
    if (tokens->value.cols() != params.config.d)
        throw DimensionError("gate_probs: token dim != gate dim");
    ad::Var h = tape.gelu(tape.add_rowvec(tape.matmul(tokens, params.w1), params.b1));
    return tape.sigmoid(tape.add_rowvec(tape.matmul(h, params.w2), params.b2));
}

ad::Var gate_regularizer(ad::Tape& tape, const ad::Var& probs, double lambda) {
    if (lambda < 0.0) throw ArgumentError("gate_regularizer: lambda must be nonnegative");
    return tape.scale(tape.sum_all(probs), -lambda);
}

BudgetDecision budget_select(const Tensor& probs, std::size_t budget, std::size_t s) {
    if (probs.cols() != 1) throw DimensionError("budget_select: probs must be c x 1");
    const std::size_t c = probs.rows();
    if (budget == 0) throw ArgumentError("budget_select: budget must be positive");

    BudgetDecision dec;
    if (c <= budget) {
        dec.threshold = 1.0;
        dec.kept.resize(c);
        for (std::size_t i = 0; i < c; ++i) dec.kept[i] = i;
        dec.encoder_input_count = c;
        return dec;
    }

    const std::size_t need = c - budget + s;
    if (need >= c) {
        dec.threshold = -1.0;
        dec.fused.resize(c);
        for (std::size_t i = 0; i < c; ++i) dec.fused[i] = i;
        dec.encoder_input_count = s;
        return dec;
    }

    std::vector<double> sorted(probs.data);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    dec.threshold = sorted[std::min(need + 1, c - 1)];
    for (std::size_t i = 0; i < c; ++i) {
        if (probs.at(i, 0) > dec.threshold)
            dec.fused.push_back(i);
        else
            dec.kept.push_back(i);
    }
    dec.encoder_input_count = s + dec.kept.size();
    dec.overshoot = dec.encoder_input_count > budget;
    return dec;
}

}  // namespace foundry
