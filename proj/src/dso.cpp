#include "foundry/dso.hpp"

#include <cmath>

#include "foundry/rng.hpp"

namespace foundry {

DsoParams DsoParams::init(const DsoConfig& cfg, std::uint64_t seed) {
    auto rng = make_stream(seed, "dso-init");
    // 1/sqrt(d) keeps the initial affinity scores at unit scale so the
    // Gumbel perturbation explores rather than drowns them.
    const double sigma = 1.0 / std::sqrt(static_cast<double>(cfg.d));
    DsoParams dp;
    dp.config = cfg;
    dp.supertokens = dp.params.add("dso.supertokens", trunc_normal_tensor(rng, cfg.s, cfg.d, sigma));
    dp.w_q = dp.params.add("dso.w_q", trunc_normal_tensor(rng, cfg.d, cfg.d, sigma));
    dp.w_k = dp.params.add("dso.w_k", trunc_normal_tensor(rng, cfg.d, cfg.d, sigma));
    dp.w_v = dp.params.add("dso.w_v", trunc_normal_tensor(rng, cfg.d, cfg.d, sigma));
    if (cfg.qkv_bias) {
        dp.b_q = dp.params.add("dso.b_q", Tensor::zeros(1, cfg.d));
        dp.b_k = dp.params.add("dso.b_k", Tensor::zeros(1, cfg.d));
        dp.b_v = dp.params.add("dso.b_v", Tensor::zeros(1, cfg.d));
    }
    return dp;
}

namespace {

ad::Var project(ad::Tape& tape, const ad::Var& x, const ad::Var& w, const ad::Var& b) {
    ad::Var y = tape.matmul(x, w);
    return b ? tape.add_rowvec(y, b) : y;
}

Tensor argmax_onehot(const Tensor& scores, std::vector<std::size_t>& group_of) {
    const std::size_t c = scores.rows(), s = scores.cols();
    Tensor hard = Tensor::zeros(c, s);
    group_of.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < s; ++j)
            if (scores.at(i, j) > scores.at(i, best)) best = j;
        hard.at(i, best) = 1.0;
        group_of[i] = best;
    }
    return hard;
}

}  // namespace

Assignment compute_cam(ad::Tape& tape, const ad::Var& tokens, const DsoParams& params,
                       CamMode mode, std::mt19937_64* noise_rng) {
    const auto& cfg = params.config;
    if (tokens->value.cols() != cfg.d)
        throw DimensionError("compute_cam: token dim != dso dim");
    if (mode == CamMode::Train && noise_rng == nullptr)
        throw ArgumentError("compute_cam: Train mode needs a noise rng");
    if (cfg.tau <= 0.0) throw ArgumentError("compute_cam: tau must be positive");

    ad::Var q = project(tape, params.supertokens, params.w_q, params.b_q);  // s x d
    ad::Var k = project(tape, tokens, params.w_k, params.b_k);              // c x d
    ad::Var scores = tape.scale(tape.matmul(k, tape.transpose(q)),
                                1.0 / std::sqrt(static_cast<double>(cfg.d)));  // c x s

    if (mode == CamMode::Train) {
        Tensor noise(scores->value.shape);
        for (auto& v : noise.data) v = gumbel(*noise_rng);
        scores = tape.add(scores, tape.constant(std::move(noise)));
    }

    Assignment a;
    a.hard = argmax_onehot(scores->value, a.group_of);
    if (cfg.soft_assign) {
        a.cam = tape.softmax_rows(tape.scale(scores, 1.0 / cfg.tau));
    } else if (mode == CamMode::Train) {
        ad::Var soft = tape.softmax_rows(tape.scale(scores, 1.0 / cfg.tau));
        a.cam = tape.straight_through(soft, a.hard);
    } else {
        a.cam = tape.constant(a.hard);
    }
    return a;
}

ad::Var group_average(ad::Tape& tape, const ad::Var& cam, const ad::Var& values) {
    if (cam->value.rows() != values->value.rows())
        throw DimensionError("group_average: cam and values disagree on token count");
    ad::Var sums = tape.matmul(tape.transpose(cam), values);        // s x d
    ad::Var counts = tape.clamp_min(tape.colsum_to_column(cam), 1.0);  // s x 1
    return tape.div_rows(sums, counts);
}

DsoOutput dso_forward(ad::Tape& tape, const ad::Var& tokens, const ad::Var& pos_embed,
                      const DsoParams& params, CamMode mode, std::mt19937_64* noise_rng) {
    if (!tokens->value.same_shape(pos_embed->value))
        throw DimensionError("dso_forward: tokens and positions must match");
    DsoOutput out;
    out.assign = compute_cam(tape, tokens, params, mode, noise_rng);
    ad::Var v = project(tape, tokens, params.w_v, params.b_v);
    ad::Var content = group_average(tape, out.assign.cam, v);
    ad::Var pos = group_average(tape, out.assign.cam, pos_embed);
    out.supertokens = tape.add(content, pos);
    return out;
}

}  // namespace foundry
