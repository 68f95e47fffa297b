#include "foundry/verify.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "foundry/cau.hpp"
#include "foundry/cost.hpp"
#include "foundry/dso.hpp"
#include "foundry/encoder.hpp"
#include "foundry/gate.hpp"
#include "foundry/rng.hpp"

namespace foundry {

namespace {

int check(bool ok, const char* name) {
    std::printf("%s %s\n", ok ? "ok  " : "FAIL", name);
    return ok ? 0 : 1;
}

bool tensor_roundtrip() {
    Tensor t({2, 3}, {1.5, -2.0, 3.25, 0.0, 1e-12, -7.0});
    std::stringstream ss;
    write_ften(ss, t);
    Tensor back = read_ften(ss);
    return back.same_shape(t) && back.data == t.data;
}

bool softmax_oracle() {
    ad::Tape tape;
    ad::Var s = tape.softmax_rows(tape.constant(Tensor::row({0.0, std::log(3.0)})));
    return std::abs(s->value.at(0, 0) - 0.25) < 1e-12 && std::abs(s->value.at(0, 1) - 0.75) < 1e-12;
}

bool smooth_l1_oracle() {
    ad::Tape tape;
    ad::Var zero = tape.constant(Tensor::scalar(0.0));
    const double a = tape.smooth_l1(tape.constant(Tensor::scalar(0.5)), zero)->value.scalar_value();
    const double b = tape.smooth_l1(tape.constant(Tensor::scalar(2.0)), zero)->value.scalar_value();
    return std::abs(a - 0.125) < 1e-15 && std::abs(b - 1.5) < 1e-15;
}

bool encoder_identity() {
    EncoderConfig cfg;
    cfg.layers = 0;
    cfg.d = 8;
    cfg.heads = 2;
    EncoderParams params = EncoderParams::init(cfg, 1);
    auto rng = make_stream(2, "verify-enc");
    Tensor x({3, 8});
    for (auto& v : x.data) v = normal(rng);
    ad::Tape tape;
    return encode(tape, tape.constant(x), params)->value.data == x.data;
}

bool cam_one_hot() {
    auto rng = make_stream(3, "verify-cam");
    auto noise = make_stream(4, "verify-cam-noise");
    for (int trial = 0; trial < 100; ++trial) {
        DsoConfig cfg;
        cfg.s = 1 + static_cast<std::size_t>(uniform01(rng) * 8);
        cfg.d = 1 + static_cast<std::size_t>(uniform01(rng) * 16);
        const std::size_t c = 1 + static_cast<std::size_t>(uniform01(rng) * 24);
        DsoParams params = DsoParams::init(cfg, 50 + static_cast<std::uint64_t>(trial));
        Tensor tokens({c, cfg.d});
        for (auto& v : tokens.data) v = normal(rng);
        ad::Tape tape;
        const CamMode mode = trial % 2 ? CamMode::Train : CamMode::Eval;
        Assignment a = compute_cam(tape, tape.constant(tokens), params, mode, &noise);
        for (std::size_t i = 0; i < c; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < cfg.s; ++j) {
                const double v = a.cam->value.at(i, j);
                if (v != 0.0 && v != 1.0) return false;
                sum += v;
            }
            if (sum != 1.0) return false;
        }
    }
    return true;
}

bool group_average_oracle() {
    auto rng = make_stream(5, "verify-ga");
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t c = 2 + static_cast<std::size_t>(uniform01(rng) * 14);
        const std::size_t s = 1 + static_cast<std::size_t>(uniform01(rng) * 6);
        const std::size_t d = 1 + static_cast<std::size_t>(uniform01(rng) * 8);
        Tensor cam = Tensor::zeros(c, s);
        std::vector<std::size_t> grp(c);
        for (std::size_t i = 0; i < c; ++i) {
            grp[i] = static_cast<std::size_t>(uniform01(rng) * s);
            cam.at(i, grp[i]) = 1.0;
        }
        Tensor values({c, d});
        for (auto& v : values.data) v = normal(rng);
        ad::Tape tape;
        ad::Var avg = group_average(tape, tape.constant(cam), tape.constant(values));
        for (std::size_t j = 0; j < s; ++j) {
            for (std::size_t col = 0; col < d; ++col) {
                double acc = 0.0;
                std::size_t count = 0;
                for (std::size_t i = 0; i < c; ++i) {
                    if (grp[i] != j) continue;
                    acc += values.at(i, col);
                    ++count;
                }
                const double expect = count ? acc / static_cast<double>(count) : 0.0;
                if (std::abs(avg->value.at(j, col) - expect) > 1e-12) return false;
            }
        }
    }
    return true;
}

bool budget_property() {
    auto rng = make_stream(6, "verify-budget");
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t c = 2 + static_cast<std::size_t>(uniform01(rng) * 126);
        const std::size_t s = 1 + static_cast<std::size_t>(uniform01(rng) * std::min<std::size_t>(31, c - 1));
        const std::size_t budget = s + static_cast<std::size_t>(uniform01(rng) * (c - s + 1));
        Tensor probs({c, 1});
        for (auto& v : probs.data) v = uniform01(rng);
        BudgetDecision dec = budget_select(probs, budget, s);
        if (dec.fused.size() + dec.kept.size() != c) return false;
        if (dec.encoder_input_count > budget) return false;
    }
    return true;
}

bool cost_dual_route() {
    auto rng = make_stream(7, "verify-cost");
    for (int trial = 0; trial < 20; ++trial) {
        const auto l = static_cast<std::uint64_t>(uniform01(rng) * 8);
        const auto n = 1 + static_cast<std::uint64_t>(uniform01(rng) * 128);
        const auto d = 1 + static_cast<std::uint64_t>(uniform01(rng) * 256);
        const auto s = 1 + static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n - 1 + 1));
        const auto nh = 1 + static_cast<std::uint64_t>(uniform01(rng) * 8);
        const auto hidden = 1 + static_cast<std::uint64_t>(uniform01(rng) * 128);
        const auto r = static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n + 1));
        if (cost::count_transformer(l, n, d) != cost::transformer_flops(l, n, d)) return false;
        if (cost::count_foundry(s, n, d, nh, l) != cost::foundry_flops(s, n, d, nh, l)) return false;
        if (cost::count_foundry_gate(s, n, r, d, nh, l, hidden) !=
            cost::foundry_gate_flops(s, n, r, d, nh, l, hidden))
            return false;
    }
    return cost::transformer_flops(1, 1, 1) == 28 && cost::dso_flops(1, 1, 1) == 12;
}

bool composite_gradcheck() {
    DsoConfig dc;
    dc.s = 2;
    dc.d = 4;
    dc.soft_assign = true;
    DsoParams dso = DsoParams::init(dc, 8);
    dso.params.set_trainable(false);
    CauConfig cc;
    cc.d = 4;
    CauParams cau = CauParams::init(cc, 9);
    cau.params.set_trainable(false);
    auto rng = make_stream(10, "verify-gc");
    Tensor tokens({5, 4}), pos({5, 4}), target({5, 4});
    for (auto* t : {&tokens, &pos, &target})
        for (auto& v : t->data) v = normal(rng);

    auto f = [&](ad::Tape& t, const std::vector<ad::Var>& in) {
        DsoOutput out = dso_forward(t, in[0], in[1], dso, CamMode::Eval);
        ad::Var y = cau_forward(t, in[0], out.assign.cam, out.supertokens, cau, false);
        return t.smooth_l1(y, t.constant(target));
    };
    auto rep = ad::check_gradients(f, {tokens, pos});
    return rep.ok(1e-4);
}

}  // namespace

int run_verification() {
    int failures = 0;
    failures += check(tensor_roundtrip(), "ften round trip");
    failures += check(softmax_oracle(), "softmax oracle");
    failures += check(smooth_l1_oracle(), "smooth l1 oracle");
    failures += check(encoder_identity(), "zero-layer encoder identity");
    failures += check(cam_one_hot(), "cam rows one-hot");
    failures += check(group_average_oracle(), "grouped average oracle");
    failures += check(budget_property(), "budget selection within budget");
    failures += check(cost_dual_route(), "flop counter dual route");
    failures += check(composite_gradcheck(), "compression gradcheck");
    return failures;
}

}  // namespace foundry
