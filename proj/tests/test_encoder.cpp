#include <doctest.h>

#include <cmath>

#include "foundry/encoder.hpp"
#include "foundry/rng.hpp"

using namespace foundry;

TEST_CASE("zero layers is the identity") {
    EncoderConfig cfg;
    cfg.layers = 0;
    cfg.d = 8;
    cfg.heads = 2;
    EncoderParams params = EncoderParams::init(cfg, 1);
    auto rng = make_stream(2, "enc-id");
    Tensor x({3, 8});
    for (auto& v : x.data) v = normal(rng);
    ad::Tape tape;
    ad::Var y = encode(tape, tape.constant(x), params);
    CHECK(y->value.data == x.data);
}

TEST_CASE("head count must divide the width") {
    EncoderConfig cfg;
    cfg.d = 10;
    cfg.heads = 4;
    CHECK_THROWS_AS(cfg.head_dim(), ArgumentError);
}

TEST_CASE("init statistics match the truncated normal") {
    EncoderConfig cfg;
    cfg.layers = 4;
    cfg.d = 32;
    cfg.heads = 4;
    EncoderParams params = EncoderParams::init(cfg, 9);
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (const auto& lp : params.layers) {
        for (double v : lp.w_qkv->value.data) {
            CHECK(std::abs(v) <= 0.04);
            sum += v;
            sumsq += v * v;
            ++n;
        }
        CHECK(lp.b_qkv->value.data == Tensor::zeros(1, 96).data);
        CHECK(lp.ln1_g->value.data == Tensor::full(1, 32, 1.0).data);
    }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sumsq / static_cast<double>(n) - mean * mean);
    CHECK(sd == doctest::Approx(0.879626 * 0.02).epsilon(0.05));

    // residual projections carry the 1/sqrt(2L) factor, so their bound shrinks
    const double bound = 0.04 / std::sqrt(2.0 * 4.0);
    for (const auto& lp : params.layers)
        for (double v : lp.w_o->value.data) CHECK(std::abs(v) <= bound + 1e-15);
}

TEST_CASE("encoder forward is deterministic and finite") {
    EncoderConfig cfg;
    cfg.layers = 2;
    cfg.d = 16;
    cfg.heads = 4;
    EncoderParams params = EncoderParams::init(cfg, 3);
    auto rng = make_stream(4, "enc-x");
    Tensor x({6, 16});
    for (auto& v : x.data) v = normal(rng);
    ad::Tape t1, t2;
    ad::Var y1 = encode(t1, t1.constant(x), params);
    ad::Var y2 = encode(t2, t2.constant(x), params);
    CHECK(y1->value.data == y2->value.data);
    CHECK(y1->value.all_finite());
    CHECK(y1->value.rows() == 6);
    CHECK(y1->value.cols() == 16);
}

TEST_CASE("clone copies values into independent leaves") {
    EncoderConfig cfg;
    cfg.layers = 3;
    cfg.d = 8;
    cfg.heads = 2;
    EncoderParams params = EncoderParams::init(cfg, 5);
    EncoderParams copy = params.clone("s.", 2);
    CHECK(copy.config.layers == 2);
    CHECK(copy.layers[0].w_qkv->value.data == params.layers[0].w_qkv->value.data);
    copy.layers[0].w_qkv->value.data[0] += 1.0;
    CHECK(copy.layers[0].w_qkv->value.data != params.layers[0].w_qkv->value.data);
    CHECK(copy.params.items[2].first == "s.layer0.attn.w_qkv");
}

TEST_CASE("gradient check through a one layer encoder") {
    EncoderConfig cfg;
    cfg.layers = 1;
    cfg.d = 4;
    cfg.heads = 2;
    EncoderParams params = EncoderParams::init(cfg, 7);
    params.params.set_trainable(false);
    auto rng = make_stream(8, "enc-gc");
    Tensor x({3, 4});
    for (auto& v : x.data) v = normal(rng);

    auto f = [&params](ad::Tape& t, const std::vector<ad::Var>& in) {
        return t.sum_all(t.mul(encode(t, in[0], params), in[0]));
    };
    auto rep = ad::check_gradients(f, {x});
    CHECK(rep.ok(1e-5));
}
