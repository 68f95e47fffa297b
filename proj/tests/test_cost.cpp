#include <doctest.h>

#include "foundry/cost.hpp"
#include "foundry/rng.hpp"
#include "foundry/tensor.hpp"

using namespace foundry;

TEST_CASE("closed-form oracles") {
    CHECK(cost::transformer_flops(1, 1, 1) == 28);
    CHECK(cost::transformer_flops(12, 64, 384) == 2793406464ULL);
    CHECK(cost::dso_flops(1, 1, 1) == 12);
    CHECK(cost::dso_flops(16, 64, 384) == 48758784ULL);
    CHECK(cost::cau_flops(16, 64, 384, 6) == 151805952ULL);
    CHECK(cost::foundry_flops(16, 64, 384, 6, 12) == 884760576ULL);
    CHECK(cost::mlp_flops(64, 384) == 16ULL * 64 * 384 * 384);
    CHECK(cost::self_attention_flops(64, 384) == 4ULL * 64 * 64 * 384 + 8ULL * 64 * 384 * 384);
    CHECK(cost::gate_flops(64, 384, 128) == 4ULL * 64 * 384 * 128);
}

TEST_CASE("foundry decomposes into its components") {
    CHECK(cost::foundry_flops(16, 64, 384, 6, 12) ==
          cost::dso_flops(16, 64, 384) + cost::transformer_flops(12, 16, 384) +
              cost::cau_flops(16, 64, 384, 6));
}

TEST_CASE("gated variant with everything fused is the plain pipeline plus the gate") {
    const std::uint64_t s = 8, n = 48, d = 64, nh = 4, l = 3, hidden = 128;
    CHECK(cost::foundry_gate_flops(s, n, n, d, nh, l, hidden) ==
          cost::foundry_flops(s, n, d, nh, l) + cost::gate_flops(n, d, hidden));
}

TEST_CASE("replay route agrees with closed forms on random configs") {
    auto rng = make_stream(1, "cost");
    auto draw = [&](std::uint64_t lo, std::uint64_t hi) {
        return lo + static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
    };
    for (int trial = 0; trial < 60; ++trial) {
        const std::uint64_t l = draw(0, 8), n = draw(1, 256), d = draw(1, 512);
        const std::uint64_t s = draw(1, n), nh = draw(1, 12), hidden = draw(1, 256);
        const std::uint64_t r = draw(0, n);
        CHECK(cost::count_transformer(l, n, d) == cost::transformer_flops(l, n, d));
        CHECK(cost::count_dso(s, n, d) == cost::dso_flops(s, n, d));
        CHECK(cost::count_cau(s, n, d, nh) == cost::cau_flops(s, n, d, nh));
        CHECK(cost::count_gate(n, d, hidden) == cost::gate_flops(n, d, hidden));
        CHECK(cost::count_foundry(s, n, d, nh, l) == cost::foundry_flops(s, n, d, nh, l));
        CHECK(cost::count_foundry_gate(s, n, r, d, nh, l, hidden) ==
              cost::foundry_gate_flops(s, n, r, d, nh, l, hidden));
    }
}

TEST_CASE("compression wins whenever supertokens are scarce") {
    auto rng = make_stream(2, "cost-win");
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint64_t l = 2 + static_cast<std::uint64_t>(uniform01(rng) * 7);
        const std::uint64_t d = 8 + static_cast<std::uint64_t>(uniform01(rng) * 248);
        const std::uint64_t n = 8 + static_cast<std::uint64_t>(uniform01(rng) * 248);
        const std::uint64_t s = 1 + static_cast<std::uint64_t>(uniform01(rng) * (n / 4 - 1 + 1));
        const std::uint64_t nh = 1 + static_cast<std::uint64_t>(uniform01(rng) * 8);
        CHECK(cost::foundry_flops(s, n, d, nh, l) < cost::transformer_flops(l, n, d));
    }
}

TEST_CASE("overflow raises instead of wrapping") {
    CHECK_THROWS_AS(cost::transformer_flops(1ULL << 40, 1ULL << 40, 1ULL << 40), NumericError);
    CHECK_THROWS_AS(cost::mlp_flops(1ULL << 32, 1ULL << 32), NumericError);
    CHECK_THROWS_AS(cost::foundry_gate_flops(2, 1, 2, 4, 1, 1, 1), ArgumentError);
}
