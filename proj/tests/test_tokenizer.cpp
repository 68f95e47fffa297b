#include <doctest.h>

#include <cmath>
#include <limits>

#include "foundry/rng.hpp"
#include "foundry/tokenizer.hpp"

using namespace foundry;

namespace {

PointCloud cloud_from(std::vector<double> flat) {
    const std::size_t n = flat.size() / 3;
    PointCloud c;
    c.points = Tensor({n, 3}, std::move(flat));
    return c;
}

// Reference FPS: same greedy max-min rule, written independently.
std::vector<std::size_t> fps_reference(const PointCloud& cloud, std::size_t c) {
    std::vector<std::size_t> sel{0};
    while (sel.size() < c) {
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < cloud.num_points(); ++i) {
            double mind = std::numeric_limits<double>::infinity();
            for (std::size_t s : sel) {
                double d2 = 0.0;
                for (std::size_t j = 0; j < 3; ++j) {
                    const double d = cloud.points.at(i, j) - cloud.points.at(s, j);
                    d2 += d * d;
                }
                mind = std::min(mind, d2);
            }
            if (mind > best_d) {
                best_d = mind;
                best = i;
            }
        }
        sel.push_back(best);
    }
    return sel;
}

}  // namespace

TEST_CASE("normalization centers and scales to the unit sphere") {
    PointCloud c = cloud_from({10, 0, 0, 12, 0, 0, 10, 2, 0, 12, 2, 0});
    Tensor n = normalize_to_unit_sphere(c.points);
    double cx = 0, cy = 0, cz = 0, maxn = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        cx += n.at(i, 0);
        cy += n.at(i, 1);
        cz += n.at(i, 2);
        maxn = std::max(maxn, std::sqrt(n.at(i, 0) * n.at(i, 0) + n.at(i, 1) * n.at(i, 1) +
                                        n.at(i, 2) * n.at(i, 2)));
    }
    CHECK(std::abs(cx) < 1e-12);
    CHECK(std::abs(cy) < 1e-12);
    CHECK(std::abs(cz) < 1e-12);
    CHECK(maxn == doctest::Approx(1.0).epsilon(1e-12));

    Tensor again = normalize_to_unit_sphere(n);
    for (std::size_t i = 0; i < n.size(); ++i)
        CHECK(std::abs(again.data[i] - n.data[i]) < 1e-12);
}

TEST_CASE("fps picks the far end of a line") {
    PointCloud c = cloud_from({0, 0, 0, 1, 0, 0, 2, 0, 0, 10, 0, 0});
    auto sel = farthest_point_sample(c, 2);
    CHECK(sel == std::vector<std::size_t>{0, 3});
}

TEST_CASE("fps matches brute-force reference on random clouds") {
    auto rng = make_stream(9, "fps");
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t p = 4 + static_cast<std::size_t>(uniform01(rng) * 7);
        Tensor pts({p, 3});
        for (auto& v : pts.data) v = normal(rng);
        PointCloud c;
        c.points = pts;
        const std::size_t k = 1 + static_cast<std::size_t>(uniform01(rng) * p);
        CHECK(farthest_point_sample(c, k) == fps_reference(c, k));
    }
}

TEST_CASE("fps is a prefix chain") {
    auto rng = make_stream(10, "fps-prefix");
    Tensor pts({12, 3});
    for (auto& v : pts.data) v = normal(rng);
    PointCloud c;
    c.points = pts;
    auto full = farthest_point_sample(c, 12);
    for (std::size_t k = 1; k < 12; ++k) {
        auto sub = farthest_point_sample(c, k);
        CHECK(std::equal(sub.begin(), sub.end(), full.begin()));
    }
}

TEST_CASE("knn orders by distance with lower-index tie break") {
    PointCloud c = cloud_from({0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 2, 0});
    auto groups = knn_group(c, {0}, 3);
    REQUIRE(groups.size() == 1);
    // distances from point 0: self 0, points 1 and 2 tie at 1, point 3 at 2
    CHECK(groups[0] == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("tokenizer produces finite c x d tokens and positions") {
    auto rng = make_stream(4, "tok-data");
    Tensor pts({40, 3});
    for (auto& v : pts.data) v = normal(rng);
    PointCloud c;
    c.points = normalize_to_unit_sphere(pts);

    TokenizerConfig cfg;
    cfg.c = 8;
    cfg.k = 5;
    cfg.d = 16;
    TokenizerParams params = TokenizerParams::init(cfg, 123);
    ad::Tape tape;
    TokenizedInput ti = tokenize(tape, c, params);
    CHECK(ti.centers.size() == 8);
    CHECK(ti.groups.size() == 8);
    for (const auto& g : ti.groups) CHECK(g.size() == 5);
    CHECK(ti.tokens->value.rows() == 8);
    CHECK(ti.tokens->value.cols() == 16);
    CHECK(ti.pos_embed->value.rows() == 8);
    CHECK(ti.pos_embed->value.cols() == 16);
    CHECK(ti.tokens->value.all_finite());
    CHECK(ti.pos_embed->value.all_finite());
}

TEST_CASE("tokenizer init is seed-deterministic") {
    TokenizerConfig cfg;
    auto a = TokenizerParams::init(cfg, 77);
    auto b = TokenizerParams::init(cfg, 77);
    auto c = TokenizerParams::init(cfg, 78);
    CHECK(a.w1->value.data == b.w1->value.data);
    CHECK(a.pw2->value.data == b.pw2->value.data);
    CHECK(a.w1->value.data != c.w1->value.data);
}

TEST_CASE("tokenizer rejects impossible requests") {
    PointCloud c = cloud_from({0, 0, 0, 1, 0, 0});
    CHECK_THROWS_AS(farthest_point_sample(c, 3), ArgumentError);
    CHECK_THROWS_AS(knn_group(c, {0}, 3), ArgumentError);
}

TEST_CASE("token embedding gradient reaches the shared mlp") {
    PointCloud c = cloud_from({0, 0, 0, 0.5, 0, 0, 0, 0.5, 0, 0, 0, 0.5, 0.3, 0.3, 0.3, 0.7, 0.1, 0});
    TokenizerConfig cfg;
    cfg.c = 2;
    cfg.k = 3;
    cfg.d = 4;
    TokenizerParams params = TokenizerParams::init(cfg, 5);
    ad::Tape tape;
    TokenizedInput ti = tokenize(tape, c, params);
    ad::Var loss = tape.sum_all(tape.add(ti.tokens, ti.pos_embed));
    tape.backward(loss);
    double w1_norm = 0.0, pw1_norm = 0.0;
    for (double g : params.w1->grad.data) w1_norm += std::abs(g);
    for (double g : params.pw1->grad.data) pw1_norm += std::abs(g);
    CHECK(w1_norm > 0.0);
    CHECK(pw1_norm > 0.0);
}
