#include <doctest.h>

#include <cmath>

#include "foundry/autodiff.hpp"
#include "foundry/rng.hpp"

using namespace foundry;
using ad::Tape;
using ad::Var;

TEST_CASE("matmul forward oracle") {
    Tape tape;
    Var a = tape.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = tape.constant(Tensor({2, 1}, {0, 1}));
    Var c = tape.matmul(a, b);
    CHECK(c->value.at(0, 0) == 2.0);
    CHECK(c->value.at(1, 0) == 4.0);
    CHECK_FALSE(c->requires_grad);
}

TEST_CASE("softmax forward oracle") {
    Tape tape;
    Var x = tape.constant(Tensor::row({0.0, std::log(3.0)}));
    Var s = tape.softmax_rows(x);
    CHECK(s->value.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s->value.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
    double sum = s->value.at(0, 0) + s->value.at(0, 1);
    CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("softmax rows sum to one on random input") {
    auto rng = make_stream(1, "sm");
    Tape tape;
    Tensor x({8, 13});
    for (auto& v : x.data) v = 10.0 * normal(rng);
    Var s = tape.softmax_rows(tape.constant(x));
    for (std::size_t i = 0; i < 8; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 13; ++j) sum += s->value.at(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    x.data[0] = std::numeric_limits<double>::quiet_NaN();
    Tape t2;
    CHECK_THROWS_AS(t2.softmax_rows(t2.constant(x)), NumericError);
}

TEST_CASE("smooth l1 oracle values") {
    Tape tape;
    Var p = tape.constant(Tensor::scalar(0.5));
    Var t = tape.constant(Tensor::scalar(0.0));
    CHECK(tape.smooth_l1(p, t)->value.scalar_value() == doctest::Approx(0.125).epsilon(1e-15));
    Var p2 = tape.constant(Tensor::scalar(2.0));
    CHECK(tape.smooth_l1(p2, t)->value.scalar_value() == doctest::Approx(1.5).epsilon(1e-15));
    CHECK_THROWS_AS(tape.smooth_l1(p, t, 0.0), ArgumentError);
}

TEST_CASE("matmul associativity within tolerance") {
    auto rng = make_stream(2, "assoc");
    Tape tape;
    Tensor a({4, 5}), b({5, 6}), c({6, 3});
    for (auto* t : {&a, &b, &c})
        for (auto& v : t->data) v = normal(rng);
    Var va = tape.constant(a), vb = tape.constant(b), vc = tape.constant(c);
    Var left = tape.matmul(tape.matmul(va, vb), vc);
    Var right = tape.matmul(va, tape.matmul(vb, vc));
    for (std::size_t i = 0; i < left->value.size(); ++i)
        CHECK(std::abs(left->value.data[i] - right->value.data[i]) < 1e-10);
}

TEST_CASE("backward through a small chain matches hand gradient") {
    // f = sum((x W)^2 elementwise via mul) with W fixed
    Tape tape;
    Var x = tape.leaf(Tensor::row({1.0, 2.0}), true);
    Var w = tape.constant(Tensor({2, 2}, {1.0, 0.5, -1.0, 2.0}));
    Var y = tape.matmul(x, w);       // [-1, 4.5]
    Var f = tape.sum_all(tape.mul(y, y));
    tape.backward(f);
    // df/dx = 2 (x W) W^T
    CHECK(f->value.scalar_value() == doctest::Approx(1.0 + 20.25).epsilon(1e-12));
    CHECK(x->grad.data[0] == doctest::Approx(2 * (-1.0) * 1.0 + 2 * 4.5 * 0.5).epsilon(1e-12));
    CHECK(x->grad.data[1] == doctest::Approx(2 * (-1.0) * (-1.0) + 2 * 4.5 * 2.0).epsilon(1e-12));
}

TEST_CASE("gradient checks for individual ops") {
    auto rng = make_stream(3, "gc");
    auto rand = [&](std::size_t r, std::size_t c) {
        Tensor t({r, c});
        for (auto& v : t.data) v = normal(rng);
        return t;
    };

    SUBCASE("gelu + matmul + layernorm") {
        auto f = [](Tape& t, const std::vector<Var>& in) {
            Var ln = t.layernorm_rows(in[0], in[1], in[2]);
            return t.sum_all(t.gelu(t.matmul(ln, in[3])));
        };
        auto rep = ad::check_gradients(f, {rand(3, 4), rand(1, 4), rand(1, 4), rand(4, 2)});
        CHECK(rep.ok(1e-5));
    }

    SUBCASE("softmax + sigmoid chain") {
        auto f = [](Tape& t, const std::vector<Var>& in) {
            return t.sum_all(t.mul(t.softmax_rows(in[0]), t.sigmoid(in[1])));
        };
        auto rep = ad::check_gradients(f, {rand(3, 5), rand(3, 5)});
        CHECK(rep.ok(1e-5));
    }

    SUBCASE("row and column structure ops") {
        auto f = [](Tape& t, const std::vector<Var>& in) {
            Var s = t.concat_rows({t.slice_rows(in[0], 0, 2), t.slice_rows(in[0], 2, 2)});
            Var sel = t.select_rows(s, {3, 1, 0, 2});
            Var placed = t.place_rows(4, {{t.slice_rows(sel, 0, 2), {1, 3}},
                                          {t.slice_rows(sel, 2, 2), {0, 2}}});
            Var scaled = t.div_rows(placed, t.clamp_min(in[1], 0.5));
            return t.smooth_l1(scaled, in[2]);
        };
        auto rep = ad::check_gradients(f, {rand(4, 3), rand(4, 1), rand(4, 3)});
        CHECK(rep.ok(1e-5));
    }

    SUBCASE("reductions") {
        auto f = [](Tape& t, const std::vector<Var>& in) {
            Var m = t.concat_cols({t.mean_rows(in[0]), t.max_rows(in[0])});
            return t.sum_all(t.mul(m, m));
        };
        auto rep = ad::check_gradients(f, {rand(5, 3)});
        CHECK(rep.ok(1e-5));
    }

    SUBCASE("cross entropy and kl") {
        Tensor probs = Tensor::row({0.2, 0.5, 0.3});
        auto f = [probs](Tape& t, const std::vector<Var>& in) {
            Var ce = t.cross_entropy_mean(in[0], {1, 0});
            Var kl = t.kl_to_teacher_mean(t.slice_rows(in[0], 0, 1), probs);
            return t.add(ce, kl);
        };
        auto rep = ad::check_gradients(f, {rand(2, 3)});
        CHECK(rep.ok(1e-5));
    }
}

TEST_CASE("straight through passes hard values forward and soft grads back") {
    Tape tape;
    Var soft = tape.leaf(Tensor::row({0.3, 0.7}), true);
    Var st = tape.straight_through(soft, Tensor::row({0.0, 1.0}));
    CHECK(st->value.at(0, 0) == 0.0);
    CHECK(st->value.at(0, 1) == 1.0);
    Var loss = tape.sum_all(tape.mul(st, tape.constant(Tensor::row({2.0, 5.0}))));
    tape.backward(loss);
    CHECK(soft->grad.data[0] == 2.0);
    CHECK(soft->grad.data[1] == 5.0);
}

TEST_CASE("place_rows rejects bad coverage") {
    Tape tape;
    Var a = tape.constant(Tensor::zeros(2, 2));
    CHECK_THROWS_AS(tape.place_rows(3, {{a, {0, 1}}}), DimensionError);   // uncovered
    CHECK_THROWS_AS(tape.place_rows(2, {{a, {0, 0}}}), DimensionError);   // duplicate
    CHECK_NOTHROW(tape.place_rows(2, {{a, {1, 0}}}));
}

TEST_CASE("frozen leaves record no ops") {
    Tape tape;
    Var x = tape.constant(Tensor::zeros(4, 4));
    Var y = tape.matmul(tape.gelu(x), x);
    (void)y;
    CHECK(tape.num_ops() == 0);
}

TEST_CASE("gradients accumulate across tapes into shared leaves") {
    Var w = ad::make_leaf(Tensor::scalar(2.0), true);
    for (int i = 0; i < 2; ++i) {
        Tape tape;
        Var loss = tape.mul(w, w);
        tape.backward(loss, 0.5);
    }
    CHECK(w->grad.data[0] == doctest::Approx(4.0).epsilon(1e-15));  // 2 * (0.5 * 2w)
}
