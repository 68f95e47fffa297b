#include <doctest.h>

#include <cmath>

#include "foundry/optim.hpp"

using namespace foundry;

TEST_CASE("adamw single step matches the update rule") {
    ParamSet ps;
    ad::Var w = ps.add("w", Tensor::scalar(1.0));
    w->grad.data[0] = 0.5;
    AdamWConfig cfg;
    AdamW opt(cfg, ps);
    opt.step(0.1);

    const double m = 0.1 * 0.5;
    const double v = 0.001 * 0.25;
    const double mhat = m / (1.0 - 0.9);
    const double vhat = v / (1.0 - 0.999);
    const double expect = 1.0 - 0.1 * (mhat / (std::sqrt(vhat) + 1e-8) + 0.05 * 1.0);
    CHECK(w->value.data[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(opt.t() == 1);
}

TEST_CASE("decay exemption skips the weight decay term") {
    ParamSet ps;
    ad::Var a = ps.add("dense.w", Tensor::scalar(1.0));
    ad::Var b = ps.add("gate.w", Tensor::scalar(1.0));
    a->grad.data[0] = 0.0;
    b->grad.data[0] = 0.0;
    AdamWConfig cfg;
    AdamW opt(cfg, ps);
    opt.exempt_from_decay("gate.");
    opt.step(0.1);
    CHECK(a->value.data[0] == doctest::Approx(1.0 - 0.1 * 0.05).epsilon(1e-12));
    CHECK(b->value.data[0] == 1.0);
}

TEST_CASE("frozen parameters are not updated but state survives") {
    ParamSet ps;
    ad::Var w = ps.add("w", Tensor::scalar(2.0));
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(cfg, ps);

    w->requires_grad = false;
    w->grad.data[0] = 1.0;
    opt.step(0.1);
    CHECK(w->value.data[0] == 2.0);

    w->requires_grad = true;
    w->grad.data[0] = 1.0;
    opt.step(0.1);
    CHECK(w->value.data[0] < 2.0);
}

TEST_CASE("lr schedule ramps then follows a cosine") {
    LrSchedule sched{1e-6, 1e-3, 1e-6, 10, 40};
    CHECK(sched.at(0) == doctest::Approx(1e-6));
    CHECK(sched.at(5) == doctest::Approx(1e-6 + 0.5 * (1e-3 - 1e-6)).epsilon(1e-12));
    CHECK(sched.at(10) == doctest::Approx(1e-3).epsilon(1e-12));
    // halfway through the cosine span
    CHECK(sched.at(25) == doctest::Approx(1e-6 + 0.5 * (1e-3 - 1e-6)).epsilon(1e-9));
    CHECK(sched.at(40) == doctest::Approx(1e-6).epsilon(1e-9));
    CHECK(sched.at(100) == doctest::Approx(1e-6).epsilon(1e-9));
    for (std::size_t e = 10; e < 40; ++e) CHECK(sched.at(e) >= sched.at(e + 1));
}
