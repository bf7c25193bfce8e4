#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "enzkit/grad_check.hpp"
#include "enzkit/objective.hpp"
#include "enzkit/rng.hpp"

using namespace enzkit;

namespace {

double nll_value(double z, double mu, double s) {
    Tape tape;
    return gaussian_nll(tape, z, scalar(mu), scalar(s))->data[0];
}

}  // namespace

TEST_CASE("zero head maps everything to (0, 0)") {
    ParamRegistry reg;
    auto head = build_head(reg, 4, 1);
    for (const auto& e : reg.entries()) std::fill(e.tensor->data.begin(), e.tensor->data.end(), 0.0);
    Tape tape;
    auto out = head_forward(tape, make_tensor(1, 4, {1, -2, 3, 4}), head);
    CHECK(out.mu->data[0] == 0.0);
    CHECK(out.log_var->data[0] == 0.0);
}

TEST_CASE("head is deterministic and hand-checkable on a micro configuration") {
    ParamRegistry reg;
    auto head = build_head(reg, 2, 2);
    Tape t1, t2;
    auto in = make_tensor(1, 2, {0.3, -0.7});
    auto a = head_forward(t1, in, head);
    auto b = head_forward(t2, in, head);
    CHECK(a.mu->data[0] == b.mu->data[0]);
    CHECK(a.log_var->data[0] == b.log_var->data[0]);

    // hand arithmetic: w1 = [[1],[0]], b1 = 0.5, w2 = [[2, -1]], b2 = (0.1, 0.2)
    head.w1->data = {1, 0};
    head.b1->data = {0.5};
    head.w2->data = {2, -1};
    head.b2->data = {0.1, 0.2};
    Tape t3;
    auto out = head_forward(t3, make_tensor(1, 2, {1.5, 9.0}), head);
    const double hidden = 2.0 * (0.5 * (1.0 + std::erf(2.0 / std::sqrt(2.0))));  // gelu(2)
    CHECK(out.mu->data[0] == doctest::Approx(2.0 * hidden + 0.1).epsilon(1e-12));
    CHECK(out.log_var->data[0] == doctest::Approx(-hidden + 0.2).epsilon(1e-12));

    CHECK_THROWS_AS(head_forward(t3, make_tensor(1, 3, {1, 2, 3}), head), ShapeError);
}

TEST_CASE("nll tabulated values") {
    CHECK(nll_value(2.0, 2.0, 0.0) == 0.0);
    CHECK(nll_value(3.0, 2.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(nll_value(2.0, 2.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("nll residual symmetry and optimum in s") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const double z = rng.normal(0, 2), mu = rng.normal(0, 2), s = rng.uniform(-5, 5);
        CHECK(nll_value(z, mu, s) == doctest::Approx(nll_value(mu, z, s)).epsilon(1e-14));
    }
    // grid search: optimum at s* = ln((z - mu)^2) inside the clamp range
    const double z = 1.0, mu = 0.25;
    const double target = std::log((z - mu) * (z - mu));
    double best_s = -10.0, best = 1e300;
    for (double s = -10.0; s <= 10.0; s += 1e-3) {
        const double v = nll_value(z, mu, s);
        if (v < best) {
            best = v;
            best_s = s;
        }
    }
    CHECK(std::fabs(best_s - target) <= 1e-3 + 1e-12);
}

TEST_CASE("gradient of nll in mu vanishes at the target") {
    for (double s : {-3.0, 0.0, 4.0}) {
        Tape tape;
        auto mu = scalar(1.7, true);
        auto loss = gaussian_nll(tape, 1.7, mu, scalar(s));
        tape.backward(loss);
        CHECK(mu->grad[0] == 0.0);
    }
}

TEST_CASE("log-variance clamp keeps the likelihood finite") {
    ParamRegistry reg;
    auto head = build_head(reg, 2, 3);
    head.w1->data = {1, 0};
    head.b1->data = {0};
    head.w2->data = {0, 1000.0};
    head.b2->data = {0, 0};
    Tape tape;
    auto out = head_forward(tape, make_tensor(1, 2, {50.0, 0.0}), head);
    CHECK(out.log_var->data[0] == kLogVarClamp);
    auto loss = gaussian_nll(tape, 0.0, out.mu, out.log_var);
    CHECK(std::isfinite(loss->data[0]));
}

TEST_CASE("total loss composes with the configured weights") {
    Tape tape;
    LossWeights w;  // defaults 0.01 / 0.1
    auto v1 = total_loss(tape, scalar(1.0), scalar(0.0), scalar(0.0), w);
    CHECK(v1->data[0] == doctest::Approx(1.0).epsilon(1e-15));

    auto v2 = total_loss(tape, scalar(1.0), scalar(2.0), scalar(3.0), w);
    CHECK(v2->data[0] == doctest::Approx(1.32).epsilon(1e-14));

    LossWeights off{0.0, 0.0};
    auto v3 = total_loss(tape, scalar(1.0), scalar(50.0), scalar(-20.0), off);
    CHECK(v3->data[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("total loss is affine in each component") {
    Rng rng(2);
    LossWeights w{0.37, 0.81};
    const double t0 = rng.normal(), b0 = rng.normal(), a0 = rng.normal();
    auto eval = [&](double t, double b, double a) {
        Tape tape;
        return total_loss(tape, scalar(t), scalar(b), scalar(a), w)->data[0];
    };
    const double h = 1e-3;
    CHECK((eval(t0 + h, b0, a0) - eval(t0 - h, b0, a0)) / (2 * h) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK((eval(t0, b0 + h, a0) - eval(t0, b0 - h, a0)) / (2 * h) ==
          doctest::Approx(w.balance).epsilon(1e-9));
    CHECK((eval(t0, b0, a0 + h) - eval(t0, b0, a0 - h)) / (2 * h) ==
          doctest::Approx(w.align).epsilon(1e-9));
}

TEST_CASE("predict: decade semantics and spread reporting") {
    CHECK(predict(0.0, 0.0).y_hat == 1.0);
    CHECK(predict(2.0, 0.0).y_hat == 100.0);
    CHECK(predict(0.0, 0.0).log10_sigma == 1.0);

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const double y = std::pow(10.0, rng.uniform(-6, 6));
        const double back = predict(std::log10(y), 0.0).y_hat;
        CHECK(std::fabs(back - y) <= 1e-12 * y);
    }
}

TEST_CASE("head gradients pass finite differences") {
    ParamRegistry reg;
    auto head = build_head(reg, 4, 5);
    Rng rng(4);
    std::vector<double> v(4);
    for (auto& x : v) x = rng.normal();
    auto state = make_tensor(1, 4, v, true);
    auto loss_fn = [&](Tape& t) {
        auto out = head_forward(t, state, head);
        return gaussian_nll(t, 0.8, out.mu, out.log_var);
    };
    std::vector<TensorPtr> params = {state};
    for (const auto& e : reg.entries()) params.push_back(e.tensor);
    for (const auto& rep : grad_check(loss_fn, params)) {
        INFO(rep.param);
        CHECK(rep.max_rel_error < 1e-4);
    }
}
