#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "enzkit/grad_check.hpp"
#include "enzkit/rng.hpp"
#include "enzkit/tape.hpp"

using namespace enzkit;

namespace {

TensorPtr random_tensor(Rng& rng, int rows, int cols, bool requires_grad,
                        const std::string& name = "") {
    std::vector<double> v(static_cast<size_t>(rows) * cols);
    for (auto& x : v) x = rng.normal(0.0, 1.0);
    return make_tensor(rows, cols, std::move(v), requires_grad, name);
}

// Random linear readout so every output element sees a distinct adjoint.
TensorPtr readout(Tape& tape, const TensorPtr& y, Rng& rng) {
    std::vector<double> w(y->data.size());
    for (auto& x : w) x = rng.normal(0.0, 1.0);
    return tape.sum_all(tape.mul(y, make_tensor(y->rows, y->cols, std::move(w))));
}

double max_report_error(const std::vector<GradCheckReport>& reports) {
    double worst = 0.0;
    for (const auto& r : reports) worst = std::max(worst, r.max_rel_error);
    return worst;
}

}  // namespace

TEST_CASE("matmul matches hand examples") {
    Tape tape;
    auto eye = make_tensor(2, 2, {1, 0, 0, 1});
    auto m = make_tensor(2, 2, {1, 2, 3, 4});
    auto r = tape.matmul(eye, m);
    CHECK(r->data == std::vector<double>{1, 2, 3, 4});

    auto basis = make_tensor(1, 2, {1, 0});
    auto col = make_tensor(2, 1, {2, 5});
    CHECK(tape.matmul(basis, col)->data[0] == 2.0);

    auto ones = make_tensor(2, 2, {1, 1, 1, 1});
    auto twos = tape.matmul(ones, ones);
    for (double v : twos->data) CHECK(v == 2.0);
}

TEST_CASE("matmul rejects mismatched inner extents with both shapes named") {
    Tape tape;
    auto a = make_tensor(2, 3, {1, 2, 3, 4, 5, 6});
    auto b = make_tensor(2, 2, {1, 2, 3, 4});
    CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("2x3"), ShapeError);
    try {
        tape.matmul(a, b);
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("2x2") != std::string::npos);
    }
}

TEST_CASE("softmax_rows: symmetry, shift invariance, log-odds") {
    Tape tape;
    auto sym = tape.softmax_rows(make_tensor(1, 2, {0, 0}));
    CHECK(sym->data[0] == doctest::Approx(0.5).epsilon(1e-15));

    auto shift = tape.softmax_rows(make_tensor(1, 3, {7.25, 7.25, 7.25}));
    for (double v : shift->data) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

    auto odds = tape.softmax_rows(make_tensor(1, 2, {std::log(1.0), std::log(3.0)}));
    CHECK(odds->data[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(odds->data[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax_rows rows sum to one, stay positive, ignore constant shifts") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Tape tape;
        auto x = random_tensor(rng, 3, 5, false);
        auto y = tape.softmax_rows(x);
        for (int i = 0; i < 3; ++i) {
            double s = 0.0;
            for (int j = 0; j < 5; ++j) {
                CHECK(y->at(i, j) > 0.0);
                s += y->at(i, j);
            }
            CHECK(std::fabs(s - 1.0) < 1e-12);
        }
        const double c = rng.uniform(-10.0, 10.0);
        std::vector<double> shifted = x->data;
        for (auto& v : shifted) v += c;
        auto y2 = tape.softmax_rows(make_tensor(3, 5, std::move(shifted)));
        for (size_t i = 0; i < y->data.size(); ++i)
            CHECK(std::fabs(y->data[i] - y2->data[i]) < 1e-12);
    }
}

TEST_CASE("layer_norm hand examples") {
    Tape tape;
    auto gain1 = make_tensor(1, 2, {1, 1});
    auto bias0 = make_tensor(1, 2, {0, 0});

    auto flat = tape.layer_norm(make_tensor(1, 2, {3, 3}), gain1, bias0);
    CHECK(flat->data[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(flat->data[1] == doctest::Approx(0.0).epsilon(1e-12));

    auto already = tape.layer_norm(make_tensor(1, 2, {-1, 1}), gain1, bias0, 1e-14);
    CHECK(already->data[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(already->data[1] == doctest::Approx(1.0).epsilon(1e-9));

    auto gain2 = make_tensor(1, 2, {2, 2});
    auto bias1 = make_tensor(1, 2, {1, 1});
    auto affine = tape.layer_norm(make_tensor(1, 2, {0, 2}), gain2, bias1, 1e-14);
    CHECK(affine->data[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(affine->data[1] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("layer_norm rows have zero mean and near-unit variance") {
    Rng rng(12);
    Tape tape;
    auto gain = make_tensor(1, 8, std::vector<double>(8, 1.0));
    auto bias = make_tensor(1, 8, std::vector<double>(8, 0.0));
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_tensor(rng, 4, 8, false);
        auto y = tape.layer_norm(x, gain, bias, 1e-8);
        for (int i = 0; i < 4; ++i) {
            double m = 0.0, v = 0.0;
            for (int j = 0; j < 8; ++j) m += y->at(i, j);
            m /= 8;
            for (int j = 0; j < 8; ++j) v += (y->at(i, j) - m) * (y->at(i, j) - m);
            v /= 8;
            CHECK(std::fabs(m) < 1e-9);
            CHECK(v == doctest::Approx(1.0).epsilon(1e-5));
        }
    }
}

TEST_CASE("gelu: exact erf variant") {
    Tape tape;
    CHECK(tape.gelu(scalar(0.0))->data[0] == 0.0);
    CHECK(tape.gelu(scalar(1.0))->data[0] == doctest::Approx(0.841345).epsilon(1e-6));
    for (double x : {6.0, 8.0, 12.0}) {
        CHECK(std::fabs(tape.gelu(scalar(x))->data[0] - x) < 1e-6);
    }
}

TEST_CASE("gelu is monotone right of its minimum and satisfies gelu(x) - gelu(-x) = x") {
    Tape tape;
    // x * cdf(x) dips to about -0.17 near x = -0.7518 before rising; the
    // non-decreasing branch starts there.
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 400; ++i) {
        const double x = -0.75 + i * 0.025;
        const double g = tape.gelu(scalar(x))->data[0];
        CHECK(g >= prev);
        prev = g;
    }
    for (int i = 0; i <= 400; ++i) {
        const double x = -8.0 + i * 0.04;
        const double g = tape.gelu(scalar(x))->data[0];
        const double gm = tape.gelu(scalar(-x))->data[0];
        CHECK(std::fabs((g - gm) - x) < 1e-12);
    }
}

TEST_CASE("mean_pool_rows examples and empty-pool error") {
    Tape tape;
    auto mid = tape.mean_pool_rows(make_tensor(2, 2, {1, 3, 3, 5}));
    CHECK(mid->data == std::vector<double>{2, 4});

    auto single = tape.mean_pool_rows(make_tensor(1, 3, {4, 5, 6}));
    CHECK(single->data == std::vector<double>{4, 5, 6});

    auto hand = tape.mean_pool_rows(make_tensor(3, 2, {0, 0, 6, -3, 0, 0}));
    CHECK(hand->data == std::vector<double>{2, -1});

    auto empty = make_tensor(0, 2, {});
    CHECK_THROWS_AS(tape.mean_pool_rows(empty), PreconditionError);
}

TEST_CASE("tensor construction rejects non-finite values and bad extents") {
    CHECK_THROWS_AS(make_tensor(1, 2, {1.0, std::nan("")}), NumericError);
    CHECK_THROWS_AS(make_tensor(1, 2, {1.0}), ShapeError);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(make_tensor(1, 1, {inf}), NumericError);
}

TEST_CASE("grad_check: quadratic and constant losses") {
    auto theta = scalar(3.0, true);
    theta->name = "theta";
    auto quad = [&](Tape& t) { return t.mul(theta, theta); };
    auto reports = grad_check(quad, {theta});
    REQUIRE(reports.size() == 1);
    CHECK(theta->grad[0] == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(reports[0].max_rel_error < 1e-10);
    CHECK(reports[0].param == "theta");

    auto c = scalar(2.5, true);
    auto constant = [&](Tape& t) { return t.scale(t.sub(c, c), 1.0); };
    auto creports = grad_check(constant, {c});
    CHECK(creports[0].max_rel_error == 0.0);
    CHECK(c->grad[0] == 0.0);
}

TEST_CASE("every op passes a finite-difference gradient check") {
    Rng rng(99);
    const double tol = 1e-4;

    SUBCASE("matmul") {
        auto a = random_tensor(rng, 3, 4, true, "a");
        auto b = random_tensor(rng, 4, 2, true, "b");
        auto fn = [&](Tape& t) {
            Rng r(5);
            return readout(t, t.matmul(a, b), r);
        };
        CHECK(max_report_error(grad_check(fn, {a, b})) < tol);
    }
    SUBCASE("matmul_nt and transpose") {
        auto a = random_tensor(rng, 3, 4, true, "a");
        auto b = random_tensor(rng, 2, 4, true, "b");
        auto fn = [&](Tape& t) {
            Rng r(6);
            return readout(t, t.add(t.matmul_nt(a, b), t.matmul(a, t.transpose(b))), r);
        };
        CHECK(max_report_error(grad_check(fn, {a, b})) < tol);
    }
    SUBCASE("softmax_rows") {
        auto x = random_tensor(rng, 3, 5, true, "x");
        auto fn = [&](Tape& t) {
            Rng r(7);
            return readout(t, t.softmax_rows(x), r);
        };
        CHECK(max_report_error(grad_check(fn, {x})) < tol);
    }
    SUBCASE("layer_norm") {
        auto x = random_tensor(rng, 3, 6, true, "x");
        auto g = random_tensor(rng, 1, 6, true, "g");
        auto b = random_tensor(rng, 1, 6, true, "b");
        auto fn = [&](Tape& t) {
            Rng r(8);
            return readout(t, t.layer_norm(x, g, b, 1e-5), r);
        };
        CHECK(max_report_error(grad_check(fn, {x, g, b})) < tol);
    }
    SUBCASE("gelu, exp, clamp, scale chains") {
        auto x = random_tensor(rng, 2, 4, true, "x");
        auto fn = [&](Tape& t) {
            Rng r(9);
            auto y = t.gelu(x);
            y = t.exp(t.scale(y, 0.3));
            y = t.clamp(y, -4.0, 4.0);
            return readout(t, y, r);
        };
        CHECK(max_report_error(grad_check(fn, {x})) < tol);
    }
    SUBCASE("pool, broadcast, rowvec, concat") {
        auto x = random_tensor(rng, 4, 3, true, "x");
        auto v = random_tensor(rng, 1, 3, true, "v");
        auto fn = [&](Tape& t) {
            Rng r(10);
            auto pooled = t.mean_pool_rows(t.add_rowvec(x, v));
            auto wide = t.concat_cols(pooled, t.scale(pooled, -2.0));
            return readout(t, t.broadcast_rows(wide, 3), r);
        };
        CHECK(max_report_error(grad_check(fn, {x, v})) < tol);
    }
    SUBCASE("gather/scatter/update rows and cols") {
        auto x = random_tensor(rng, 5, 3, true, "x");
        auto delta = random_tensor(rng, 2, 3, true, "delta");
        auto logits = random_tensor(rng, 1, 4, true, "logits");
        auto fn = [&](Tape& t) {
            Rng r(11);
            auto updated = t.row_update_add(x, {1, 3}, delta);
            auto part = t.gather_rows(updated, {0, 3, 4});
            auto g = t.gather_cols(logits, {2, 0});
            auto spread = t.scatter_cols(t.div_by(g, t.sum_all(g)), {2, 0}, 4);
            auto joined = t.concat_cols(t.mean_pool_rows(part), spread);
            return readout(t, joined, r);
        };
        CHECK(max_report_error(grad_check(fn, {x, delta, logits})) < tol);
    }
    SUBCASE("mul, sub, sum_sq, scale_by, cell") {
        auto a = random_tensor(rng, 2, 3, true, "a");
        auto b = random_tensor(rng, 2, 3, true, "b");
        auto s = random_tensor(rng, 1, 1, true, "s");
        auto fn = [&](Tape& t) {
            auto y = t.scale_by(t.mul(a, t.sub(a, b)), s);
            return t.add(t.sum_sq(y), t.cell(y, 1, 2));
        };
        CHECK(max_report_error(grad_check(fn, {a, b, s})) < tol);
    }
}

TEST_CASE("ops are deterministic: identical inputs give bitwise-identical outputs") {
    Rng rng(321);
    auto x = random_tensor(rng, 4, 6, true, "x");
    auto w = random_tensor(rng, 6, 6, true, "w");
    auto g = random_tensor(rng, 1, 6, false);
    auto b = random_tensor(rng, 1, 6, false);

    auto run = [&]() {
        Tape t;
        auto y = t.layer_norm(t.gelu(t.matmul(x, w)), g, b, 1e-5);
        auto loss = t.sum_sq(t.softmax_rows(y));
        x->zero_grad();
        w->zero_grad();
        t.backward(loss);
        auto out = y->data;
        out.insert(out.end(), x->grad.begin(), x->grad.end());
        out.insert(out.end(), w->grad.begin(), w->grad.end());
        out.push_back(loss->data[0]);
        return out;
    };
    auto r1 = run();
    auto r2 = run();
    CHECK(r1 == r2);
}

TEST_CASE("backward accumulates across shared subexpressions") {
    // f = (x*x) + (x*x) -> df/dx = 4x
    auto x = scalar(1.5, true);
    Tape t;
    auto sq = t.mul(x, x);
    auto loss = t.add(sq, sq);
    t.backward(loss);
    CHECK(x->grad[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("frozen tensors receive no gradient") {
    Rng rng(77);
    auto x = random_tensor(rng, 2, 2, true, "x");
    auto frozen = random_tensor(rng, 2, 2, false, "frozen");
    Tape t;
    auto loss = t.sum_sq(t.matmul(x, frozen));
    t.backward(loss);
    for (double gv : frozen->grad) CHECK(gv == 0.0);
    bool any = false;
    for (double gv : x->grad) any = any || gv != 0.0;
    CHECK(any);
}
