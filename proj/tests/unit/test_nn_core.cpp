#include "flowcast/error.hpp"
#include "flowcast/lstm.hpp"
#include "flowcast/tensor.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace flowcast;

namespace {

LstmParams random_params(std::size_t in, std::size_t hidden, std::mt19937_64& rng, double scale = 0.6) {
    auto p = LstmParams::zeros(in, hidden);
    std::uniform_real_distribution<double> u(-scale, scale);
    for_each_block(p, "", [&](const std::string&, std::span<double> s) {
        for (auto& v : s) v = u(rng);
    });
    return p;
}

Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

/// Scalar objective L = wh . h_t + wc . c_t of one oracle step.
struct CellObjective {
    Vector wh, wc;
    double operator()(const Vector& x, const Vector& h, const Vector& c, const LstmParams& p) const {
        auto s = oracle::lstm_step(x, h, c, p);
        return dot(wh, s.h) + dot(wc, s.c);
    }
};

double rel_error(double a, double n) { return std::fabs(a - n) / std::max(std::fabs(a) + std::fabs(n), 1e-6); }

/// Max relative error between analytic and central-difference gradients of
/// a single cell, over every parameter, the input and the previous state.
double cell_gradient_error(std::size_t in, std::size_t hidden, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto p = random_params(in, hidden, rng);
    auto x = random_vector(in, rng);
    LstmState prev{random_vector(hidden, rng), random_vector(hidden, rng)};
    CellObjective obj{random_vector(hidden, rng), random_vector(hidden, rng)};

    auto fwd = lstm_cell_forward(x, prev, p);
    auto grads = LstmParams::zeros(in, hidden);
    auto back = lstm_cell_backward(obj.wh, obj.wc, fwd.cache, p, grads);

    const double h = 1e-5;
    double worst = 0.0;
    auto probe = [&](double& v, double analytic) {
        const double saved = v;
        v = saved + h;
        const double up = obj(x, prev.h, prev.c, p);
        v = saved - h;
        const double down = obj(x, prev.h, prev.c, p);
        v = saved;
        worst = std::max(worst, rel_error(analytic, (up - down) / (2 * h)));
    };

    std::vector<std::span<double>> ps;
    std::vector<std::span<const double>> gs;
    for_each_block(p, "", [&](const std::string&, std::span<double> s) { ps.push_back(s); });
    for_each_block(std::as_const(grads), "", [&](const std::string&, std::span<const double> s) { gs.push_back(s); });
    for (std::size_t b = 0; b < ps.size(); ++b)
        for (std::size_t k = 0; k < ps[b].size(); ++k) probe(ps[b][k], gs[b][k]);
    for (std::size_t k = 0; k < in; ++k) probe(x[k], back.dx[k]);
    for (std::size_t k = 0; k < hidden; ++k) {
        probe(prev.h[k], back.dh_prev[k]);
        probe(prev.c[k], back.dc_prev[k]);
    }
    return worst;
}

} // namespace

TEST_CASE("activation examples") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(activation(Activation::tanh, std::vector<double>{0.0})[0] == 0.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-30, 30);
    for (int k = 0; k < 1000; ++k) {
        const double x = u(rng);
        CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("activations stay in range and finite at large magnitude") {
    for (double x : {-1e3, -700.0, -50.0, -1e-9, 1e-9, 50.0, 700.0, 1e3}) {
        const double s = sigmoid(x);
        CHECK(std::isfinite(s));
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        const double t = activation(Activation::tanh, std::vector<double>{x})[0];
        CHECK(std::isfinite(t));
        CHECK(std::fabs(t) <= 1.0);
    }
    CHECK(sigmoid(-1e3) == 0.0);
    CHECK(sigmoid(1e3) == 1.0);
    CHECK(sigmoid(-20.0) > 0.0);
    CHECK(sigmoid(20.0) < 1.0);
}

TEST_CASE("affine and elementwise examples") {
    Matrix w{{1, 2}, {3, 4}};
    CHECK(affine(w, std::vector<double>{1, 1}, std::vector<double>{0, 0}) == Vector{3, 7});
    Matrix id{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    Vector x{0.25, -3, 7.5};
    CHECK(affine(id, x, Vector(3, 0.0)) == x);
    CHECK(elementwise_mul(x, Vector(3, 1.0)) == x);
}

TEST_CASE("shape mismatches name the operand") {
    Matrix w{{1, 2}, {3, 4}};
    try {
        affine(w, std::vector<double>{1, 1, 1}, std::vector<double>{0, 0});
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("input has 3 entries") != std::string::npos);
    }
    CHECK_THROWS_AS(affine(w, std::vector<double>{1, 1}, std::vector<double>{0}), ShapeError);
    CHECK_THROWS_AS(elementwise_mul(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);

    auto p = LstmParams::zeros(2, 3);
    CHECK_THROWS_AS(lstm_cell_forward(std::vector<double>{1.0}, LstmState::zeros(3), p), ShapeError);
    CHECK_THROWS_AS(lstm_cell_forward(std::vector<double>{1.0, 2.0}, LstmState::zeros(2), p), ShapeError);
    p.peep_o.pop_back();
    CHECK_THROWS_AS(p.check(), ShapeError);
}

TEST_CASE("zero parameters give half-open gates and a zero state") {
    auto p = LstmParams::zeros(3, 4);
    auto out = lstm_cell_forward(std::vector<double>{0.3, -1.0, 2.0}, LstmState::zeros(4), p);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(out.cache.i[j] == 0.5);
        CHECK(out.cache.f[j] == 0.5);
        CHECK(out.cache.o[j] == 0.5);
        CHECK(out.state.c[j] == 0.0);
        CHECK(out.state.h[j] == 0.0);
    }
}

TEST_CASE("large candidate bias saturates the cell at one half") {
    auto p = LstmParams::zeros(1, 1);
    p.bias(Gate::candidate)[0] = 40.0;
    auto out = lstm_cell_forward(std::vector<double>{0.0}, LstmState::zeros(1), p);
    CHECK(out.state.c[0] == doctest::Approx(0.5 * std::tanh(40.0)).epsilon(1e-15));
    CHECK(out.state.c[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.state.h[0] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-12));
}

TEST_CASE("forward matches the scalar reference") {
    std::mt19937_64 rng(21);
    for (std::size_t in : {1, 3, 5}) {
        for (std::size_t hidden : {1, 3, 4}) {
            auto p = random_params(in, hidden, rng, 1.0);
            auto x = random_vector(in, rng, 2.0);
            LstmState prev{random_vector(hidden, rng), random_vector(hidden, rng)};
            auto got = lstm_cell_forward(x, prev, p);
            auto want = oracle::lstm_step(x, prev.h, prev.c, p);
            for (std::size_t j = 0; j < hidden; ++j) {
                CHECK(std::fabs(got.state.c[j] - want.c[j]) <= 1e-12);
                CHECK(std::fabs(got.state.h[j] - want.h[j]) <= 1e-12);
                CHECK(std::fabs(got.cache.i[j] - want.i[j]) <= 1e-12);
                CHECK(std::fabs(got.cache.f[j] - want.f[j]) <= 1e-12);
                CHECK(std::fabs(got.cache.o[j] - want.o[j]) <= 1e-12);
                CHECK(std::fabs(got.cache.g[j] - want.g[j]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("output gate reads the new cell state") {
    auto p = LstmParams::zeros(1, 1);
    p.peep_o[0] = 3.0;
    p.bias(Gate::candidate)[0] = 1.0;
    LstmState prev{{-2.0}, {0.0}};
    auto out = lstm_cell_forward(std::vector<double>{0.0}, prev, p);
    const double c = 0.5 * -2.0 + 0.5 * std::tanh(1.0);
    CHECK(out.state.c[0] == doctest::Approx(c).epsilon(1e-15));
    CHECK(out.cache.o[0] == doctest::Approx(oracle::sig(3.0 * c)).epsilon(1e-15));
}

TEST_CASE("gate ranges and determinism") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = random_params(3, 4, rng, 3.0);
        auto x = random_vector(3, rng, 5.0);
        LstmState prev{random_vector(4, rng, 3.0), random_vector(4, rng)};
        auto a = lstm_cell_forward(x, prev, p);
        auto b = lstm_cell_forward(x, prev, p);
        CHECK(a.state == b.state);
        for (std::size_t j = 0; j < 4; ++j) {
            for (double g : {a.cache.i[j], a.cache.f[j], a.cache.o[j]}) {
                CHECK(g > 0.0);
                CHECK(g < 1.0);
            }
            CHECK(std::fabs(a.state.h[j]) < 1.0);
        }
    }
}

TEST_CASE("zero upstream gradient gives zero gradients") {
    std::mt19937_64 rng(5);
    auto p = random_params(2, 3, rng);
    auto fwd = lstm_cell_forward(random_vector(2, rng), LstmState{random_vector(3, rng), random_vector(3, rng)}, p);
    auto grads = LstmParams::zeros(2, 3);
    auto back = lstm_cell_backward(Vector(3, 0.0), Vector(3, 0.0), fwd.cache, p, grads);
    CHECK(grads == LstmParams::zeros(2, 3));
    CHECK(back.dx == Vector(2, 0.0));
    CHECK(back.dh_prev == Vector(3, 0.0));
    CHECK(back.dc_prev == Vector(3, 0.0));
}

TEST_CASE("cell backward matches finite differences") {
    CHECK(cell_gradient_error(2, 2, 1) <= 1e-4);
    std::uint64_t seed = 100;
    for (std::size_t in : {1, 3, 5})
        for (std::size_t hidden : {1, 2, 4}) {
            CAPTURE(in);
            CAPTURE(hidden);
            CHECK(cell_gradient_error(in, hidden, seed++) <= 1e-4);
        }
}

TEST_CASE("output pre-activation gradient in the scalar case") {
    std::mt19937_64 rng(13);
    auto p = random_params(1, 1, rng);
    auto fwd = lstm_cell_forward(std::vector<double>{0.7}, LstmState{{0.2}, {-0.4}}, p);
    auto grads = LstmParams::zeros(1, 1);
    lstm_cell_backward(std::vector<double>{1.0}, std::vector<double>{0.0}, fwd.cache, p, grads);
    const double o = fwd.cache.o[0];
    CHECK(grads.bias(Gate::output)[0] == doctest::Approx(std::tanh(fwd.state.c[0]) * o * (1 - o)).epsilon(1e-14));
}

TEST_CASE("backward rejects a mismatched cache") {
    auto p = LstmParams::zeros(2, 2);
    auto fwd = lstm_cell_forward(std::vector<double>{1, 2}, LstmState::zeros(2), p);
    auto wrong = LstmParams::zeros(2, 3);
    auto grads = LstmParams::zeros(2, 3);
    CHECK_THROWS_AS(lstm_cell_backward(Vector(3, 1.0), Vector(3, 0.0), fwd.cache, wrong, grads), ShapeError);
}
