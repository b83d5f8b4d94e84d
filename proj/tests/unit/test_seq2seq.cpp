#include "flowcast/checkpoint.hpp"
#include "flowcast/digest.hpp"
#include "flowcast/error.hpp"
#include "flowcast/seq2seq.hpp"

#include "oracles.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace flowcast;

namespace {

Matrix random_input(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return oracle::random_matrix(rows, cols, rng);
}

void check_close(MatrixView a, const oracle::Mat& b, double tol) {
    REQUIRE(a.rows == b.size());
    for (std::size_t r = 0; r < a.rows; ++r) {
        REQUIRE(a.cols == b[r].size());
        for (std::size_t c = 0; c < a.cols; ++c) CHECK(std::fabs(a(r, c) - b[r][c]) <= tol);
    }
}

} // namespace

TEST_CASE("encode with zero parameters stays at zero") {
    WindowSpec spec{5, 2, 1, 3};
    auto m = Seq2SeqModel::zeros(spec, 4);
    for (std::size_t T : {1, 5, 9}) {
        auto enc = encode(random_input(T, 3, T), m);
        CHECK(enc.state == LstmState::zeros(4));
        CHECK(enc.caches.size() == T);
    }
}

TEST_CASE("encode equals chained cell calls") {
    WindowSpec spec{3, 2, 1, 2};
    auto m = oracle::random_model(spec, 2, 31);
    auto x = random_input(3, 2, 1);
    auto enc = encode(x, m);
    auto s = LstmState::zeros(2);
    for (std::size_t t = 0; t < 3; ++t) s = lstm_cell_forward(x.row(t), s, m.encoder).state;
    CHECK(enc.state == s);
}

TEST_CASE("repeat_vector examples") {
    std::vector<double> h{1, 2};
    CHECK(repeat_vector(h, 3) == Matrix{{1, 2}, {1, 2}, {1, 2}});
    CHECK(repeat_vector(h, 1) == Matrix{{1, 2}});
    CHECK(repeat_vector(std::vector<double>{0, 0, 0}, 2) == Matrix(2, 3, 0.0));
    CHECK_THROWS_AS(repeat_vector(h, 0), ShapeError);
}

TEST_CASE("decode examples") {
    WindowSpec spec{3, 2, 1, 2};
    SUBCASE("zero parameters") {
        auto m = Seq2SeqModel::zeros(spec, 3);
        auto dec = decode(Matrix(4, 3, 0.0), LstmState::zeros(3), m);
        CHECK(dec.hidden == Matrix(4, 3, 0.0));
    }
    SUBCASE("one and two steps equal manual unrolls") {
        auto m = oracle::random_model(spec, 2, 77);
        LstmState init{{0.3, -0.2}, {0.1, 0.5}};
        std::vector<double> ctx{0.4, -0.6};
        auto one = decode(repeat_vector(ctx, 1), init, m);
        auto s1 = lstm_cell_forward(ctx, init, m.decoder).state;
        CHECK(std::vector<double>(one.hidden.row(0).begin(), one.hidden.row(0).end()) == s1.h);

        auto two = decode(repeat_vector(ctx, 2), init, m);
        auto s2 = lstm_cell_forward(ctx, s1, m.decoder).state;
        CHECK(std::vector<double>(two.hidden.row(1).begin(), two.hidden.row(1).end()) == s2.h);
    }
}

TEST_CASE("project examples") {
    WindowSpec spec{2, 3, 1, 2};
    auto m = Seq2SeqModel::zeros(spec, 2);
    m.proj_b = {0.5, -1.5};
    CHECK(project(Matrix(3, 2, 0.0), m) == Matrix{{0.5, -1.5}, {0.5, -1.5}, {0.5, -1.5}});

    m.proj_w = Matrix{{1, 0}, {0, 1}};
    m.proj_b = {0, 0};
    Matrix hidden{{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}};
    CHECK(project(hidden, m) == hidden);

    auto r = oracle::random_model(spec, 2, 3);
    Matrix permuted{{0.5, 0.6}, {0.1, 0.2}, {0.3, 0.4}};
    auto a = project(hidden, r);
    auto b = project(permuted, r);
    CHECK(std::equal(a.row(0).begin(), a.row(0).end(), b.row(1).begin()));
    CHECK(std::equal(a.row(1).begin(), a.row(1).end(), b.row(2).begin()));
    CHECK(std::equal(a.row(2).begin(), a.row(2).end(), b.row(0).begin()));
}

TEST_CASE("forward examples") {
    SUBCASE("zero parameters output the bias") {
        WindowSpec spec{4, 3, 1, 2};
        auto m = Seq2SeqModel::zeros(spec, 3);
        m.proj_b = {0.25, -0.75};
        auto y = forward(random_input(4, 2, 1), m);
        CHECK(y == Matrix{{0.25, -0.75}, {0.25, -0.75}, {0.25, -0.75}});
    }
    SUBCASE("shape is horizon x features for any lookback") {
        WindowSpec spec{4, 3, 1, 2};
        auto m = oracle::random_model(spec, 3, 4);
        for (std::size_t T : {1, 4, 11}) {
            auto y = forward(random_input(T, 2, T), m);
            CHECK(y.rows() == 3);
            CHECK(y.cols() == 2);
        }
    }
    SUBCASE("tiny config matches the step-by-step oracle") {
        WindowSpec spec{4, 2, 1, 2};
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto m = oracle::random_model(spec, 3, seed, 1.0);
            auto x = random_input(4, 2, seed + 50);
            check_close(forward(x, m), oracle::seq2seq_forward(oracle::to_mat(x), m), 1e-12);
        }
    }
    SUBCASE("forward is deterministic") {
        WindowSpec spec{6, 3, 1, 5};
        auto m = oracle::random_model(spec, 4, 9);
        auto x = random_input(6, 5, 2);
        CHECK(forward(x, m) == forward(x, m));
    }
    SUBCASE("input width must match") {
        WindowSpec spec{4, 2, 1, 2};
        auto m = Seq2SeqModel::zeros(spec, 3);
        CHECK_THROWS_AS(forward(random_input(4, 3, 1), m), ShapeError);
    }
}

TEST_CASE("huber examples") {
    CHECK(huber_element(0.0, 1.0) == 0.0);
    CHECK(huber_element(0.5, 1.0) == 0.125);
    CHECK(huber_element_grad(0.5, 1.0) == 0.5);
    CHECK(huber_element(2.0, 1.0) == 1.5);
    CHECK(huber_element_grad(2.0, 1.0) == 1.0);
    CHECK(huber_element_grad(-2.0, 1.0) == -1.0);
    CHECK(huber_element(1.0, 1.0) == 0.5);
    CHECK(huber_element(-1.0, 1.0) == 0.5);

    // Both sides of the knee agree.
    const double eps = 1e-9;
    CHECK(std::fabs(huber_element(1.0 + eps, 1.0) - huber_element(1.0 - eps, 1.0)) < 3 * eps);
    CHECK(std::fabs(huber_element_grad(1.0 + eps, 1.0) - huber_element_grad(1.0 - eps, 1.0)) < 3 * eps);

    // Other thresholds.
    CHECK(huber_element(3.0, 2.0) == 2.0 * (3.0 - 1.0));
    CHECK(huber_element_grad(3.0, 2.0) == 2.0);
}

TEST_CASE("huber over a matrix sums every element") {
    Matrix pred{{0.5, 3.0}, {0.0, -1.0}};
    Matrix truth{{0.0, 1.0}, {0.0, 0.0}};
    auto r = huber(pred, truth, {});
    CHECK(r.loss == 0.125 + 1.5 + 0.0 + 0.5);
    CHECK(r.grad == Matrix{{0.5, 1.0}, {0.0, -1.0}});
    CHECK_THROWS_AS(huber(pred, Matrix(2, 3), {}), ShapeError);
}

TEST_CASE("huber is non-negative and zero only on equality") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        auto a = oracle::random_matrix(3, 4, rng, 3.0);
        auto b = oracle::random_matrix(3, 4, rng, 3.0);
        CHECK(huber(a, b, {}).loss > 0.0);
        CHECK(huber(a, a, {}).loss == 0.0);
        CHECK(huber(a, b, {}).loss == doctest::Approx(oracle::huber_sum(oracle::to_mat(a), oracle::to_mat(b), 1.0)));
    }
}

TEST_CASE("perfect prediction gives zero gradients") {
    WindowSpec spec{4, 2, 1, 3};
    auto m = oracle::random_model(spec, 3, 12);
    auto x = random_input(4, 3, 8);
    auto y = forward(x, m);
    auto g = backward(x, y, m, {});
    CHECK(g.loss == 0.0);
    CHECK(g.grads == zeros_like(m));
}

TEST_CASE("full-model gradients match finite differences") {
    std::mt19937_64 pick(2024);
    const std::size_t hs[] = {1, 2, 4}, ts[] = {2, 4}, fs[] = {1, 2}, ms[] = {1, 3, 5};
    for (int trial = 0; trial < 8; ++trial) {
        WindowSpec spec{ts[pick() % 2], fs[pick() % 2], 1, ms[pick() % 3]};
        const std::size_t H = hs[pick() % 3];
        auto m = oracle::random_model(spec, H, 500 + trial);
        auto x = random_input(spec.lookback, spec.features, 900 + trial);
        // Targets far enough away that both Huber branches are exercised.
        auto y = random_input(spec.horizon, spec.features, 1300 + trial);
        for (auto& v : y.data()) v *= 2.5;
        auto g = backward(x, y, m, {});
        CHECK(g.loss == doctest::Approx(static_cast<double>(oracle::loss(oracle::to_mat(x), oracle::to_mat(y), m))).epsilon(1e-12));
        auto check = oracle::finite_difference_check(oracle::to_mat(x), oracle::to_mat(y), m, g.grads);
        CAPTURE(H);
        CAPTURE(spec.lookback);
        CAPTURE(spec.horizon);
        CAPTURE(spec.features);
        CAPTURE(check.worst_block);
        CHECK(check.max_rel_error <= 1e-4);
        CHECK(check.checked == parameter_count(m));
    }
}

TEST_CASE("accumulating a sample twice doubles the gradient") {
    WindowSpec spec{3, 2, 1, 2};
    auto m = oracle::random_model(spec, 3, 40);
    auto x = random_input(3, 2, 41);
    auto y = random_input(2, 2, 42);
    auto once = zeros_like(m);
    auto twice = zeros_like(m);
    backward_accumulate(x, y, m, {}, once);
    backward_accumulate(x, y, m, {}, twice);
    backward_accumulate(x, y, m, {}, twice);
    std::vector<std::span<const double>> a, b;
    for_each_block(std::as_const(once), [&](const std::string&, std::span<const double> s) { a.push_back(s); });
    for_each_block(std::as_const(twice), [&](const std::string&, std::span<const double> s) { b.push_back(s); });
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t j = 0; j < a[k].size(); ++j) CHECK(b[k][j] == doctest::Approx(2.0 * a[k][j]).epsilon(1e-13));
}

TEST_CASE("a small step against the gradient lowers the loss") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        WindowSpec spec{4, 2, 1, 3};
        auto m = oracle::random_model(spec, 3, seed);
        auto x = random_input(4, 3, seed + 10);
        auto y = random_input(2, 3, seed + 20);
        auto g = backward(x, y, m, {});
        auto stepped = m;
        std::vector<std::span<const double>> gs;
        for_each_block(std::as_const(g.grads), [&](const std::string&, std::span<const double> s) { gs.push_back(s); });
        std::size_t b = 0;
        for_each_block(stepped, [&](const std::string&, std::span<double> s) {
            for (std::size_t k = 0; k < s.size(); ++k) s[k] -= 1e-4 * gs[b][k];
            ++b;
        });
        CHECK(huber(forward(x, stepped), y, {}).loss < g.loss);
    }
}

TEST_CASE("parameter count and block order") {
    WindowSpec spec{4, 2, 1, 5};
    auto m = Seq2SeqModel::zeros(spec, 3);
    // encoder: 4*(3*5 + 3*3 + 3) + 3*3, decoder: 4*(3*3 + 3*3 + 3) + 3*3, projection 5*3 + 5
    CHECK(parameter_count(m) == (4 * 27 + 9) + (4 * 21 + 9) + 20);
    std::vector<std::string> names;
    for_each_block(m, [&](const std::string& n, std::span<double>) { names.push_back(n); });
    CHECK(names.front() == "encoder.w_x.input");
    CHECK(names[15] == "decoder.w_x.input");
    CHECK(names.back() == "projection.bias");
    CHECK(names.size() == 32);
}

TEST_CASE("checkpoint round trip reproduces forward bitwise") {
    WindowSpec spec{6, 3, 1, 5};
    Checkpoint ck;
    ck.model = oracle::random_model(spec, 4, 99, 1.0);
    ck.model.proj_b[0] = 1.0 / 3.0;
    ck.model.proj_b[1] = 1e-300;
    ck.scaler.ranges.assign(5, FeatureRange{-0.1, 7.0 / 3.0});
    ck.seed = 123;
    ck.epochs_completed = 7;

    TempDir dir;
    save_checkpoint(ck, dir / "ck.json");
    auto back = load_checkpoint(dir / "ck.json");
    CHECK(back == ck);
    CHECK(parameter_digest(back.model) == parameter_digest(ck.model));
    auto x = random_input(6, 5, 3);
    CHECK(forward(x, back.model) == forward(x, ck.model));

    std::ostringstream a, b;
    save_checkpoint(ck, a);
    save_checkpoint(back, b);
    CHECK(a.str() == b.str());
}

TEST_CASE("corrupt checkpoints are rejected") {
    std::istringstream not_json("{ nope");
    CHECK_THROWS_AS(load_checkpoint(not_json), InputError);

    WindowSpec spec{2, 1, 1, 1};
    Checkpoint ck;
    ck.model = Seq2SeqModel::zeros(spec, 1);
    ck.scaler.ranges = {FeatureRange{0, 1}};
    std::ostringstream out;
    save_checkpoint(ck, out);
    auto text = out.str();

    auto renamed = text;
    renamed.replace(renamed.find("encoder.peep_i"), 14, "encoder.peep_x");
    std::istringstream r(renamed);
    CHECK_THROWS_AS(load_checkpoint(r), InputError);

    auto wrong_format = text;
    wrong_format.replace(wrong_format.find("flowcast-checkpoint"), 19, "something-different");
    std::istringstream w(wrong_format);
    CHECK_THROWS_AS(load_checkpoint(w), InputError);

    CHECK_THROWS_AS(load_checkpoint(std::filesystem::path("/nonexistent/ck.json")), IoError);
}
