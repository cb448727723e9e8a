#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "evosim/error.hpp"
#include "evosim/market.hpp"
#include "evosim/perception.hpp"

using namespace evosim;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

FeatureWindow window_of(std::size_t rows, double fill) {
    FeatureWindow w{Matrix(rows, kFeatureCount, fill), 0};
    return w;
}

FeatureWindow random_window(std::size_t rows, Rng& rng) {
    FeatureWindow w{Matrix(rows, kFeatureCount), 0};
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < kFeatureCount; ++c) w.values(r, c) = rng.normal();
    return w;
}

}  // namespace

TEST_CASE("zero LSTM cell gives half-open gates and zero state") {
    const auto w = LstmWeights::zeros(4, 3);
    GateTrace g;
    const std::vector<double> x{0.3, -1.2, 2.0};
    const CellState next = lstm_cell_step(w, CellState::zeros(4), x, &g);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(g.forget[i] == 0.5);
        CHECK(g.input[i] == 0.5);
        CHECK(g.output[i] == 0.5);
        CHECK(g.candidate[i] == 0.0);
        CHECK(next.c[i] == 0.0);
        CHECK(next.h[i] == 0.0);
    }
}

TEST_CASE("saturated forget gate with closed input gate preserves memory") {
    auto w = LstmWeights::zeros(2, 1);
    w.b_forget = {50.0, 50.0};
    w.b_input = {-50.0, -50.0};
    CellState s{{0.1, -0.2}, {0.7, -1.3}};
    const std::vector<double> x{0.5};
    const CellState next = lstm_cell_step(w, s, x);
    CHECK(next.c[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(next.c[1] == doctest::Approx(-1.3).epsilon(1e-12));
}

TEST_CASE("H=1 F=1 LSTM step matches a scalar hand trace") {
    LstmWeights w = LstmWeights::zeros(1, 1);
    // [h_prev, x] weights per gate
    w.w_forget(0, 0) = 0.3, w.w_forget(0, 1) = -0.4, w.b_forget = {0.1};
    w.w_input(0, 0) = 0.2, w.w_input(0, 1) = 0.5, w.b_input = {-0.2};
    w.w_output(0, 0) = -0.6, w.w_output(0, 1) = 0.7, w.b_output = {0.05};
    w.w_candidate(0, 0) = 0.9, w.w_candidate(0, 1) = -0.3, w.b_candidate = {0.15};
    const double h = 0.25, c = -0.5, x = 0.8;

    const double f = sig(0.3 * h - 0.4 * x + 0.1);
    const double i = sig(0.2 * h + 0.5 * x - 0.2);
    const double o = sig(-0.6 * h + 0.7 * x + 0.05);
    const double g = std::tanh(0.9 * h - 0.3 * x + 0.15);
    const double c_next = f * c + i * g;
    const double h_next = o * std::tanh(c_next);

    const std::vector<double> in{x};
    const CellState next = lstm_cell_step(w, CellState{{h}, {c}}, in);
    CHECK(std::abs(next.c[0] - c_next) < 1e-12);
    CHECK(std::abs(next.h[0] - h_next) < 1e-12);

    // Second step threads state through.
    const double f2 = sig(0.3 * h_next - 0.4 * x + 0.1);
    const double i2 = sig(0.2 * h_next + 0.5 * x - 0.2);
    const double o2 = sig(-0.6 * h_next + 0.7 * x + 0.05);
    const double g2 = std::tanh(0.9 * h_next - 0.3 * x + 0.15);
    const double c2 = f2 * c_next + i2 * g2;
    const CellState again = lstm_cell_step(w, next, in);
    CHECK(std::abs(again.c[0] - c2) < 1e-12);
    CHECK(std::abs(again.h[0] - o2 * std::tanh(c2)) < 1e-12);
}

TEST_CASE("LSTM dimension mismatches are named") {
    const auto w = LstmWeights::zeros(3, 2);
    const std::vector<double> x{1.0, 2.0, 3.0};
    try {
        lstm_cell_step(w, CellState::zeros(3), x);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("input length 3") != std::string::npos);
    }
    const std::vector<double> ok{1.0, 2.0};
    CHECK_THROWS_AS(lstm_cell_step(w, CellState::zeros(2), ok), std::invalid_argument);
}

TEST_CASE("attention with zero queries averages the values") {
    Rng rng(3);
    Matrix k(5, 4), v(5, 3);
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < 4; ++c) k(r, c) = rng.normal();
        for (std::size_t c = 0; c < 3; ++c) v(r, c) = rng.normal();
    }
    const Matrix q(2, 4, 0.0);
    Matrix w;
    const Matrix out = attention(q, k, v, &w);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 5; ++j) CHECK(w(i, j) == doctest::Approx(0.2).epsilon(1e-15));
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < 5; ++r) mean += v(r, c);
            CHECK(out(i, c) == doctest::Approx(mean / 5.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("single key returns its value row") {
    Matrix q{{1.0, -2.0}, {3.0, 0.5}, {0.0, 0.0}};
    Matrix k{{0.4, 0.7}};
    Matrix v{{2.5, -1.0, 4.0}};
    const Matrix out = attention(q, k, v);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < 3; ++c) CHECK(out(i, c) == v(0, c));
}

TEST_CASE("2x2 identity attention matches hand arithmetic") {
    const Matrix id = Matrix::identity(2);
    Matrix w;
    const Matrix out = attention(id, id, id, &w);
    const double a = std::exp(1.0 / std::sqrt(2.0));
    const double hi = a / (a + 1.0), lo = 1.0 / (a + 1.0);
    CHECK(std::abs(w(0, 0) - hi) < 1e-15);
    CHECK(std::abs(w(0, 1) - lo) < 1e-15);
    CHECK(std::abs(w(1, 0) - lo) < 1e-15);
    CHECK(std::abs(w(1, 1) - hi) < 1e-15);
    CHECK(std::abs(out(0, 0) - hi) < 1e-15);
    CHECK(std::abs(out(0, 1) - lo) < 1e-15);
}

TEST_CASE("attention shape errors") {
    CHECK_THROWS_AS(attention(Matrix(2, 3), Matrix(2, 4), Matrix(2, 1)), std::invalid_argument);
    CHECK_THROWS_AS(attention(Matrix(2, 3), Matrix(2, 3), Matrix(3, 1)), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one even for large logits") {
    Rng rng(12);
    for (int t = 0; t < 200; ++t) {
        Matrix m(4, 7);
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 7; ++c) m(r, c) = rng.normal(0.0, 300.0);
        softmax_rows(m);
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < 7; ++c) {
                CHECK(std::isfinite(m(r, c)));
                s += m(r, c);
            }
            CHECK(std::abs(s - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("oracle at full accuracy always points the right way") {
    Rng rng(1);
    for (int t = 0; t < 1000; ++t) {
        const Direction d = rng.bernoulli(0.5) ? Direction::up : Direction::down;
        const Signal s = oracle_signal(d, 1.0, 0.2, rng);
        CHECK((s.p_up > 0.5) == (d == Direction::up));
        CHECK(std::abs(std::abs(s.p_up - 0.5) - 0.2) < 1e-15);
    }
}

TEST_CASE("oracle match rate is calibrated") {
    for (double acc : {0.5, 0.512}) {
        Rng rng(static_cast<std::uint64_t>(acc * 1000));
        const int n = 1000000;
        int hits = 0;
        for (int t = 0; t < n; ++t) {
            const Direction d = rng.bernoulli(0.5) ? Direction::up : Direction::down;
            hits += (oracle_signal(d, acc, 0.1, rng).p_up > 0.5) == (d == Direction::up);
        }
        const double sigma = std::sqrt(acc * (1 - acc) / n);
        CHECK(std::abs(static_cast<double>(hits) / n - acc) < 3 * sigma);
    }
}

TEST_CASE("oracle parameters are validated") {
    Rng rng(1);
    CHECK_THROWS_AS(oracle_signal(Direction::up, 1.2, 0.1, rng), std::invalid_argument);
    CHECK_THROWS_AS(oracle_signal(Direction::up, 0.5, 0.6, rng), std::invalid_argument);
}

TEST_CASE("zero-weight models output exactly one half") {
    Rng rng(5);
    const auto w = random_window(kLookback, rng);
    CHECK(untrained_forward(LstmModel::zeros(8), w).p_up == 0.5);
    CHECK(untrained_forward(AttentionModel::zeros(8), w).p_up == 0.5);
}

TEST_CASE("zero features with unbiased weights give one half") {
    Rng rng(8);
    LstmModel lstm = LstmModel::random(6, rng);
    for (auto& layer : lstm.layers) {
        for (auto* b : {&layer.b_forget, &layer.b_input, &layer.b_output, &layer.b_candidate})
            std::fill(b->begin(), b->end(), 0.0);
    }
    AttentionModel att = AttentionModel::random(6, rng);
    const auto zero = window_of(kLookback, 0.0);
    CHECK(untrained_forward(lstm, zero).p_up == 0.5);
    CHECK(untrained_forward(att, zero).p_up == 0.5);
}

TEST_CASE("seeded models are deterministic and stay in (0, 1)") {
    Rng a(77), b(77), wr(4);
    const LstmModel m1 = LstmModel::random(8, a);
    const LstmModel m2 = LstmModel::random(8, b);
    for (int t = 0; t < 20; ++t) {
        const auto w = random_window(kLookback, wr);
        const double p = untrained_forward(m1, w).p_up;
        CHECK(p == untrained_forward(m2, w).p_up);
        CHECK(p == untrained_forward(m1, w).p_up);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    Rng c(9);
    AttentionModel att = AttentionModel::random(8, c);
    att.heads = 2;
    const auto w = random_window(kLookback, wr);
    const double p = untrained_forward(att, w).p_up;
    CHECK(p == untrained_forward(att, w).p_up);
    att.heads = 3;
    CHECK_THROWS_AS(untrained_forward(att, w), std::invalid_argument);
}

TEST_CASE("weight files round-trip and reject garbage") {
    const auto dir = std::filesystem::temp_directory_path() / "evosim_weights_test";
    std::filesystem::create_directories(dir);
    Rng rng(31), wr(2);
    const LstmModel lstm = LstmModel::random(4, rng);
    const AttentionModel att = AttentionModel::random(4, rng);
    save_lstm_model(lstm, dir / "lstm.json");
    save_attention_model(att, dir / "att.json");
    const auto w = random_window(kLookback, wr);
    CHECK(untrained_forward(load_lstm_model(dir / "lstm.json"), w).p_up == untrained_forward(lstm, w).p_up);
    CHECK(untrained_forward(load_attention_model(dir / "att.json"), w).p_up == untrained_forward(att, w).p_up);
    {
        std::ofstream bad(dir / "bad.json");
        bad << "{ \"layers\": [ }";
    }
    CHECK_THROWS_AS(load_lstm_model(dir / "bad.json"), ParseError);
    std::filesystem::remove_all(dir);
}
