#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "evosim/market.hpp"
#include "evosim/matrix.hpp"
#include "evosim/rng.hpp"

namespace evosim {

enum class SignalSource { oracle, lstm, attention };
enum class Direction { up, down };

std::string_view to_string(SignalSource s);

struct Signal {
    double p_up = 0.5;
    SignalSource source = SignalSource::oracle;
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Weights of one LSTM cell. Each gate matrix is H x (H + F) and acts on the
// concatenation [h_prev, x].
struct LstmWeights {
    Matrix w_forget, w_input, w_output, w_candidate;
    std::vector<double> b_forget, b_input, b_output, b_candidate;

    static LstmWeights zeros(std::size_t hidden, std::size_t input);
    static LstmWeights random(std::size_t hidden, std::size_t input, Rng& rng);

    std::size_t hidden_size() const noexcept { return w_forget.rows(); }
    std::size_t input_size() const noexcept { return w_forget.cols() - w_forget.rows(); }
    void validate() const;
};

struct CellState {
    std::vector<double> h;
    std::vector<double> c;

    static CellState zeros(std::size_t hidden) { return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)}; }
};

// Gate activations from the most recent step, exposed for inspection.
struct GateTrace {
    std::vector<double> forget, input, output, candidate;
};

CellState lstm_cell_step(const LstmWeights& weights, const CellState& state, std::span<const double> x,
                         GateTrace* trace = nullptr);

// Row-wise numerically stable softmax, in place.
void softmax_rows(Matrix& logits);

// softmax(Q K^T / sqrt(d_k)) V. When `weights_out` is given it receives the
// n x m attention weights.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights_out = nullptr);

// Stacked LSTM backbone plus a logistic scalar head on the last hidden state.
struct LstmModel {
    std::vector<LstmWeights> layers;
    std::vector<double> head;
    double head_bias = 0.0;

    static LstmModel zeros(std::size_t hidden, std::size_t input = kFeatureCount, std::size_t n_layers = 2);
    static LstmModel random(std::size_t hidden, Rng& rng, std::size_t input = kFeatureCount, std::size_t n_layers = 2);
};

// Single-head self-attention backbone: projections F -> d, last output row
// feeds the logistic head.
struct AttentionModel {
    Matrix w_query, w_key, w_value;  // each F x d
    std::vector<double> head;        // length d
    double head_bias = 0.0;
    std::size_t heads = 1;

    static AttentionModel zeros(std::size_t d_model, std::size_t input = kFeatureCount);
    static AttentionModel random(std::size_t d_model, Rng& rng, std::size_t input = kFeatureCount);
};

Signal untrained_forward(const LstmModel& model, const FeatureWindow& window);
Signal untrained_forward(const AttentionModel& model, const FeatureWindow& window);

// Calibrated stand-in for a trained classifier: reports the realized
// direction with probability `accuracy`, at distance `strength` from 0.5.
Signal oracle_signal(Direction realized, double accuracy, double strength, Rng& rng);

// Same rule with the correctness coin supplied by the caller, so several
// assets can share one draw.
Signal oracle_signal_from(Direction realized, bool correct, double strength);

void validate_oracle(double accuracy, double strength);

LstmModel load_lstm_model(const std::filesystem::path& path);
void save_lstm_model(const LstmModel& model, const std::filesystem::path& path);
AttentionModel load_attention_model(const std::filesystem::path& path);
void save_attention_model(const AttentionModel& model, const std::filesystem::path& path);

}  // namespace evosim
