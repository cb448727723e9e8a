#include "evosim/perception.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "evosim/error.hpp"

namespace evosim {

std::string_view to_string(SignalSource s) {
    switch (s) {
        case SignalSource::oracle: return "oracle";
        case SignalSource::lstm: return "lstm";
        case SignalSource::attention: return "attention";
    }
    return "unknown";
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

bool all_finite(std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

Matrix random_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

std::vector<double> random_vector(std::size_t n, double bound, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return v;
}

// out = act(W z + b)
template <typename Act>
void affine(const Matrix& w, std::span<const double> z, const std::vector<double>& b, std::vector<double>& out,
            Act act) {
    out.resize(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
        double acc = b[r];
        const auto row = w.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * z[c];
        out[r] = act(acc);
    }
}

}  // namespace

LstmWeights LstmWeights::zeros(std::size_t hidden, std::size_t input) {
    const Matrix w(hidden, hidden + input);
    const std::vector<double> b(hidden, 0.0);
    return {w, w, w, w, b, b, b, b};
}

LstmWeights LstmWeights::random(std::size_t hidden, std::size_t input, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    LstmWeights w;
    w.w_forget = random_matrix(hidden, hidden + input, bound, rng);
    w.w_input = random_matrix(hidden, hidden + input, bound, rng);
    w.w_output = random_matrix(hidden, hidden + input, bound, rng);
    w.w_candidate = random_matrix(hidden, hidden + input, bound, rng);
    w.b_forget = random_vector(hidden, bound, rng);
    w.b_input = random_vector(hidden, bound, rng);
    w.b_output = random_vector(hidden, bound, rng);
    w.b_candidate = random_vector(hidden, bound, rng);
    return w;
}

void LstmWeights::validate() const {
    const std::size_t h = w_forget.rows();
    const std::size_t cols = w_forget.cols();
    require(h >= 1, "LstmWeights: hidden size must be >= 1");
    require(cols > h, "LstmWeights: input size must be >= 1");
    for (const Matrix* m : {&w_forget, &w_input, &w_output, &w_candidate}) {
        require(m->rows() == h, "LstmWeights: gate matrix rows differ from hidden size " + std::to_string(h));
        require(m->cols() == cols, "LstmWeights: gate matrix cols differ from H+F = " + std::to_string(cols));
        require(all_finite(m->data()), "LstmWeights: non-finite weight");
    }
    for (const auto* b : {&b_forget, &b_input, &b_output, &b_candidate}) {
        require(b->size() == h, "LstmWeights: bias length differs from hidden size " + std::to_string(h));
        require(all_finite(*b), "LstmWeights: non-finite bias");
    }
}

CellState lstm_cell_step(const LstmWeights& weights, const CellState& state, std::span<const double> x,
                         GateTrace* trace) {
    weights.validate();
    const std::size_t h = weights.hidden_size();
    const std::size_t f = weights.input_size();
    require(state.h.size() == h, "lstm_cell_step: hidden state length " + std::to_string(state.h.size()) +
                                     " != hidden size " + std::to_string(h));
    require(state.c.size() == h, "lstm_cell_step: cell state length " + std::to_string(state.c.size()) +
                                     " != hidden size " + std::to_string(h));
    require(x.size() == f,
            "lstm_cell_step: input length " + std::to_string(x.size()) + " != input size " + std::to_string(f));

    std::vector<double> z(state.h);
    z.insert(z.end(), x.begin(), x.end());

    const auto tanh_fn = [](double v) { return std::tanh(v); };
    GateTrace g;
    affine(weights.w_forget, z, weights.b_forget, g.forget, logistic);
    affine(weights.w_input, z, weights.b_input, g.input, logistic);
    affine(weights.w_output, z, weights.b_output, g.output, logistic);
    affine(weights.w_candidate, z, weights.b_candidate, g.candidate, tanh_fn);

    CellState next{std::vector<double>(h), std::vector<double>(h)};
    for (std::size_t i = 0; i < h; ++i) {
        next.c[i] = g.forget[i] * state.c[i] + g.input[i] * g.candidate[i];
        next.h[i] = g.output[i] * std::tanh(next.c[i]);
    }
    if (trace) *trace = std::move(g);
    return next;
}

void softmax_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const double peak = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (auto& v : row) {
            v = std::exp(v - peak);
            sum += v;
        }
        for (auto& v : row) v /= sum;
    }
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights_out) {
    const std::size_t d_k = q.cols();
    require(d_k >= 1, "attention: d_k must be >= 1");
    require(k.cols() == d_k, "attention: K has " + std::to_string(k.cols()) + " columns, Q has " + std::to_string(d_k));
    require(k.rows() >= 1, "attention: at least one key is required");
    require(v.rows() == k.rows(),
            "attention: V has " + std::to_string(v.rows()) + " rows, K has " + std::to_string(k.rows()));

    const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    Matrix logits(q.rows(), k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t j = 0; j < k.rows(); ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < d_k; ++c) dot += q(i, c) * k(j, c);
            logits(i, j) = dot * scale;
        }
    softmax_rows(logits);

    Matrix out(q.rows(), v.cols());
    for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t j = 0; j < v.rows(); ++j) {
            const double w = logits(i, j);
            for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += w * v(j, c);
        }
    if (weights_out) *weights_out = std::move(logits);
    return out;
}

LstmModel LstmModel::zeros(std::size_t hidden, std::size_t input, std::size_t n_layers) {
    LstmModel m;
    for (std::size_t l = 0; l < n_layers; ++l) m.layers.push_back(LstmWeights::zeros(hidden, l == 0 ? input : hidden));
    m.head.assign(hidden, 0.0);
    return m;
}

LstmModel LstmModel::random(std::size_t hidden, Rng& rng, std::size_t input, std::size_t n_layers) {
    LstmModel m;
    for (std::size_t l = 0; l < n_layers; ++l) m.layers.push_back(LstmWeights::random(hidden, l == 0 ? input : hidden, rng));
    m.head = random_vector(hidden, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    return m;
}

AttentionModel AttentionModel::zeros(std::size_t d_model, std::size_t input) {
    AttentionModel m;
    m.w_query = m.w_key = m.w_value = Matrix(input, d_model);
    m.head.assign(d_model, 0.0);
    return m;
}

AttentionModel AttentionModel::random(std::size_t d_model, Rng& rng, std::size_t input) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(input));
    AttentionModel m;
    m.w_query = random_matrix(input, d_model, bound, rng);
    m.w_key = random_matrix(input, d_model, bound, rng);
    m.w_value = random_matrix(input, d_model, bound, rng);
    m.head = random_vector(d_model, 1.0 / std::sqrt(static_cast<double>(d_model)), rng);
    return m;
}

namespace {

double head_output(std::span<const double> features, const std::vector<double>& head, double bias) {
    require(features.size() == head.size(), "head: weight length " + std::to_string(head.size()) +
                                                " != feature length " + std::to_string(features.size()));
    double acc = bias;
    for (std::size_t i = 0; i < head.size(); ++i) acc += head[i] * features[i];
    return acc;
}

Matrix project(const Matrix& x, const Matrix& w) {
    Matrix out(x.rows(), w.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t i = 0; i < x.cols(); ++i) {
            const double xv = x(r, i);
            for (std::size_t c = 0; c < w.cols(); ++c) out(r, c) += xv * w(i, c);
        }
    return out;
}

}  // namespace

Signal untrained_forward(const LstmModel& model, const FeatureWindow& window) {
    require(!model.layers.empty(), "untrained_forward: LSTM model has no layers");
    require(window.values.rows() >= 1, "untrained_forward: empty window");
    require(std::isfinite(model.head_bias) && all_finite(model.head), "untrained_forward: non-finite head weights");
    const std::size_t f = window.values.cols();
    require(model.layers.front().input_size() == f, "untrained_forward: layer-1 input size " +
                                                        std::to_string(model.layers.front().input_size()) +
                                                        " != feature count " + std::to_string(f));

    // Layer l consumes the full hidden sequence of layer l-1.
    std::vector<std::vector<double>> sequence;
    sequence.reserve(window.values.rows());
    for (std::size_t r = 0; r < window.values.rows(); ++r) {
        const auto row = window.values.row(r);
        sequence.emplace_back(row.begin(), row.end());
    }
    for (const LstmWeights& layer : model.layers) {
        CellState state = CellState::zeros(layer.hidden_size());
        for (auto& x : sequence) {
            state = lstm_cell_step(layer, state, x);
            x = state.h;
        }
    }
    return {logistic(head_output(sequence.back(), model.head, model.head_bias)), SignalSource::lstm};
}

Signal untrained_forward(const AttentionModel& model, const FeatureWindow& window) {
    const std::size_t f = window.values.cols();
    for (const Matrix* w : {&model.w_query, &model.w_key, &model.w_value}) {
        require(w->rows() == f, "untrained_forward: projection rows " + std::to_string(w->rows()) +
                                    " != feature count " + std::to_string(f));
        require(w->cols() == model.head.size(), "untrained_forward: projection cols " + std::to_string(w->cols()) +
                                                     " != head length " + std::to_string(model.head.size()));
        require(all_finite(w->data()), "untrained_forward: non-finite attention weight");
    }
    require(std::isfinite(model.head_bias) && all_finite(model.head), "untrained_forward: non-finite head weights");
    require(window.values.rows() >= 1, "untrained_forward: empty window");

    const std::size_t d = model.head.size();
    require(model.heads >= 1 && d % model.heads == 0,
            "untrained_forward: model width " + std::to_string(d) + " not divisible by head count " +
                std::to_string(model.heads));

    const Matrix q = project(window.values, model.w_query);
    const Matrix k = project(window.values, model.w_key);
    const Matrix v = project(window.values, model.w_value);
    Matrix out(q.rows(), d);
    const std::size_t width = d / model.heads;
    for (std::size_t h = 0; h < model.heads; ++h) {
        auto slice = [&](const Matrix& m) {
            Matrix s(m.rows(), width);
            for (std::size_t r = 0; r < m.rows(); ++r)
                for (std::size_t c = 0; c < width; ++c) s(r, c) = m(r, h * width + c);
            return s;
        };
        const Matrix part = attention(slice(q), slice(k), slice(v));
        for (std::size_t r = 0; r < part.rows(); ++r)
            for (std::size_t c = 0; c < width; ++c) out(r, h * width + c) = part(r, c);
    }
    return {logistic(head_output(out.row(out.rows() - 1), model.head, model.head_bias)), SignalSource::attention};
}

void validate_oracle(double accuracy, double strength) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0))
        throw std::invalid_argument("oracle_signal: accuracy " + std::to_string(accuracy) + " outside [0, 1]");
    if (!(strength >= 0.0 && strength <= 0.5))
        throw std::invalid_argument("oracle_signal: strength " + std::to_string(strength) + " outside [0, 0.5]");
}

Signal oracle_signal_from(Direction realized, bool correct, double strength) {
    const bool says_up = (realized == Direction::up) == correct;
    return {says_up ? 0.5 + strength : 0.5 - strength, SignalSource::oracle};
}

Signal oracle_signal(Direction realized, double accuracy, double strength, Rng& rng) {
    validate_oracle(accuracy, strength);
    return oracle_signal_from(realized, rng.bernoulli(accuracy), strength);
}

// --- weight files -----------------------------------------------------------

namespace {

using nlohmann::json;

json to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return rows;
}

Matrix matrix_from(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ParseError("weight file: " + what + " must be a non-empty array of rows", 1);
    const std::size_t cols = j.front().size();
    Matrix m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ParseError("weight file: ragged matrix " + what, 1);
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open weight file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("weight file " + path.string() + ": " + e.what(), 1);
    }
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write weight file " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

void save_lstm_model(const LstmModel& model, const std::filesystem::path& path) {
    json layers = json::array();
    for (const auto& l : model.layers) {
        layers.push_back({
            {"forget", {{"W", to_json(l.w_forget)}, {"b", l.b_forget}}},
            {"input", {{"W", to_json(l.w_input)}, {"b", l.b_input}}},
            {"output", {{"W", to_json(l.w_output)}, {"b", l.b_output}}},
            {"candidate", {{"W", to_json(l.w_candidate)}, {"b", l.b_candidate}}},
        });
    }
    write_json({{"backbone", "lstm"}, {"layers", layers}, {"head", model.head}, {"head_bias", model.head_bias}}, path);
}

LstmModel load_lstm_model(const std::filesystem::path& path) {
    const json j = read_json(path);
    try {
        LstmModel m;
        for (const auto& l : j.at("layers")) {
            LstmWeights w;
            w.w_forget = matrix_from(l.at("forget").at("W"), "forget.W");
            w.w_input = matrix_from(l.at("input").at("W"), "input.W");
            w.w_output = matrix_from(l.at("output").at("W"), "output.W");
            w.w_candidate = matrix_from(l.at("candidate").at("W"), "candidate.W");
            w.b_forget = l.at("forget").at("b").get<std::vector<double>>();
            w.b_input = l.at("input").at("b").get<std::vector<double>>();
            w.b_output = l.at("output").at("b").get<std::vector<double>>();
            w.b_candidate = l.at("candidate").at("b").get<std::vector<double>>();
            w.validate();
            m.layers.push_back(std::move(w));
        }
        m.head = j.at("head").get<std::vector<double>>();
        m.head_bias = j.value("head_bias", 0.0);
        return m;
    } catch (const json::exception& e) {
        throw ParseError("weight file " + path.string() + ": " + e.what(), 1);
    }
}

void save_attention_model(const AttentionModel& model, const std::filesystem::path& path) {
    write_json({{"backbone", "attention"},
                {"query", to_json(model.w_query)},
                {"key", to_json(model.w_key)},
                {"value", to_json(model.w_value)},
                {"head", model.head},
                {"head_bias", model.head_bias},
                {"heads", model.heads}},
               path);
}

AttentionModel load_attention_model(const std::filesystem::path& path) {
    const json j = read_json(path);
    try {
        AttentionModel m;
        m.w_query = matrix_from(j.at("query"), "query");
        m.w_key = matrix_from(j.at("key"), "key");
        m.w_value = matrix_from(j.at("value"), "value");
        m.head = j.at("head").get<std::vector<double>>();
        m.head_bias = j.value("head_bias", 0.0);
        m.heads = j.value("heads", std::size_t{1});
        return m;
    } catch (const json::exception& e) {
        throw ParseError("weight file " + path.string() + ": " + e.what(), 1);
    }
}

}  // namespace evosim
