#include "evosim/market.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "evosim/error.hpp"
#include "evosim/rng.hpp"

namespace evosim {

namespace {

// Intrabar range: each side extends by half a volatility draw.
void bracket(Candle& c, double volatility, Rng& rng, double volume_scale) {
    const double up = std::abs(rng.normal()) * 0.5 * volatility;
    const double down = std::abs(rng.normal()) * 0.5 * volatility;
    c.high = std::max(c.open, c.close) * std::exp(up);
    c.low = std::min(c.open, c.close) * std::exp(-down);
    c.volume = volume_scale * std::exp(0.25 * rng.normal());
}

bool is_allowed_interval(std::int64_t dt) { return dt == 60 || dt == 900; }

std::string describe(const std::string& asset, const Candle& c) {
    std::ostringstream os;
    if (!asset.empty()) os << asset << " ";
    os << "timestamp " << c.timestamp;
    return os.str();
}

}  // namespace

std::int64_t Universe::interval() const {
    if (series.empty() || series.front().size() < 2) return 60;
    return series.front()[1].timestamp - series.front()[0].timestamp;
}

CandleSeries gen_gbm(std::size_t n_steps, std::int64_t interval, double start_price, double drift,
                     double volatility, std::uint64_t seed, std::int64_t start_timestamp) {
    if (n_steps < 1) throw std::invalid_argument("gen_gbm: n_steps must be >= 1");
    if (!(start_price > 0.0) || !std::isfinite(start_price))
        throw std::invalid_argument("gen_gbm: start_price must be positive");
    if (!(volatility >= 0.0)) throw std::invalid_argument("gen_gbm: volatility must be >= 0");
    if (interval <= 0) throw std::invalid_argument("gen_gbm: interval must be positive");

    Rng rng(seed);
    CandleSeries out;
    out.reserve(n_steps);
    // Ito-corrected log increment keeps the price itself a martingale at drift 0.
    const double log_drift = drift - 0.5 * volatility * volatility;
    double price = start_price;
    for (std::size_t k = 0; k < n_steps; ++k) {
        Candle c;
        c.timestamp = start_timestamp + static_cast<std::int64_t>(k) * interval;
        c.open = price;
        if (k > 0) price *= std::exp(log_drift + volatility * rng.normal());
        c.close = price;
        bracket(c, volatility, rng, 1000.0);
        out.push_back(c);
    }
    return out;
}

Matrix uniform_correlation(std::size_t n, double rho) {
    Matrix m(n, n, rho);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix psd_sqrt(const Matrix& m) {
    const auto n = static_cast<Eigen::Index>(m.rows());
    if (m.rows() != m.cols()) throw std::invalid_argument("psd_sqrt: matrix is not square");
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double x = m(i, j);
            if (std::abs(x - m(j, i)) > 1e-12)
                throw std::invalid_argument("psd_sqrt: matrix is not symmetric");
            a(i, j) = x;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) throw std::invalid_argument("psd_sqrt: eigensolver failed");
    Eigen::VectorXd ev = solver.eigenvalues();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (ev(i) < -1e-10) {
            std::ostringstream os;
            os << "correlation matrix is not positive semi-definite: eigenvalue " << ev(i)
               << " is negative";
            throw std::invalid_argument(os.str());
        }
        ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    const Eigen::MatrixXd s =
        solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().transpose();
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = s(i, j);
    return out;
}

Universe gen_correlated_universe(const UniverseParams& p) {
    if (p.n_assets < 1 || p.n_assets > kMaxAssets)
        throw std::invalid_argument("gen_correlated_universe: n_assets must be in [1, 20]");
    if (p.n_steps < 1) throw std::invalid_argument("gen_correlated_universe: n_steps must be >= 1");
    if (!(p.start_price > 0.0)) throw std::invalid_argument("gen_correlated_universe: start_price must be positive");
    if (!(p.volatility >= 0.0)) throw std::invalid_argument("gen_correlated_universe: volatility must be >= 0");

    Matrix corr = p.correlation.empty() ? Matrix::identity(p.n_assets) : p.correlation;
    if (corr.rows() != p.n_assets || corr.cols() != p.n_assets)
        throw std::invalid_argument("gen_correlated_universe: correlation must be n_assets x n_assets");
    for (std::size_t i = 0; i < p.n_assets; ++i) {
        if (std::abs(corr(i, i) - 1.0) > 1e-12)
            throw std::invalid_argument("gen_correlated_universe: correlation diagonal must be 1");
        for (std::size_t j = 0; j < p.n_assets; ++j)
            if (corr(i, j) < -1.0 || corr(i, j) > 1.0)
                throw std::invalid_argument("gen_correlated_universe: correlation entries must lie in [-1, 1]");
    }
    const Matrix root = psd_sqrt(corr);

    Universe u;
    u.correlation = corr;
    u.series.assign(p.n_assets, CandleSeries(p.n_steps));
    for (std::size_t a = 0; a < p.n_assets; ++a) {
        std::ostringstream name;
        name << "A" << std::setw(2) << std::setfill('0') << a;
        u.assets.push_back(name.str());
    }

    Rng rng(p.seed);
    const double log_drift = p.drift - 0.5 * p.volatility * p.volatility;
    std::vector<double> price(p.n_assets, p.start_price);
    std::vector<double> z(p.n_assets);
    for (std::size_t k = 0; k < p.n_steps; ++k) {
        if (k > 0) {
            for (auto& x : z) x = rng.normal();
            for (std::size_t a = 0; a < p.n_assets; ++a) {
                double shock = 0.0;
                for (std::size_t b = 0; b < p.n_assets; ++b) shock += root(a, b) * z[b];
                u.series[a][k].open = price[a];
                price[a] *= std::exp(log_drift + p.volatility * shock);
            }
        } else {
            for (std::size_t a = 0; a < p.n_assets; ++a) u.series[a][k].open = price[a];
        }
        for (std::size_t a = 0; a < p.n_assets; ++a) {
            Candle& c = u.series[a][k];
            c.timestamp = p.start_timestamp + static_cast<std::int64_t>(k) * p.interval;
            c.close = price[a];
            bracket(c, p.volatility, rng, 1000.0);
        }
    }
    return u;
}

void validate_series(const CandleSeries& series, const std::string& asset) {
    std::int64_t dt = 0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const Candle& c = series[k];
        const bool finite = std::isfinite(c.open) && std::isfinite(c.high) && std::isfinite(c.low) &&
                            std::isfinite(c.close) && std::isfinite(c.volume);
        if (!finite || c.open <= 0.0 || c.high <= 0.0 || c.low <= 0.0 || c.close <= 0.0)
            throw ValidationError("non-positive or non-finite price at " + describe(asset, c));
        if (c.high < c.low) throw ValidationError("high < low at " + describe(asset, c));
        if (c.low > std::min(c.open, c.close))
            throw ValidationError("low above min(open, close) at " + describe(asset, c));
        if (c.high < std::max(c.open, c.close))
            throw ValidationError("high below max(open, close) at " + describe(asset, c));
        if (c.volume < 0.0) throw ValidationError("negative volume at " + describe(asset, c));
        if (k == 0) continue;
        const std::int64_t step = c.timestamp - series[k - 1].timestamp;
        if (step <= 0) throw ValidationError("timestamps not strictly increasing at " + describe(asset, c));
        if (k == 1) {
            if (!is_allowed_interval(step))
                throw ValidationError("interval must be 60 or 900 seconds at " + describe(asset, c));
            dt = step;
        } else if (step != dt) {
            throw ValidationError("interval changes at " + describe(asset, c));
        }
    }
}

namespace {

double parse_double(std::string_view field, std::size_t line, const char* name) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end || field.empty())
        throw ParseError(std::string("malformed ") + name + " '" + std::string(field) + "'", line);
    return v;
}

std::int64_t parse_int(std::string_view field, std::size_t line) {
    std::int64_t v = 0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end || field.empty())
        throw ParseError("malformed timestamp '" + std::string(field) + "'", line);
    return v;
}

std::vector<std::string_view> split(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(',', start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

struct RawPanel {
    std::vector<std::string> order;
    std::map<std::string, CandleSeries> by_asset;
};

void parse_into(std::istream& in, const std::string& source, RawPanel& panel) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != "asset,timestamp,open,high,low,close,volume")
                throw ParseError(source + ": unexpected header '" + line + "'", line_no);
            header_seen = true;
            continue;
        }
        const auto f = split(line);
        if (f.size() != 7)
            throw ParseError(source + ": expected 7 fields, got " + std::to_string(f.size()), line_no);
        if (f[0].empty()) throw ParseError(source + ": empty asset", line_no);
        Candle c;
        c.timestamp = parse_int(f[1], line_no);
        c.open = parse_double(f[2], line_no, "open");
        c.high = parse_double(f[3], line_no, "high");
        c.low = parse_double(f[4], line_no, "low");
        c.close = parse_double(f[5], line_no, "close");
        c.volume = parse_double(f[6], line_no, "volume");
        std::string asset(f[0]);
        auto [it, inserted] = panel.by_asset.try_emplace(asset);
        if (inserted) panel.order.push_back(asset);
        it->second.push_back(c);
    }
    if (!header_seen) throw ParseError(source + ": missing header", line_no == 0 ? 1 : line_no);
}

// Sample correlation of one-bar log-returns; identity when too short.
Matrix sample_correlation(const std::vector<CandleSeries>& series) {
    const std::size_t n = series.size();
    const std::size_t len = series.empty() ? 0 : series.front().size();
    Matrix corr = Matrix::identity(n);
    if (len < 3) return corr;
    std::vector<std::vector<double>> r(n, std::vector<double>(len - 1));
    std::vector<double> mean(n, 0.0), sd(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t k = 1; k < len; ++k) r[a][k - 1] = std::log(series[a][k].close / series[a][k - 1].close);
        for (double x : r[a]) mean[a] += x;
        mean[a] /= static_cast<double>(len - 1);
        for (double x : r[a]) sd[a] += (x - mean[a]) * (x - mean[a]);
        sd[a] = std::sqrt(sd[a]);
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            if (sd[a] == 0.0 || sd[b] == 0.0) continue;
            double cov = 0.0;
            for (std::size_t k = 0; k + 1 < len; ++k) cov += (r[a][k] - mean[a]) * (r[b][k] - mean[b]);
            const double rho = std::clamp(cov / (sd[a] * sd[b]), -1.0, 1.0);
            corr(a, b) = corr(b, a) = rho;
        }
    return corr;
}

Universe finish(RawPanel panel) {
    if (panel.order.empty()) throw ValidationError("CSV contains no candles");
    if (panel.order.size() > kMaxAssets) throw ValidationError("CSV holds more than 20 assets");
    Universe u;
    for (const auto& name : panel.order) {
        auto& s = panel.by_asset[name];
        validate_series(s, name);
        u.assets.push_back(name);
        u.series.push_back(std::move(s));
    }
    const auto& ref = u.series.front();
    for (std::size_t a = 1; a < u.series.size(); ++a) {
        const auto& s = u.series[a];
        if (s.size() != ref.size())
            throw AlignmentError("asset " + u.assets[a] + " has " + std::to_string(s.size()) +
                                 " candles, " + u.assets[0] + " has " + std::to_string(ref.size()));
        for (std::size_t k = 0; k < s.size(); ++k)
            if (s[k].timestamp != ref[k].timestamp)
                throw AlignmentError("asset " + u.assets[a] + " timestamp " + std::to_string(s[k].timestamp) +
                                     " does not align with " + u.assets[0] + " timestamp " +
                                     std::to_string(ref[k].timestamp));
    }
    u.correlation = sample_correlation(u.series);
    return u;
}

}  // namespace

Universe parse_csv(std::istream& in, const std::string& source) {
    RawPanel panel;
    parse_into(in, source, panel);
    return finish(std::move(panel));
}

Universe load_csv(const std::filesystem::path& path) {
    return load_csv(std::vector<std::filesystem::path>{path});
}

Universe load_csv(const std::vector<std::filesystem::path>& paths) {
    RawPanel panel;
    for (const auto& p : paths) {
        std::ifstream in(p);
        if (!in) throw std::runtime_error("cannot open " + p.string());
        parse_into(in, p.string(), panel);
    }
    return finish(std::move(panel));
}

void write_csv(const Universe& u, std::ostream& out) {
    out << "asset,timestamp,open,high,low,close,volume\n";
    out << std::setprecision(17);
    for (std::size_t a = 0; a < u.asset_count(); ++a)
        for (const Candle& c : u.series[a])
            out << u.assets[a] << ',' << c.timestamp << ',' << c.open << ',' << c.high << ',' << c.low << ','
                << c.close << ',' << c.volume << '\n';
}

FeatureWindow compute_features(const CandleSeries& series, std::size_t t, const FeatureConfig& config) {
    const std::size_t T = config.lookback;
    if (T < 1) throw std::invalid_argument("compute_features: lookback must be >= 1");
    if (config.atr_period < 1) throw std::invalid_argument("compute_features: atr_period must be >= 1");
    if (t >= series.size())
        throw WindowUnderflow("compute_features: bar " + std::to_string(t) + " beyond series end");
    if (t + 1 < T || t < config.atr_period)
        throw WindowUnderflow("compute_features: bar " + std::to_string(t) + " has insufficient history for lookback " +
                              std::to_string(T) + " and ATR period " + std::to_string(config.atr_period));

    const std::size_t first = t + 1 - T;
    FeatureWindow w{Matrix(T, kFeatureCount), series[t].timestamp};

    double mean = 0.0;
    for (std::size_t k = first; k <= t; ++k) mean += series[k].close;
    mean /= static_cast<double>(T);
    double var = 0.0;
    for (std::size_t k = first; k <= t; ++k) var += (series[k].close - mean) * (series[k].close - mean);
    const double sd = std::sqrt(var / static_cast<double>(T));

    auto true_range = [&](std::size_t k) {
        const Candle& c = series[k];
        if (k == 0) return c.high - c.low;
        const double prev = series[k - 1].close;
        return std::max({c.high - c.low, std::abs(c.high - prev), std::abs(c.low - prev)});
    };

    for (std::size_t row = 0; row < T; ++row) {
        const std::size_t k = first + row;
        const double close = series[k].close;
        w.values(row, 0) = sd > 0.0 ? (close - mean) / sd : 0.0;
        w.values(row, 1) = k == 0 ? 0.0 : std::log(close / series[k - 1].close);
        const std::size_t from = k + 1 >= config.atr_period ? k + 1 - config.atr_period : 0;
        double tr = 0.0;
        for (std::size_t j = from; j <= k; ++j) tr += true_range(j);
        w.values(row, 2) = tr / static_cast<double>(k - from + 1) / close;
    }
    return w;
}

}  // namespace evosim
