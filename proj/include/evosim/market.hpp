#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "evosim/matrix.hpp"

namespace evosim {

struct Candle {
    std::int64_t timestamp = 0;  // epoch seconds
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;

    friend bool operator==(const Candle&, const Candle&) = default;
};

using CandleSeries = std::vector<Candle>;

// Aligned multi-asset price panel. Every series shares one timestamp vector.
struct Universe {
    std::vector<std::string> assets;
    std::vector<CandleSeries> series;
    Matrix correlation;

    std::size_t asset_count() const noexcept { return assets.size(); }
    std::size_t length() const noexcept { return series.empty() ? 0 : series.front().size(); }
    std::int64_t interval() const;
};

inline constexpr std::size_t kLookback = 60;
inline constexpr std::size_t kFeatureCount = 3;
inline constexpr std::size_t kDefaultAtrPeriod = 14;
inline constexpr std::size_t kMaxAssets = 20;

struct FeatureConfig {
    std::size_t lookback = kLookback;
    std::size_t atr_period = kDefaultAtrPeriod;
};

// Observation tensor: lookback rows (oldest first) x 3 columns
// (close z-score, one-bar log-return, ATR / close).
struct FeatureWindow {
    Matrix values;
    std::int64_t end_timestamp = 0;

    double last_log_return() const { return values(values.rows() - 1, 1); }
};

CandleSeries gen_gbm(std::size_t n_steps, std::int64_t interval, double start_price, double drift,
                     double volatility, std::uint64_t seed, std::int64_t start_timestamp = 0);

struct UniverseParams {
    std::size_t n_assets = 20;
    std::size_t n_steps = 0;
    Matrix correlation;
    double volatility = 0.0;
    double drift = 0.0;
    double start_price = 100.0;
    std::int64_t interval = 60;
    std::int64_t start_timestamp = 0;
    std::uint64_t seed = 0;
};

Universe gen_correlated_universe(const UniverseParams& params);

// Constant off-diagonal correlation matrix.
Matrix uniform_correlation(std::size_t n, double rho);

// Symmetric square root S with S*S = m for a symmetric PSD matrix.
// Throws std::invalid_argument when an eigenvalue is negative.
Matrix psd_sqrt(const Matrix& m);

// Throws ValidationError on the first candle breaking the OHLC invariants or
// the constant-interval rule.
void validate_series(const CandleSeries& series, const std::string& asset = {});

Universe load_csv(const std::filesystem::path& path);
Universe load_csv(const std::vector<std::filesystem::path>& paths);
Universe parse_csv(std::istream& in, const std::string& source = "<stream>");
void write_csv(const Universe& universe, std::ostream& out);

FeatureWindow compute_features(const CandleSeries& series, std::size_t t,
                               const FeatureConfig& config = {});

}  // namespace evosim
