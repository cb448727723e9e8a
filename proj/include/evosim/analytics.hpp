#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evosim/agent.hpp"
#include "evosim/exchange.hpp"
#include "evosim/matrix.hpp"
#include "evosim/perception.hpp"

namespace evosim {

// Expected fractional return per trade: W*(R*risk) - (1-W)*risk - cost.
double expected_value(double win_rate, double reward_to_risk, double risk, double cost);

// (1 + cost_ratio) / (1 + R). May exceed 1, in which case no win rate breaks even.
double breakeven_win_rate(double cost_ratio, double reward_to_risk);

inline bool breakeven_feasible(double w) { return w <= 1.0; }

// Share of bars where sign(p_up - 0.5) matches the realized move; a p_up of
// exactly 0.5 scores one half.
double directional_accuracy(std::span<const double> p_up, std::span<const Direction> realized);

// Mean pairwise cosine similarity of the non-zero exposure vectors. With
// `metric_root` = S (S*S = C) similarity is measured in the C inner product,
// i.e. cos(Sa, Sb). nullopt when fewer than two vectors are non-zero.
std::optional<double> phenotypic_convergence(std::span<const std::vector<double>> exposures,
                                             const Matrix* metric_root = nullptr);

// Signed exposure per asset: side * quantity * price / equity.
std::vector<std::vector<double>> exposure_vectors(std::span<const Agent> agents, std::span<const double> prices,
                                                  std::size_t asset_count);

// fees / gross trade PnL. nullopt without closed trades; +inf when gross PnL
// is not positive.
std::optional<double> churn_ratio(std::size_t closed_trades, double cumulative_fees, double gross_trade_pnl);

struct CascadeEvent {
    std::size_t bar = 0;
    std::size_t count = 0;
    double notional = 0.0;
};

// Windows of `window_bars` bars opening at a bar with a forced exit; an event
// when the window holds >= threshold stop-loss or liquidation fills. Windows
// never overlap.
std::vector<CascadeEvent> detect_cascades(std::span<const Fill> fills, std::size_t window_bars, std::size_t threshold);

struct LifeRecord {
    std::uint64_t id = 0;
    std::int64_t birth_time = 0;
    std::int64_t death_time = 0;
    DeathCause death_cause = DeathCause::none;
    std::size_t entries = 0;
    double confidence_threshold = 0.5;
    Archetype archetype = Archetype::trend_follower;
};

// Fraction of every agent ever alive that never traded and died of expiry.
double starvation_fraction(std::span<const LifeRecord> lives);

}  // namespace evosim
