#include "evosim/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace evosim {

double expected_value(double win_rate, double reward_to_risk, double risk, double cost) {
    return win_rate * (reward_to_risk * risk) - (1.0 - win_rate) * risk - cost;
}

double breakeven_win_rate(double cost_ratio, double reward_to_risk) {
    if (!(reward_to_risk > 0.0)) throw std::invalid_argument("breakeven_win_rate: R must be positive");
    if (!(cost_ratio >= 0.0)) throw std::invalid_argument("breakeven_win_rate: cost ratio must be >= 0");
    return (1.0 + cost_ratio) / (1.0 + reward_to_risk);
}

double directional_accuracy(std::span<const double> p_up, std::span<const Direction> realized) {
    if (p_up.empty()) throw std::invalid_argument("directional_accuracy: empty input");
    if (p_up.size() != realized.size()) throw std::invalid_argument("directional_accuracy: length mismatch");
    double score = 0.0;
    for (std::size_t i = 0; i < p_up.size(); ++i) {
        if (p_up[i] == 0.5) {
            score += 0.5;
        } else if ((p_up[i] > 0.5) == (realized[i] == Direction::up)) {
            score += 1.0;
        }
    }
    return score / static_cast<double>(p_up.size());
}

std::optional<double> phenotypic_convergence(std::span<const std::vector<double>> exposures,
                                             const Matrix* metric_root) {
    // Sum of unit vectors: |sum u|^2 = n + sum_{i != j} cos_ij.
    std::vector<double> sum;
    std::size_t n = 0;
    std::vector<double> v;
    for (const auto& e : exposures) {
        if (metric_root) {
            if (metric_root->cols() != e.size()) throw std::invalid_argument("phenotypic_convergence: metric size");
            v.assign(metric_root->rows(), 0.0);
            for (std::size_t r = 0; r < metric_root->rows(); ++r)
                for (std::size_t c = 0; c < e.size(); ++c) v[r] += (*metric_root)(r, c) * e[c];
        } else {
            v = e;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (!(norm > 0.0)) continue;
        norm = std::sqrt(norm);
        if (sum.empty()) sum.assign(v.size(), 0.0);
        if (sum.size() != v.size()) throw std::invalid_argument("phenotypic_convergence: ragged exposures");
        for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i] / norm;
        ++n;
    }
    if (n < 2) return std::nullopt;
    double sq = 0.0;
    for (double x : sum) sq += x * x;
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
    return std::clamp((sq - static_cast<double>(n)) / pairs, -1.0, 1.0);
}

std::vector<std::vector<double>> exposure_vectors(std::span<const Agent> agents, std::span<const double> prices,
                                                  std::size_t asset_count) {
    std::vector<std::vector<double>> out;
    out.reserve(agents.size());
    for (const Agent& a : agents) {
        std::vector<double> e(asset_count, 0.0);
        if (a.position && a.position->asset < asset_count) {
            const double price = prices[a.position->asset];
            const double equity = mark_to_market(a, price).equity;
            if (equity > 0.0) e[a.position->asset] = sign(a.position->side) * a.position->quantity * price / equity;
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::optional<double> churn_ratio(std::size_t closed_trades, double cumulative_fees, double gross_trade_pnl) {
    if (closed_trades == 0) return std::nullopt;
    if (!(gross_trade_pnl > 0.0)) return std::numeric_limits<double>::infinity();
    return cumulative_fees / gross_trade_pnl;
}

std::vector<CascadeEvent> detect_cascades(std::span<const Fill> fills, std::size_t window_bars, std::size_t threshold) {
    std::vector<CascadeEvent> events;
    if (window_bars == 0) return events;
    std::map<std::size_t, std::pair<std::size_t, double>> per_bar;  // bar -> (count, notional)
    for (const Fill& f : fills) {
        if (!is_forced(f.reason)) continue;
        auto& slot = per_bar[f.step];
        slot.first += 1;
        slot.second += f.notional();
    }
    auto it = per_bar.begin();
    while (it != per_bar.end()) {
        const std::size_t start = it->first;
        const std::size_t end = start + window_bars;  // exclusive
        std::size_t count = 0;
        double notional = 0.0;
        auto jt = it;
        for (; jt != per_bar.end() && jt->first < end; ++jt) {
            count += jt->second.first;
            notional += jt->second.second;
        }
        if (count >= threshold && count > 0) {
            events.push_back({start, count, notional});
            it = jt;
        } else {
            ++it;
        }
    }
    return events;
}

double starvation_fraction(std::span<const LifeRecord> lives) {
    if (lives.empty()) return 0.0;
    std::size_t starved = 0;
    for (const auto& l : lives)
        if (l.entries == 0 && l.death_cause == DeathCause::expiry) ++starved;
    return static_cast<double>(starved) / static_cast<double>(lives.size());
}

}  // namespace evosim
