#include "evosim/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "evosim/exchange.hpp"

namespace evosim {

std::string_view to_string(DeathCause c) {
    switch (c) {
        case DeathCause::none: return "none";
        case DeathCause::expiry: return "expiry";
        case DeathCause::bankruptcy: return "bankruptcy";
    }
    return "unknown";
}

std::string_view to_string(Archetype a) {
    switch (a) {
        case Archetype::trend_follower: return "trend_follower";
        case Archetype::grid_mean_reverter: return "grid_mean_reverter";
        case Archetype::scalper: return "scalper";
        case Archetype::contrarian: return "contrarian";
    }
    return "unknown";
}

std::optional<Archetype> archetype_from_string(std::string_view s) {
    for (Archetype a : kArchetypes)
        if (to_string(a) == s) return a;
    return std::nullopt;
}

std::string_view to_string(Side s) { return s == Side::buy ? "buy" : "sell"; }

std::string_view to_string(FillReason r) {
    switch (r) {
        case FillReason::entry: return "entry";
        case FillReason::take_profit: return "take_profit";
        case FillReason::stop_loss: return "stop_loss";
        case FillReason::liquidation: return "liquidation";
        case FillReason::expiry: return "expiry";
    }
    return "unknown";
}

void Genome::validate(const GenomeBounds& b) const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("Genome: " + what); };
    if (!(leverage >= 1.0 && leverage <= b.leverage_max)) fail("leverage outside [1, leverage_max]");
    if (!(take_profit > 0.0 && take_profit < 0.5)) fail("take_profit outside (0, 0.5)");
    if (!(stop_loss > 0.0 && stop_loss < 0.5)) fail("stop_loss outside (0, 0.5)");
    if (!(confidence_threshold >= 0.5 && confidence_threshold < 1.0)) fail("confidence_threshold outside [0.5, 1)");
}

Genome Genome::clamped(const GenomeBounds& b) const {
    Genome g = *this;
    g.leverage = std::clamp(leverage, 1.0, b.leverage_max);
    g.take_profit = std::clamp(take_profit, b.return_min, b.return_max);
    g.stop_loss = std::clamp(stop_loss, b.return_min, b.return_max);
    g.confidence_threshold = std::clamp(confidence_threshold, 0.5, b.threshold_max);
    return g;
}

Agent make_agent(std::uint64_t id, const Genome& genome, const AgentConfig& config, std::size_t asset_count,
                 std::int64_t birth_time, double cash) {
    Agent a;
    a.id = id;
    a.genome = genome;
    a.cash = cash;
    a.lifespan = config.initial_lifespan;
    a.bound_asset = asset_count == 0 ? 0 : static_cast<std::size_t>(id % asset_count);
    a.birth_time = birth_time;
    return a;
}

void update_lifespan(Agent& agent, double step_seconds, bool profitable_trade_closed, double reward,
                     std::int64_t now) {
    if (!agent.alive) return;
    const double gain = profitable_trade_closed ? reward : 0.0;
    agent.lifespan = std::max(0.0, agent.lifespan - step_seconds + gain);
    if (agent.lifespan <= 0.0) {
        agent.lifespan = 0.0;
        agent.alive = false;
        agent.death_cause = DeathCause::expiry;
        agent.death_time = now;
    }
}

std::optional<OrderIntent> decide(const Agent& agent, const Signal& signal, const FeatureWindow& features,
                                  const AgentConfig& config, Rng& /*rng*/) {
    if (!agent.alive || !agent.flat() || agent.cash <= 0.0) return std::nullopt;
    const double strength = std::abs(signal.p_up - 0.5);
    if (strength == 0.0 || strength < agent.genome.confidence_threshold - 0.5) return std::nullopt;

    const Side with_signal = signal.p_up > 0.5 ? Side::buy : Side::sell;
    Side side = with_signal;
    switch (agent.genome.archetype) {
        case Archetype::trend_follower:
        case Archetype::scalper:
            break;
        case Archetype::contrarian:
            side = opposite(with_signal);
            break;
        case Archetype::grid_mean_reverter: {
            const double last = features.values.empty() ? 0.0 : features.last_log_return();
            if (last == 0.0) return std::nullopt;
            side = last > 0.0 ? Side::sell : Side::buy;
            break;
        }
    }
    return OrderIntent{agent.bound_asset, side, agent.cash * config.position_fraction, agent.genome.leverage};
}

double leveraged_return(const Position& p, double price) {
    return sign(p.side) * (price - p.entry_price) / p.entry_price * p.leverage;
}

std::optional<ExitIntent> check_triggers(const Agent& agent, const Candle& candle,
                                         std::optional<double> maintenance_fraction) {
    if (!agent.position) return std::nullopt;
    if (maintenance_fraction && liquidation_check(agent, candle.close, *maintenance_fraction))
        return ExitIntent{FillReason::liquidation};
    const double r = leveraged_return(*agent.position, candle.close);
    if (r <= -agent.genome.stop_loss) return ExitIntent{FillReason::stop_loss};
    if (r >= agent.genome.take_profit) return ExitIntent{FillReason::take_profit};
    return std::nullopt;
}

}  // namespace evosim
