#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "evosim/market.hpp"
#include "evosim/perception.hpp"
#include "evosim/rng.hpp"

namespace evosim {

enum class Archetype : std::uint8_t { trend_follower, grid_mean_reverter, scalper, contrarian };
inline constexpr std::size_t kArchetypeCount = 4;
inline constexpr std::array<Archetype, kArchetypeCount> kArchetypes{
    Archetype::trend_follower, Archetype::grid_mean_reverter, Archetype::scalper, Archetype::contrarian};

std::string_view to_string(Archetype a);
std::optional<Archetype> archetype_from_string(std::string_view s);

// buy opens a long, sell opens a short.
enum class Side : std::int8_t { buy = 1, sell = -1 };

constexpr double sign(Side s) noexcept { return s == Side::buy ? 1.0 : -1.0; }
constexpr Side opposite(Side s) noexcept { return s == Side::buy ? Side::sell : Side::buy; }
std::string_view to_string(Side s);

struct GenomeBounds {
    double leverage_max = 10.0;
    double return_min = 1e-4;   // take-profit / stop-loss lower clamp
    double return_max = 0.4999;  // open interval (0, 0.5)
    double threshold_max = 0.999;
};

struct Genome {
    double leverage = 1.0;
    double take_profit = 0.02;
    double stop_loss = 0.02;
    double confidence_threshold = 0.5;
    Archetype archetype = Archetype::trend_follower;

    void validate(const GenomeBounds& bounds = {}) const;
    Genome clamped(const GenomeBounds& bounds = {}) const;

    friend bool operator==(const Genome&, const Genome&) = default;
};

struct Position {
    std::size_t asset = 0;
    Side side = Side::buy;
    double quantity = 0.0;
    double entry_price = 0.0;       // slipped fill price
    double entry_reference = 0.0;   // bar close at entry
    double leverage = 1.0;
    double entry_fee = 0.0;
    std::int64_t entry_timestamp = 0;

    double notional() const noexcept { return quantity * entry_price; }
};

enum class DeathCause : std::uint8_t { none, expiry, bankruptcy };
std::string_view to_string(DeathCause c);

struct AgentStats {
    std::size_t entries = 0;
    std::size_t closed_trades = 0;
    std::size_t profitable_trades = 0;
    double gross_pnl = 0.0;  // price-move PnL at fill prices, summed over closed trades
    double fees_paid = 0.0;
    double realized_pnl = 0.0;        // net of fees
    double epoch_realized_pnl = 0.0;  // reset every evolution pass
    std::size_t bailout_count = 0;
};

struct AgentConfig {
    double initial_cash = 100.0;
    double initial_lifespan = 3600.0;  // seconds
    double metabolic_reward = 30.0;    // seconds per profitable close
    double position_fraction = 1.0;    // share of cash posted as margin
};

struct Agent {
    std::uint64_t id = 0;
    Genome genome;
    double cash = 0.0;
    std::optional<Position> position;
    double lifespan = 0.0;
    bool alive = true;
    std::size_t bound_asset = 0;
    AgentStats stats;
    std::int64_t birth_time = 0;
    std::int64_t death_time = 0;
    DeathCause death_cause = DeathCause::none;
    std::optional<std::uint64_t> parent_id;
    bool closed_profitable_this_step = false;

    bool flat() const noexcept { return !position.has_value(); }
};

Agent make_agent(std::uint64_t id, const Genome& genome, const AgentConfig& config, std::size_t asset_count,
                 std::int64_t birth_time, double cash);

// Metabolic update: tau <- max(0, tau - step + reward * [profitable close]).
// Marks the agent dead (expiry) when tau reaches zero. No-op on dead agents.
void update_lifespan(Agent& agent, double step_seconds, bool profitable_trade_closed, double reward,
                     std::int64_t now = 0);

struct OrderIntent {
    std::size_t asset = 0;
    Side side = Side::buy;
    double margin = 0.0;
    double leverage = 1.0;
};

// Policy table per archetype. Returns an open intent only for a confident
// signal (|p_up - 0.5| >= threshold - 0.5) and a flat, living agent.
std::optional<OrderIntent> decide(const Agent& agent, const Signal& signal, const FeatureWindow& features,
                                  const AgentConfig& config, Rng& rng);

enum class FillReason : std::uint8_t { entry, take_profit, stop_loss, liquidation, expiry };
std::string_view to_string(FillReason r);
constexpr bool is_forced(FillReason r) noexcept {
    return r == FillReason::stop_loss || r == FillReason::liquidation;
}

struct ExitIntent {
    FillReason reason = FillReason::take_profit;
};

// Leveraged return of the open position at `price`.
double leveraged_return(const Position& position, double price);

// Liquidation first (when a maintenance fraction is given), then stop-loss,
// then take-profit; all evaluated on the bar close.
std::optional<ExitIntent> check_triggers(const Agent& agent, const Candle& candle,
                                         std::optional<double> maintenance_fraction = std::nullopt);

}  // namespace evosim
