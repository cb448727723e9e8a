#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "evosim/agent.hpp"
#include "evosim/market.hpp"
#include "evosim/rng.hpp"

namespace evosim {

enum class SlippageModel : std::uint8_t { constant, noisy };

struct FrictionConfig {
    double taker_fee = 0.0004;       // fraction of fill notional, per leg
    double slippage_mean = 0.0002;   // fraction of close, always adverse
    SlippageModel slippage_model = SlippageModel::noisy;

    void validate() const;
};

struct Fill {
    std::uint64_t agent_id = 0;
    std::size_t step = 0;
    std::size_t asset = 0;
    Side side = Side::buy;
    double quantity = 0.0;
    double fill_price = 0.0;
    double reference_price = 0.0;  // bar close the fill was slipped from
    double fee_paid = 0.0;
    std::int64_t timestamp = 0;
    FillReason reason = FillReason::entry;

    double notional() const noexcept { return quantity * fill_price; }
};

// System-wide accounts. group_cash is the central treasury: it receives the
// residual equity of culled agents and pays every bailout grant.
struct Ledger {
    double initial_capital = 0.0;
    double group_cash = 0.0;
    double cumulative_fees = 0.0;
    double cumulative_injections = 0.0;
    double cumulative_recovered = 0.0;  // equity swept back from culled agents
    double realized_market_pnl = 0.0;   // price-move PnL of closed trades at fill prices
    double aum = 0.0;                   // sum of agent equities, refreshed by the engine

    // Relative residual of
    //   initial_capital = group_cash + sum(equity) + fees - (realized + unrealized market PnL)
    double conservation_error(double total_agent_equity, double unrealized_market_pnl) const;
};

struct ClosedTrade {
    std::uint64_t agent_id = 0;
    std::size_t asset = 0;
    Side side = Side::buy;
    double quantity = 0.0;
    double entry_price = 0.0;
    double exit_price = 0.0;
    double gross_pnl = 0.0;     // at fill prices
    double move_pnl = 0.0;      // at bar closes, before slippage
    double fees = 0.0;
    double net_pnl = 0.0;
    FillReason reason = FillReason::take_profit;
};

double slippage_draw(const FrictionConfig& friction, Rng& rng);

// Opens a position. Quantity is sized so margin plus the entry fee equals the
// intent's margin exactly. Throws RejectedOrder when the margin is not
// positive or exceeds available_cash.
Fill execute(const OrderIntent& intent, double available_cash, const Candle& candle, const FrictionConfig& friction,
             Rng& rng);

// Closes a position. Liquidations pay one extra slippage draw.
Fill execute_exit(const Position& position, FillReason reason, const Candle& candle, const FrictionConfig& friction,
                  Rng& rng);

// Net PnL of a round trip with per-leg fees.
double settle_trade(const Fill& entry, const Fill& exit);

struct MarkToMarket {
    double equity = 0.0;
    double unrealized = 0.0;
};

MarkToMarket mark_to_market(const Agent& agent, double current_price);

// True when equity <= maintenance_fraction * entry notional (inclusive).
bool liquidation_check(const Agent& agent, double current_price, double maintenance_fraction);

void apply_entry(Agent& agent, const Fill& fill, double leverage, Ledger& ledger);
ClosedTrade apply_exit(Agent& agent, const Fill& fill, Ledger& ledger);

void write_fill_log_header(std::ostream& out);
// `asset_names` maps asset indices to identifiers; the index is written when empty.
void write_fill_row(std::ostream& out, const Fill& fill, std::span<const std::string> asset_names = {});

}  // namespace evosim
