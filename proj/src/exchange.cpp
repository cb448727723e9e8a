#include "evosim/exchange.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "evosim/error.hpp"

namespace evosim {

void FrictionConfig::validate() const {
    if (!(taker_fee >= 0.0) || !std::isfinite(taker_fee)) throw ConfigError("friction.taker_fee", "must be >= 0");
    if (!(slippage_mean >= 0.0) || !std::isfinite(slippage_mean))
        throw ConfigError("friction.slippage_mean", "must be >= 0");
}

double Ledger::conservation_error(double total_agent_equity, double unrealized_market_pnl) const {
    const double rhs =
        group_cash + total_agent_equity + cumulative_fees - (realized_market_pnl + unrealized_market_pnl);
    const double scale = std::max(std::abs(initial_capital), 1.0);
    return std::abs(initial_capital - rhs) / scale;
}

double slippage_draw(const FrictionConfig& friction, Rng& rng) {
    if (friction.slippage_mean == 0.0) return 0.0;
    if (friction.slippage_model == SlippageModel::constant) return friction.slippage_mean;
    return rng.exponential(friction.slippage_mean);
}

namespace {

double slipped(double close, Side side, double s) { return side == Side::buy ? close * (1.0 + s) : close * (1.0 - s); }

}  // namespace

Fill execute(const OrderIntent& intent, double available_cash, const Candle& candle, const FrictionConfig& friction,
             Rng& rng) {
    if (!(intent.margin > 0.0) || !std::isfinite(intent.margin))
        throw RejectedOrder("order margin must be positive");
    if (intent.margin > available_cash * (1.0 + 1e-12))
        throw RejectedOrder("order margin " + std::to_string(intent.margin) + " exceeds available cash " +
                            std::to_string(available_cash));
    if (!(intent.leverage >= 1.0)) throw RejectedOrder("leverage below 1");

    Fill f;
    f.asset = intent.asset;
    f.side = intent.side;
    f.reference_price = candle.close;
    f.fill_price = slipped(candle.close, intent.side, slippage_draw(friction, rng));
    if (!(f.fill_price > 0.0)) throw RejectedOrder("slipped price is not positive");
    // margin + fee == intent.margin
    f.quantity = intent.margin / (f.fill_price * (1.0 / intent.leverage + friction.taker_fee));
    f.fee_paid = f.fill_price * f.quantity * friction.taker_fee;
    f.timestamp = candle.timestamp;
    f.reason = FillReason::entry;
    return f;
}

Fill execute_exit(const Position& position, FillReason reason, const Candle& candle, const FrictionConfig& friction,
                  Rng& rng) {
    Fill f;
    f.asset = position.asset;
    f.side = opposite(position.side);
    f.quantity = position.quantity;
    f.reference_price = candle.close;
    double s = slippage_draw(friction, rng);
    if (reason == FillReason::liquidation) s += slippage_draw(friction, rng);
    // A sell can slip at most to a near-zero price.
    f.fill_price = std::max(slipped(candle.close, f.side, s), candle.close * 1e-9);
    f.fee_paid = f.fill_price * f.quantity * friction.taker_fee;
    f.timestamp = candle.timestamp;
    f.reason = reason;
    return f;
}

double settle_trade(const Fill& entry, const Fill& exit) {
    if (entry.asset != exit.asset) throw std::invalid_argument("settle_trade: asset mismatch");
    if (std::abs(entry.quantity - exit.quantity) > 1e-12 * std::max(1.0, std::abs(entry.quantity)))
        throw std::invalid_argument("settle_trade: quantity mismatch");
    if (entry.side == exit.side) throw std::invalid_argument("settle_trade: legs must have opposite sides");
    return sign(entry.side) * (exit.fill_price - entry.fill_price) * entry.quantity - (entry.fee_paid + exit.fee_paid);
}

MarkToMarket mark_to_market(const Agent& agent, double current_price) {
    if (!agent.position) return {agent.cash, 0.0};
    const Position& p = *agent.position;
    const double unrealized = sign(p.side) * (current_price - p.entry_price) * p.quantity;
    return {agent.cash + unrealized, unrealized};
}

bool liquidation_check(const Agent& agent, double current_price, double maintenance_fraction) {
    if (!agent.position) return false;
    return mark_to_market(agent, current_price).equity <= maintenance_fraction * agent.position->notional();
}

void apply_entry(Agent& agent, const Fill& fill, double leverage, Ledger& ledger) {
    if (agent.position) throw std::logic_error("apply_entry: agent already holds a position");
    Position p;
    p.asset = fill.asset;
    p.side = fill.side;
    p.quantity = fill.quantity;
    p.entry_price = fill.fill_price;
    p.entry_reference = fill.reference_price;
    p.leverage = leverage;
    p.entry_fee = fill.fee_paid;
    p.entry_timestamp = fill.timestamp;
    agent.position = p;
    agent.cash -= fill.fee_paid;
    agent.stats.entries += 1;
    agent.stats.fees_paid += fill.fee_paid;
    ledger.cumulative_fees += fill.fee_paid;
}

ClosedTrade apply_exit(Agent& agent, const Fill& fill, Ledger& ledger) {
    if (!agent.position) throw std::logic_error("apply_exit: agent holds no position");
    const Position p = *agent.position;
    ClosedTrade t;
    t.agent_id = agent.id;
    t.asset = p.asset;
    t.side = p.side;
    t.quantity = p.quantity;
    t.entry_price = p.entry_price;
    t.exit_price = fill.fill_price;
    t.gross_pnl = sign(p.side) * (fill.fill_price - p.entry_price) * p.quantity;
    t.move_pnl = sign(p.side) * (fill.reference_price - p.entry_reference) * p.quantity;
    t.fees = p.entry_fee + fill.fee_paid;
    t.net_pnl = t.gross_pnl - t.fees;
    t.reason = fill.reason;

    agent.position.reset();
    agent.cash += t.gross_pnl - fill.fee_paid;
    agent.stats.closed_trades += 1;
    agent.stats.gross_pnl += t.gross_pnl;
    agent.stats.fees_paid += fill.fee_paid;
    agent.stats.realized_pnl += t.net_pnl;
    agent.stats.epoch_realized_pnl += t.net_pnl;
    if (t.net_pnl > 0.0) {
        agent.stats.profitable_trades += 1;
        agent.closed_profitable_this_step = true;
    }
    ledger.cumulative_fees += fill.fee_paid;
    ledger.realized_market_pnl += t.gross_pnl;
    return t;
}

void write_fill_log_header(std::ostream& out) { out << "step,agent_id,asset,side,qty,price,fee,reason\n"; }

namespace {

// shortest text that reads back to the same double
std::string shortest(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace

void write_fill_row(std::ostream& out, const Fill& f, std::span<const std::string> asset_names) {
    out << f.step << ',' << f.agent_id << ',';
    if (f.asset < asset_names.size())
        out << asset_names[f.asset];
    else
        out << f.asset;
    out << ',' << to_string(f.side) << ',' << shortest(f.quantity) << ',' << shortest(f.fill_price) << ','
        << shortest(f.fee_paid) << ',' << to_string(f.reason) << '\n';
}

}  // namespace evosim
