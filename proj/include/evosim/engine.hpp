#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "evosim/agent.hpp"
#include "evosim/analytics.hpp"
#include "evosim/evolution.hpp"
#include "evosim/exchange.hpp"
#include "evosim/market.hpp"
#include "evosim/perception.hpp"
#include "evosim/rng.hpp"

namespace evosim {

struct UniverseSource {
    // Empty csv_paths means a generated universe.
    std::vector<std::filesystem::path> csv_paths;
    std::size_t n_assets = 20;
    double volatility = 0.015;  // per bar
    double drift = 0.0;         // per bar, arithmetic
    double correlation = 0.3;   // constant off-diagonal
    double start_price = 100.0;
    std::int64_t interval = 60;
};

enum class PerceptionMode : std::uint8_t { oracle, lstm, attention };
// per_asset: one call per asset and bar. market: a single call per bar on the
// equal-weight basket (model modes: mean p_up) broadcast to every asset.
enum class SignalScope : std::uint8_t { per_asset, market };

struct PerceptionConfig {
    PerceptionMode mode = PerceptionMode::oracle;
    double accuracy = 0.512;
    double strength = 0.1;
    SignalScope scope = SignalScope::per_asset;
    std::size_t horizon = 1;  // bars ahead the oracle looks
    std::size_t hidden = 8;
    std::size_t layers = 2;
    std::size_t d_model = 8;
    std::size_t heads = 1;
    std::optional<std::filesystem::path> weights_path;
};

struct CascadeConfig {
    std::size_t window_bars = 3;
    double threshold_fraction = 0.05;  // of population size
};

struct ScenarioConfig {
    std::string name = "custom";
    UniverseSource universe;
    std::size_t steps = 270;
    PopulationConfig population;
    AgentConfig agent;
    GenomeBounds bounds;
    GenomeInit genome;
    FrictionConfig friction;
    PerceptionConfig perception;
    FeatureConfig features;
    CascadeConfig cascade;
    double maintenance_fraction = 0.005;
    std::uint64_t seed = 1;
    std::size_t report_every = 1;

    // Throws ConfigError naming the first invalid field.
    void validate() const;
};

struct StepRow {
    std::size_t step = 0;
    std::int64_t timestamp = 0;
    std::size_t population = 0;
    std::size_t alive = 0;
    std::size_t exposed = 0;
    double aum = 0.0;
    double total_equity = 0.0;  // group_cash + aum
    double group_cash = 0.0;
    double roi = 0.0;           // relative to initial capital
    double bar_pnl = 0.0;       // change in total equity over the bar
    double cumulative_fees = 0.0;
    double cumulative_injections = 0.0;
    double cumulative_recovered = 0.0;
    double decoupling = 0.0;    // aum - total_equity
    double convergence = 0.0;   // NaN when undefined
    std::size_t fills = 0;
    std::size_t forced_exits = 0;
    double conservation_error = 0.0;
};

struct SimulationReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<std::string> assets;
    double initial_capital = 0.0;
    std::vector<StepRow> rows;
    std::vector<GenerationRecord> generations;
    std::vector<Fill> fills;
    std::vector<LifeRecord> lives;
    std::vector<CascadeEvent> cascades;

    std::size_t signals = 0;
    double directional_accuracy = 0.5;
    std::size_t closed_trades = 0;
    std::size_t winning_trades = 0;  // positive gross move
    double gross_trade_pnl = 0.0;    // bar-close price moves of closed trades
    double cumulative_fees = 0.0;
    std::optional<double> churn_ratio;
    double starvation_fraction = 0.0;
    std::optional<double> mean_convergence;
    double max_conservation_error = 0.0;
    double mean_trade_return = 0.0;     // |move| / entry notional
    double round_trip_cost = 0.0;       // 2 * (fee + slippage mean)
    double payoff_ratio = 1.0;          // mean winning move / mean losing move
    double breakeven_win_rate = 0.5;
    double trade_hit_rate = 0.5;        // share of trades with positive move

    double final_total_equity() const { return rows.empty() ? initial_capital : rows.back().total_equity; }
    double final_roi() const { return rows.empty() ? 0.0 : rows.back().roi; }
    double final_group_cash() const { return rows.empty() ? 0.0 : rows.back().group_cash; }
};

// Step order per bar:
//   1 advance prices  2 mark to market  3 liquidations, then stop/take exits
//   4 signals for assets with flat agents  5 entries in agent-id order
//   6 lifespan metabolism  7 evolution pass on epoch boundaries  8 report row
class Simulation {
public:
    explicit Simulation(ScenarioConfig config);
    Simulation(ScenarioConfig config, Universe universe);

    // Returns false once the universe is exhausted.
    bool step();
    SimulationReport run();

    const ScenarioConfig& config() const noexcept { return config_; }
    const Universe& universe() const noexcept { return universe_; }
    const std::vector<Agent>& population() const noexcept { return population_; }
    const Ledger& ledger() const noexcept { return ledger_; }
    std::size_t steps_done() const noexcept { return step_; }
    std::size_t cursor() const noexcept { return cursor_; }
    const SimulationReport& report() const noexcept { return report_; }

    // Finalises summary metrics; called by run().
    SimulationReport finish();

private:
    void init();
    std::vector<double> prices_at(std::size_t bar) const;
    void close_position(Agent& agent, FillReason reason, std::size_t bar);
    void record_life(const Agent& agent);
    void evolve(std::size_t bar, const std::vector<double>& prices);
    double total_unrealized(const std::vector<double>& prices) const;
    Direction realized_direction(std::size_t asset, std::size_t bar) const;
    Rng& agent_rng(const Agent& agent);

    ScenarioConfig config_;
    Universe universe_;
    std::vector<Agent> population_;
    std::unordered_map<std::uint64_t, Rng> agent_rngs_;
    Rng signal_rng_;
    Rng evolution_rng_;
    Ledger ledger_;
    LstmModel lstm_;
    AttentionModel attention_;
    std::optional<Matrix> metric_root_;
    std::uint64_t next_id_ = 0;
    std::size_t start_bar_ = 0;
    std::size_t cursor_ = 0;
    std::size_t step_ = 0;
    std::size_t epoch_ = 0;
    std::size_t end_bar_ = 0;
    double last_total_equity_ = 0.0;
    double convergence_sum_ = 0.0;
    std::size_t convergence_n_ = 0;
    double win_move_sum_ = 0.0, loss_move_sum_ = 0.0, move_frac_sum_ = 0.0;
    std::size_t loss_trades_ = 0;
    std::vector<double> signal_p_;
    std::vector<Direction> signal_realized_;
    SimulationReport report_;
};

// Number of leading bars consumed before the first step.
std::size_t warmup_bars(const ScenarioConfig& config);

Universe build_universe(const ScenarioConfig& config);

SimulationReport run_scenario(const ScenarioConfig& config);

}  // namespace evosim
