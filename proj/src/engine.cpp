#include "evosim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "evosim/error.hpp"

namespace evosim {

namespace {

constexpr double kConservationTolerance = 1e-6;

std::size_t epoch_steps(const ScenarioConfig& c, std::int64_t interval) {
    const double n = std::round(c.population.epoch_seconds / static_cast<double>(interval));
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

}  // namespace

void ScenarioConfig::validate() const {
    if (steps < 1) throw ConfigError("steps", "must be >= 1");
    if (report_every < 1) throw ConfigError("report_every", "must be >= 1");
    population.validate();
    friction.validate();
    if (!(bounds.leverage_max >= 1.0)) throw ConfigError("bounds.leverage_max", "must be >= 1");
    genome.validate(bounds);
    if (!(agent.initial_cash > 0.0)) throw ConfigError("agent.initial_cash", "must be positive");
    if (!(agent.initial_lifespan > 0.0)) throw ConfigError("agent.initial_lifespan", "must be positive");
    if (!(agent.metabolic_reward >= 0.0)) throw ConfigError("agent.metabolic_reward", "must be >= 0");
    if (!(agent.position_fraction > 0.0 && agent.position_fraction <= 1.0))
        throw ConfigError("agent.position_fraction", "must lie in (0, 1]");
    if (!(maintenance_fraction >= 0.0 && maintenance_fraction < 1.0))
        throw ConfigError("maintenance_fraction", "must lie in [0, 1)");
    if (!(perception.accuracy >= 0.0 && perception.accuracy <= 1.0))
        throw ConfigError("perception.accuracy", "must lie in [0, 1]");
    if (!(perception.strength >= 0.0 && perception.strength <= 0.5))
        throw ConfigError("perception.strength", "must lie in [0, 0.5]");
    if (perception.horizon < 1) throw ConfigError("perception.horizon", "must be >= 1");
    if (perception.hidden < 1) throw ConfigError("perception.hidden", "must be >= 1");
    if (perception.layers < 1) throw ConfigError("perception.layers", "must be >= 1");
    if (perception.d_model < 1) throw ConfigError("perception.d_model", "must be >= 1");
    if (perception.heads < 1 || perception.d_model % perception.heads != 0)
        throw ConfigError("perception.heads", "must divide d_model");
    if (features.lookback < 1) throw ConfigError("features.lookback", "must be >= 1");
    if (features.atr_period < 1) throw ConfigError("features.atr_period", "must be >= 1");
    if (cascade.window_bars < 1) throw ConfigError("cascade.window_bars", "must be >= 1");
    if (!(cascade.threshold_fraction > 0.0 && cascade.threshold_fraction <= 1.0))
        throw ConfigError("cascade.threshold_fraction", "must lie in (0, 1]");
    if (universe.csv_paths.empty()) {
        if (universe.n_assets < 1 || universe.n_assets > kMaxAssets)
            throw ConfigError("universe.n_assets", "must lie in [1, 20]");
        if (!(universe.volatility >= 0.0)) throw ConfigError("universe.volatility", "must be >= 0");
        if (!(universe.start_price > 0.0)) throw ConfigError("universe.start_price", "must be positive");
        if (!(universe.correlation >= -1.0 && universe.correlation <= 1.0))
            throw ConfigError("universe.correlation", "must lie in [-1, 1]");
        if (universe.interval != 60 && universe.interval != 900)
            throw ConfigError("universe.interval", "must be 60 or 900 seconds");
    }
}

std::size_t warmup_bars(const ScenarioConfig& c) {
    return std::max(c.features.lookback - 1, c.features.atr_period);
}

Universe build_universe(const ScenarioConfig& c) {
    if (!c.universe.csv_paths.empty()) return load_csv(c.universe.csv_paths);
    UniverseParams p;
    p.n_assets = c.universe.n_assets;
    p.n_steps = warmup_bars(c) + c.steps + c.perception.horizon + 1;
    p.correlation = uniform_correlation(p.n_assets, c.universe.correlation);
    p.volatility = c.universe.volatility;
    p.drift = c.universe.drift;
    p.start_price = c.universe.start_price;
    p.interval = c.universe.interval;
    p.seed = derive_seed(c.seed, "universe");
    try {
        return gen_correlated_universe(p);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("universe.correlation", e.what());
    }
}

Simulation::Simulation(ScenarioConfig config) : config_(std::move(config)) {
    config_.validate();
    universe_ = build_universe(config_);
    init();
}

Simulation::Simulation(ScenarioConfig config, Universe universe)
    : config_(std::move(config)), universe_(std::move(universe)) {
    config_.validate();
    init();
}

void Simulation::init() {
    start_bar_ = warmup_bars(config_);
    const std::size_t len = universe_.length();
    if (len < start_bar_ + config_.perception.horizon + 2)
        throw ConfigError("universe", "series of " + std::to_string(len) + " bars is too short for one step");
    end_bar_ = std::min(len - 1 - config_.perception.horizon, start_bar_ + config_.steps);
    cursor_ = start_bar_;

    signal_rng_ = Rng(derive_seed(config_.seed, "signal"));
    evolution_rng_ = Rng(derive_seed(config_.seed, "evolution"));
    metric_root_ = psd_sqrt(universe_.correlation);

    const std::size_t features = kFeatureCount;
    Rng weight_rng(derive_seed(config_.seed, "weights"));
    if (config_.perception.mode == PerceptionMode::lstm) {
        lstm_ = config_.perception.weights_path
                    ? load_lstm_model(*config_.perception.weights_path)
                    : LstmModel::random(config_.perception.hidden, weight_rng, features, config_.perception.layers);
    } else if (config_.perception.mode == PerceptionMode::attention) {
        if (config_.perception.weights_path) {
            attention_ = load_attention_model(*config_.perception.weights_path);
        } else {
            attention_ = AttentionModel::random(config_.perception.d_model, weight_rng, features);
            attention_.heads = config_.perception.heads;
        }
    }

    Rng genesis(derive_seed(config_.seed, "genesis"));
    const std::int64_t t0 = universe_.series.front()[start_bar_].timestamp;
    for (std::size_t i = 0; i < config_.population.size; ++i) {
        Agent a = make_agent(next_id_++, random_genome(config_.genome, config_.bounds, genesis), config_.agent,
                             universe_.asset_count(), t0, config_.agent.initial_cash);
        population_.push_back(std::move(a));
    }
    for (const Agent& a : population_) agent_rngs_.emplace(a.id, Rng(derive_seed(config_.seed, "agent", a.id)));

    ledger_.initial_capital = static_cast<double>(config_.population.size) * config_.agent.initial_cash;
    last_total_equity_ = ledger_.initial_capital;

    report_.scenario = config_.name;
    report_.seed = config_.seed;
    report_.assets = universe_.assets;
    report_.initial_capital = ledger_.initial_capital;
    report_.round_trip_cost = 2.0 * (config_.friction.taker_fee + config_.friction.slippage_mean);
}

Rng& Simulation::agent_rng(const Agent& agent) {
    auto it = agent_rngs_.find(agent.id);
    if (it == agent_rngs_.end())
        it = agent_rngs_.emplace(agent.id, Rng(derive_seed(config_.seed, "agent", agent.id))).first;
    return it->second;
}

std::vector<double> Simulation::prices_at(std::size_t bar) const {
    std::vector<double> p(universe_.asset_count());
    for (std::size_t a = 0; a < p.size(); ++a) p[a] = universe_.series[a][bar].close;
    return p;
}

Direction Simulation::realized_direction(std::size_t asset, std::size_t bar) const {
    const auto& s = universe_.series[asset];
    return s[bar + config_.perception.horizon].close > s[bar].close ? Direction::up : Direction::down;
}

void Simulation::close_position(Agent& agent, FillReason reason, std::size_t bar) {
    const Candle& candle = universe_.series[agent.position->asset][bar];
    Fill fill = execute_exit(*agent.position, reason, candle, config_.friction, agent_rng(agent));
    fill.agent_id = agent.id;
    fill.step = step_;
    const ClosedTrade t = apply_exit(agent, fill, ledger_);
    report_.fills.push_back(fill);

    report_.closed_trades += 1;
    report_.gross_trade_pnl += t.move_pnl;
    const double notional = t.quantity * t.entry_price;
    if (notional > 0.0) {
        const double frac = t.move_pnl / notional;
        move_frac_sum_ += std::abs(frac);
        if (frac > 0.0) {
            report_.winning_trades += 1;
            win_move_sum_ += frac;
        } else if (frac < 0.0) {
            loss_trades_ += 1;
            loss_move_sum_ += -frac;
        }
    }
}

double Simulation::total_unrealized(const std::vector<double>& prices) const {
    double u = 0.0;
    for (const Agent& a : population_)
        if (a.position) u += mark_to_market(a, prices[a.position->asset]).unrealized;
    return u;
}

void Simulation::record_life(const Agent& a) {
    LifeRecord r;
    r.id = a.id;
    r.birth_time = a.birth_time;
    r.death_time = a.death_time;
    r.death_cause = a.death_cause;
    r.entries = a.stats.entries;
    r.confidence_threshold = a.genome.confidence_threshold;
    r.archetype = a.genome.archetype;
    report_.lives.push_back(r);
}

bool Simulation::step() {
    if (step_ >= config_.steps || cursor_ + 1 > end_bar_) return false;
    const std::size_t bar = ++cursor_;
    const std::size_t fills_before = report_.fills.size();
    const std::int64_t now = universe_.series.front()[bar].timestamp;
    const auto interval = static_cast<double>(universe_.interval());
    const std::size_t n_assets = universe_.asset_count();

    // (1)-(2) advance prices; equity is marked lazily from these closes.
    const std::vector<double> prices = prices_at(bar);

    // (3) forced and voluntary exits.
    for (Agent& a : population_) {
        a.closed_profitable_this_step = false;
        if (!a.alive || !a.position) continue;
        const Candle& candle = universe_.series[a.position->asset][bar];
        if (auto exit = check_triggers(a, candle, config_.maintenance_fraction)) close_position(a, exit->reason, bar);
    }
    for (Agent& a : population_) {
        if (a.alive && a.flat() && a.cash <= 0.0) {
            a.alive = false;
            a.death_cause = DeathCause::bankruptcy;
            a.death_time = now;
        }
    }

    // (4) perception: one signal per asset, computed every bar so the signal
    // stream never depends on which agents happen to be flat.
    std::vector<Signal> signals(n_assets);
    std::vector<FeatureWindow> windows(n_assets);
    // Market scope: one call on the equal-weight basket, broadcast to every asset.
    const bool market_call = config_.perception.scope == SignalScope::market;
    std::optional<Signal> broadcast;
    if (market_call && config_.perception.mode == PerceptionMode::oracle) {
        double basket = 0.0;
        for (std::size_t s = 0; s < n_assets; ++s) {
            const auto& series = universe_.series[s];
            basket += std::log(series[bar + config_.perception.horizon].close / series[bar].close);
        }
        const Direction d = basket > 0.0 ? Direction::up : Direction::down;
        broadcast = oracle_signal_from(d, signal_rng_.bernoulli(config_.perception.accuracy), config_.perception.strength);
    }
    for (std::size_t s = 0; s < n_assets; ++s) {
        windows[s] = compute_features(universe_.series[s], bar, config_.features);
        switch (config_.perception.mode) {
            case PerceptionMode::oracle: {
                signals[s] = broadcast ? *broadcast
                                       : oracle_signal_from(realized_direction(s, bar), signal_rng_.bernoulli(config_.perception.accuracy),
                                                            config_.perception.strength);
                break;
            }
            case PerceptionMode::lstm:
                signals[s] = untrained_forward(lstm_, windows[s]);
                break;
            case PerceptionMode::attention:
                signals[s] = untrained_forward(attention_, windows[s]);
                break;
        }
    }
    if (market_call && !broadcast) {
        double p = 0.0;
        for (const Signal& sig : signals) p += sig.p_up;
        std::fill(signals.begin(), signals.end(), Signal{p / static_cast<double>(n_assets), signals.front().source});
    }
    for (std::size_t s = 0; s < n_assets; ++s) {
        signal_p_.push_back(signals[s].p_up);
        signal_realized_.push_back(realized_direction(s, bar));
    }

    // (5) entries, agent-id order.
    for (Agent& a : population_) {
        if (!a.alive || !a.flat()) continue;
        const std::size_t s = a.bound_asset;
        Rng& rng = agent_rng(a);
        const auto intent = decide(a, signals[s], windows[s], config_.agent, rng);
        if (!intent) continue;
        try {
            Fill fill = execute(*intent, a.cash, universe_.series[s][bar], config_.friction, rng);
            fill.agent_id = a.id;
            fill.step = step_;
            apply_entry(a, fill, intent->leverage, ledger_);
            report_.fills.push_back(fill);
        } catch (const RejectedOrder&) {
            // no-op
        }
    }

    // (6) metabolism.
    for (Agent& a : population_) {
        if (!a.alive) continue;
        update_lifespan(a, interval, a.closed_profitable_this_step, config_.agent.metabolic_reward, now);
        if (!a.alive && a.position) close_position(a, FillReason::expiry, bar);
    }

    // (7) evolution on epoch boundaries.
    if ((step_ + 1) % epoch_steps(config_, universe_.interval()) == 0) evolve(bar, prices);

    // (8) report row.
    StepRow row;
    row.step = step_;
    row.timestamp = now;
    row.population = population_.size();
    double unrealized = 0.0;
    for (const Agent& a : population_) {
        const double price = a.position ? prices[a.position->asset] : 0.0;
        const MarkToMarket m = mark_to_market(a, price);
        row.aum += m.equity;
        unrealized += m.unrealized;
        if (a.alive) row.alive += 1;
        if (a.position) row.exposed += 1;
    }
    ledger_.aum = row.aum;
    row.group_cash = ledger_.group_cash;
    row.total_equity = ledger_.group_cash + row.aum;
    row.roi = ledger_.initial_capital > 0.0 ? (row.total_equity - ledger_.initial_capital) / ledger_.initial_capital : 0.0;
    row.bar_pnl = row.total_equity - last_total_equity_;
    last_total_equity_ = row.total_equity;
    row.cumulative_fees = ledger_.cumulative_fees;
    row.cumulative_injections = ledger_.cumulative_injections;
    row.cumulative_recovered = ledger_.cumulative_recovered;
    row.decoupling = row.aum - row.total_equity;
    row.fills = report_.fills.size() - fills_before;
    for (std::size_t i = fills_before; i < report_.fills.size(); ++i)
        if (is_forced(report_.fills[i].reason)) row.forced_exits += 1;

    std::vector<Agent> exposed;
    for (const Agent& a : population_)
        if (a.position) exposed.push_back(a);
    const auto exposures = exposure_vectors(exposed, prices, n_assets);
    const auto conv = phenotypic_convergence(exposures, metric_root_ ? &*metric_root_ : nullptr);
    row.convergence = conv.value_or(std::numeric_limits<double>::quiet_NaN());
    if (conv) {
        convergence_sum_ += *conv;
        convergence_n_ += 1;
    }

    row.conservation_error = ledger_.conservation_error(row.aum, unrealized);
    report_.max_conservation_error = std::max(report_.max_conservation_error, row.conservation_error);
    if (!(row.conservation_error <= kConservationTolerance)) {
        std::ostringstream os;
        os << "ledger conservation residual " << row.conservation_error << " at step " << step_;
        throw LedgerImbalance(os.str());
    }
    report_.rows.push_back(row);
    ++step_;
    return true;
}

void Simulation::evolve(std::size_t bar, const std::vector<double>& prices) {
    const std::int64_t now = universe_.series.front()[bar].timestamp;
    GenerationRecord rec;
    rec.epoch = epoch_++;
    rec.step = step_;

    // Force-close anything that is about to be culled.
    for (Agent& a : population_) {
        const double price = a.position ? prices[a.position->asset] : 0.0;
        const double equity = mark_to_market(a, price).equity;
        if (!should_cull(a, equity)) continue;
        if (a.position) close_position(a, a.alive ? FillReason::liquidation : FillReason::expiry, bar);
        if (a.alive) {
            a.alive = false;
            a.death_cause = a.lifespan <= 0.0 ? DeathCause::expiry : DeathCause::bankruptcy;
            a.death_time = now;
        }
    }

    CullResult culled = cull(std::move(population_), prices);
    for (const Agent& d : culled.dead) {
        ledger_.group_cash += d.cash;
        ledger_.cumulative_recovered += d.cash;
        record_life(d);
        agent_rngs_.erase(d.id);
    }
    rec.deaths = culled.dead.size();

    SpawnContext spawn;
    spawn.agent = &config_.agent;
    spawn.bounds = &config_.bounds;
    spawn.init = &config_.genome;
    spawn.asset_count = universe_.asset_count();
    spawn.birth_time = now;
    spawn.next_id = &next_id_;
    spawn.cash = config_.population.bailout_grant;

    std::vector<Agent> fresh =
        bailout(ledger_, culled.survivors, culled.dead.size(), config_.population, spawn, evolution_rng_);
    rec.births = fresh.size();
    rec.bailouts = fresh.size();

    population_ = std::move(culled.survivors);
    for (Agent& a : fresh) population_.push_back(std::move(a));
    rec.conversions = protect_endangered(population_, config_.population);
    for (Agent& a : population_) a.stats.epoch_realized_pnl = 0.0;

    rec.population = population_.size();
    rec.census = census(population_);
    std::vector<double> equities;
    equities.reserve(population_.size());
    for (const Agent& a : population_)
        equities.push_back(mark_to_market(a, a.position ? prices[a.position->asset] : 0.0).equity);
    if (!equities.empty()) {
        rec.mean_equity = std::accumulate(equities.begin(), equities.end(), 0.0) / static_cast<double>(equities.size());
        std::sort(equities.begin(), equities.end());
        const std::size_t m = equities.size() / 2;
        rec.median_equity = equities.size() % 2 ? equities[m] : 0.5 * (equities[m - 1] + equities[m]);
    }
    rec.group_cash = ledger_.group_cash;
    report_.generations.push_back(rec);
}

SimulationReport Simulation::finish() {
    SimulationReport out = report_;
    for (const Agent& a : population_) {
        LifeRecord r;
        r.id = a.id;
        r.birth_time = a.birth_time;
        r.death_time = a.death_time;
        r.death_cause = a.death_cause;
        r.entries = a.stats.entries;
        r.confidence_threshold = a.genome.confidence_threshold;
        r.archetype = a.genome.archetype;
        out.lives.push_back(r);
    }
    std::sort(out.lives.begin(), out.lives.end(), [](const LifeRecord& x, const LifeRecord& y) { return x.id < y.id; });

    out.signals = signal_p_.size();
    if (!signal_p_.empty()) out.directional_accuracy = directional_accuracy(signal_p_, signal_realized_);
    out.cumulative_fees = ledger_.cumulative_fees;
    out.churn_ratio = churn_ratio(out.closed_trades, ledger_.cumulative_fees, out.gross_trade_pnl);
    out.starvation_fraction = starvation_fraction(out.lives);
    if (convergence_n_ > 0) out.mean_convergence = convergence_sum_ / static_cast<double>(convergence_n_);
    const auto threshold = static_cast<std::size_t>(
        std::ceil(config_.cascade.threshold_fraction * static_cast<double>(config_.population.size) - 1e-9));
    out.cascades = detect_cascades(out.fills, config_.cascade.window_bars, std::max<std::size_t>(1, threshold));

    if (out.closed_trades > 0) {
        out.mean_trade_return = move_frac_sum_ / static_cast<double>(out.closed_trades);
        out.trade_hit_rate = static_cast<double>(out.winning_trades) / static_cast<double>(out.closed_trades);
    }
    if (out.winning_trades > 0 && loss_trades_ > 0) {
        const double avg_win = win_move_sum_ / static_cast<double>(out.winning_trades);
        const double avg_loss = loss_move_sum_ / static_cast<double>(loss_trades_);
        out.payoff_ratio = avg_win / avg_loss;
        out.breakeven_win_rate = breakeven_win_rate(out.round_trip_cost / avg_loss, out.payoff_ratio);
    }
    return out;
}

SimulationReport Simulation::run() {
    while (step()) {
    }
    return finish();
}

SimulationReport run_scenario(const ScenarioConfig& config) { return Simulation(config).run(); }

}  // namespace evosim
