#include "evosim/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evosim/error.hpp"

namespace evosim {

void PopulationConfig::validate() const {
    if (!(protected_quota >= 0.0 && protected_quota <= 1.0))
        throw ConfigError("population.protected_quota", "must lie in [0, 1]");
    if (!(bailout_grant >= 0.0)) throw ConfigError("population.bailout_grant", "must be >= 0");
    if (!(mutation_scale >= 0.0)) throw ConfigError("population.mutation_scale", "must be >= 0");
    if (!(elite_fraction > 0.0 && elite_fraction <= 1.0))
        throw ConfigError("population.elite_fraction", "must lie in (0, 1]");
    if (!(epoch_seconds > 0.0)) throw ConfigError("population.epoch_seconds", "must be positive");
}

void GenomeInit::validate(const GenomeBounds& bounds) const {
    auto range = [](const char* field, double lo, double hi, double min, double max) {
        if (!(lo <= hi)) throw ConfigError(field, "min exceeds max");
        if (!(lo >= min && hi <= max)) throw ConfigError(field, "range outside genome bounds");
    };
    range("genome.leverage", leverage_min, leverage_max, 1.0, bounds.leverage_max);
    range("genome.take_profit", take_profit_min, take_profit_max, bounds.return_min, bounds.return_max);
    range("genome.stop_loss", stop_loss_min, stop_loss_max, bounds.return_min, bounds.return_max);
    range("genome.threshold", threshold_min, threshold_max, 0.5, bounds.threshold_max);
    double total = 0.0;
    for (double w : archetype_weights) {
        if (!(w >= 0.0)) throw ConfigError("genome.archetype_weights", "weights must be >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("genome.archetype_weights", "weights must not all be zero");
}

Genome random_genome(const GenomeInit& init, const GenomeBounds& bounds, Rng& rng) {
    Genome g;
    g.leverage = rng.uniform(init.leverage_min, init.leverage_max);
    g.take_profit = rng.uniform(init.take_profit_min, init.take_profit_max);
    g.stop_loss = rng.uniform(init.stop_loss_min, init.stop_loss_max);
    g.confidence_threshold = rng.uniform(init.threshold_min, init.threshold_max);
    const double total = std::accumulate(init.archetype_weights.begin(), init.archetype_weights.end(), 0.0);
    double u = rng.uniform() * total;
    g.archetype = kArchetypes.back();
    for (std::size_t i = 0; i < kArchetypeCount; ++i) {
        if (init.archetype_weights[i] <= 0.0) continue;
        if (u < init.archetype_weights[i]) {
            g.archetype = kArchetypes[i];
            break;
        }
        u -= init.archetype_weights[i];
    }
    return g.clamped(bounds);
}

std::array<std::size_t, kArchetypeCount> census(std::span<const Agent> population) {
    std::array<std::size_t, kArchetypeCount> out{};
    for (const Agent& a : population) out[static_cast<std::size_t>(a.genome.archetype)] += 1;
    return out;
}

bool should_cull(const Agent& agent, double equity) { return !agent.alive || agent.lifespan <= 0.0 || equity <= 0.0; }

CullResult cull(std::vector<Agent> population, std::span<const double> prices) {
    CullResult r;
    for (Agent& a : population) {
        const double price = a.position && a.position->asset < prices.size() ? prices[a.position->asset] : 0.0;
        const double equity = mark_to_market(a, price).equity;
        if (should_cull(a, equity)) {
            if (a.position) throw std::logic_error("cull: culled agent still holds a position");
            r.dead.push_back(std::move(a));
        } else {
            r.survivors.push_back(std::move(a));
        }
    }
    return r;
}

Genome mutate(const Genome& parent, double scale, const GenomeBounds& bounds, Rng& rng) {
    if (scale == 0.0) return parent;
    Genome g = parent;
    g.leverage *= std::exp(scale * rng.normal());
    g.take_profit *= std::exp(scale * rng.normal());
    g.stop_loss *= std::exp(scale * rng.normal());
    g.confidence_threshold *= std::exp(scale * rng.normal());
    return g.clamped(bounds);
}

namespace {

Agent spawn_agent(const Genome& genome, SpawnContext& spawn) {
    const std::uint64_t id = (*spawn.next_id)++;
    return make_agent(id, genome, *spawn.agent, spawn.asset_count, spawn.birth_time, spawn.cash);
}

}  // namespace

std::vector<Agent> reproduce(std::span<const Agent> survivors, std::size_t n_slots, const PopulationConfig& config,
                             SpawnContext& spawn, Rng& rng) {
    std::vector<Agent> offspring;
    if (n_slots == 0 || survivors.empty()) return offspring;

    // Rank by fitness, ties broken by id so the order is total.
    std::vector<std::size_t> order(survivors.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double fa = survivors[a].stats.epoch_realized_pnl;
        const double fb = survivors[b].stats.epoch_realized_pnl;
        if (fa != fb) return fa > fb;
        return survivors[a].id < survivors[b].id;
    });
    const auto elite_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(config.elite_fraction * static_cast<double>(survivors.size()))));
    order.resize(std::min(elite_count, order.size()));

    // Shift fitness so the weakest elite keeps a small non-zero weight.
    const double worst = survivors[order.back()].stats.epoch_realized_pnl;
    const double best = survivors[order.front()].stats.epoch_realized_pnl;
    const double floor = (best - worst) * 0.01 + 1e-9;
    std::vector<double> cumulative;
    cumulative.reserve(order.size());
    double total = 0.0;
    for (std::size_t idx : order) {
        total += survivors[idx].stats.epoch_realized_pnl - worst + floor;
        cumulative.push_back(total);
    }

    offspring.reserve(n_slots);
    for (std::size_t s = 0; s < n_slots; ++s) {
        const double u = rng.uniform() * total;
        const auto pick = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const Agent& parent = survivors[order[std::min(pick, order.size() - 1)]];
        Agent child = spawn_agent(mutate(parent.genome, config.mutation_scale, *spawn.bounds, rng), spawn);
        child.parent_id = parent.id;
        offspring.push_back(std::move(child));
    }
    return offspring;
}

std::size_t protected_floor(const PopulationConfig& config) {
    // Guard against 0.05 * 100 landing a hair above 5.
    const double raw = config.protected_quota * static_cast<double>(config.size);
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

std::size_t protect_endangered(std::vector<Agent>& population, const PopulationConfig& config) {
    const std::size_t floor = protected_floor(config);
    std::vector<Archetype> protected_types{Archetype::contrarian};
    if (config.per_archetype_floor) protected_types.assign(kArchetypes.begin(), kArchetypes.end());

    // Lowest fitness first, ties by id.
    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double fa = population[a].stats.epoch_realized_pnl;
        const double fb = population[b].stats.epoch_realized_pnl;
        if (fa != fb) return fa < fb;
        return population[a].id < population[b].id;
    });

    std::size_t conversions = 0;
    for (Archetype target : protected_types) {
        auto counts = census(population);
        std::size_t have = counts[static_cast<std::size_t>(target)];
        for (std::size_t idx : order) {
            if (have >= floor) break;
            Agent& a = population[idx];
            if (a.genome.archetype == target) continue;
            const auto donor = static_cast<std::size_t>(a.genome.archetype);
            const bool donor_protected =
                std::find(protected_types.begin(), protected_types.end(), a.genome.archetype) != protected_types.end();
            // Never push another protected archetype below its own floor.
            if (donor_protected && counts[donor] <= floor) continue;
            counts[donor] -= 1;
            a.genome.archetype = target;
            ++have;
            ++conversions;
        }
    }
    return conversions;
}

std::vector<Agent> bailout(Ledger& ledger, std::span<const Agent> survivors, std::size_t n_dead,
                           const PopulationConfig& config, SpawnContext& spawn, Rng& rng) {
    if (n_dead == 0 || !config.bailout_enabled) return {};
    const double total = static_cast<double>(n_dead) * config.bailout_grant;
    ledger.group_cash -= total;
    ledger.cumulative_injections += total;

    spawn.cash = config.bailout_grant;
    std::vector<Agent> fresh;
    if (!survivors.empty()) {
        fresh = reproduce(survivors, n_dead, config, spawn, rng);
    } else {
        fresh.reserve(n_dead);
        for (std::size_t i = 0; i < n_dead; ++i)
            fresh.push_back(spawn_agent(random_genome(*spawn.init, *spawn.bounds, rng), spawn));
    }
    for (Agent& a : fresh) a.stats.bailout_count = 1;
    return fresh;
}

}  // namespace evosim
