#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "evosim/agent.hpp"
#include "evosim/exchange.hpp"
#include "evosim/rng.hpp"

namespace evosim {

struct PopulationConfig {
    std::size_t size = 500;
    double protected_quota = 0.05;
    bool per_archetype_floor = false;  // apply the quota to every archetype
    bool bailout_enabled = true;
    double bailout_grant = 100.0;
    double mutation_scale = 0.1;
    double elite_fraction = 0.2;
    double epoch_seconds = 300.0;

    void validate() const;
};

// Ranges for fresh genomes (initial population and respawns without parents).
struct GenomeInit {
    double leverage_min = 1.0, leverage_max = 5.0;
    double take_profit_min = 0.01, take_profit_max = 0.03;
    double stop_loss_min = 0.01, stop_loss_max = 0.03;
    double threshold_min = 0.5, threshold_max = 0.75;
    // trend_follower, grid_mean_reverter, scalper, contrarian
    std::array<double, kArchetypeCount> archetype_weights{0.4, 0.1, 0.4, 0.1};

    void validate(const GenomeBounds& bounds) const;
};

Genome random_genome(const GenomeInit& init, const GenomeBounds& bounds, Rng& rng);

struct GenerationRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    std::size_t births = 0;
    std::size_t deaths = 0;
    std::size_t bailouts = 0;
    std::size_t conversions = 0;
    std::size_t population = 0;
    std::array<std::size_t, kArchetypeCount> census{};
    double mean_equity = 0.0;
    double median_equity = 0.0;
    double group_cash = 0.0;
};

std::array<std::size_t, kArchetypeCount> census(std::span<const Agent> population);

// An agent is culled when dead, out of lifespan, or with equity <= 0. Dead
// agents must already be flat; `equity_of` supplies mark-to-market equity.
struct CullResult {
    std::vector<Agent> survivors;
    std::vector<Agent> dead;
};

bool should_cull(const Agent& agent, double equity);
CullResult cull(std::vector<Agent> population, std::span<const double> prices);

// Everything a newborn needs besides its genome.
struct SpawnContext {
    const AgentConfig* agent = nullptr;
    const GenomeBounds* bounds = nullptr;
    const GenomeInit* init = nullptr;
    std::size_t asset_count = 1;
    std::int64_t birth_time = 0;
    std::uint64_t* next_id = nullptr;
    double cash = 100.0;
};

Genome mutate(const Genome& parent, double scale, const GenomeBounds& bounds, Rng& rng);

// Fitness-proportional draw from the top elite_fraction of survivors ranked
// by epoch realized PnL; every child is a log-normally mutated copy.
std::vector<Agent> reproduce(std::span<const Agent> survivors, std::size_t n_slots, const PopulationConfig& config,
                             SpawnContext& spawn, Rng& rng);

// Converts the lowest-fitness non-contrarian agents until the contrarian
// census meets ceil(quota * N). Returns the number of conversions.
std::size_t protect_endangered(std::vector<Agent>& population, const PopulationConfig& config);

std::size_t protected_floor(const PopulationConfig& config);

// Debits the treasury for n_dead grants and spawns replacements (offspring of
// survivors, or fresh random genomes when none survived).
std::vector<Agent> bailout(Ledger& ledger, std::span<const Agent> survivors, std::size_t n_dead,
                           const PopulationConfig& config, SpawnContext& spawn, Rng& rng);

}  // namespace evosim
