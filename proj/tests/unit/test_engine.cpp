#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "evosim/engine.hpp"
#include "evosim/error.hpp"
#include "evosim/scenario.hpp"

using namespace evosim;

namespace {

ScenarioConfig small(std::uint64_t seed = 3) {
    ScenarioConfig c;
    c.name = "small";
    c.seed = seed;
    c.steps = 60;
    c.universe.n_assets = 5;
    c.population.size = 60;
    c.features.lookback = 12;
    c.genome.threshold_min = 0.5;
    c.genome.threshold_max = 0.6;
    return c;
}

}  // namespace

TEST_CASE("configuration errors") {
    auto c = small();
    c.steps = 0;
    CHECK_THROWS_AS(Simulation{c}, ConfigError);
    c = small();
    c.universe.correlation = -0.9;  // indefinite for five assets
    CHECK_THROWS_AS(Simulation{c}, ConfigError);
    c = small();
    c.universe.interval = 300;
    try {
        Simulation s{c};
        FAIL("accepted a bad interval");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("universe.interval") != std::string::npos);
    }
}

TEST_CASE("empty population only moves prices") {
    auto c = small();
    c.population.size = 0;
    Simulation sim(c);
    const auto r = sim.run();
    CHECK(r.rows.size() == c.steps);
    CHECK(r.fills.empty());
    CHECK(r.lives.empty());
    CHECK(sim.cursor() == warmup_bars(c) + c.steps);
    for (const auto& row : r.rows) {
        CHECK(row.population == 0);
        CHECK(row.aum == 0.0);
        CHECK(row.group_cash == 0.0);
    }
}

TEST_CASE("an agent that never trades dies at its initial lifespan") {
    auto c = small();
    c.population.size = 1;
    c.population.bailout_enabled = false;
    c.population.protected_quota = 0.0;
    c.universe.volatility = 0.0;
    c.perception.strength = 0.0;
    c.genome.threshold_min = 0.55;
    c.genome.threshold_max = 0.55;
    c.steps = 80;
    const auto r = Simulation(c).run();
    REQUIRE(r.lives.size() == 1);
    CHECK(r.lives[0].entries == 0);
    CHECK(r.lives[0].death_cause == DeathCause::expiry);
    CHECK(r.lives[0].death_time - r.lives[0].birth_time == 3600);
    CHECK(r.fills.empty());
    CHECK(r.starvation_fraction == 1.0);
    CHECK(r.final_total_equity() == doctest::Approx(100.0));
}

TEST_CASE("runs are deterministic") {
    const auto a = run_scenario(small(11));
    const auto b = run_scenario(small(11));
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].total_equity == b.rows[i].total_equity);
        CHECK(a.rows[i].group_cash == b.rows[i].group_cash);
    }
    CHECK(a.fills.size() == b.fills.size());
    CHECK(a.directional_accuracy == b.directional_accuracy);
    const auto c = run_scenario(small(12));
    CHECK(c.final_total_equity() != a.final_total_equity());
}

TEST_CASE("a prefix run reproduces the same state") {
    auto c = small(5);
    Simulation full(c);
    c.steps = 25;
    Simulation prefix(c);
    for (int i = 0; i < 25; ++i) {
        full.step();
        prefix.step();
    }
    CHECK_FALSE(prefix.step());
    REQUIRE(full.population().size() == prefix.population().size());
    for (std::size_t i = 0; i < full.population().size(); ++i) {
        const Agent& x = full.population()[i];
        const Agent& y = prefix.population()[i];
        CHECK(x.id == y.id);
        CHECK(x.cash == y.cash);
        CHECK(x.lifespan == y.lifespan);
        CHECK(x.position.has_value() == y.position.has_value());
    }
    CHECK(full.ledger().group_cash == prefix.ledger().group_cash);
    CHECK(full.ledger().cumulative_fees == prefix.ledger().cumulative_fees);
}

TEST_CASE("books balance every step") {
    auto c = small(7);
    c.steps = 200;
    c.population.size = 100;
    const auto r = run_scenario(c);
    CHECK(r.rows.size() == 200);
    CHECK(r.max_conservation_error < 1e-9);
    for (const auto& row : r.rows) {
        CHECK(row.conservation_error < 1e-9);
        CHECK(row.total_equity == doctest::Approx(row.group_cash + row.aum));
        CHECK(row.decoupling == doctest::Approx(row.cumulative_injections - row.cumulative_recovered));
    }
    CHECK_FALSE(r.fills.empty());
}

TEST_CASE("bailouts hold the population constant") {
    auto c = small(9);
    c.steps = 300;
    c.population.size = 80;
    c.agent.initial_lifespan = 900;
    const auto r = run_scenario(c);
    REQUIRE(r.generations.size() == 60);
    std::size_t deaths = 0;
    for (const auto& g : r.generations) {
        CHECK(g.population == 80);
        deaths += g.deaths;
    }
    CHECK(deaths > 0);
    CHECK(r.rows.back().cumulative_injections > 0.0);

    c.population.bailout_enabled = false;
    const auto ctl = run_scenario(c);
    CHECK(ctl.generations.back().population < 80);
    for (const auto& row : ctl.rows) CHECK(row.group_cash >= 0.0);
}

TEST_CASE("learned perception modes run") {
    for (auto mode : {PerceptionMode::lstm, PerceptionMode::attention}) {
        auto c = small(2);
        c.steps = 20;
        c.perception.mode = mode;
        c.perception.hidden = 4;
        c.perception.d_model = 4;
        c.perception.heads = 2;
        const auto r = run_scenario(c);
        CHECK(r.rows.size() == 20);
        CHECK(r.signals == 20 * 5);
        CHECK(r.max_conservation_error < 1e-9);
    }
}

TEST_CASE("market scope broadcasts one signal per bar") {
    auto c = small(4);
    c.perception.scope = SignalScope::market;
    c.perception.accuracy = 1.0;
    const auto r = run_scenario(c);
    CHECK(r.rows.size() == c.steps);
    CHECK(r.directional_accuracy > 0.5);
    CHECK(r.directional_accuracy < 1.0);
}

TEST_CASE("fees cost money on paired seeds, and ROI decays in expectation") {
    const ScenarioConfig base = load_scenario(std::filesystem::path(EVOSIM_SCENARIO_DIR) / "paper_default.json");
    const std::size_t seeds = 20;
    std::size_t ordered = 0;
    std::vector<double> mean_roi(base.steps, 0.0);
    for (std::size_t k = 0; k < seeds; ++k) {
        ScenarioConfig with = base, without = base;
        with.seed = without.seed = base.seed + k;
        without.friction.taker_fee = 0.0;
        const auto a = run_scenario(with);
        const auto b = run_scenario(without);
        if (b.final_roi() >= a.final_roi()) ++ordered;
        for (std::size_t i = 0; i < a.rows.size(); ++i) mean_roi[i] += a.rows[i].roi / seeds;
    }
    CHECK(ordered * 100 >= seeds * 95);
    // quarter-run checkpoints of the seed-averaged ROI path
    const std::size_t q = base.steps / 4;
    for (std::size_t i = 1; i < 4; ++i) CHECK(mean_roi[i * q] < mean_roi[(i - 1) * q]);
    CHECK(mean_roi.back() < mean_roi[3 * q]);
}
