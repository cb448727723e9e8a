#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evosim/agent.hpp"
#include "evosim/market.hpp"

using namespace evosim;

namespace {

Agent agent_with(Archetype a, double threshold, double cash = 100.0) {
    Genome g;
    g.archetype = a;
    g.confidence_threshold = threshold;
    return make_agent(0, g, AgentConfig{}, 1, 0, cash);
}

FeatureWindow window_with_last_return(double r) {
    FeatureWindow w{Matrix(kLookback, kFeatureCount), 0};
    w.values(kLookback - 1, 1) = r;
    return w;
}

Agent holding(Side side, double entry, double leverage, double tp, double sl) {
    Agent a = agent_with(Archetype::trend_follower, 0.5);
    a.genome.leverage = leverage;
    a.genome.take_profit = tp;
    a.genome.stop_loss = sl;
    Position p;
    p.side = side;
    p.quantity = 1.0;
    p.entry_price = entry;
    p.entry_reference = entry;
    p.leverage = leverage;
    a.position = p;
    return a;
}

Candle closing_at(double close) { return {0, close, close, close, close, 1.0}; }

}  // namespace

TEST_CASE("lifespan metabolism") {
    Agent a = agent_with(Archetype::scalper, 0.5);
    SUBCASE("profitable close extends life") {
        a.lifespan = 100.0;
        update_lifespan(a, 1.0, true, 30.0);
        CHECK(a.lifespan == 129.0);
        CHECK(a.alive);
    }
    SUBCASE("idle tick decays") {
        a.lifespan = 100.0;
        update_lifespan(a, 1.0, false, 30.0);
        CHECK(a.lifespan == 99.0);
    }
    SUBCASE("clamps at zero and dies") {
        a.lifespan = 0.5;
        update_lifespan(a, 1.0, false, 30.0, 1234);
        CHECK(a.lifespan == 0.0);
        CHECK_FALSE(a.alive);
        CHECK(a.death_cause == DeathCause::expiry);
        CHECK(a.death_time == 1234);
    }
    SUBCASE("dead agents stay dead") {
        a.alive = false;
        a.lifespan = 0.0;
        update_lifespan(a, 1.0, true, 30.0);
        CHECK(a.lifespan == 0.0);
        CHECK_FALSE(a.alive);
    }
}

TEST_CASE("decision policy table") {
    Rng rng(1);
    const AgentConfig cfg;
    const auto w = window_with_last_return(0.01);
    SUBCASE("neutral signal never trades") {
        for (double th : {0.51, 0.6, 0.9})
            CHECK_FALSE(decide(agent_with(Archetype::scalper, th), Signal{0.5, SignalSource::oracle}, w, cfg, rng));
        CHECK_FALSE(decide(agent_with(Archetype::scalper, 0.5), Signal{0.5, SignalSource::oracle}, w, cfg, rng));
    }
    SUBCASE("trend follower goes long on a confident up call") {
        const auto i = decide(agent_with(Archetype::trend_follower, 0.55), Signal{0.9, SignalSource::oracle}, w, cfg, rng);
        REQUIRE(i);
        CHECK(i->side == Side::buy);
        CHECK(i->margin == 100.0);
    }
    SUBCASE("contrarian fades it") {
        const auto i = decide(agent_with(Archetype::contrarian, 0.55), Signal{0.9, SignalSource::oracle}, w, cfg, rng);
        REQUIRE(i);
        CHECK(i->side == Side::sell);
    }
    SUBCASE("grid trades against the last move") {
        const auto up = decide(agent_with(Archetype::grid_mean_reverter, 0.55), Signal{0.9, SignalSource::oracle},
                               window_with_last_return(0.01), cfg, rng);
        const auto down = decide(agent_with(Archetype::grid_mean_reverter, 0.55), Signal{0.9, SignalSource::oracle},
                                 window_with_last_return(-0.01), cfg, rng);
        REQUIRE(up);
        REQUIRE(down);
        CHECK(up->side == Side::sell);
        CHECK(down->side == Side::buy);
    }
    SUBCASE("gate is |p - 0.5| >= threshold - 0.5") {
        CHECK(decide(agent_with(Archetype::scalper, 0.6), Signal{0.35, SignalSource::oracle}, w, cfg, rng));
        CHECK_FALSE(decide(agent_with(Archetype::scalper, 0.66), Signal{0.35, SignalSource::oracle}, w, cfg, rng));
    }
    SUBCASE("holders, the dead and the broke do not trade") {
        Agent h = holding(Side::buy, 100, 1, 0.1, 0.1);
        CHECK_FALSE(decide(h, Signal{0.9, SignalSource::oracle}, w, cfg, rng));
        Agent d = agent_with(Archetype::scalper, 0.5);
        d.alive = false;
        CHECK_FALSE(decide(d, Signal{0.9, SignalSource::oracle}, w, cfg, rng));
        CHECK_FALSE(decide(agent_with(Archetype::scalper, 0.5, 0.0), Signal{0.9, SignalSource::oracle}, w, cfg, rng));
    }
}

TEST_CASE("exit triggers") {
    SUBCASE("take-profit at leveraged +5%") {
        const auto e = check_triggers(holding(Side::buy, 100, 5, 0.04, 0.04), closing_at(101));
        REQUIRE(e);
        CHECK(e->reason == FillReason::take_profit);
    }
    SUBCASE("flat price never exits") {
        CHECK_FALSE(check_triggers(holding(Side::buy, 100, 5, 0.01, 0.01), closing_at(100)));
    }
    SUBCASE("stop-loss at leveraged -5%") {
        const auto e = check_triggers(holding(Side::buy, 100, 5, 0.04, 0.04), closing_at(99));
        REQUIRE(e);
        CHECK(e->reason == FillReason::stop_loss);
    }
    SUBCASE("short side mirrors") {
        CHECK(check_triggers(holding(Side::sell, 100, 5, 0.04, 0.04), closing_at(99))->reason == FillReason::take_profit);
        CHECK(check_triggers(holding(Side::sell, 100, 5, 0.04, 0.04), closing_at(101))->reason == FillReason::stop_loss);
    }
    SUBCASE("liquidation outranks stop-loss") {
        Agent a = holding(Side::buy, 100, 5, 0.04, 0.04);
        a.cash = 20.0;
        a.position->quantity = 5.0;
        const auto e = check_triggers(a, closing_at(80.0), 0.005);
        REQUIRE(e);
        CHECK(e->reason == FillReason::liquidation);
        CHECK(check_triggers(a, closing_at(80.0))->reason == FillReason::stop_loss);
    }
}

TEST_CASE("genome clamping keeps values inside bounds") {
    Rng rng(4);
    const GenomeBounds b;
    for (int t = 0; t < 1000; ++t) {
        Genome g;
        g.leverage = rng.uniform(-5, 50);
        g.take_profit = rng.uniform(-1, 2);
        g.stop_loss = rng.uniform(-1, 2);
        g.confidence_threshold = rng.uniform(-1, 2);
        CHECK_NOTHROW(g.clamped(b).validate(b));
    }
    Genome bad;
    bad.leverage = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("agents bind to assets by id") {
    Genome g;
    for (std::uint64_t id = 0; id < 45; ++id) CHECK(make_agent(id, g, AgentConfig{}, 20, 0, 100).bound_asset == id % 20);
}

TEST_CASE("archetype names round-trip") {
    for (Archetype a : kArchetypes) CHECK(archetype_from_string(to_string(a)) == a);
    CHECK_FALSE(archetype_from_string("momentum"));
}
