#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "evosim/cli.hpp"
#include "evosim/error.hpp"
#include "evosim/scenario.hpp"

using namespace evosim;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("evosim_cli_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

const char* kTiny = R"({
  "name": "tiny",
  "seed": 4,
  "steps": 30,
  "universe": {"n_assets": 3},
  "population": {"size": 20},
  "features": {"lookback": 10}
})";

fs::path write_tiny(const TempDir& t, const std::string& text = kTiny) {
    const fs::path p = t.path / "tiny.json";
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_CASE("calc") {
    auto r = cli({"calc", "ev", "--w", "0.512", "--r", "1", "--risk", "0.01", "--c", "0.001"});
    CHECK(r.code == 0);
    CHECK(std::stod(r.out) == doctest::Approx(-0.00076).epsilon(1e-12));
    r = cli({"calc", "breakeven", "--c-ratio", "0.1", "--r", "1"});
    CHECK(r.out == "0.55\n");
    r = cli({"calc", "breakeven", "--c-ratio", "1.5", "--r", "1"});
    CHECK(r.out == "1.25 infeasible\n");
    CHECK(cli({"calc", "breakeven", "--c-ratio", "0.1", "--r", "0"}).code == 2);
    CHECK(cli({"calc"}).code != 0);
}

TEST_CASE("missing scenario names the path") {
    const auto r = cli({"run", "--scenario", "/nonexistent/where.json"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/nonexistent/where.json") != std::string::npos);
}

TEST_CASE("run writes a complete, reproducible report") {
    TempDir t;
    const auto scen = write_tiny(t);
    const auto a = t.path / "a", b = t.path / "b";
    REQUIRE(cli({"run", "--scenario", scen.string(), "--seed", "7", "--out", a.string()}).code == 0);
    REQUIRE(cli({"run", "--scenario", scen.string(), "--seed", "7", "--out", b.string()}).code == 0);
    for (const char* f : {"scenario.json", "summary.json", "timeseries.csv", "series_aum_equity.csv",
                          "series_group_cash.csv", "series_roi.csv", "series_bar_pnl.csv", "fills.csv",
                          "generations.csv", "agents.csv", "cascades.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(load_scenario(a / "scenario.json").seed == 7);

    const auto c = t.path / "c";
    REQUIRE(cli({"run", "--scenario", scen.string(), "--seed", "8", "--out", c.string()}).code == 0);
    CHECK(slurp(a / "timeseries.csv") != slurp(c / "timeseries.csv"));
}

TEST_CASE("sweep") {
    TempDir t;
    const auto scen = write_tiny(t);
    SUBCASE("unknown parameter lists the valid names") {
        const auto r = cli({"sweep", "--scenario", scen.string(), "--param", "bogus", "--values", "1"});
        CHECK(r.code == 2);
        CHECK(r.err.find("oracle_accuracy") != std::string::npos);
        CHECK(r.err.find("taker_fee") != std::string::npos);
    }
    SUBCASE("empty values") {
        const auto r = cli({"sweep", "--scenario", scen.string(), "--param", "taker_fee", "--values", ","});
        CHECK(r.code == 2);
        CHECK(r.err.find("usage") != std::string::npos);
    }
    SUBCASE("one aggregate row per value") {
        const auto out = t.path / "sw";
        const auto r = cli({"sweep", "--scenario", scen.string(), "--param", "taker_fee", "--values",
                            "0,0.0002,0.0004,0.0008", "--seeds", "2", "--out", out.string()});
        REQUIRE(r.code == 0);
        std::istringstream agg(slurp(out / "sweep.csv"));
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(agg, line)) lines.push_back(line);
        REQUIRE(lines.size() == 5);
        CHECK(lines[1].rfind("taker_fee,0,2,", 0) == 0);
        std::istringstream runs(slurp(out / "sweep_runs.csv"));
        std::size_t n = 0;
        while (std::getline(runs, line)) ++n;
        CHECK(n == 9);
    }
    SUBCASE("a value outside its range names the field") {
        const auto r = cli({"sweep", "--scenario", scen.string(), "--param", "oracle_accuracy", "--values", "1.5"});
        CHECK(r.code == 2);
        CHECK(r.err.find("perception.accuracy") != std::string::npos);
    }
}

TEST_CASE("scenario files") {
    SUBCASE("unknown key") {
        try {
            scenario_from_json(R"({"population": {"size": 10, "sise": 3}})");
            FAIL("accepted an unknown key");
        } catch (const ConfigError& e) {
            CHECK(e.field() == "population.sise");
        }
    }
    SUBCASE("malformed json") { CHECK_THROWS_AS(scenario_from_json("{\n\"steps\": ,\n}"), ParseError); }
    SUBCASE("first invalid field is named") {
        TempDir t;
        const auto scen = write_tiny(t, R"({"steps": 10, "friction": {"taker_fee": -1}})");
        const auto r = cli({"run", "--scenario", scen.string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("friction.taker_fee") != std::string::npos);
    }
    SUBCASE("bundled scenarios round-trip") {
        for (const auto& entry : fs::directory_iterator(EVOSIM_SCENARIO_DIR)) {
            CAPTURE(entry.path());
            const ScenarioConfig c = load_scenario(entry.path());
            CHECK_NOTHROW(c.validate());
            const std::string once = scenario_to_json(c);
            CHECK(scenario_to_json(scenario_from_json(once)) == once);
        }
    }
    SUBCASE("set_parameter") {
        ScenarioConfig c;
        set_parameter(c, "oracle_accuracy", 0.6);
        set_parameter(c, "bailout_enabled", 0);
        set_parameter(c, "population", 42);
        CHECK(c.perception.accuracy == 0.6);
        CHECK_FALSE(c.population.bailout_enabled);
        CHECK(c.population.size == 42);
        CHECK_THROWS_AS(set_parameter(c, "nope", 1), ConfigError);
    }
}
