#include "evosim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "evosim/error.hpp"

namespace evosim {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(PerceptionMode m) {
    switch (m) {
        case PerceptionMode::oracle: return "oracle";
        case PerceptionMode::lstm: return "lstm";
        case PerceptionMode::attention: return "attention";
    }
    return "?";
}

std::string_view to_string(SignalScope s) { return s == SignalScope::market ? "market" : "per_asset"; }

std::string_view to_string(SlippageModel m) { return m == SlippageModel::constant ? "constant" : "noisy"; }

namespace {

// Reads keys out of one JSON object and complains about leftovers.
class Section {
public:
    Section(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
        if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
    }

    std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(field(key), "expected a number");
            out = v->get<double>();
        }
    }

    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (const json* v = find(key)) {
            if (v->is_number_unsigned()) {
                out = static_cast<Int>(v->get<std::uint64_t>());
            } else if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
                out = static_cast<Int>(v->get<std::int64_t>());
            } else {
                throw ConfigError(field(key), "expected a non-negative integer");
            }
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    void string(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(field(key), "expected a string");
            out = v->get<std::string>();
        }
    }

    void range(const std::string& key, double& lo, double& hi) {
        if (const json* v = find(key)) {
            if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
                throw ConfigError(field(key), "expected [min, max]");
            lo = (*v)[0].get<double>();
            hi = (*v)[1].get<double>();
        }
    }

    template <class Fn>
    void object(const std::string& key, Fn&& fn) {
        if (const json* v = find(key)) {
            Section sub(*v, field(key));
            fn(sub);
            sub.finish();
        }
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }

private:
    const json& obj_;
    std::string prefix_;
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

}  // namespace

ScenarioConfig scenario_from_json(std::string_view text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line number
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
        throw ParseError(std::string("malformed scenario JSON: ") + e.what(), line);
    }

    ScenarioConfig c;
    Section s(root, "");
    s.string("name", c.name);
    s.integer("seed", c.seed);
    s.integer("steps", c.steps);
    s.integer("report_every", c.report_every);
    s.number("maintenance_fraction", c.maintenance_fraction);

    s.object("universe", [&](Section& u) {
        if (const json* v = u.find("csv_paths")) {
            if (!v->is_array()) throw ConfigError(u.field("csv_paths"), "expected an array of paths");
            for (const auto& p : *v) {
                if (!p.is_string()) throw ConfigError(u.field("csv_paths"), "expected an array of paths");
                c.universe.csv_paths.push_back(resolve(base_dir, p.get<std::string>()));
            }
        }
        u.integer("n_assets", c.universe.n_assets);
        u.number("volatility", c.universe.volatility);
        u.number("drift", c.universe.drift);
        u.number("correlation", c.universe.correlation);
        u.number("start_price", c.universe.start_price);
        u.integer("interval", c.universe.interval);
    });

    s.object("population", [&](Section& p) {
        p.integer("size", c.population.size);
        p.number("protected_quota", c.population.protected_quota);
        p.boolean("per_archetype_floor", c.population.per_archetype_floor);
        p.boolean("bailout_enabled", c.population.bailout_enabled);
        p.number("bailout_grant", c.population.bailout_grant);
        p.number("mutation_scale", c.population.mutation_scale);
        p.number("elite_fraction", c.population.elite_fraction);
        p.number("epoch_seconds", c.population.epoch_seconds);
    });

    s.object("agent", [&](Section& a) {
        a.number("initial_cash", c.agent.initial_cash);
        a.number("initial_lifespan", c.agent.initial_lifespan);
        a.number("metabolic_reward", c.agent.metabolic_reward);
        a.number("position_fraction", c.agent.position_fraction);
    });

    s.object("bounds", [&](Section& b) {
        b.number("leverage_max", c.bounds.leverage_max);
        b.number("return_min", c.bounds.return_min);
        b.number("return_max", c.bounds.return_max);
        b.number("threshold_max", c.bounds.threshold_max);
    });

    s.object("genome", [&](Section& g) {
        g.range("leverage", c.genome.leverage_min, c.genome.leverage_max);
        g.range("take_profit", c.genome.take_profit_min, c.genome.take_profit_max);
        g.range("stop_loss", c.genome.stop_loss_min, c.genome.stop_loss_max);
        g.range("threshold", c.genome.threshold_min, c.genome.threshold_max);
        g.object("archetype_weights", [&](Section& w) {
            for (std::size_t i = 0; i < kArchetypeCount; ++i)
                w.number(std::string(to_string(kArchetypes[i])), c.genome.archetype_weights[i]);
        });
    });

    s.object("friction", [&](Section& f) {
        f.number("taker_fee", c.friction.taker_fee);
        f.number("slippage_mean", c.friction.slippage_mean);
        std::string model(to_string(c.friction.slippage_model));
        f.string("slippage_model", model);
        if (model == "constant") c.friction.slippage_model = SlippageModel::constant;
        else if (model == "noisy") c.friction.slippage_model = SlippageModel::noisy;
        else throw ConfigError(f.field("slippage_model"), "expected \"constant\" or \"noisy\"");
    });

    s.object("perception", [&](Section& p) {
        std::string mode(to_string(c.perception.mode));
        p.string("mode", mode);
        if (mode == "oracle") c.perception.mode = PerceptionMode::oracle;
        else if (mode == "lstm") c.perception.mode = PerceptionMode::lstm;
        else if (mode == "attention") c.perception.mode = PerceptionMode::attention;
        else throw ConfigError(p.field("mode"), "expected oracle, lstm or attention");
        p.number("accuracy", c.perception.accuracy);
        p.number("strength", c.perception.strength);
        std::string scope(to_string(c.perception.scope));
        p.string("scope", scope);
        if (scope == "per_asset") c.perception.scope = SignalScope::per_asset;
        else if (scope == "market") c.perception.scope = SignalScope::market;
        else throw ConfigError(p.field("scope"), "expected per_asset or market");
        p.integer("horizon", c.perception.horizon);
        p.integer("hidden", c.perception.hidden);
        p.integer("layers", c.perception.layers);
        p.integer("d_model", c.perception.d_model);
        p.integer("heads", c.perception.heads);
        std::string weights;
        p.string("weights_path", weights);
        if (!weights.empty()) c.perception.weights_path = resolve(base_dir, weights);
    });

    s.object("features", [&](Section& f) {
        f.integer("lookback", c.features.lookback);
        f.integer("atr_period", c.features.atr_period);
    });

    s.object("cascade", [&](Section& k) {
        k.integer("window_bars", c.cascade.window_bars);
        k.number("threshold_fraction", c.cascade.threshold_fraction);
    });

    s.finish();
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return scenario_from_json(text.str(), path.parent_path());
}

std::string scenario_to_json(const ScenarioConfig& c) {
    ojson j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["steps"] = c.steps;
    j["report_every"] = c.report_every;
    j["maintenance_fraction"] = c.maintenance_fraction;

    ojson u;
    ojson paths = ojson::array();
    for (const auto& p : c.universe.csv_paths) paths.push_back(p.string());
    u["csv_paths"] = paths;
    u["n_assets"] = c.universe.n_assets;
    u["volatility"] = c.universe.volatility;
    u["drift"] = c.universe.drift;
    u["correlation"] = c.universe.correlation;
    u["start_price"] = c.universe.start_price;
    u["interval"] = c.universe.interval;
    j["universe"] = u;

    ojson p;
    p["size"] = c.population.size;
    p["protected_quota"] = c.population.protected_quota;
    p["per_archetype_floor"] = c.population.per_archetype_floor;
    p["bailout_enabled"] = c.population.bailout_enabled;
    p["bailout_grant"] = c.population.bailout_grant;
    p["mutation_scale"] = c.population.mutation_scale;
    p["elite_fraction"] = c.population.elite_fraction;
    p["epoch_seconds"] = c.population.epoch_seconds;
    j["population"] = p;

    ojson a;
    a["initial_cash"] = c.agent.initial_cash;
    a["initial_lifespan"] = c.agent.initial_lifespan;
    a["metabolic_reward"] = c.agent.metabolic_reward;
    a["position_fraction"] = c.agent.position_fraction;
    j["agent"] = a;

    ojson b;
    b["leverage_max"] = c.bounds.leverage_max;
    b["return_min"] = c.bounds.return_min;
    b["return_max"] = c.bounds.return_max;
    b["threshold_max"] = c.bounds.threshold_max;
    j["bounds"] = b;

    ojson g;
    g["leverage"] = {c.genome.leverage_min, c.genome.leverage_max};
    g["take_profit"] = {c.genome.take_profit_min, c.genome.take_profit_max};
    g["stop_loss"] = {c.genome.stop_loss_min, c.genome.stop_loss_max};
    g["threshold"] = {c.genome.threshold_min, c.genome.threshold_max};
    ojson w;
    for (std::size_t i = 0; i < kArchetypeCount; ++i)
        w[std::string(to_string(kArchetypes[i]))] = c.genome.archetype_weights[i];
    g["archetype_weights"] = w;
    j["genome"] = g;

    ojson f;
    f["taker_fee"] = c.friction.taker_fee;
    f["slippage_mean"] = c.friction.slippage_mean;
    f["slippage_model"] = std::string(to_string(c.friction.slippage_model));
    j["friction"] = f;

    ojson q;
    q["mode"] = std::string(to_string(c.perception.mode));
    q["accuracy"] = c.perception.accuracy;
    q["strength"] = c.perception.strength;
    q["scope"] = std::string(to_string(c.perception.scope));
    q["horizon"] = c.perception.horizon;
    q["hidden"] = c.perception.hidden;
    q["layers"] = c.perception.layers;
    q["d_model"] = c.perception.d_model;
    q["heads"] = c.perception.heads;
    if (c.perception.weights_path) q["weights_path"] = c.perception.weights_path->string();
    j["perception"] = q;

    ojson fe;
    fe["lookback"] = c.features.lookback;
    fe["atr_period"] = c.features.atr_period;
    j["features"] = fe;

    ojson k;
    k["window_bars"] = c.cascade.window_bars;
    k["threshold_fraction"] = c.cascade.threshold_fraction;
    j["cascade"] = k;

    return j.dump(2) + "\n";
}

namespace {

std::size_t as_count(std::string_view name, double v) {
    if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError(std::string(name), "expected a non-negative integer");
    return static_cast<std::size_t>(v);
}

using Setter = std::function<void(ScenarioConfig&, double)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table{
        {"oracle_accuracy", [](ScenarioConfig& c, double v) { c.perception.accuracy = v; }},
        {"oracle_strength", [](ScenarioConfig& c, double v) { c.perception.strength = v; }},
        {"taker_fee", [](ScenarioConfig& c, double v) { c.friction.taker_fee = v; }},
        {"slippage_mean", [](ScenarioConfig& c, double v) { c.friction.slippage_mean = v; }},
        {"correlation", [](ScenarioConfig& c, double v) { c.universe.correlation = v; }},
        {"volatility", [](ScenarioConfig& c, double v) { c.universe.volatility = v; }},
        {"drift", [](ScenarioConfig& c, double v) { c.universe.drift = v; }},
        {"n_assets", [](ScenarioConfig& c, double v) { c.universe.n_assets = as_count("n_assets", v); }},
        {"steps", [](ScenarioConfig& c, double v) { c.steps = as_count("steps", v); }},
        {"population", [](ScenarioConfig& c, double v) { c.population.size = as_count("population", v); }},
        {"protected_quota", [](ScenarioConfig& c, double v) { c.population.protected_quota = v; }},
        {"mutation_scale", [](ScenarioConfig& c, double v) { c.population.mutation_scale = v; }},
        {"elite_fraction", [](ScenarioConfig& c, double v) { c.population.elite_fraction = v; }},
        {"bailout_enabled", [](ScenarioConfig& c, double v) { c.population.bailout_enabled = v != 0.0; }},
        {"bailout_grant", [](ScenarioConfig& c, double v) { c.population.bailout_grant = v; }},
        {"initial_lifespan", [](ScenarioConfig& c, double v) { c.agent.initial_lifespan = v; }},
        {"metabolic_reward", [](ScenarioConfig& c, double v) { c.agent.metabolic_reward = v; }},
        {"maintenance_fraction", [](ScenarioConfig& c, double v) { c.maintenance_fraction = v; }},
        {"seed", [](ScenarioConfig& c, double v) { c.seed = as_count("seed", v); }},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [k, _] : setters()) out.push_back(k);
        return out;
    }();
    return names;
}

void set_parameter(ScenarioConfig& config, std::string_view name, double value) {
    const auto& table = setters();
    auto it = table.find(name);
    if (it == table.end()) throw ConfigError(std::string(name), "unknown sweep parameter");
    it->second(config, value);
}

}  // namespace evosim
