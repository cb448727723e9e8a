#include "evosim/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "evosim/analytics.hpp"
#include "evosim/error.hpp"
#include "evosim/report.hpp"
#include "evosim/scenario.hpp"
#include "evosim/stats.hpp"

namespace evosim {

namespace {

namespace fs = std::filesystem;

fs::path default_out_base() {
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return "evosim_out";
}

void print_summary(const SimulationReport& r, std::ostream& out) {
    out << "scenario          " << r.scenario << " (seed " << r.seed << ")\n";
    out << "steps             " << r.rows.size() << '\n';
    out << "final equity      " << format_number(r.final_total_equity()) << " of "
        << format_number(r.initial_capital) << '\n';
    out << "final ROI         " << format_number(r.final_roi()) << '\n';
    out << "group cash        " << format_number(r.final_group_cash()) << '\n';
    out << "accuracy W        " << format_number(r.directional_accuracy) << '\n';
    out << "trade hit rate    " << format_number(r.trade_hit_rate) << '\n';
    out << "breakeven W_BE    " << format_number(r.breakeven_win_rate)
        << (breakeven_feasible(r.breakeven_win_rate) ? "" : " (infeasible)") << '\n';
    out << "closed trades     " << r.closed_trades << '\n';
    out << "churn ratio       " << (r.churn_ratio ? format_number(*r.churn_ratio) : std::string("undefined")) << '\n';
    out << "cascade events    " << r.cascades.size() << '\n';
    out << "starvation        " << format_number(r.starvation_fraction) << '\n';
    out << "mean convergence  "
        << (r.mean_convergence ? format_number(*r.mean_convergence) : std::string("undefined")) << '\n';
}

std::optional<ScenarioConfig> open_scenario(const std::string& path, std::ostream& err) {
    if (!fs::exists(path)) {
        err << "error: scenario file not found: " << path << '\n';
        return std::nullopt;
    }
    try {
        ScenarioConfig c = load_scenario(path);
        c.validate();
        return c;
    } catch (const ConfigError& e) {
        err << "error: invalid scenario " << path << ": field " << e.field() << ": " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << path << ": " << e.what() << '\n';
    }
    return std::nullopt;
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
            std::ostream& out, std::ostream& err) {
    auto config = open_scenario(scenario, err);
    if (!config) return 2;
    if (seed) config->seed = *seed;
    const fs::path dir = out_dir ? fs::path(*out_dir)
                                 : default_out_base() / (config->name + "-seed" + std::to_string(config->seed));
    try {
        const SimulationReport r = run_scenario(*config);
        write_report(r, *config, dir);
        print_summary(r, out);
        out << "wrote             " << dir.string() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad number: " + item);
        values.push_back(v);
    }
    return values;
}

int cmd_sweep(const std::string& scenario, const std::string& param, const std::string& values_text,
              std::size_t seeds, std::optional<std::string> out_dir, std::ostream& out, std::ostream& err) {
    const auto& names = sweep_parameters();
    if (std::find(names.begin(), names.end(), param) == names.end()) {
        err << "error: unknown sweep parameter '" << param << "'; valid names:";
        for (const auto& n : names) err << ' ' << n;
        err << '\n';
        return 2;
    }
    std::vector<double> values;
    try {
        values = parse_values(values_text);
    } catch (const std::exception&) {
        err << "usage error: --values must be a comma-separated list of numbers\n";
        return 2;
    }
    if (values.empty()) {
        err << "usage error: --values must list at least one value\n";
        return 2;
    }
    if (seeds == 0) {
        err << "usage error: --seeds must be >= 1\n";
        return 2;
    }
    auto base = open_scenario(scenario, err);
    if (!base) return 2;
    const fs::path dir = out_dir ? fs::path(*out_dir) : default_out_base() / (base->name + "-sweep-" + param);

    std::ostringstream runs;
    runs << "value,seed,final_total_equity,final_roi,final_group_cash,directional_accuracy,churn_ratio,"
            "cascade_events,starvation_fraction,mean_convergence\n";
    std::ostringstream agg;
    agg << "param,value,seeds,roi_mean,roi_ci95_lo,roi_ci95_hi,equity_mean,equity_ci95_lo,equity_ci95_hi,"
           "accuracy_mean,churn_mean,cascades_mean,starvation_mean\n";
    try {
        for (double v : values) {
            std::vector<double> roi, equity, acc, churn, casc, starve;
            for (std::size_t k = 0; k < seeds; ++k) {
                ScenarioConfig c = *base;
                set_parameter(c, param, v);
                c.seed = base->seed + k;
                c.validate();
                const SimulationReport r = run_scenario(c);
                roi.push_back(r.final_roi());
                equity.push_back(r.final_total_equity());
                acc.push_back(r.directional_accuracy);
                if (r.churn_ratio) churn.push_back(*r.churn_ratio);
                casc.push_back(static_cast<double>(r.cascades.size()));
                starve.push_back(r.starvation_fraction);
                runs << format_number(v) << ',' << c.seed << ',' << format_number(r.final_total_equity()) << ','
                     << format_number(r.final_roi()) << ',' << format_number(r.final_group_cash()) << ','
                     << format_number(r.directional_accuracy) << ','
                     << (r.churn_ratio ? format_number(*r.churn_ratio) : std::string("nan")) << ','
                     << r.cascades.size() << ',' << format_number(r.starvation_fraction) << ','
                     << (r.mean_convergence ? format_number(*r.mean_convergence) : std::string("nan")) << '\n';
            }
            auto ci = [](const std::vector<double>& xs) {
                return xs.size() < 2 ? Interval{summarize(xs).mean, summarize(xs).mean} : t_interval(xs, 0.95);
            };
            const Interval roi_ci = ci(roi), eq_ci = ci(equity);
            agg << param << ',' << format_number(v) << ',' << seeds << ',' << format_number(summarize(roi).mean)
                << ',' << format_number(roi_ci.lo) << ',' << format_number(roi_ci.hi) << ','
                << format_number(summarize(equity).mean) << ',' << format_number(eq_ci.lo) << ','
                << format_number(eq_ci.hi) << ',' << format_number(summarize(acc).mean) << ','
                << format_number(churn.empty() ? std::nan("") : summarize(churn).mean) << ','
                << format_number(summarize(casc).mean) << ',' << format_number(summarize(starve).mean) << '\n';
            out << param << '=' << format_number(v) << "  mean ROI " << format_number(summarize(roi).mean) << "  95% CI ["
                << format_number(roi_ci.lo) << ", " << format_number(roi_ci.hi) << "]\n";
        }
        fs::create_directories(dir);
        write_atomic(dir / "sweep_runs.csv", runs.str());
        write_atomic(dir / "sweep.csv", agg.str());
    } catch (const ConfigError& e) {
        err << "error: invalid sweep point: field " << e.field() << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    out << "wrote " << (dir / "sweep.csv").string() << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Evolutionary trading-population simulator", "evosim"};
    app.require_subcommand(1);

    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    auto* run = app.add_subcommand("run", "Run one scenario and write its report");
    run->add_option("--scenario", scenario, "Scenario JSON file")->required();
    run->add_option("--seed", seed, "Override the master seed");
    run->add_option("--out", out_dir, "Output directory");

    std::string param, values;
    std::size_t seeds = 1;
    auto* sweep = app.add_subcommand("sweep", "Run a parameter grid over several seeds");
    sweep->add_option("--scenario", scenario, "Scenario JSON file")->required();
    sweep->add_option("--param", param, "Parameter name")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();
    sweep->add_option("--seeds", seeds, "Seeds per value");
    sweep->add_option("--out", out_dir, "Output directory");

    auto* calc = app.add_subcommand("calc", "Expected value and breakeven win rate");
    calc->require_subcommand(1);
    double w = 0, r = 0, risk = 0, c = 0, c_ratio = 0;
    auto* ev = calc->add_subcommand("ev", "W*(R*risk) - (1-W)*risk - C");
    ev->add_option("--w", w, "Win rate")->required();
    ev->add_option("--r", r, "Reward-to-risk ratio")->required();
    ev->add_option("--risk", risk, "Fractional loss per losing trade")->required();
    ev->add_option("--c", c, "Fractional round-trip cost")->required();
    auto* be = calc->add_subcommand("breakeven", "(1 + C_ratio) / (1 + R)");
    be->add_option("--c-ratio", c_ratio, "Cost over risk")->required();
    be->add_option("--r", r, "Reward-to-risk ratio")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    if (*run) return cmd_run(scenario, seed, out_dir, out, err);
    if (*sweep) return cmd_sweep(scenario, param, values, seeds, out_dir, out, err);

    if (*ev) {
        if (!(w >= 0.0 && w <= 1.0) || !(r > 0.0) || !(risk >= 0.0) || !(c >= 0.0)) {
            err << "usage error: need 0 <= W <= 1, R > 0, risk >= 0, C >= 0\n";
            return 2;
        }
        out << format_number(expected_value(w, r, risk, c)) << '\n';
        return 0;
    }
    if (!(r > 0.0) || !(c_ratio >= 0.0)) {
        err << "usage error: need R > 0 and C_ratio >= 0\n";
        return 2;
    }
    const double wbe = breakeven_win_rate(c_ratio, r);
    out << format_number(wbe);
    if (!breakeven_feasible(wbe)) out << " infeasible";
    out << '\n';
    return 0;
}

}  // namespace evosim
