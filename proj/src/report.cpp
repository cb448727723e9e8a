#include "evosim/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "evosim/scenario.hpp"

namespace evosim {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

using ojson = nlohmann::ordered_json;

ojson number_or_null(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return nullptr;
    return format_number(x);
}

}  // namespace

std::string summary_json(const SimulationReport& r) {
    ojson j;
    j["scenario"] = r.scenario;
    j["seed"] = r.seed;
    j["steps"] = r.rows.size();
    j["assets"] = r.assets.size();
    j["initial_capital"] = r.initial_capital;
    j["final_total_equity"] = r.final_total_equity();
    j["final_roi"] = r.final_roi();
    j["final_group_cash"] = r.final_group_cash();
    j["final_aum"] = r.rows.empty() ? r.initial_capital : r.rows.back().aum;
    j["final_population"] = r.rows.empty() ? 0 : r.rows.back().population;
    j["cumulative_fees"] = r.cumulative_fees;
    j["cumulative_injections"] = r.rows.empty() ? 0.0 : r.rows.back().cumulative_injections;
    j["cumulative_recovered"] = r.rows.empty() ? 0.0 : r.rows.back().cumulative_recovered;
    j["signals"] = r.signals;
    j["directional_accuracy"] = r.directional_accuracy;
    j["closed_trades"] = r.closed_trades;
    j["winning_trades"] = r.winning_trades;
    j["trade_hit_rate"] = r.trade_hit_rate;
    j["gross_trade_pnl"] = r.gross_trade_pnl;
    j["churn_ratio"] = r.churn_ratio ? number_or_null(*r.churn_ratio) : ojson(nullptr);
    j["mean_trade_return"] = r.mean_trade_return;
    j["round_trip_cost"] = r.round_trip_cost;
    j["payoff_ratio"] = r.payoff_ratio;
    j["breakeven_win_rate"] = number_or_null(r.breakeven_win_rate);
    j["cascade_events"] = r.cascades.size();
    j["starvation_fraction"] = r.starvation_fraction;
    j["mean_convergence"] = r.mean_convergence ? number_or_null(*r.mean_convergence) : ojson(nullptr);
    j["agents_ever_alive"] = r.lives.size();
    j["generations"] = r.generations.size();
    j["max_conservation_error"] = r.max_conservation_error;
    return j.dump(2) + "\n";
}

std::string timeseries_csv(const SimulationReport& r) {
    std::ostringstream out;
    out << "step,timestamp,population,alive,exposed,aum,total_equity,group_cash,roi,bar_pnl,cumulative_fees,"
           "cumulative_injections,cumulative_recovered,decoupling,convergence,fills,forced_exits,conservation_error\n";
    for (const StepRow& s : r.rows) {
        out << s.step << ',' << s.timestamp << ',' << s.population << ',' << s.alive << ',' << s.exposed << ','
            << format_number(s.aum) << ',' << format_number(s.total_equity) << ',' << format_number(s.group_cash)
            << ',' << format_number(s.roi) << ',' << format_number(s.bar_pnl) << ','
            << format_number(s.cumulative_fees) << ',' << format_number(s.cumulative_injections) << ','
            << format_number(s.cumulative_recovered) << ',' << format_number(s.decoupling) << ','
            << format_number(s.convergence) << ',' << s.fills << ',' << s.forced_exits << ','
            << format_number(s.conservation_error) << '\n';
    }
    return out.str();
}

std::string fills_csv(const SimulationReport& r) {
    std::ostringstream out;
    write_fill_log_header(out);
    for (const Fill& f : r.fills) write_fill_row(out, f, r.assets);
    return out.str();
}

std::string generations_csv(const SimulationReport& r) {
    std::ostringstream out;
    out << "epoch,step,births,deaths,bailouts,conversions,population";
    for (Archetype a : kArchetypes) out << ',' << to_string(a) << "_census";
    out << ",mean_equity,median_equity,group_cash\n";
    for (const GenerationRecord& g : r.generations) {
        out << g.epoch << ',' << g.step << ',' << g.births << ',' << g.deaths << ',' << g.bailouts << ','
            << g.conversions << ',' << g.population;
        for (std::size_t c : g.census) out << ',' << c;
        out << ',' << format_number(g.mean_equity) << ',' << format_number(g.median_equity) << ','
            << format_number(g.group_cash) << '\n';
    }
    return out.str();
}

std::string lives_csv(const SimulationReport& r) {
    std::ostringstream out;
    out << "agent_id,birth_time,death_time,death_cause,entries,confidence_threshold,archetype\n";
    for (const LifeRecord& l : r.lives) {
        out << l.id << ',' << l.birth_time << ',';
        if (l.death_cause != DeathCause::none) out << l.death_time;
        out << ',' << to_string(l.death_cause) << ',' << l.entries << ',' << format_number(l.confidence_threshold)
            << ',' << to_string(l.archetype) << '\n';
    }
    return out.str();
}

std::string cascades_csv(const SimulationReport& r) {
    std::ostringstream out;
    out << "step,forced_exits,notional\n";
    for (const CascadeEvent& e : r.cascades) out << e.bar << ',' << e.count << ',' << format_number(e.notional) << '\n';
    return out.str();
}

std::string series_aum_equity_csv(const SimulationReport& r) {
    std::ostringstream out;
    out << "step,timestamp,aum,total_equity,decoupling,cumulative_injections\n";
    for (const StepRow& s : r.rows)
        out << s.step << ',' << s.timestamp << ',' << format_number(s.aum) << ',' << format_number(s.total_equity)
            << ',' << format_number(s.decoupling) << ',' << format_number(s.cumulative_injections) << '\n';
    return out.str();
}

std::string series_group_cash_csv(const SimulationReport& r) {
    std::ostringstream out;
    out << "step,timestamp,group_cash\n";
    for (const StepRow& s : r.rows) out << s.step << ',' << s.timestamp << ',' << format_number(s.group_cash) << '\n';
    return out.str();
}

std::string series_roi_csv(const SimulationReport& r) {
    std::ostringstream out;
    out << "step,timestamp,roi\n";
    for (const StepRow& s : r.rows) out << s.step << ',' << s.timestamp << ',' << format_number(s.roi) << '\n';
    return out.str();
}

std::string series_bar_pnl_csv(const SimulationReport& r) {
    std::ostringstream out;
    out << "step,timestamp,bar_pnl\n";
    for (const StepRow& s : r.rows) out << s.step << ',' << s.timestamp << ',' << format_number(s.bar_pnl) << '\n';
    return out.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::string> write_report(const SimulationReport& r, const ScenarioConfig& config,
                                      const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::vector<std::pair<std::string, std::string>> files{
        {"scenario.json", scenario_to_json(config)},
        {"summary.json", summary_json(r)},
        {"timeseries.csv", timeseries_csv(r)},
        {"series_aum_equity.csv", series_aum_equity_csv(r)},
        {"series_group_cash.csv", series_group_cash_csv(r)},
        {"series_roi.csv", series_roi_csv(r)},
        {"series_bar_pnl.csv", series_bar_pnl_csv(r)},
        {"fills.csv", fills_csv(r)},
        {"generations.csv", generations_csv(r)},
        {"agents.csv", lives_csv(r)},
        {"cascades.csv", cascades_csv(r)},
    };
    std::vector<std::string> names;
    for (const auto& [name, text] : files) {
        write_atomic(out_dir / name, text);
        names.push_back(name);
    }
    return names;
}

}  // namespace evosim
