#include "ei/scenario.hpp"

#include "ei/error.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <filesystem>
#include <fstream>
#include <numeric>

namespace ei {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    return out;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double mean_lmp(const OpfSolution& sol) { return sol.lmp.empty() ? 0.0 : sum(sol.lmp) / static_cast<double>(sol.lmp.size()); }

void write_welfare(std::ostream& out, const ScenarioReport& r) {
    out << "period,trad_welfare_cny,ei_welfare_cny,trad_consumer_cny,ei_consumer_cny,"
           "trad_producer_cny,ei_producer_cny,trad_grid_cny,ei_grid_cny\n";
    for (std::size_t t = 0; t < r.traditional.periods.size(); ++t) {
        const auto& a = r.traditional.periods[t].surplus;
        const auto& b = r.energy_internet.periods[t].surplus;
        fmt::print(out, "{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", t + 1, a.welfare, b.welfare,
                   a.consumer_surplus, b.consumer_surplus, a.producer_surplus, b.producer_surplus, a.grid_surplus,
                   b.grid_surplus);
    }
}

void write_carbon(std::ostream& out, const ScenarioReport& r) {
    out << "period,trad_thermal_kwh,ei_thermal_kwh,trad_carbon_t,ei_carbon_t\n";
    for (std::size_t t = 0; t < r.traditional.periods.size(); ++t) {
        const auto& a = r.traditional.periods[t].surplus;
        const auto& b = r.energy_internet.periods[t].surplus;
        fmt::print(out, "{},{:.6f},{:.6f},{:.6f},{:.6f}\n", t + 1, a.thermal_kwh, b.thermal_kwh, a.carbon_t,
                   b.carbon_t);
    }
}

void write_dispatch(std::ostream& out, const ScenarioReport& r) {
    out << "period,trad_plant_kw,ei_plant_kw,trad_load_kw,ei_load_kw,trad_renewable_kwh,ei_renewable_kwh,"
           "trad_curtailed_kwh,ei_curtailed_kwh,trad_loss_kwh,ei_loss_kwh,trad_mean_lmp,ei_mean_lmp,"
           "peer_wh,grid_wh,peer_trades\n";
    for (std::size_t t = 0; t < r.traditional.periods.size(); ++t) {
        const auto& a = r.traditional.periods[t];
        const auto& b = r.energy_internet.periods[t];
        fmt::print(out, "{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{}\n",
                   t + 1, sum(a.opf.plant_kw), sum(b.opf.plant_kw), sum(a.opf.load_kw), sum(b.opf.load_kw),
                   a.renewable_used_kwh, b.renewable_used_kwh, a.curtailed_kwh, b.curtailed_kwh, a.loss_kwh,
                   b.loss_kwh, mean_lmp(a.opf), mean_lmp(b.opf), b.peer_wh, b.grid_wh, b.peer_trades);
    }
}

void write_partition(std::ostream& out, const ScenarioReport& r) {
    const auto& a = r.traditional.daily;
    const auto& b = r.energy_internet.daily;
    out << "scope,name,traditional_cny,energy_internet_cny,delta_cny\n";
    auto row = [&](std::string_view scope, std::string_view name, double x, double y) {
        fmt::print(out, "{},{},{:.6f},{:.6f},{:.6f}\n", scope, name, x, y, y - x);
    };
    row("daily", "consumer_surplus", a.consumer_surplus, b.consumer_surplus);
    row("daily", "producer_surplus", a.producer_surplus, b.producer_surplus);
    row("daily", "plant_profit", a.plant_profit, b.plant_profit);
    row("daily", "merchandise_surplus", a.merchandise_surplus, b.merchandise_surplus);
    row("daily", "service_fee", a.service_fee, b.service_fee);
    row("daily", "grid_surplus", a.grid_surplus, b.grid_surplus);
    row("daily", "welfare", a.welfare, b.welfare);
    for (std::size_t i = 0; i < r.traditional.resources.size(); ++i) {
        const auto& x = r.traditional.resources[i];
        row(to_string(x.type), x.name, x.profit_cny, r.energy_internet.resources[i].profit_cny);
    }
}

} // namespace

std::string summary_text(const ScenarioReport& r) {
    const auto& a = r.traditional;
    const auto& b = r.energy_internet;
    std::string s = fmt::format("scenario {} (seed {})\n", r.name, r.seed);
    s += fmt::format("- social welfare: {:.2f} -> {:.2f} CNY ({:+.2f}%)\n", a.daily.welfare, b.daily.welfare,
                     r.welfare_delta_pct());
    s += fmt::format("- carbon emission: {:.4f} -> {:.4f} t ({:+.2f}%)\n", a.daily.carbon_t, b.daily.carbon_t,
                     r.carbon_delta_pct());
    s += fmt::format("- grid surplus: {:.2f} -> {:.2f} CNY ({:+.2f}%)\n", a.daily.grid_surplus, b.daily.grid_surplus,
                     r.grid_surplus_delta_pct());
    s += "- resource profit change:";
    for (std::size_t i = 0; i < a.resources.size(); ++i) {
        const auto& x = a.resources[i];
        if (x.type == ResourceType::Isp) continue;
        s += fmt::format(" {} {:+.2f} CNY;", x.name, b.resources[i].profit_cny - x.profit_cny);
    }
    s.back() = '\n';
    s += fmt::format("- renewable curtailment: {:.3f} -> {:.3f} kWh\n", a.curtailed_kwh, b.curtailed_kwh);
    return s;
}

void emit_report(const ScenarioReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + out_dir + ": " + ec.message());
    const fs::path dir(out_dir);
    {
        auto out = open_out(dir / "welfare.csv");
        write_welfare(out, report);
    }
    {
        auto out = open_out(dir / "carbon.csv");
        write_carbon(out, report);
    }
    {
        auto out = open_out(dir / "dispatch_by_period.csv");
        write_dispatch(out, report);
    }
    {
        auto out = open_out(dir / "surplus_partition.csv");
        write_partition(out, report);
    }
    {
        auto out = open_out(dir / "summary.txt");
        out << summary_text(report);
    }
    {
        auto out = open_out(dir / "events.log");
        for (const auto& line : report.event_log) out << line << '\n';
    }
    {
        auto out = open_out(dir / "trace.csv");
        write_trace_csv(out, report.trace);
    }
}

} // namespace ei
