#include "ei/bee.hpp"
#include "ei/config.hpp"
#include "ei/error.hpp"
#include "ei/opf.hpp"
#include "ei/pool.hpp"
#include "ei/profile.hpp"
#include "ei/scenario.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

using namespace ei;

struct BeeArgs {
    std::string kind = "offer";
    std::string carrier = "electricity";
    std::uint32_t quantity_wh = 0;
    std::uint32_t start = 0;
    std::uint16_t duration_min = 120;
    std::uint32_t price = 0;
    std::uint16_t carbon = 0;
    std::uint16_t green = 0;
    std::uint16_t grade = 0;
    std::uint16_t flow = 0;
    std::string sender;
    std::string receiver = "ff:ff:ff:ff:ff:ff";
};

template <class Enum>
Enum parse_enum(const std::string& text, std::initializer_list<Enum> values, std::string_view what) {
    std::string lower = text;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    for (auto v : values) {
        std::string name(to_string(v));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (name == lower) return v;
    }
    throw Error(Errc::ConfigError, "unknown " + std::string(what) + " '" + text + "'");
}

Bee bee_from(const BeeArgs& a) {
    Bee b;
    b.kind = parse_enum(a.kind, {BeeKind::Offer, BeeKind::Request, BeeKind::Confirm, BeeKind::Settle}, "kind");
    b.carrier = parse_enum(a.carrier, {Carrier::Electricity, Carrier::Heat, Carrier::Gas, Carrier::Hydrogen}, "carrier");
    b.quantity_wh = a.quantity_wh;
    b.delivery_start = a.start;
    b.delivery_duration_min = a.duration_min;
    b.price_mcny_per_kwh = a.price;
    b.carbon_intensity_g_per_kwh = a.carbon;
    b.green_fraction_bp = a.green;
    b.grade = a.grade;
    b.mass_flow_rate = a.flow;
    b.sender = MacAddress::parse(a.sender);
    b.receiver = MacAddress::parse(a.receiver);
    return b;
}

Bee bee_from_hex(const std::string& hex) { return decode_bee(from_hex(hex)); }

BeePool load_pool(const std::string& path) {
    if (!std::filesystem::exists(path)) return {};
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot read " + path);
    return BeePool::read_csv(in);
}

void save_pool(const BeePool& pool, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    pool.write_csv(out);
}

void print_entries(std::string_view side, const std::vector<PoolEntry>& entries) {
    for (const auto& e : entries) {
        std::cout << side << " #" << e.arrival_seq << ' ' << e.remaining_wh << " Wh @ " << e.bee.price_mcny_per_kwh
                  << " mCNY/kWh from " << e.bee.sender.to_string() << '\n';
    }
}

void cmd_run(const std::string& path, std::string out_dir, std::optional<std::uint64_t> seed) {
    Scenario s = load_scenario(path);
    if (seed) s.seed = *seed;
    const ScenarioReport report = run_scenario(s);
    if (out_dir.empty()) out_dir = "out/" + s.name;
    emit_report(report, out_dir);
    std::cout << summary_text(report);
    std::cout << "reconciliation: " << (report.reconciliation.ok() ? "ok" : "MISMATCH") << '\n';
    std::cout << "reports written to " << out_dir << '\n';
    if (!report.reconciliation.ok()) throw Error(Errc::AccountingMismatch, "ledger, pool and stack disagree");
}

void cmd_opf(const std::string& path, std::size_t period, bool csv) {
    const GridModel grid = load_grid(path);
    if (period < 1 || period > grid.periods) {
        throw Error(Errc::ConfigError, "period must be in 1.." + std::to_string(grid.periods));
    }
    OpfInput in;
    in.period = period - 1;
    const OpfSolution sol = solve_opf(grid, in);
    if (csv) {
        write_opf_csv_header(std::cout);
        write_opf_csv(std::cout, grid, sol);
        return;
    }
    std::cout << std::fixed << std::setprecision(2);
    for (std::size_t i = 0; i < grid.plants.size(); ++i) {
        std::cout << "P[" << grid.plants[i].id << "] = " << sol.plant_kw[i] << " kW\n";
    }
    for (std::size_t i = 0; i < grid.renewables.size(); ++i) {
        std::cout << "R[" << grid.renewables[i].id << "] = " << sol.renewable_kw[i] << " kW\n";
    }
    std::cout << std::setprecision(4);
    for (std::size_t n = 0; n < grid.nodes.size(); ++n) {
        std::cout << "pi[" << grid.nodes[n].id << "] = " << sol.lmp[n] << " CNY/kWh\n";
    }
    std::cout << "cost = " << sol.plant_cost_cny_per_h << " CNY/h, loss = " << sol.total_loss_kw << " kW\n";
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Energy Internet simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run both operating modes of a scenario and write reports");
    std::string scenario_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--out", out_dir, "report directory (default out/<name>)");
    run->add_option("--seed", seed, "override the scenario seed");

    auto* opf = app.add_subcommand("opf", "solve one period of a grid with loads at baseline");
    std::string grid_path;
    std::size_t period = 1;
    bool csv = false;
    opf->add_option("grid", grid_path, "grid file")->required();
    opf->add_option("period", period, "period, 1-based")->required();
    opf->add_flag("--csv", csv, "print the solution as CSV");

    auto* pool = app.add_subcommand("pool", "inspect or update a pool state file");
    pool->require_subcommand(1);
    std::string state = "pool.csv";
    pool->add_option("--state", state, "pool state CSV")->capture_default_str();
    auto* pool_list = pool->add_subcommand("list", "list resting entries");
    auto* pool_submit = pool->add_subcommand("submit", "submit a BEE and print fills");
    std::string submit_hex;
    std::uint32_t now = 0;
    pool_submit->add_option("hex", submit_hex, "BEE as 96 hex digits")->required();
    pool_submit->add_option("--now", now, "current epoch seconds, for expiry");

    auto* bee = app.add_subcommand("bee", "encode or decode a BEE");
    bee->require_subcommand(1);
    auto* encode = bee->add_subcommand("encode", "encode fields to hex");
    BeeArgs args;
    encode->add_option("--kind", args.kind, "offer|request|confirm|settle")->capture_default_str();
    encode->add_option("--carrier", args.carrier, "electricity|heat|gas|hydrogen")->capture_default_str();
    encode->add_option("--quantity", args.quantity_wh, "Wh")->required();
    encode->add_option("--start", args.start, "delivery start, epoch seconds");
    encode->add_option("--duration", args.duration_min, "minutes")->capture_default_str();
    encode->add_option("--price", args.price, "mCNY/kWh");
    encode->add_option("--carbon", args.carbon, "gCO2/kWh");
    encode->add_option("--green", args.green, "basis points");
    encode->add_option("--grade", args.grade, "quality grade");
    encode->add_option("--flow", args.flow, "mass flow rate");
    encode->add_option("--sender", args.sender, "sender MAC")->required();
    encode->add_option("--receiver", args.receiver, "receiver MAC")->capture_default_str();
    auto* decode = bee->add_subcommand("decode", "decode hex and print fields");
    std::string decode_hex;
    decode->add_option("hex", decode_hex, "BEE as 96 hex digits")->required();

    auto* profile = app.add_subcommand("profile", "user profiles rebuilt from an event log");
    profile->require_subcommand(1);
    auto* show = profile->add_subcommand("show", "print one profile");
    std::string mac;
    std::string log_path = "events.log";
    show->add_option("mac", mac, "MAC address")->required();
    show->add_option("--log", log_path, "event log")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            cmd_run(scenario_path, out_dir, seed);
        } else if (*opf) {
            cmd_opf(grid_path, period, csv);
        } else if (*pool_list) {
            const BeePool p = load_pool(state);
            print_entries("offer", p.offers());
            print_entries("request", p.requests());
        } else if (*pool_submit) {
            BeePool p = load_pool(state);
            const MatchResult res = p.submit(bee_from_hex(submit_hex), now);
            for (const auto& f : res.fills) {
                std::cout << "fill " << f.matched_wh << " Wh @ " << f.clearing_price_mcny_per_kwh << " mCNY/kWh "
                          << f.offer.bee.sender.to_string() << " -> " << f.request.bee.sender.to_string() << '\n';
                std::cout << "  settle " << to_hex(encode_bee(settle_bee_for(f))) << '\n';
            }
            if (res.residual) std::cout << "resting " << res.residual->remaining_wh << " Wh\n";
            save_pool(p, state);
        } else if (*encode) {
            std::cout << to_hex(encode_bee(bee_from(args))) << '\n';
        } else if (*decode) {
            std::cout << describe(bee_from_hex(decode_hex));
        } else if (*show) {
            std::ifstream in(log_path);
            if (!in) throw Error(Errc::IoError, "cannot read " + log_path + ": file not found");
            Ledger ledger;
            ledger.replay(in);
            std::cout << serialize_profile(ledger.query_profile(MacAddress::parse(mac)));
        }
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.code()) << "]: " << e.detail() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error[Internal]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
