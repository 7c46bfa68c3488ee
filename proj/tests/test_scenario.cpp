#include "support.hpp"

#include "ei/config.hpp"
#include "ei/error.hpp"
#include "ei/scenario.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace ei;
using namespace ei::testing;

namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::IoError;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ei-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

} // namespace

TEST_CASE("configuration errors") {
    CHECK(code_of([] { load_scenario("/nonexistent/scenario.json"); }) == Errc::IoError);

    const auto dir = scratch("config");
    write(dir / "broken.json", "{ \"nodes\": [ ");
    CHECK(code_of([&] { load_grid(dir / "broken.json"); }) == Errc::ConfigError);

    write(dir / "dangling.json", R"({"nodes":[{"id":"n0"}],
        "plants":[{"id":"G","node":"n9","a":0.001,"b":0.3,"p_max_kw":10}],
        "loads":[]})");
    CHECK(code_of([&] { load_grid(dir / "dangling.json"); }) == Errc::ConfigError);

    write(dir / "flat.json", R"({"nodes":[{"id":"n0"}],
        "plants":[{"id":"G","node":"n0","a":0,"b":0.3,"p_max_kw":10}],
        "loads":[]})");
    CHECK(code_of([&] { load_grid(dir / "flat.json"); }) == Errc::ConfigError);

    CHECK(code_of([] { parse_resource_type("nuclear"); }) == Errc::ConfigError);
}

TEST_CASE("two-plant scenario: both modes coincide") {
    const auto report = run_scenario(load_scenario(scenario_path("two-plant-test")));
    const auto& t = report.traditional;
    const auto& e = report.energy_internet;
    REQUIRE(t.periods.size() == 12);
    REQUIRE(e.periods.size() == 12);
    CHECK(e.daily.welfare == doctest::Approx(t.daily.welfare).epsilon(1e-9));
    CHECK(e.daily.carbon_t == doctest::Approx(t.daily.carbon_t).epsilon(1e-9));
    const double p1 = (0.35 + 0.0005 * 1000.0 - 0.55) / (0.0008 + 0.0005);
    CHECK(t.periods[0].opf.plant_kw[0] == doctest::Approx(p1).epsilon(1e-6));
    CHECK(t.frames == 0);
    CHECK(t.settlements == 0);
    CHECK(report.reconciliation.ok());
}

TEST_CASE("reconstruction scenario: accounts reconcile and curtailment vanishes") {
    const auto report = run_scenario(load_scenario(scenario_path("reconstruction-4node")));
    CHECK(report.reconciliation.ok());
    CHECK(report.reconciliation.ledger_count > 0);
    CHECK(report.energy_internet.curtailed_kwh == 0.0);
    CHECK(report.traditional.curtailed_kwh > 0.0);
    CHECK(report.energy_internet.frames > 0);
    CHECK(report.traditional.frames == 0);
    CHECK(report.event_log.size() == report.reconciliation.ledger_count);
    for (const auto* m : {&report.traditional, &report.energy_internet}) {
        const auto& d = m->daily;
        CHECK(d.consumer_surplus + d.producer_surplus + d.grid_surplus == doctest::Approx(d.welfare));
    }
}

TEST_CASE("reports are deterministic and well formed") {
    const Scenario s = load_scenario(scenario_path("reconstruction-4node"));
    const auto a = scratch("run-a");
    const auto b = scratch("run-b");
    emit_report(run_scenario(s), a.string());
    emit_report(run_scenario(s), b.string());
    for (const char* f : {"welfare.csv", "carbon.csv", "dispatch_by_period.csv", "surplus_partition.csv",
                          "summary.txt", "events.log", "trace.csv"}) {
        INFO(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    for (const char* f : {"welfare.csv", "carbon.csv", "dispatch_by_period.csv"}) {
        INFO(f);
        CHECK(line_count(slurp(a / f)) == 13);
    }
    const std::string summary = slurp(a / "summary.txt");
    CHECK(summary.find('%') != std::string::npos);
    CHECK((summary.find('+') != std::string::npos || summary.find('-') != std::string::npos));

    // events.log replays into the same number of settlements.
    Ledger replayed;
    std::ifstream log(a / "events.log");
    replayed.replay(log);
    CHECK(replayed.settlement_count() == line_count(slurp(a / "events.log")));

    CHECK(code_of([&] { emit_report(run_scenario(s), "/proc/definitely/not/writable"); }) == Errc::IoError);
}
