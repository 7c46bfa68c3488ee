// Acceptance run: one PASS/FAIL line per criterion with its runtime.

#include "support.hpp"

#include "ei/config.hpp"
#include "ei/error.hpp"
#include "ei/isp.hpp"
#include "ei/opf.hpp"
#include "ei/pool.hpp"
#include "ei/profile.hpp"
#include "ei/scenario.hpp"
#include "ei/stack.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>

using namespace ei;
using namespace ei::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::string note;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) note = what;
        pass = pass && ok;
    }
};

bool close_rel(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

GridModel grid_of(const char* scenario) { return load_grid(source_dir() / "scenarios" / scenario / "grid.json"); }

Outcome opf_oracle() {
    Outcome o;
    const auto sol = solve_opf(grid_of("two-plant-test"), {});
    // Equal marginal cost b + aP on both units, summing to 1000 kW.
    const double p1 = (0.35 + 0.0005 * 1000.0 - 0.55) / (0.0008 + 0.0005);
    const double pi = 0.55 + 0.0008 * p1;
    o.require(close_rel(sol.plant_kw[0], p1, 1e-4) && close_rel(sol.plant_kw[0], 230.77, 1e-4), "P1");
    o.require(close_rel(sol.plant_kw[1], 1000.0 - p1, 1e-4) && close_rel(sol.plant_kw[1], 769.23, 1e-4), "P2");
    o.require(close_rel(sol.lmp[0], pi, 1e-4) && close_rel(sol.lmp[0], 0.7346, 1e-4), "pi");
    char buf[128];
    std::snprintf(buf, sizeof buf, "P1=%.2f P2=%.2f pi=%.4f", sol.plant_kw[0], sol.plant_kw[1], sol.lmp[0]);
    if (o.pass) o.note = buf;
    return o;
}

Outcome nodal_price_fd() {
    Outcome o;
    const GridModel g = grid_of("reconstruction-4node");
    double worst = 0.0;
    int priced = 0;
    for (std::size_t period = 0; period < g.periods; ++period) {
        OpfInput base;
        base.period = period;
        const auto sol = solve_opf(g, base);
        for (std::size_t node = 0; node < g.nodes.size(); ++node) {
            auto cost = [&](double extra) {
                OpfInput in = base;
                in.fixed_injection_kw.assign(g.nodes.size(), 0.0);
                in.fixed_injection_kw[node] = -extra;
                return solve_opf(g, in).plant_cost_cny_per_h;
            };
            const double fd = (cost(0.1) - cost(-0.1)) / 0.2;
            // Periods with surplus renewables clear at a zero price; there
            // the finite difference must vanish too.
            const double gap = std::abs(fd - sol.lmp[node]);
            const double allowed = std::max(0.01 * std::abs(sol.lmp[node]), 1e-9);
            if (std::abs(sol.lmp[node]) > 1e-9) {
                ++priced;
                worst = std::max(worst, gap / std::abs(sol.lmp[node]));
            }
            o.require(gap <= allowed, "period " + std::to_string(period + 1) + " node " + g.nodes[node].id);
        }
    }
    o.require(priced > 0, "no priced node");
    if (o.pass) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%d priced nodes, worst relative gap %.2e", priced, worst);
        o.note = buf;
    }
    return o;
}

Outcome elasticity_anchors() {
    using Q = boost::multiprecision::cpp_rational;
    Outcome o;
    for (const Q& p0 : {Q(500), Q(1234, 7)}) {
        const Q pi0(7346, 10000);
        const Q raised = pi0 * Q(11, 10);
        o.require(build_demand_curve(p0, pi0, Q(-1, 2)).quantity_at(raised) == p0 * Q(95, 100), "urban 0.95");
        o.require(build_demand_curve(p0, pi0, Q(-2)).quantity_at(raised) == p0 * Q(80, 100), "rural 0.80");
        o.require(build_demand_curve(p0, pi0, Q(-2)).quantity_at(pi0) == p0, "anchor");
    }
    return o;
}

Outcome directional_reproduction() {
    Outcome o;
    const auto r = run_scenario(load_scenario(scenario_path("reconstruction-4node")));
    const auto& t = r.traditional;
    const auto& e = r.energy_internet;
    o.require(e.daily.welfare > t.daily.welfare, "(a) welfare");
    o.require(e.daily.carbon_t < t.daily.carbon_t, "(b) carbon");
    o.require(t.curtailed_kwh > 0.0 && e.curtailed_kwh == 0.0, "(b) curtailment");
    o.require(e.daily.grid_surplus < t.daily.grid_surplus && e.daily.grid_surplus >= 0.0, "(c) grid surplus");
    std::map<std::string, double> before;
    for (const auto& res : t.resources) before[res.name] = res.profit_cny;
    int checked = 0;
    for (const auto& res : e.resources) {
        const bool tracked = is_renewable(res.type) || res.type == ResourceType::Battery ||
                             res.type == ResourceType::Vehicle;
        if (!tracked) continue;
        ++checked;
        o.require(res.profit_cny > before.at(res.name), "(d) " + res.name);
    }
    o.require(checked > 0, "(d) no tracked resources");
    o.require(r.reconciliation.ok(), "reconciliation");
    if (o.pass) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "welfare %+.2f%% carbon %+.2f%% grid surplus %+.2f%%", r.welfare_delta_pct(),
                      r.carbon_delta_pct(), r.grid_surplus_delta_pct());
        o.note = buf;
    }
    return o;
}

Outcome codec_properties() {
    Outcome o;
    std::mt19937_64 rng(20190101);
    for (int i = 0; i < 10'000; ++i) {
        const Bee b = random_bee(rng);
        const auto bytes = encode_bee(b);
        o.require(decode_bee(bytes) == b && encode_bee(decode_bee(bytes)) == bytes, "round trip");
    }
    int rejected = 0;
    for (int i = 0; i < 1'000; ++i) {
        auto bytes = encode_bee(random_bee(rng));
        const auto bit = rng() % (bytes.size() * 8);
        bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        try {
            decode_bee(bytes);
        } catch (const Error&) {
            ++rejected;
        }
    }
    o.require(rejected == 1'000, std::to_string(rejected) + "/1000 corruptions rejected");
    return o;
}

Outcome ledger_conservation() {
    Outcome o;
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        Ledger ledger;
        const int members = 2 + static_cast<int>(rng() % 8);
        for (int m = 1; m <= members; ++m) ledger.register_card(mac(static_cast<std::uint8_t>(m)), "m");
        const int count = static_cast<int>(rng() % 501);
        for (int n = 0; n < count; ++n) {
            const auto a = static_cast<std::uint8_t>(1 + rng() % members);
            const auto b = static_cast<std::uint8_t>(1 + (a + rng() % (members - 1)) % members);
            Bee s = settle(static_cast<std::uint32_t>(1 + rng() % 0xFFFFFF), static_cast<std::uint32_t>(rng() % 5000),
                           mac(a), mac(b));
            s.green_fraction_bp = static_cast<std::uint16_t>(rng() % 10001);
            s.carbon_intensity_g_per_kwh = static_cast<std::uint16_t>(rng() % 1000);
            ledger.apply_settlement(s);
        }
        std::int64_t energy = 0, money = 0, green = 0;
        for (const auto& p : ledger.profiles()) {
            energy += p.net_energy_wh;
            money += p.net_payment_mcny;
            green += p.inventory.green_certificates_wh();
        }
        o.require(energy == 0 && money == 0 && green == 0, "trial " + std::to_string(trial));
    }
    return o;
}

Outcome matching_oracle() {
    Outcome o;
    std::mt19937_64 rng(7);
    for (int n = 0; n < 200; ++n) {
        BeePool pool;
        const int entries = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < entries; ++i) {
            const auto kind = rng() % 2 ? BeeKind::Offer : BeeKind::Request;
            Bee b = make_bee(kind, static_cast<std::uint32_t>(1 + rng() % 7),
                             static_cast<std::uint32_t>(100 * (1 + rng() % 4)), mac(static_cast<std::uint8_t>(i + 1)));
            b.delivery_start += static_cast<std::uint32_t>(3600 * (rng() % 3));
            const auto resting = kind == BeeKind::Offer ? pool.requests() : pool.offers();
            const auto want = brute_force_match(b, resting);
            const auto got = pool.submit(b);
            std::uint64_t cost = 0;
            for (const auto& f : got.fills) cost += std::uint64_t{f.matched_wh} * f.clearing_price_mcny_per_kwh;
            o.require(got.matched_wh() == want.quantity && cost == want.buyer_cost, "pool " + std::to_string(n));
        }
    }
    return o;
}

Outcome limit_enforcement() {
    Outcome o;
    Ledger ledger;
    Network net(ledger, 11);
    const auto a = net.add_router("A", 1, 1);
    const auto b = net.add_router("B", 1, 2);
    net.connect_routers(a, b);
    std::vector<EnergyIpAddress> eip;
    for (std::uint8_t i = 1; i <= 4; ++i) {
        ledger.register_card(mac(i), "h");
        eip.push_back(net.assign_eip(i <= 2 ? a : b, mac(i)));
    }
    std::map<std::pair<int, int>, ConnectionId> conns;
    for (int s = 0; s < 4; ++s) {
        for (int d = 0; d < 4; ++d) {
            if (s != d) conns[{s, d}] = net.open_connection(eip[s], eip[d]);
        }
    }
    const EnergyIpAddress closed = eip[0];
    net.update_dynamic_limit(closed, 0);
    net.set_static_limit(eip[1], 20'000);
    const std::size_t mark = net.trace().size();

    std::mt19937_64 rng(99);
    int closed_attempts = 0;
    int closed_rejections = 0;
    int static_thrown = 0;
    for (int n = 0; n < 300; ++n) {
        // The closed EIP only ever sends; the others trade freely among
        // themselves, so any frame sourced at it would be a leak.
        const int s = static_cast<int>(rng() % 4);
        int d = s == 0 ? 2 + static_cast<int>(rng() % 2) : 1 + static_cast<int>(rng() % 3);
        if (d == s) d = s % 3 + 1;
        const Bee bee = settle(static_cast<std::uint32_t>(1 + rng() % 3000), 500, mac(static_cast<std::uint8_t>(s + 1)),
                               mac(static_cast<std::uint8_t>(d + 1)));
        try {
            if (s == 0) ++closed_attempts;
            net.send_bee(conns.at({s, d}), bee);
        } catch (const Error& e) {
            if (s == 0 && e.code() == Errc::DynamicLimitExceeded) ++closed_rejections;
            if (e.code() == Errc::StaticLimitExceeded) ++static_thrown;
        }
        if (n % 100 == 99) net.begin_period();
    }
    o.require(closed_attempts > 0 && closed_attempts == closed_rejections, "closed EIP sent");
    int static_rejections = 0;
    for (std::size_t i = mark; i < net.trace().size(); ++i) {
        const auto& e = net.trace()[i];
        if (e.layer == Layer::Link && e.src == closed.to_string()) o.require(false, "frame from closed EIP");
        if (e.verdict.find("StaticLimitExceeded") != std::string::npos) {
            ++static_rejections;
            o.require(e.layer == Layer::Network, "static rejection outside the network layer");
        }
        if (e.verdict.find("DynamicLimitExceeded") != std::string::npos) {
            o.require(e.layer == Layer::Transport, "dynamic rejection outside the transport layer");
        }
    }
    o.require(static_rejections > 0, "trace exercised no static rejection");
    o.require(static_rejections == static_thrown, "static rejections and trace disagree");
    if (o.pass) o.note = std::to_string(closed_rejections) + " closed-valve and " + std::to_string(static_rejections) +
                         " static rejections";
    return o;
}

Outcome decoupling() {
    Outcome o;
    const GridModel g = grid_of("reconstruction-4node");
    std::mt19937_64 rng(5);
    int checked = 0;
    for (std::size_t period = 0; period < g.periods; period += 3) {
        // Eight resources spread over the four nodes, integer kW.
        std::vector<ResourceInjection> base;
        for (std::uint8_t i = 0; i < 8; ++i) {
            base.push_back({mac(static_cast<std::uint8_t>(i + 1)), static_cast<std::size_t>(i % 4),
                            static_cast<double>(static_cast<int>(rng() % 101) - 50)});
        }
        std::vector<Bee> trades;
        for (int k = 0; k < 4; ++k) {
            // A trade between nodes n and m and its mirror image keep every
            // nodal injection unchanged. 2000 Wh over 2 h is exactly 1 kW.
            const auto q = static_cast<std::uint32_t>(2'000 * (1 + rng() % 20));
            const auto x = static_cast<std::size_t>(rng() % 4);
            auto y = static_cast<std::size_t>(rng() % 4);
            if (y == x) y = (x + 1) % 4;
            trades.push_back(settle(q, 500, base[x].mac, base[y].mac));
            trades.push_back(settle(q, 600, base[y + 4].mac, base[x + 4].mac));
        }
        OpfInput in;
        in.period = period;
        const auto after = apply_physical_trades(base, trades);
        const auto rep = verify_decoupling(g, in, base, after, trades);
        o.require(rep.injections_preserved, "injections moved");
        o.require(rep.solutions_identical, "period " + std::to_string(period + 1) + " not bit-identical");
        ++checked;
    }
    if (o.pass) o.note = std::to_string(checked) + " trade sets";
    return o;
}

Outcome service_fee() {
    Outcome o;
    const std::vector<FeeParticipant> users{{"a", 30.0}, {"b", 10.0}};
    const auto none = compute_service_fee(100.0, 115.0, users);
    o.require(none.total() == 0.0 && none.fees[0] == 0.0 && none.fees[1] == 0.0, "115/100");
    const auto some = compute_service_fee(100.0, 105.0, users);
    o.require(some.total() == 5.0, "105/100 total");
    o.require(some.fees[0] == 3.75 && some.fees[1] == 1.25, "105/100 pro-rata");
    return o;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_ms;  // 0 = no runtime bound
    };
    const std::vector<Criterion> criteria{
        {"OPF oracle", opf_oracle, 1'000},
        {"nodal-price finite differences", nodal_price_fd, 10'000},
        {"elasticity anchors", elasticity_anchors, 0},
        {"directional reproduction", directional_reproduction, 60'000},
        {"codec properties", codec_properties, 0},
        {"ledger conservation", ledger_conservation, 0},
        {"matching oracle", matching_oracle, 0},
        {"limit enforcement", limit_enforcement, 0},
        {"decoupling", decoupling, 0},
        {"service fee", service_fee, 0},
    };
    int failures = 0;
    int n = 0;
    for (const auto& [name, run, budget_ms] : criteria) {
        ++n;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.note = std::string("exception: ") + e.what();
        }
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (budget_ms > 0 && ms > budget_ms) {
            out.pass = false;
            out.note = "over the " + std::to_string(static_cast<int>(budget_ms)) + " ms budget";
        }
        std::printf("criterion %d: %s (%.1f ms) %s%s%s\n", n, out.pass ? "PASS" : "FAIL", ms, name,
                    out.note.empty() ? "" : ": ", out.note.c_str());
        if (!out.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
