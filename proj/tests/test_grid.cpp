#include "support.hpp"

#include "ei/config.hpp"
#include "ei/error.hpp"
#include "ei/isp.hpp"
#include "ei/opf.hpp"
#include "ei/qp.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace ei;
using namespace ei::testing;

namespace {

GridModel two_plant() { return load_grid(source_dir() / "scenarios" / "two-plant-test" / "grid.json"); }
GridModel four_node() { return load_grid(source_dir() / "scenarios" / "reconstruction-4node" / "grid.json"); }

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::IoError;
}

/// Two-node feeder with one plant at the root and one subject-bearing node.
GridModel feeder(double rating_kw) {
    GridModel g;
    g.nodes = {{"root", {}}, {"leaf", {}}};
    g.lines = {{"l", 0, 1, 0.01, rating_kw}};
    g.plants = {{"G", 0, 0.001, 0.3, 0.0, 1000.0, 550.0}};
    g.loads = {{"L", 1, std::vector<double>(12, 100.0), {}, 0.0}};
    return g;
}

} // namespace

TEST_CASE("qp: equality-constrained least squares") {
    QpProblem p;
    p.cols = 2;
    p.rows = 1;
    p.hessian_diag = {1.0, 1.0};
    p.linear = {0.0, 0.0};
    p.a = {1.0, 1.0};
    p.b = {2.0};
    p.lower = {-10.0, -10.0};
    p.upper = {10.0, 10.0};
    const auto r = solve_qp(p);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.y[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("qp: active upper bound carries the multiplier") {
    // min 1/2 (x - 3)^2 with x <= 1: x = 1, bound multiplier 2.
    QpProblem p;
    p.cols = 1;
    p.hessian_diag = {1.0};
    p.linear = {-3.0};
    p.lower = {0.0};
    p.upper = {1.0};
    const auto r = solve_qp(p);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.z_upper[0] == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("qp: inconsistent bounds are infeasible") {
    QpProblem p;
    p.cols = 1;
    p.rows = 1;
    p.hessian_diag = {1.0};
    p.linear = {0.0};
    p.a = {1.0};
    p.b = {5.0};
    p.lower = {0.0};
    p.upper = {1.0};
    CHECK(solve_qp(p).status == QpStatus::Infeasible);
}

TEST_CASE("two-plant dispatch equalises marginal cost") {
    // b1 + a1 P1 = b2 + a2 P2, P1 + P2 = 1000.
    const double p1 = (0.35 + 0.0005 * 1000.0 - 0.55) / (0.0008 + 0.0005);
    const double pi = 0.55 + 0.0008 * p1;
    const auto sol = solve_opf(two_plant(), {});
    CHECK(sol.plant_kw[0] == doctest::Approx(p1).epsilon(1e-6));
    CHECK(sol.plant_kw[1] == doctest::Approx(1000.0 - p1).epsilon(1e-6));
    CHECK(sol.lmp[0] == doctest::Approx(pi).epsilon(1e-6));
    CHECK(std::abs(sol.plant_kw[0] - 230.77) < 0.01);
    CHECK(std::abs(sol.lmp[0] - 0.7346) < 1e-4);
}

TEST_CASE("zero and excessive demand") {
    OpfInput none;
    none.load_kw = {0.0};
    const auto zero = solve_opf(two_plant(), none);
    CHECK(std::abs(zero.plant_kw[0]) < 1e-6);
    CHECK(std::abs(zero.plant_kw[1]) < 1e-6);

    OpfInput huge;
    huge.load_kw = {4500.0};
    CHECK(code_of([&] { solve_opf(two_plant(), huge); }) == Errc::Infeasible);
}

TEST_CASE("nodal prices match finite differences of total cost") {
    const GridModel g = four_node();
    for (std::size_t period : {0u, 5u, 9u}) {
        OpfInput base;
        base.period = period;
        const auto sol = solve_opf(g, base);
        for (std::size_t node = 0; node < g.nodes.size(); ++node) {
            auto cost_with = [&](double extra_kw) {
                OpfInput in = base;
                in.fixed_injection_kw.assign(g.nodes.size(), 0.0);
                in.fixed_injection_kw[node] = -extra_kw;
                return solve_opf(g, in).plant_cost_cny_per_h;
            };
            const double fd = (cost_with(0.1) - cost_with(-0.1)) / 0.2;
            CHECK(fd == doctest::Approx(sol.lmp[node]).epsilon(0.01));
        }
    }
}

TEST_CASE("energy balance and loss behaviour") {
    GridModel g = four_node();
    OpfInput in;
    in.period = 9;
    const auto sol = solve_opf(g, in);
    const double supply = std::accumulate(sol.plant_kw.begin(), sol.plant_kw.end(), 0.0) +
                          std::accumulate(sol.renewable_kw.begin(), sol.renewable_kw.end(), 0.0);
    const double demand = std::accumulate(sol.load_kw.begin(), sol.load_kw.end(), 0.0);
    CHECK(supply == doctest::Approx(demand + sol.total_loss_kw).epsilon(1e-7));
    CHECK(sol.total_loss_kw > 0.0);
    CHECK(sol.lmp[3] > sol.lmp[0]);  // the far node pays for losses

    double previous = sol.total_loss_kw;
    for (double scale : {2.0, 4.0}) {
        GridModel lossy = g;
        for (auto& l : lossy.lines) l.resistance_pu *= scale;
        const double loss = solve_opf(lossy, in).total_loss_kw;
        CHECK(loss > previous);
        previous = loss;
    }
}

TEST_CASE("elastic demand settles on its curve") {
    GridModel g = two_plant();
    g.loads[0].elasticity = -0.5;
    g.loads[0].pi0.assign(12, 0.7346);
    OpfInput in;
    in.load_mode = LoadMode::Elastic;
    const auto sol = solve_opf(g, in);
    const auto curve = g.loads[0].curve(0);
    CHECK(curve.price_at(sol.load_kw[0]) == doctest::Approx(sol.lmp[0]).epsilon(1e-6));

    g.loads[0].elasticity = 0.5;
    CHECK(code_of([&] { solve_opf(g, in); }) == Errc::BadElasticity);
}

TEST_CASE("demand curve anchors in exact arithmetic") {
    using Q = boost::multiprecision::cpp_rational;
    const Q p0(1000);
    const Q pi0(7, 10);
    const Q raised = pi0 * Q(11, 10);

    const auto urban = build_demand_curve(p0, pi0, Q(-1, 2));
    CHECK(urban.quantity_at(raised) == p0 * Q(95, 100));
    CHECK(urban.quantity_at(pi0) == p0);
    CHECK(urban.price_at(p0) == pi0);

    const auto rural = build_demand_curve(p0, pi0, Q(-2));
    CHECK(rural.quantity_at(raised) == p0 * Q(80, 100));
    CHECK(rural.saturation() == p0 * 3);
    CHECK(rural.price_at(rural.saturation()) == 0);

    CHECK_THROWS_AS(build_demand_curve(p0, pi0, Q(0)), Error);
}

TEST_CASE("exchange limits from line headroom") {
    const GridModel g = feeder(50.0);
    OpfSolution sol;
    sol.line_flow_kw = {0.0};
    const LimitSubject a{EnergyIpAddress::make(1, 2, 1), 1, 1.0};
    const LimitSubject b{EnergyIpAddress::make(1, 2, 2), 1, 1.0};
    const LimitSubject root{EnergyIpAddress::make(1, 1, 1), 0, 1.0};

    const std::vector<LimitSubject> one{a};
    auto t = compute_limits(g, sol, one);
    CHECK(t.static_wh.at(a.eip) == 100'000);  // 50 kW x 2 h
    CHECK(t.dynamic_wh.at(a.eip) == 100'000);

    const std::vector<LimitSubject> two{a, b, root};
    t = compute_limits(g, sol, two);
    CHECK(t.static_wh.at(a.eip) == 50'000);
    CHECK(t.static_wh.at(b.eip) == 50'000);
    CHECK(t.static_wh.at(root.eip) == LimitTable::kUnlimited);

    sol.line_flow_kw = {-50.0};
    t = compute_limits(g, sol, one);
    CHECK(t.static_wh.at(a.eip) == 100'000);
    CHECK(t.dynamic_wh.at(a.eip) == 0);

    sol.line_flow_kw = {20.0};
    t = compute_limits(g, sol, one);
    CHECK(t.dynamic_wh.at(a.eip) == 60'000);
}

TEST_CASE("injection-preserving trades leave the OPF bit-identical") {
    const GridModel g = four_node();
    OpfInput in;
    in.period = 4;
    // Two resources at node 2 and one at node 3.
    const std::vector<ResourceInjection> base{{mac(1), 2, 120.0}, {mac(2), 2, -80.0}, {mac(3), 3, -30.0}};
    // Seller and buyer share a node, so the nodal injections do not move.
    const std::vector<Bee> trades{settle(50'000, 500, mac(1), mac(2))};
    const auto after = apply_physical_trades(base, trades);
    CHECK(after[0].kw == 145.0);
    CHECK(after[1].kw == -105.0);
    const auto same = verify_decoupling(g, in, base, after, trades);
    CHECK(same.injections_preserved);
    CHECK(same.solutions_identical);
    CHECK(same.traded_wh == 50'000);

    // A physical trade across nodes moves injections and changes the flow.
    const std::vector<Bee> across{settle(50'000, 500, mac(1), mac(3))};
    const auto moved = apply_physical_trades(base, across);
    const auto diff = verify_decoupling(g, in, base, moved, across);
    CHECK_FALSE(diff.injections_preserved);
    CHECK_FALSE(diff.solutions_identical);
}

TEST_CASE("service fee keeps a ten percent margin") {
    const std::vector<FeeParticipant> two{{"a", 30.0}, {"b", 10.0}};
    auto f = compute_service_fee(100.0, 115.0, two);
    CHECK(f.total() == 0.0);
    CHECK(f.deficit == 0.0);

    f = compute_service_fee(100.0, 105.0, two);
    CHECK(f.deficit == 5.0);
    CHECK(f.fees[0] == 3.75);
    CHECK(f.fees[1] == 1.25);
    CHECK(f.total() == 5.0);

    f = compute_service_fee(100.0, 110.0, two);
    CHECK(f.total() == 0.0);

    const std::vector<FeeParticipant> solo{{"only", 7.0}};
    f = compute_service_fee(100.0, 90.0, solo);
    CHECK(f.fees[0] == 20.0);
}

TEST_CASE("surplus partition") {
    const GridModel g = two_plant();
    const auto sol = solve_opf(g, {});
    const double hours = g.period_hours;
    ParticipantAccount load{"L1", ParticipantRole::Load};
    load.utility_cny = 1000.0 * 1.0 * hours;  // any value; inelastic load
    load.grid_payment_cny = sol.lmp[0] * sol.load_kw[0] * hours;
    const auto r = account_surplus(g, sol, {load}, hours);
    CHECK(std::abs(r.merchandise_surplus) < 1e-6);  // lossless single node
    CHECK(r.thermal_kwh == doctest::Approx(2000.0));
    CHECK(r.carbon_t == doctest::Approx(2000.0 * 550.0 / 1e6));
    CHECK(r.consumer_surplus + r.producer_surplus + r.grid_surplus == doctest::Approx(r.welfare));

    GridModel one = g;
    one.plants.resize(1);
    OpfInput mwh;
    mwh.load_kw = {500.0};  // 500 kW x 2 h = 1 MWh
    const auto s1 = solve_opf(one, mwh);
    ParticipantAccount l1{"L1", ParticipantRole::Load};
    l1.grid_payment_cny = s1.lmp[0] * 500.0 * hours;
    CHECK(account_surplus(one, s1, {l1}, hours).carbon_t == doctest::Approx(0.55));

    const std::vector<SurplusReport> day{r, r};
    const auto total = combine(day);
    CHECK(total.welfare == doctest::Approx(2 * r.welfare));
}
