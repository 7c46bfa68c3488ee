#include "ei/opf.hpp"

#include "ei/error.hpp"
#include "ei/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <optional>
#include <ostream>

namespace ei {

void GridModel::validate() const {
    if (nodes.empty()) throw Error(Errc::ConfigError, "grid has no nodes");
    if (!(base_kw > 0.0) || !(period_hours > 0.0) || periods == 0) {
        throw Error(Errc::ConfigError, "grid base power, period length and period count must be positive");
    }
    const auto n = nodes.size();
    auto check_node = [&](std::size_t idx, const std::string& who) {
        if (idx >= n) throw Error(Errc::ConfigError, who + " references a missing node");
    };
    auto check_series = [&](const std::vector<double>& v, const std::string& who) {
        if (v.size() != periods) {
            throw Error(Errc::ConfigError, who + " needs " + std::to_string(periods) + " period values");
        }
    };
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& l : lines) {
        check_node(l.from, "line " + l.id);
        check_node(l.to, "line " + l.id);
        if (l.from == l.to) throw Error(Errc::ConfigError, "line " + l.id + " is a self loop");
        if (l.resistance_pu < 0.0) throw Error(Errc::ConfigError, "line " + l.id + " has negative resistance");
        if (l.rating_kw < 0.0) throw Error(Errc::ConfigError, "line " + l.id + " has negative rating");
        parent[find(l.from)] = find(l.to);
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (find(i) != find(0)) throw Error(Errc::ConfigError, "node " + nodes[i].id + " is not connected");
    }
    for (const auto& p : plants) {
        check_node(p.node, "plant " + p.id);
        if (!(p.a > 0.0)) throw Error(Errc::ConfigError, "plant " + p.id + " needs a > 0");
        if (p.p_min_kw < 0.0 || p.p_max_kw < p.p_min_kw) {
            throw Error(Errc::ConfigError, "plant " + p.id + " has inconsistent limits");
        }
    }
    for (const auto& l : loads) {
        check_node(l.node, "load " + l.id);
        check_series(l.p0_kw, "load " + l.id + " p0");
        if (l.elasticity > 0.0) throw Error(Errc::BadElasticity, "load " + l.id + " has positive elasticity");
        for (double p : l.p0_kw) {
            if (p < 0.0) throw Error(Errc::ConfigError, "load " + l.id + " has negative demand");
        }
        if (!l.pi0.empty()) {
            check_series(l.pi0, "load " + l.id + " pi0");
            if (l.is_elastic()) {
                for (std::size_t t = 0; t < periods; ++t) {
                    if (l.p0_kw[t] > 0.0) (void)l.curve(t);
                }
            }
        }
    }
    for (const auto& r : renewables) {
        check_node(r.node, "renewable " + r.id);
        check_series(r.available_kw, "renewable " + r.id);
        for (double v : r.available_kw) {
            if (v < 0.0) throw Error(Errc::ConfigError, "renewable " + r.id + " has negative output");
        }
    }
}

std::size_t GridModel::node_index(std::string_view id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id == id) return i;
    }
    throw Error(Errc::ConfigError, "unknown node '" + std::string(id) + "'");
}

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

struct Layout {
    std::size_t plants = 0, renewables = 0, loads = 0, lines = 0;
    std::size_t plant(std::size_t i) const { return i; }
    std::size_t renewable(std::size_t i) const { return plants + i; }
    std::size_t load(std::size_t i) const { return plants + renewables + i; }
    std::size_t line(std::size_t i) const { return plants + renewables + loads + i; }
    std::size_t size() const { return plants + renewables + loads + lines; }
};

} // namespace

bool identical(const OpfSolution& a, const OpfSolution& b) {
    return a.period == b.period && same_bits(a.plant_kw, b.plant_kw) && same_bits(a.renewable_kw, b.renewable_kw) &&
           same_bits(a.load_kw, b.load_kw) && same_bits(a.line_flow_kw, b.line_flow_kw) &&
           same_bits(a.line_loss_kw, b.line_loss_kw) && same_bits(a.node_injection_kw, b.node_injection_kw) &&
           same_bits(a.lmp, b.lmp) && same_bits(a.plant_cost_cny_per_h, b.plant_cost_cny_per_h) &&
           same_bits(a.utility_cny_per_h, b.utility_cny_per_h) && same_bits(a.total_loss_kw, b.total_loss_kw) &&
           a.iterations == b.iterations;
}

OpfSolution solve_opf(const GridModel& grid, const OpfInput& in, const OpfOptions& opt) {
    const std::size_t t = in.period;
    if (t >= grid.periods) throw Error(Errc::ConfigError, "period " + std::to_string(t) + " out of range");
    for (const auto& l : grid.loads) {
        if (l.elasticity > 0.0) throw Error(Errc::BadElasticity, "load " + l.id + " has positive elasticity");
    }
    const double base = grid.base_kw;
    const std::size_t nn = grid.nodes.size();
    Layout lay{grid.plants.size(), grid.renewables.size(), grid.loads.size(), grid.lines.size()};

    auto value_or = [](const std::vector<double>& v, std::size_t i, double fallback) {
        return v.empty() ? fallback : v.at(i);
    };

    // Bounds in kW before scaling.
    std::vector<double> lo(lay.size()), hi(lay.size());
    double supply_max = 0.0;
    double demand_min = 0.0;
    for (std::size_t i = 0; i < lay.plants; ++i) {
        lo[lay.plant(i)] = grid.plants[i].p_min_kw;
        hi[lay.plant(i)] = grid.plants[i].p_max_kw;
        supply_max += grid.plants[i].p_max_kw;
    }
    for (std::size_t i = 0; i < lay.renewables; ++i) {
        const double cap = value_or(in.renewable_cap_kw, i, grid.renewables[i].available_kw.at(t));
        lo[lay.renewable(i)] = 0.0;
        hi[lay.renewable(i)] = std::max(0.0, cap);
        supply_max += hi[lay.renewable(i)];
    }
    // Loads without a usable curve (inelastic, no anchor, or zero baseline)
    // stay at their fixed value and contribute no utility.
    std::vector<std::optional<DemandCurve>> curves;
    for (std::size_t i = 0; i < lay.loads; ++i) {
        const auto& load = grid.loads[i];
        const bool has_curve = load.is_elastic() && !load.pi0.empty() && load.p0_kw.at(t) > 0.0;
        curves.push_back(has_curve ? std::optional<DemandCurve>(load.curve(t)) : std::nullopt);
        if (in.load_mode == LoadMode::Elastic && !curves.back()) {
            if (load.is_elastic() && load.pi0.empty()) {
                throw Error(Errc::ConfigError, "load " + load.id + " needs anchor prices for elastic dispatch");
            }
        }
        if (in.load_mode == LoadMode::Fixed || !curves.back()) {
            const double v = value_or(in.load_kw, i, grid.loads[i].p0_kw[t]);
            lo[lay.load(i)] = hi[lay.load(i)] = v;
        } else {
            lo[lay.load(i)] = value_or(in.load_min_kw, i, 0.0);
            hi[lay.load(i)] = std::max(lo[lay.load(i)], curves.back()->saturation());
        }
        demand_min += lo[lay.load(i)];
    }
    for (std::size_t n = 0; n < nn; ++n) {
        const double f = value_or(in.fixed_injection_kw, n, 0.0);
        if (f >= 0) supply_max += f;
        else demand_min -= f;
    }
    if (supply_max < demand_min) {
        throw Error(Errc::Infeasible, "demand " + std::to_string(demand_min) + " kW exceeds available supply " +
                                          std::to_string(supply_max) + " kW");
    }
    const double flow_cap = 2.0 * (supply_max + demand_min) + base;
    for (std::size_t i = 0; i < lay.lines; ++i) {
        const double r = grid.lines[i].rating_kw > 0.0 ? grid.lines[i].rating_kw : flow_cap;
        lo[lay.line(i)] = -r;
        hi[lay.line(i)] = r;
    }

    QpProblem qp;
    qp.cols = lay.size();
    qp.rows = nn;
    qp.hessian_diag.assign(qp.cols, 0.0);
    qp.linear.assign(qp.cols, 0.0);
    qp.lower.resize(qp.cols);
    qp.upper.resize(qp.cols);
    for (std::size_t j = 0; j < qp.cols; ++j) {
        qp.lower[j] = lo[j] / base;
        qp.upper[j] = hi[j] / base;
    }
    // Objective divided by base so balance duals come out in CNY/kWh.
    for (std::size_t i = 0; i < lay.plants; ++i) {
        qp.hessian_diag[lay.plant(i)] = grid.plants[i].a * base;
        qp.linear[lay.plant(i)] = grid.plants[i].b;
    }
    for (std::size_t i = 0; i < lay.loads; ++i) {
        if (!curves[i]) continue;
        qp.hessian_diag[lay.load(i)] = -curves[i]->slope() * base;
        qp.linear[lay.load(i)] = -curves[i]->intercept();
    }

    std::vector<double> f0(lay.lines, 0.0);
    QpResult res;
    int iter = 0;
    bool converged = false;
    for (iter = 1; iter <= opt.max_iterations; ++iter) {
        qp.a.assign(qp.rows * qp.cols, 0.0);
        qp.b.assign(qp.rows, 0.0);
        for (std::size_t i = 0; i < lay.plants; ++i) qp.at(grid.plants[i].node, lay.plant(i)) += 1.0;
        for (std::size_t i = 0; i < lay.renewables; ++i) qp.at(grid.renewables[i].node, lay.renewable(i)) += 1.0;
        for (std::size_t i = 0; i < lay.loads; ++i) qp.at(grid.loads[i].node, lay.load(i)) -= 1.0;
        for (std::size_t n = 0; n < nn; ++n) qp.b[n] = -value_or(in.fixed_injection_kw, n, 0.0) / base;
        for (std::size_t i = 0; i < lay.lines; ++i) {
            const auto& l = grid.lines[i];
            const double r = l.resistance_pu;
            // Half the linearized loss r(2 f0 f - f0^2) is withdrawn at each end.
            qp.at(l.from, lay.line(i)) += -1.0 - r * f0[i];
            qp.at(l.to, lay.line(i)) += 1.0 - r * f0[i];
            qp.b[l.from] -= 0.5 * r * f0[i] * f0[i];
            qp.b[l.to] -= 0.5 * r * f0[i] * f0[i];
        }
        res = solve_qp(qp);
        if (res.status == QpStatus::Infeasible) {
            throw Error(Errc::Infeasible, "no dispatch satisfies the balance and limit constraints");
        }
        if (res.status != QpStatus::Optimal) {
            throw Error(Errc::NotConverged, "inner QP did not converge in period " + std::to_string(t));
        }
        double delta = 0.0;
        for (std::size_t i = 0; i < lay.lines; ++i) delta = std::max(delta, std::abs(res.x[lay.line(i)] - f0[i]));
        if (delta < opt.tolerance_pu) {
            converged = true;
            break;
        }
        for (std::size_t i = 0; i < lay.lines; ++i) {
            const double f = res.x[lay.line(i)];
            f0[i] = iter == 1 ? f : f0[i] + opt.damping * (f - f0[i]);
        }
    }
    if (!converged) {
        throw Error(Errc::NotConverged, "loss linearization did not settle within " +
                                            std::to_string(opt.max_iterations) + " iterations");
    }

    OpfSolution s;
    s.period = t;
    s.iterations = iter;
    for (std::size_t i = 0; i < lay.plants; ++i) {
        const double p = res.x[lay.plant(i)] * base;
        s.plant_kw.push_back(p);
        s.plant_cost_cny_per_h += 0.5 * grid.plants[i].a * p * p + grid.plants[i].b * p;
    }
    for (std::size_t i = 0; i < lay.renewables; ++i) s.renewable_kw.push_back(res.x[lay.renewable(i)] * base);
    for (std::size_t i = 0; i < lay.loads; ++i) {
        const double d = res.x[lay.load(i)] * base;
        s.load_kw.push_back(d);
        if (curves[i]) s.utility_cny_per_h += curves[i]->utility(d);
    }
    s.node_injection_kw.assign(nn, 0.0);
    for (std::size_t n = 0; n < nn; ++n) s.node_injection_kw[n] = value_or(in.fixed_injection_kw, n, 0.0);
    for (std::size_t i = 0; i < lay.plants; ++i) s.node_injection_kw[grid.plants[i].node] += s.plant_kw[i];
    for (std::size_t i = 0; i < lay.renewables; ++i) s.node_injection_kw[grid.renewables[i].node] += s.renewable_kw[i];
    for (std::size_t i = 0; i < lay.loads; ++i) s.node_injection_kw[grid.loads[i].node] -= s.load_kw[i];

    std::vector<double> balance(nn, 0.0);
    for (std::size_t n = 0; n < nn; ++n) balance[n] = s.node_injection_kw[n] / base;
    for (std::size_t i = 0; i < lay.lines; ++i) {
        const auto& l = grid.lines[i];
        const double f = res.x[lay.line(i)];
        const double loss = l.resistance_pu * f * f;
        s.line_flow_kw.push_back(f * base);
        s.line_loss_kw.push_back(loss * base);
        s.total_loss_kw += loss * base;
        balance[l.from] -= f + 0.5 * loss;
        balance[l.to] += f - 0.5 * loss;
    }
    double worst = 0.0;
    for (double v : balance) worst = std::max(worst, std::abs(v));
    s.balance_residual_kw = worst * base;
    s.kkt_residual = std::max(worst, res.dual_residual);
    s.lmp.assign(res.y.begin(), res.y.end());
    return s;
}

void write_opf_csv_header(std::ostream& out) { out << "period,kind,id,node,kw,price\n"; }

void write_opf_csv(std::ostream& out, const GridModel& grid, const OpfSolution& s) {
    const auto p = s.period + 1;
    for (std::size_t n = 0; n < grid.nodes.size(); ++n) {
        out << p << ",node," << grid.nodes[n].id << ',' << grid.nodes[n].id << ',' << s.node_injection_kw[n] << ','
            << s.lmp[n] << '\n';
    }
    for (std::size_t i = 0; i < grid.plants.size(); ++i) {
        const auto& pl = grid.plants[i];
        out << p << ",plant," << pl.id << ',' << grid.nodes[pl.node].id << ',' << s.plant_kw[i] << ','
            << s.lmp[pl.node] << '\n';
    }
    for (std::size_t i = 0; i < grid.renewables.size(); ++i) {
        const auto& r = grid.renewables[i];
        out << p << ",renewable," << r.id << ',' << grid.nodes[r.node].id << ',' << s.renewable_kw[i] << ','
            << s.lmp[r.node] << '\n';
    }
    for (std::size_t i = 0; i < grid.loads.size(); ++i) {
        const auto& l = grid.loads[i];
        out << p << ",load," << l.id << ',' << grid.nodes[l.node].id << ',' << s.load_kw[i] << ',' << s.lmp[l.node]
            << '\n';
    }
    for (std::size_t i = 0; i < grid.lines.size(); ++i) {
        const auto& l = grid.lines[i];
        out << p << ",line," << l.id << ',' << grid.nodes[l.from].id << ',' << s.line_flow_kw[i] << ",\n";
        out << p << ",loss," << l.id << ',' << grid.nodes[l.from].id << ',' << s.line_loss_kw[i] << ",\n";
    }
}

} // namespace ei
