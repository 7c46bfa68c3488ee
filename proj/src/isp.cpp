#include "ei/isp.hpp"

#include "ei/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace ei {

std::vector<double> pro_rata_shares(std::span<const LimitSubject> subjects) {
    double total = 0.0;
    for (const auto& s : subjects) total += std::max(0.0, s.weight);
    std::vector<double> shares;
    shares.reserve(subjects.size());
    for (const auto& s : subjects) shares.push_back(total > 0.0 ? std::max(0.0, s.weight) / total : 0.0);
    return shares;
}

std::vector<std::optional<std::size_t>> uplink_lines(const GridModel& grid) {
    const auto n = grid.nodes.size();
    std::vector<std::optional<std::size_t>> up(n);
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue{0};
    seen[0] = true;
    std::size_t tree_edges = 0;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (std::size_t i = 0; i < grid.lines.size(); ++i) {
            const auto& l = grid.lines[i];
            if (l.from != u && l.to != u) continue;
            const auto v = l.from == u ? l.to : l.from;
            if (seen[v]) continue;
            seen[v] = true;
            up[v] = i;
            ++tree_edges;
            queue.push_back(v);
        }
    }
    if (tree_edges != grid.lines.size() || std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw Error(Errc::ConfigError, "exchange limits need a radial network rooted at " + grid.nodes[0].id);
    }
    return up;
}

LimitTable compute_limits(const GridModel& grid, const OpfSolution& solution, std::span<const LimitSubject> subjects,
                          const HeadroomPolicy& policy) {
    const auto up = uplink_lines(grid);
    LimitTable table;
    for (std::size_t node = 0; node < grid.nodes.size(); ++node) {
        std::vector<LimitSubject> local;
        for (const auto& s : subjects) {
            if (s.node == node) local.push_back(s);
        }
        if (local.empty()) continue;
        const std::optional<std::size_t> line = up[node];
        if (!line || grid.lines[*line].rating_kw <= 0.0) {
            for (const auto& s : local) {
                table.static_wh[s.eip] = LimitTable::kUnlimited;
                table.dynamic_wh[s.eip] = LimitTable::kUnlimited;
            }
            continue;
        }
        const double rating = grid.lines[*line].rating_kw;
        const double headroom = std::max(0.0, rating - std::abs(solution.line_flow_kw.at(*line)));
        const auto shares = policy(local);
        for (std::size_t i = 0; i < local.size(); ++i) {
            const double share = std::clamp(shares.at(i), 0.0, 1.0);
            // kW x h x 1000 = Wh; floor so the sum never exceeds the line.
            table.static_wh[local[i].eip] =
                static_cast<std::uint64_t>(std::floor(rating * grid.period_hours * share * 1000.0 + 1e-9));
            table.dynamic_wh[local[i].eip] =
                static_cast<std::uint64_t>(std::floor(headroom * grid.period_hours * share * 1000.0 + 1e-9));
        }
    }
    return table;
}

std::vector<ResourceInjection> apply_physical_trades(std::span<const ResourceInjection> baseline,
                                                     std::span<const Bee> trades) {
    std::vector<ResourceInjection> out(baseline.begin(), baseline.end());
    auto find = [&](const MacAddress& mac) -> ResourceInjection& {
        for (auto& r : out) {
            if (r.mac == mac) return r;
        }
        throw Error(Errc::UnknownMac, mac.to_string() + " has no injection record");
    };
    for (const auto& bee : trades) {
        const double hours = bee.delivery_duration_min / 60.0;
        const double kw = static_cast<double>(bee.quantity_wh) / 1000.0 / hours;
        find(bee.sender).kw += kw;
        find(bee.receiver).kw -= kw;
    }
    return out;
}

namespace {

std::vector<double> nodal_sum(std::size_t nodes, std::span<const ResourceInjection> injections) {
    std::vector<double> sum(nodes, 0.0);
    for (const auto& r : injections) sum.at(r.node) += r.kw;
    return sum;
}

} // namespace

DecouplingReport verify_decoupling(const GridModel& grid, const OpfInput& input,
                                   std::span<const ResourceInjection> baseline,
                                   std::span<const ResourceInjection> after_trades, std::span<const Bee> trades) {
    const auto n = grid.nodes.size();
    const auto before = nodal_sum(n, baseline);
    const auto after = nodal_sum(n, after_trades);

    DecouplingReport rep;
    rep.trade_count = trades.size();
    for (const auto& t : trades) rep.traded_wh += t.quantity_wh;
    rep.nodal_delta_kw.resize(n);
    rep.injections_preserved = true;
    for (std::size_t i = 0; i < n; ++i) {
        rep.nodal_delta_kw[i] = after[i] - before[i];
        if (rep.nodal_delta_kw[i] != 0.0) rep.injections_preserved = false;
    }

    auto with = [&](const std::vector<double>& injections) {
        OpfInput in = input;
        in.fixed_injection_kw.resize(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) in.fixed_injection_kw[i] += injections[i];
        return solve_opf(grid, in);
    };
    rep.baseline = with(before);
    rep.with_trades = with(after);
    rep.solutions_identical = identical(rep.baseline, rep.with_trades);
    return rep;
}

double FeeAllocation::total() const {
    double sum = 0.0;
    for (double f : fees) sum += f;
    return sum;
}

FeeAllocation compute_service_fee(double opf_cost, double grid_revenue, std::span<const FeeParticipant> participants) {
    FeeAllocation alloc;
    alloc.required_profit = opf_cost / 10.0;
    alloc.profit = grid_revenue - opf_cost;
    alloc.fees.assign(participants.size(), 0.0);
    if (alloc.profit >= alloc.required_profit || participants.empty()) {
        alloc.deficit = std::max(0.0, alloc.required_profit - alloc.profit);
        return alloc;
    }
    alloc.deficit = alloc.required_profit - alloc.profit;

    double usage = 0.0;
    for (const auto& p : participants) usage += std::max(0.0, p.usage_kwh);
    double assigned = 0.0;
    for (std::size_t i = 0; i + 1 < participants.size(); ++i) {
        const double share = usage > 0.0 ? std::max(0.0, participants[i].usage_kwh) / usage
                                         : 1.0 / static_cast<double>(participants.size());
        alloc.fees[i] = alloc.deficit * share;
        assigned += alloc.fees[i];
    }
    alloc.fees.back() = alloc.deficit - assigned;
    return alloc;
}

namespace {

void check_identity(const SurplusReport& r, double scale) {
    const double parts = r.consumer_surplus + r.producer_surplus + r.grid_surplus;
    if (std::abs(parts - r.welfare) > 1e-7 * (1.0 + scale)) {
        throw Error(Errc::AccountingMismatch, "surplus partition " + std::to_string(parts) +
                                                  " does not match welfare " + std::to_string(r.welfare));
    }
}

} // namespace

SurplusReport account_surplus(const GridModel& grid, const OpfSolution& solution,
                              std::vector<ParticipantAccount> participants, double hours) {
    SurplusReport r;
    double scale = 0.0;
    double utility = 0.0;
    double grid_revenue = 0.0;
    for (const auto& p : participants) {
        if (p.role == ParticipantRole::Load) r.consumer_surplus += p.surplus();
        else r.producer_surplus += p.surplus();
        utility += p.utility_cny;
        grid_revenue += p.grid_payment_cny;
        r.service_fee += p.fee_cny;
        scale += std::abs(p.utility_cny) + std::abs(p.grid_payment_cny) + std::abs(p.peer_payment_cny);
    }
    double plant_sales = 0.0;
    for (std::size_t i = 0; i < grid.plants.size(); ++i) {
        const auto& pl = grid.plants[i];
        const double p = solution.plant_kw[i];
        const double cost = (0.5 * pl.a * p * p + pl.b * p) * hours;
        const double sales = solution.lmp[pl.node] * p * hours;
        r.plant_profit_cny.push_back(sales - cost);
        r.plant_profit += sales - cost;
        r.plant_cost += cost;
        plant_sales += sales;
        r.thermal_kwh += p * hours;
        r.carbon_t += p * hours * pl.carbon_g_per_kwh / 1e6;
    }
    r.merchandise_surplus = grid_revenue - plant_sales;
    r.grid_surplus = r.plant_profit + r.merchandise_surplus + r.service_fee;
    r.welfare = utility - r.plant_cost;
    r.participants = std::move(participants);
    check_identity(r, scale + r.plant_cost);
    return r;
}

SurplusReport combine(std::span<const SurplusReport> periods) {
    SurplusReport total;
    double scale = 0.0;
    for (const auto& r : periods) {
        for (const auto& p : r.participants) {
            auto it = std::find_if(total.participants.begin(), total.participants.end(),
                                   [&](const ParticipantAccount& q) { return q.id == p.id; });
            if (it == total.participants.end()) {
                total.participants.push_back(p);
            } else {
                it->utility_cny += p.utility_cny;
                it->grid_payment_cny += p.grid_payment_cny;
                it->peer_payment_cny += p.peer_payment_cny;
                it->fee_cny += p.fee_cny;
            }
        }
        total.plant_profit_cny.resize(std::max(total.plant_profit_cny.size(), r.plant_profit_cny.size()), 0.0);
        for (std::size_t i = 0; i < r.plant_profit_cny.size(); ++i) total.plant_profit_cny[i] += r.plant_profit_cny[i];
        total.consumer_surplus += r.consumer_surplus;
        total.producer_surplus += r.producer_surplus;
        total.plant_profit += r.plant_profit;
        total.merchandise_surplus += r.merchandise_surplus;
        total.service_fee += r.service_fee;
        total.grid_surplus += r.grid_surplus;
        total.welfare += r.welfare;
        total.plant_cost += r.plant_cost;
        total.thermal_kwh += r.thermal_kwh;
        total.carbon_t += r.carbon_t;
        scale += std::abs(r.welfare) + r.plant_cost;
    }
    check_identity(total, scale);
    return total;
}

} // namespace ei
