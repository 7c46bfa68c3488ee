#include "ei/scenario.hpp"

#include "ei/error.hpp"
#include "ei/pool.hpp"
#include "ei/profile.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ei {

std::string_view to_string(OperationMode mode) noexcept {
    return mode == OperationMode::Traditional ? "traditional" : "energy-internet";
}

namespace {

double pct(double ei, double trad) { return trad == 0.0 ? 0.0 : (ei - trad) / std::abs(trad) * 100.0; }

struct Member {
    const ResourceSpec* spec = nullptr;
    std::size_t node = 0;
    MacAddress mac;
    std::string lan;
    std::optional<double> static_override_kwh;
    long plant = -1;
    long load = -1;
    long renewable = -1;
};

template <class Items>
long index_of(const Items& items, const std::string& id) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].id == id) return static_cast<long>(i);
    }
    return -1;
}

std::vector<Member> resolve_members(const Scenario& s) {
    std::vector<Member> out;
    for (const auto& r : s.resources) {
        const HostSpec* host = s.topology.host(r.name);
        Member m;
        m.spec = &r;
        m.node = s.grid.node_index(r.node);
        m.mac = host->mac;
        m.lan = host->lan;
        m.static_override_kwh = host->static_limit_kwh;
        if (r.type == ResourceType::Plant) m.plant = index_of(s.grid.plants, r.grid_id);
        if (is_load(r.type)) m.load = index_of(s.grid.loads, r.grid_id);
        if (is_renewable(r.type)) m.renewable = index_of(s.grid.renewables, r.grid_id);
        out.push_back(m);
    }
    return out;
}

bool contains(const std::vector<std::size_t>& v, std::size_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

double hosting_cap(const Member& m, std::size_t t, double available) {
    if (m.spec->hosting_cap_kw.empty()) return available;
    return std::min(available, m.spec->hosting_cap_kw[t]);
}

ParticipantRole role_of(ResourceType type) {
    switch (type) {
        case ResourceType::Wind:
        case ResourceType::Solar:   return ParticipantRole::Renewable;
        case ResourceType::Battery: return ParticipantRole::Storage;
        case ResourceType::Vehicle: return ParticipantRole::Vehicle;
        default:                    return ParticipantRole::Load;
    }
}

bool is_participant(ResourceType type) {
    return type != ResourceType::Plant && type != ResourceType::Isp;
}

std::optional<DemandCurve> curve_of(const GridModel& grid, const Member& m, std::size_t t) {
    if (m.load < 0) return std::nullopt;
    const auto& load = grid.loads[static_cast<std::size_t>(m.load)];
    if (!load.is_elastic() || load.pi0.empty() || load.p0_kw[t] <= 0.0) return std::nullopt;
    return load.curve(t);
}

/// Loads without configured anchor prices are anchored at the traditional
/// nodal price of each period, so their baseline is the LMP response.
GridModel anchor_loads(const GridModel& grid, const std::vector<OpfSolution>& traditional) {
    GridModel g = grid;
    for (auto& load : g.loads) {
        if (!load.pi0.empty()) continue;
        for (std::size_t t = 0; t < g.periods; ++t) load.pi0.push_back(traditional[t].lmp[load.node]);
    }
    g.validate();
    return g;
}

void build_network(const Scenario& s, const std::vector<Member>& members, Ledger& ledger, Network& net) {
    for (const auto& lan : s.topology.lans) net.add_router(lan.name, s.topology.wan, lan.subnet);
    for (const auto& [a, b] : s.topology.links) net.connect_routers(*net.find_router(a), *net.find_router(b));
    net.install_shortest_routes();
    for (const auto& m : members) {
        ledger.register_card(m.mac, m.spec->name);
        net.assign_eip(*net.find_router(m.lan), m.mac);
    }
}

// ---------------------------------------------------------------------------
// Traditional centralized dispatch
// ---------------------------------------------------------------------------

std::vector<OpfSolution> traditional_dispatch(const Scenario& s, const std::vector<Member>& members) {
    std::vector<OpfSolution> out;
    for (std::size_t t = 0; t < s.grid.periods; ++t) {
        OpfInput in;
        in.period = t;
        in.load_mode = LoadMode::Fixed;
        in.fixed_injection_kw.assign(s.grid.nodes.size(), 0.0);
        in.renewable_cap_kw.resize(s.grid.renewables.size());
        for (std::size_t i = 0; i < s.grid.renewables.size(); ++i) {
            in.renewable_cap_kw[i] = s.grid.renewables[i].available_kw[t];
        }
        for (const auto& m : members) {
            if (m.renewable >= 0) {
                auto& cap = in.renewable_cap_kw[static_cast<std::size_t>(m.renewable)];
                cap = hosting_cap(m, t, cap);
            }
            if (m.spec->type == ResourceType::Vehicle) in.fixed_injection_kw[m.node] -= m.spec->baseline_kw[t];
        }
        out.push_back(solve_opf(s.grid, in));
    }
    return out;
}

ModeReport account_traditional(const Scenario& s, const GridModel& grid, const std::vector<Member>& members,
                               const std::vector<OpfSolution>& solutions) {
    ModeReport rep;
    rep.mode = OperationMode::Traditional;
    const double h = grid.period_hours;
    std::vector<SurplusReport> periods;
    for (std::size_t t = 0; t < grid.periods; ++t) {
        const OpfSolution& sol = solutions[t];
        std::vector<ParticipantAccount> accounts;
        PeriodStats st;
        st.period = t;
        st.opf = sol;
        for (const auto& m : members) {
            if (!is_participant(m.spec->type)) continue;
            ParticipantAccount a{m.spec->name, role_of(m.spec->type)};
            const double price = sol.lmp[m.node];
            if (m.load >= 0) {
                const double d = sol.load_kw[static_cast<std::size_t>(m.load)];
                if (auto c = curve_of(grid, m, t)) a.utility_cny = c->utility(d) * h;
                a.grid_payment_cny = price * d * h;
            } else if (m.renewable >= 0) {
                const auto i = static_cast<std::size_t>(m.renewable);
                const double r = sol.renewable_kw[i];
                a.grid_payment_cny = -price * r * h;
                st.renewable_available_kwh += grid.renewables[i].available_kw[t] * h;
                st.renewable_used_kwh += r * h;
            } else if (m.spec->type == ResourceType::Vehicle) {
                a.grid_payment_cny = price * m.spec->baseline_kw[t] * h;
            }
            accounts.push_back(a);
        }
        st.curtailed_kwh = std::max(0.0, st.renewable_available_kwh - st.renewable_used_kwh);
        st.loss_kwh = sol.total_loss_kw * h;
        st.surplus = account_surplus(grid, sol, std::move(accounts), h);
        rep.curtailed_kwh += st.curtailed_kwh;
        rep.loss_kwh += st.loss_kwh;
        periods.push_back(st.surplus);
        rep.periods.push_back(std::move(st));
    }
    rep.daily = combine(periods);
    (void)s;
    return rep;
}

// ---------------------------------------------------------------------------
// Energy Internet operation
// ---------------------------------------------------------------------------

struct PeriodBook {
    std::map<MacAddress, std::uint64_t> bought_wh;
    std::map<MacAddress, std::uint64_t> sold_wh;
    std::map<MacAddress, std::int64_t> paid_mcny;  // + paid, - received
    std::uint64_t peer_wh = 0;
    std::size_t trades = 0;
    std::size_t failures = 0;

    void record(const SettlementOutcome& out) {
        for (const auto& b : out.settled) {
            const auto value = settlement_value_mcny(b.quantity_wh, b.price_mcny_per_kwh);
            bought_wh[b.receiver] += b.quantity_wh;
            sold_wh[b.sender] += b.quantity_wh;
            paid_mcny[b.receiver] += value;
            paid_mcny[b.sender] -= value;
            peer_wh += b.quantity_wh;
            ++trades;
        }
        failures += out.failed.size();
    }

    std::uint64_t bought(const MacAddress& m) const { return bought_wh.contains(m) ? bought_wh.at(m) : 0; }
    std::uint64_t sold(const MacAddress& m) const { return sold_wh.contains(m) ? sold_wh.at(m) : 0; }
    std::int64_t paid(const MacAddress& m) const { return paid_mcny.contains(m) ? paid_mcny.at(m) : 0; }
};

std::uint64_t delivered_wh(const Network& net, const std::vector<Member>& members, std::size_t& count) {
    std::uint64_t total = 0;
    count = 0;
    for (const auto& m : members) {
        for (const auto& b : net.inbox(m.mac)) total += b.quantity_wh;
        count += net.inbox(m.mac).size();
    }
    return total;
}

std::uint64_t ledger_wh(const Ledger& ledger) {
    std::uint64_t total = 0;
    for (const auto& bytes : ledger.event_log()) total += decode_bee(bytes).quantity_wh;
    return total;
}

void apply_fee(SurplusReport& daily, const FeeAllocation& fee, const std::vector<std::string>& payers) {
    for (std::size_t i = 0; i < payers.size(); ++i) {
        if (fee.fees[i] == 0.0) continue;
        for (auto& a : daily.participants) {
            if (a.id != payers[i]) continue;
            a.fee_cny += fee.fees[i];
            if (a.role == ParticipantRole::Load) daily.consumer_surplus -= fee.fees[i];
            else daily.producer_surplus -= fee.fees[i];
            daily.service_fee += fee.fees[i];
            daily.grid_surplus += fee.fees[i];
        }
    }
}

struct EnergyInternetRun {
    ModeReport report;
    Reconciliation reconciliation;
    std::vector<std::string> event_log;
    std::vector<TraceEntry> trace;
};

EnergyInternetRun run_energy_internet(const Scenario& s, const GridModel& grid, const std::vector<Member>& members,
                                      const std::vector<OpfSolution>& forecast, const BiddingStrategy& strategy) {
    EnergyInternetRun run;
    ModeReport& rep = run.report;
    rep.mode = OperationMode::EnergyInternet;

    Ledger ledger;
    Network net(ledger, s.seed);
    build_network(s, members, ledger, net);
    std::map<std::string, BeePool> pools;
    for (const auto& lan : s.topology.lans) pools[lan.name];

    const Member* isp = nullptr;
    for (const auto& m : members) {
        if (m.spec->type == ResourceType::Isp) isp = &m;
    }
    const auto isp_eip = *net.eip_of(isp->mac);

    std::vector<LimitSubject> subjects;
    for (const auto& m : members) {
        if (!is_participant(m.spec->type)) continue;
        subjects.push_back({*net.eip_of(m.mac), m.node, m.spec->limit_weight});
    }

    std::map<MacAddress, double> stored_kwh;
    std::map<MacAddress, std::uint64_t> vehicle_need_wh;
    std::map<MacAddress, std::uint64_t> usage_wh;
    for (const auto& m : members) {
        if (m.spec->type == ResourceType::Vehicle) vehicle_need_wh[m.mac] = to_wh(m.spec->daily_kwh);
    }

    const double h = grid.period_hours;
    std::vector<SurplusReport> periods;
    Reconciliation& rc = run.reconciliation;

    for (std::size_t t = 0; t < grid.periods; ++t) {
        PeriodContext ctx;
        ctx.period = t;
        ctx.hours = h;
        ctx.window_start = s.start_epoch + static_cast<std::uint32_t>(std::llround(static_cast<double>(t) * h * 3600));
        ctx.duration_min = static_cast<std::uint16_t>(std::llround(h * 60));

        // One-way limit push from the ISP's forecast (the centralized plan).
        net.begin_period();
        const LimitTable limits = compute_limits(grid, forecast[t], subjects);
        for (const auto& m : members) {
            if (!is_participant(m.spec->type)) continue;
            const auto eip = *net.eip_of(m.mac);
            const std::uint64_t stat = m.static_override_kwh
                                           ? static_cast<std::uint64_t>(std::llround(*m.static_override_kwh * 1000))
                                           : limits.static_wh.at(eip);
            net.set_static_limit(eip, stat == LimitTable::kUnlimited ? Network::kUnlimited : stat);
            const auto dyn = limits.dynamic_wh.at(eip);
            net.update_dynamic_limit(eip, dyn == LimitTable::kUnlimited ? Network::kUnlimited : dyn);
        }

        const std::size_t ledger_count_before = ledger.settlement_count();
        const std::uint64_t ledger_wh_before = ledger_wh(ledger);
        std::size_t delivered_before_count = 0;
        const std::uint64_t delivered_before = delivered_wh(net, members, delivered_before_count);
        const std::size_t receipts_before = net.receipts_issued();

        auto view_of = [&](const Member& m) {
            ResourceView v;
            v.spec = m.spec;
            v.mac = m.mac;
            v.reference_price = forecast[t].lmp[m.node];
            v.exportable_wh = net.exportable_wh(*net.eip_of(m.mac));
            if (m.renewable >= 0) {
                v.available_kwh = grid.renewables[static_cast<std::size_t>(m.renewable)].available_kw[t] * h;
            }
            v.demand = curve_of(grid, m, t);
            v.stored_kwh = stored_kwh[m.mac];
            if (m.spec->type == ResourceType::Vehicle) {
                v.remaining_kwh = static_cast<double>(vehicle_need_wh[m.mac]) / 1000.0;
                v.vehicle_available = contains(m.spec->available_periods, t);
            }
            v.peak = contains(m.spec->peak_periods, t);
            return v;
        };

        PeriodBook book;
        auto post = [&](const Member& m, const std::vector<Bee>& bees) {
            for (const auto& bee : bees) {
                BeePool& pool = pools.at(m.lan);
                const MatchResult res = pool.submit(bee, ctx.window_start);
                book.record(pool.settle_fills(res, ledger, net));
            }
        };
        for (const auto& m : members) post(m, strategy.requests(ctx, view_of(m)));
        for (const auto& m : members) post(m, strategy.offers(ctx, view_of(m)));

        // Residual positions: exports to the grid, curtailment, storage state.
        PeriodStats st;
        st.period = t;
        OpfInput in;
        in.period = t;
        in.load_mode = LoadMode::Elastic;
        in.renewable_cap_kw.assign(grid.renewables.size(), 0.0);
        in.fixed_injection_kw.assign(grid.nodes.size(), 0.0);
        in.load_min_kw.assign(grid.loads.size(), 0.0);
        std::map<MacAddress, std::uint64_t> export_wh;
        std::map<MacAddress, std::uint64_t> grid_buy_wh;
        for (const auto& m : members) {
            const auto bought = book.bought(m.mac);
            const auto sold = book.sold(m.mac);
            if (m.renewable >= 0) {
                const double available = grid.renewables[static_cast<std::size_t>(m.renewable)].available_kw[t] * h;
                const std::uint64_t avail_wh = to_wh(available);
                const std::uint64_t unsold = avail_wh - std::min(avail_wh, sold);
                const std::uint64_t exported = std::min(unsold, net.exportable_wh(*net.eip_of(m.mac)));
                export_wh[m.mac] = exported;
                st.renewable_available_kwh += available;
                st.renewable_used_kwh += static_cast<double>(sold + exported) / 1000.0;
                st.curtailed_kwh += static_cast<double>(unsold - exported) / 1000.0;
                in.fixed_injection_kw[m.node] += static_cast<double>(sold + exported) / 1000.0 / h;
            } else if (m.spec->type == ResourceType::Battery) {
                stored_kwh[m.mac] += (static_cast<double>(bought) - static_cast<double>(sold)) / 1000.0;
                in.fixed_injection_kw[m.node] += (static_cast<double>(sold) - static_cast<double>(bought)) / 1000.0 / h;
            } else if (m.spec->type == ResourceType::Vehicle) {
                auto& need = vehicle_need_wh[m.mac];
                need -= std::min(need, bought);
                std::uint64_t from_grid = 0;
                if (contains(m.spec->available_periods, t)) {
                    const std::uint64_t per_period = to_wh(m.spec->power_kw * h);
                    std::uint64_t later = 0;
                    for (auto p : m.spec->available_periods) {
                        if (p > t) later += per_period;
                    }
                    const std::uint64_t room = per_period - std::min(per_period, bought);
                    if (need > later) from_grid = std::min(need - later, room);
                }
                need -= from_grid;
                grid_buy_wh[m.mac] = from_grid;
                in.fixed_injection_kw[m.node] -= static_cast<double>(bought + from_grid) / 1000.0 / h;
            } else if (m.load >= 0) {
                in.load_min_kw[static_cast<std::size_t>(m.load)] = static_cast<double>(bought) / 1000.0 / h;
            }
        }
        const OpfSolution sol = solve_opf(grid, in);

        // Grid settlements at the Energy Internet nodal prices.
        double thermal_kwh = 0.0;
        double thermal_g = 0.0;
        for (std::size_t i = 0; i < grid.plants.size(); ++i) {
            thermal_kwh += sol.plant_kw[i] * h;
            thermal_g += sol.plant_kw[i] * h * grid.plants[i].carbon_g_per_kwh;
        }
        double exported_kwh = 0.0;
        for (const auto& [_, wh] : export_wh) exported_kwh += static_cast<double>(wh) / 1000.0;
        const double supply = thermal_kwh + exported_kwh;
        const auto grid_carbon = static_cast<std::uint16_t>(supply > 0 ? std::llround(thermal_g / supply) : 0);
        const auto grid_green =
            static_cast<std::uint16_t>(supply > 0 ? std::llround(exported_kwh / supply * kMaxGreenFractionBp) : 0);

        std::uint64_t grid_wh = 0;
        auto settle_with_grid = [&](const Member& m, std::uint64_t wh, bool to_grid) {
            if (wh == 0) return;
            Bee b;
            b.kind = BeeKind::Settle;
            b.quantity_wh = static_cast<std::uint32_t>(wh);
            b.delivery_start = ctx.window_start;
            b.delivery_duration_min = ctx.duration_min;
            b.price_mcny_per_kwh = to_mcny(sol.lmp[m.node]);
            b.carbon_intensity_g_per_kwh = to_grid ? 0 : grid_carbon;
            b.green_fraction_bp = to_grid ? kMaxGreenFractionBp : grid_green;
            b.sender = to_grid ? m.mac : isp->mac;
            b.receiver = to_grid ? isp->mac : m.mac;
            const auto eip = *net.eip_of(m.mac);
            const auto conn = to_grid ? net.connection_between(eip, isp_eip) : net.connection_between(isp_eip, eip);
            (void)net.send_bee(conn, b);
            ledger.apply_settlement(b);
            grid_wh += wh;
            usage_wh[m.mac] += wh;
        };

        std::vector<ParticipantAccount> accounts;
        for (const auto& m : members) {
            if (!is_participant(m.spec->type)) continue;
            ParticipantAccount a{m.spec->name, role_of(m.spec->type)};
            const double price = sol.lmp[m.node];
            a.peer_payment_cny = static_cast<double>(book.paid(m.mac)) / 1000.0;
            usage_wh[m.mac] += book.bought(m.mac) + book.sold(m.mac);
            if (m.load >= 0) {
                const double d = sol.load_kw[static_cast<std::size_t>(m.load)];
                if (auto c = curve_of(grid, m, t)) a.utility_cny = c->utility(d) * h;
                const double from_grid = std::max(0.0, d * h - static_cast<double>(book.bought(m.mac)) / 1000.0);
                a.grid_payment_cny = price * from_grid;
                settle_with_grid(m, static_cast<std::uint64_t>(std::llround(from_grid * 1000.0)), false);
            } else if (m.renewable >= 0) {
                const double kwh = static_cast<double>(export_wh[m.mac]) / 1000.0;
                a.grid_payment_cny = -price * kwh;
                settle_with_grid(m, export_wh[m.mac], true);
            } else if (m.spec->type == ResourceType::Vehicle) {
                a.grid_payment_cny = price * static_cast<double>(grid_buy_wh[m.mac]) / 1000.0;
                settle_with_grid(m, grid_buy_wh[m.mac], false);
            }
            accounts.push_back(a);
        }

        st.opf = sol;
        st.loss_kwh = sol.total_loss_kw * h;
        st.peer_wh = book.peer_wh;
        st.grid_wh = grid_wh;
        st.peer_trades = book.trades;
        st.failed_fills = book.failures;
        st.surplus = account_surplus(grid, sol, std::move(accounts), h);
        rep.curtailed_kwh += st.curtailed_kwh;
        rep.loss_kwh += st.loss_kwh;
        periods.push_back(st.surplus);

        // Ledger, pool and stack must agree on every period's quantities.
        std::size_t delivered_count = 0;
        const std::uint64_t delivered = delivered_wh(net, members, delivered_count);
        const std::uint64_t settled = ledger_wh(ledger) - ledger_wh_before;
        const std::size_t settled_count = ledger.settlement_count() - ledger_count_before;
        if (settled != book.peer_wh + grid_wh || settled != delivered - delivered_before ||
            settled_count != net.receipts_issued() - receipts_before ||
            settled_count != delivered_count - delivered_before_count) {
            rc.per_period_ok = false;
        }
        rc.pool_wh += book.peer_wh;
        rc.grid_wh += grid_wh;
        rep.periods.push_back(std::move(st));
    }

    rep.daily = combine(periods);

    std::vector<FeeParticipant> payers;
    std::vector<std::string> names;
    for (const auto& m : members) {
        if (!is_participant(m.spec->type)) continue;
        payers.push_back({m.spec->name, static_cast<double>(usage_wh[m.mac]) / 1000.0});
        names.push_back(m.spec->name);
    }
    double revenue = 0.0;
    for (const auto& a : rep.daily.participants) revenue += a.grid_payment_cny;
    rep.fee = compute_service_fee(rep.daily.plant_cost, revenue, payers);
    apply_fee(rep.daily, rep.fee, names);

    rep.frames = net.frames_transmitted();
    rep.settlements = ledger.settlement_count();
    rc.ledger_wh = ledger_wh(ledger);
    rc.ledger_count = ledger.settlement_count();
    rc.receipt_count = net.receipts_issued();
    rc.stack_wh = delivered_wh(net, members, rc.delivered_count);
    for (const auto& bytes : ledger.event_log()) run.event_log.push_back(to_hex(bytes));
    run.trace = net.trace();
    return run;
}

void fill_outcomes(ModeReport& rep, const std::vector<Member>& members) {
    for (const auto& m : members) {
        ResourceOutcome o{m.spec->name, m.spec->type, 0.0};
        if (m.plant >= 0) {
            o.profit_cny = rep.daily.plant_profit_cny.at(static_cast<std::size_t>(m.plant));
        } else if (m.spec->type == ResourceType::Isp) {
            o.profit_cny = rep.daily.merchandise_surplus + rep.daily.service_fee;
        } else {
            for (const auto& a : rep.daily.participants) {
                if (a.id == m.spec->name) o.profit_cny = a.surplus();
            }
        }
        rep.resources.push_back(o);
    }
}

} // namespace

double ScenarioReport::welfare_delta_pct() const {
    return pct(energy_internet.daily.welfare, traditional.daily.welfare);
}

double ScenarioReport::carbon_delta_pct() const {
    return pct(energy_internet.daily.carbon_t, traditional.daily.carbon_t);
}

double ScenarioReport::grid_surplus_delta_pct() const {
    return pct(energy_internet.daily.grid_surplus, traditional.daily.grid_surplus);
}

ScenarioReport run_scenario(const Scenario& scenario) {
    const RuleBasedStrategy strategy(scenario.agents);
    return run_scenario(scenario, strategy);
}

ScenarioReport run_scenario(const Scenario& scenario, const BiddingStrategy& strategy) {
    scenario.validate();
    const auto members = resolve_members(scenario);

    ScenarioReport report;
    report.name = scenario.name;
    report.seed = scenario.seed;

    // The traditional run gets its own stack and pool; it must leave both idle.
    Ledger idle_ledger;
    Network idle_net(idle_ledger, scenario.seed);
    BeePool idle_pool;
    const auto traditional = traditional_dispatch(scenario, members);
    const GridModel grid = anchor_loads(scenario.grid, traditional);
    report.traditional = account_traditional(scenario, grid, members, traditional);
    report.traditional.frames = idle_net.frames_transmitted();
    report.traditional.settlements = idle_ledger.settlement_count() + idle_pool.size();
    fill_outcomes(report.traditional, members);

    auto ei = run_energy_internet(scenario, grid, members, traditional, strategy);
    report.energy_internet = std::move(ei.report);
    report.reconciliation = ei.reconciliation;
    report.event_log = std::move(ei.event_log);
    report.trace = std::move(ei.trace);
    fill_outcomes(report.energy_internet, members);
    return report;
}

} // namespace ei
