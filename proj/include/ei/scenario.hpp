#pragma once

#include "ei/agents.hpp"
#include "ei/config.hpp"
#include "ei/isp.hpp"
#include "ei/opf.hpp"
#include "ei/stack.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ei {

enum class OperationMode { Traditional, EnergyInternet };
std::string_view to_string(OperationMode mode) noexcept;

struct PeriodStats {
    std::size_t period = 0;
    OpfSolution opf;
    SurplusReport surplus;
    double renewable_available_kwh = 0.0;
    double renewable_used_kwh = 0.0;
    double curtailed_kwh = 0.0;
    double loss_kwh = 0.0;
    std::uint64_t peer_wh = 0;   // settled through the pool
    std::uint64_t grid_wh = 0;   // settled with the ISP
    std::size_t peer_trades = 0;
    std::size_t failed_fills = 0;
};

struct ResourceOutcome {
    std::string name;
    ResourceType type = ResourceType::Isp;
    double profit_cny = 0.0;     // surplus for loads, profit for everything else
};

struct ModeReport {
    OperationMode mode = OperationMode::Traditional;
    std::vector<PeriodStats> periods;
    SurplusReport daily;
    FeeAllocation fee;
    std::vector<ResourceOutcome> resources;
    double curtailed_kwh = 0.0;
    double loss_kwh = 0.0;
    std::uint64_t frames = 0;
    std::size_t settlements = 0;
};

/// Per-day quantity agreement between the ledger, the pool and the stack.
struct Reconciliation {
    std::uint64_t ledger_wh = 0;
    std::uint64_t pool_wh = 0;
    std::uint64_t grid_wh = 0;
    std::uint64_t stack_wh = 0;
    std::size_t ledger_count = 0;
    std::size_t receipt_count = 0;
    std::size_t delivered_count = 0;
    bool per_period_ok = true;

    bool ok() const {
        return per_period_ok && ledger_wh == pool_wh + grid_wh && ledger_wh == stack_wh &&
               ledger_count == receipt_count && ledger_count == delivered_count;
    }
};

struct ScenarioReport {
    std::string name;
    std::uint64_t seed = 0;
    ModeReport traditional;
    ModeReport energy_internet;
    Reconciliation reconciliation;
    std::vector<std::string> event_log;   // hex lines, settlement order
    std::vector<TraceEntry> trace;

    /// (EI - traditional) / traditional, in percent.
    double welfare_delta_pct() const;
    double carbon_delta_pct() const;
    double grid_surplus_delta_pct() const;
};

/// Runs both modes. Errors: ConfigError, propagated Infeasible/NotConverged,
/// AccountingMismatch, and any stack error raised by an ISP settlement.
ScenarioReport run_scenario(const Scenario& scenario);
ScenarioReport run_scenario(const Scenario& scenario, const BiddingStrategy& strategy);

/// Writes welfare.csv, carbon.csv, dispatch_by_period.csv,
/// surplus_partition.csv, summary.txt, plus events.log and trace.csv.
/// Errors: IoError.
void emit_report(const ScenarioReport& report, const std::string& out_dir);

/// The five headline comparisons as text.
std::string summary_text(const ScenarioReport& report);

} // namespace ei
