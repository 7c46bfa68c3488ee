#pragma once

#include "ei/address.hpp"
#include "ei/bee.hpp"
#include "ei/opf.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ei {

// ---------------------------------------------------------------------------
// Exchange limits
// ---------------------------------------------------------------------------

/// A resource subject to exchange limits, attached at a grid node.
struct LimitSubject {
    EnergyIpAddress eip;
    std::size_t node = 0;
    double weight = 1.0;
};

/// Splits one feeder's headroom among the subjects behind it; returns one
/// share per subject (shares need not sum to 1).
using HeadroomPolicy = std::function<std::vector<double>(std::span<const LimitSubject>)>;

/// Shares proportional to weight; zero weights receive nothing.
std::vector<double> pro_rata_shares(std::span<const LimitSubject> subjects);

struct LimitTable {
    static constexpr std::uint64_t kUnlimited = ~std::uint64_t{0};
    std::map<EnergyIpAddress, std::uint64_t> static_wh;
    std::map<EnergyIpAddress, std::uint64_t> dynamic_wh;
};

/// Line feeding each node from the root (node 0) side; nullopt for the root.
/// Errors: ConfigError if the network is not radial from the root.
std::vector<std::optional<std::size_t>> uplink_lines(const GridModel& grid);

/// Per-period limits from each node's uplink: static = rating x T x share,
/// dynamic = (rating - |flow|) x T x share. Subjects at the root or behind an
/// unrated line are unlimited.
LimitTable compute_limits(const GridModel& grid, const OpfSolution& solution, std::span<const LimitSubject> subjects,
                          const HeadroomPolicy& policy = pro_rata_shares);

// ---------------------------------------------------------------------------
// Decoupling
// ---------------------------------------------------------------------------

struct ResourceInjection {
    MacAddress mac;
    std::size_t node = 0;
    double kw = 0.0;  // + injection, - withdrawal
};

/// Moves each trade's average power from the buyer's injection to the
/// seller's: the seller produces more, the buyer consumes more.
std::vector<ResourceInjection> apply_physical_trades(std::span<const ResourceInjection> baseline,
                                                     std::span<const Bee> trades);

struct DecouplingReport {
    std::vector<double> nodal_delta_kw;
    bool injections_preserved = false;
    std::size_t trade_count = 0;
    std::uint64_t traded_wh = 0;
    OpfSolution baseline;
    OpfSolution with_trades;
    bool solutions_identical = false;
};

/// Aggregates both injection sets per node, solves the OPF for each on top of
/// `input`, and compares them. Errors: propagated from solve_opf.
DecouplingReport verify_decoupling(const GridModel& grid, const OpfInput& input,
                                   std::span<const ResourceInjection> baseline,
                                   std::span<const ResourceInjection> after_trades, std::span<const Bee> trades);

// ---------------------------------------------------------------------------
// Service fee
// ---------------------------------------------------------------------------

struct FeeParticipant {
    std::string id;
    double usage_kwh = 0.0;
};

struct FeeAllocation {
    double required_profit = 0.0;
    double profit = 0.0;
    double deficit = 0.0;
    std::vector<double> fees;  // aligned with the participants
    double total() const;
};

/// The grid keeps at least a 10% profit rate; any shortfall is charged to
/// participants in proportion to usage, the last one absorbing rounding.
FeeAllocation compute_service_fee(double opf_cost, double grid_revenue, std::span<const FeeParticipant> participants);

// ---------------------------------------------------------------------------
// Surplus accounting
// ---------------------------------------------------------------------------

enum class ParticipantRole { Load, Renewable, Storage, Vehicle };

/// Money and utility of one non-plant participant over one period.
struct ParticipantAccount {
    std::string id;
    ParticipantRole role = ParticipantRole::Load;
    double utility_cny = 0.0;
    double grid_payment_cny = 0.0;  // + paid to the grid
    double peer_payment_cny = 0.0;  // + paid to other participants
    double fee_cny = 0.0;

    double surplus() const { return utility_cny - grid_payment_cny - peer_payment_cny - fee_cny; }
};

struct SurplusReport {
    std::vector<ParticipantAccount> participants;
    std::vector<double> plant_profit_cny;
    double consumer_surplus = 0.0;
    double producer_surplus = 0.0;  // non-plant producers: renewables, storage, vehicles
    double plant_profit = 0.0;
    double merchandise_surplus = 0.0;
    double service_fee = 0.0;
    double grid_surplus = 0.0;      // plant profit + merchandise surplus + service fee
    double welfare = 0.0;           // utility - plant cost
    double plant_cost = 0.0;
    double thermal_kwh = 0.0;
    double carbon_t = 0.0;
};

/// Errors: AccountingMismatch when the partition does not add up to welfare.
SurplusReport account_surplus(const GridModel& grid, const OpfSolution& solution,
                              std::vector<ParticipantAccount> participants, double hours);

/// Sums period reports; re-checks the identity on the totals.
SurplusReport combine(std::span<const SurplusReport> periods);

} // namespace ei
