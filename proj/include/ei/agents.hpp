#pragma once

#include "ei/address.hpp"
#include "ei/bee.hpp"
#include "ei/config.hpp"
#include "ei/demand.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ei {

struct PeriodContext {
    std::size_t period = 0;
    double hours = 2.0;
    std::uint32_t window_start = 0;
    std::uint16_t duration_min = 120;
};

/// What a resource knows when it bids: its own state and the public signals
/// (reference price, current export allowance).
struct ResourceView {
    const ResourceSpec* spec = nullptr;
    MacAddress mac;
    double reference_price = 0.0;       // CNY/kWh, traditional LMP at the node
    std::uint64_t exportable_wh = 0;    // what may leave the LAN right now
    double available_kwh = 0.0;         // renewables: energy this period
    std::optional<DemandCurve> demand;  // loads: curve for this period
    double stored_kwh = 0.0;            // battery state of charge
    double remaining_kwh = 0.0;         // vehicle: energy still needed today
    bool vehicle_available = false;
    bool peak = false;
};

/// Bidding behaviour of peer resources. Requests are posted before offers in
/// every period; both are plain BEEs addressed to the broadcast MAC.
class BiddingStrategy {
public:
    virtual ~BiddingStrategy() = default;
    virtual std::vector<Bee> requests(const PeriodContext& ctx, const ResourceView& view) const = 0;
    virtual std::vector<Bee> offers(const PeriodContext& ctx, const ResourceView& view) const = 0;
};

/// Fixed-multiplier rules:
///   loads     bid their baseline at the reference price and the extra
///             quantity their curve takes at load_extra_bid x reference;
///   battery   bids to charge off-peak, offers its charge on peak;
///   vehicle   bids for its remaining need while plugged in;
///   renewables offer what they could export at the reference price and the
///             rest at renewable_surplus_ask x reference.
class RuleBasedStrategy final : public BiddingStrategy {
public:
    explicit RuleBasedStrategy(AgentParams params) : params_(params) {}

    std::vector<Bee> requests(const PeriodContext& ctx, const ResourceView& view) const override;
    std::vector<Bee> offers(const PeriodContext& ctx, const ResourceView& view) const override;

    const AgentParams& params() const noexcept { return params_; }

private:
    AgentParams params_;
};

/// Price in mCNY/kWh, rounded to nearest.
std::uint32_t to_mcny(double cny_per_kwh);
/// Energy in Wh, rounded down.
std::uint32_t to_wh(double kwh);

} // namespace ei
