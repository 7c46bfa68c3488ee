#include "ei/agents.hpp"

#include <algorithm>
#include <cmath>

namespace ei {

std::uint32_t to_mcny(double cny_per_kwh) {
    return static_cast<std::uint32_t>(std::llround(std::max(0.0, cny_per_kwh) * 1000.0));
}

std::uint32_t to_wh(double kwh) {
    return static_cast<std::uint32_t>(std::floor(std::max(0.0, kwh) * 1000.0 + 1e-6));
}

namespace {

Bee order(BeeKind kind, const PeriodContext& ctx, const ResourceView& view, std::uint32_t wh, double price) {
    Bee b;
    b.kind = kind;
    b.carrier = Carrier::Electricity;
    b.quantity_wh = wh;
    b.delivery_start = ctx.window_start;
    b.delivery_duration_min = ctx.duration_min;
    b.price_mcny_per_kwh = to_mcny(price);
    b.sender = view.mac;
    b.receiver = MacAddress::broadcast();
    return b;
}

void push_if(std::vector<Bee>& out, Bee b) {
    if (b.quantity_wh > 0) out.push_back(b);
}

} // namespace

std::vector<Bee> RuleBasedStrategy::requests(const PeriodContext& ctx, const ResourceView& view) const {
    std::vector<Bee> out;
    const double ref = view.reference_price;
    switch (view.spec->type) {
        case ResourceType::UrbanLoad:
        case ResourceType::RuralLoad: {
            if (!view.demand) break;
            const auto& curve = *view.demand;
            push_if(out, order(BeeKind::Request, ctx, view, to_wh(curve.p0 * ctx.hours), ref));
            const double price = params_.load_extra_bid * ref;
            const double extra_kw = std::max(0.0, curve.quantity_at(price) - curve.p0);
            push_if(out, order(BeeKind::Request, ctx, view, to_wh(extra_kw * ctx.hours), price));
            break;
        }
        case ResourceType::Battery: {
            if (view.peak) break;
            const double room = view.spec->capacity_kwh - view.stored_kwh;
            const double kwh = std::min(view.spec->power_kw * ctx.hours, room);
            push_if(out, order(BeeKind::Request, ctx, view, to_wh(kwh), params_.battery_bid * ref));
            break;
        }
        case ResourceType::Vehicle: {
            if (!view.vehicle_available) break;
            const double kwh = std::min(view.spec->power_kw * ctx.hours, view.remaining_kwh);
            push_if(out, order(BeeKind::Request, ctx, view, to_wh(kwh), params_.vehicle_bid * ref));
            break;
        }
        default: break;
    }
    return out;
}

std::vector<Bee> RuleBasedStrategy::offers(const PeriodContext& ctx, const ResourceView& view) const {
    std::vector<Bee> out;
    const double ref = view.reference_price;
    switch (view.spec->type) {
        case ResourceType::Wind:
        case ResourceType::Solar: {
            const std::uint32_t available = to_wh(view.available_kwh);
            const auto exportable = static_cast<std::uint32_t>(
                std::min<std::uint64_t>(view.exportable_wh, available));
            for (auto quantity_price : {std::pair{exportable, ref},
                                        std::pair{available - exportable, params_.renewable_surplus_ask * ref}}) {
                Bee b = order(BeeKind::Offer, ctx, view, quantity_price.first, quantity_price.second);
                b.carbon_intensity_g_per_kwh = 0;
                b.green_fraction_bp = kMaxGreenFractionBp;
                push_if(out, b);
            }
            break;
        }
        case ResourceType::Battery: {
            if (!view.peak) break;
            const double kwh = std::min(view.spec->power_kw * ctx.hours, view.stored_kwh);
            Bee b = order(BeeKind::Offer, ctx, view, to_wh(kwh), params_.battery_ask * ref);
            b.green_fraction_bp = kMaxGreenFractionBp;  // charged only from renewable offers
            push_if(out, b);
            break;
        }
        default: break;
    }
    return out;
}

} // namespace ei
