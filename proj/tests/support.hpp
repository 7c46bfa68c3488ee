#pragma once

#include "ei/bee.hpp"
#include "ei/pool.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace ei::testing {

inline MacAddress mac(std::uint8_t a, std::uint8_t b = 0) { return MacAddress{{0x02, 0x00, 0x00, 0x00, a, b}}; }

inline Bee make_bee(BeeKind kind, std::uint32_t quantity_wh, std::uint32_t price, const MacAddress& sender,
                    const MacAddress& receiver = MacAddress::broadcast()) {
    Bee b;
    b.kind = kind;
    b.quantity_wh = quantity_wh;
    b.delivery_start = 1'700'000'000;
    b.delivery_duration_min = 120;
    b.price_mcny_per_kwh = price;
    b.sender = sender;
    b.receiver = receiver;
    return b;
}

inline Bee settle(std::uint32_t quantity_wh, std::uint32_t price, const MacAddress& from, const MacAddress& to) {
    return make_bee(BeeKind::Settle, quantity_wh, price, from, to);
}

/// Uniform valid BEE over the whole field space.
inline Bee random_bee(std::mt19937_64& rng) {
    auto u = [&](std::uint64_t lo, std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng); };
    Bee b;
    b.kind = static_cast<BeeKind>(u(0, 3));
    b.carrier = static_cast<Carrier>(u(0, 3));
    b.quantity_wh = static_cast<std::uint32_t>(u(b.kind == BeeKind::Confirm ? 0 : 1, 0xFFFFFFFF));
    b.delivery_start = static_cast<std::uint32_t>(u(0, 0xFFFFFFFF));
    b.delivery_duration_min = static_cast<std::uint16_t>(u(1, 0xFFFF));
    b.price_mcny_per_kwh = static_cast<std::uint32_t>(u(0, 0xFFFFFFFF));
    b.carbon_intensity_g_per_kwh = static_cast<std::uint16_t>(u(0, 0xFFFF));
    b.green_fraction_bp = static_cast<std::uint16_t>(u(0, kMaxGreenFractionBp));
    b.grade = static_cast<std::uint16_t>(u(0, 0xFFFF));
    b.mass_flow_rate = b.carrier == Carrier::Electricity ? 0 : static_cast<std::uint16_t>(u(0, 0xFFFF));
    for (auto& o : b.sender.octets) o = static_cast<std::uint8_t>(u(0, 255));
    for (auto& o : b.receiver.octets) o = static_cast<std::uint8_t>(u(0, 255));
    return b;
}

/// Exhaustive matching oracle for one incoming order against a resting book.
/// Enumerates every integer allocation of the incoming quantity over the
/// compatible resting entries.
struct OracleResult {
    std::uint64_t quantity = 0;
    std::uint64_t buyer_cost = 0;  // Wh x mCNY/kWh at the offer's ask
};

inline bool oracle_compatible(const Bee& offer, const Bee& request) {
    if (offer.carrier != request.carrier || offer.price_mcny_per_kwh > request.price_mcny_per_kwh) return false;
    const auto start = std::max(offer.delivery_start, request.delivery_start);
    const auto end = std::min(offer.delivery_end(), request.delivery_end());
    return end > start && end - start >= 60;
}

inline OracleResult brute_force_match(const Bee& incoming, const std::vector<PoolEntry>& resting) {
    const bool is_request = incoming.kind == BeeKind::Request;
    std::vector<std::uint32_t> caps;
    std::vector<std::uint32_t> prices;
    for (const auto& e : resting) {
        const Bee& offer = is_request ? e.bee : incoming;
        const Bee& request = is_request ? incoming : e.bee;
        if (!oracle_compatible(offer, request)) continue;
        caps.push_back(e.remaining_wh);
        prices.push_back(offer.price_mcny_per_kwh);
    }
    OracleResult best;
    std::vector<std::uint32_t> alloc(caps.size(), 0);
    bool first = true;
    for (;;) {
        std::uint64_t q = 0;
        std::uint64_t cost = 0;
        for (std::size_t i = 0; i < alloc.size(); ++i) {
            q += alloc[i];
            cost += static_cast<std::uint64_t>(alloc[i]) * prices[i];
        }
        if (q <= incoming.quantity_wh &&
            (first || q > best.quantity || (q == best.quantity && cost < best.buyer_cost))) {
            best = {q, cost};
            first = false;
        }
        std::size_t i = 0;
        while (i < alloc.size() && alloc[i] == caps[i]) alloc[i++] = 0;
        if (i == alloc.size()) break;
        ++alloc[i];
    }
    return best;
}

inline std::filesystem::path source_dir() { return EI_SOURCE_DIR; }

inline std::filesystem::path scenario_path(const std::string& name) {
    return source_dir() / "scenarios" / name / "scenario.json";
}

} // namespace ei::testing
