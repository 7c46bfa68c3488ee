#pragma once

#include "ei/address.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ei {

enum class BeeKind : std::uint8_t { Offer = 0, Request = 1, Confirm = 2, Settle = 3 };
enum class Carrier : std::uint8_t { Electricity = 0, Heat = 1, Gas = 2, Hydrogen = 3 };

std::string_view to_string(BeeKind kind) noexcept;
std::string_view to_string(Carrier carrier) noexcept;

/// Block of Energy Exchange: the ex-ante data record that accompanies an
/// energy delivery. Nine domain entries (carrier through mass_flow_rate) plus
/// protocol bookkeeping. All quantities are integers in fixed units.
struct Bee {
    std::uint8_t version = 1;
    BeeKind kind = BeeKind::Offer;
    Carrier carrier = Carrier::Electricity;
    std::uint32_t quantity_wh = 0;
    std::uint32_t delivery_start = 0;        // epoch seconds
    std::uint16_t delivery_duration_min = 0;
    std::uint32_t price_mcny_per_kwh = 0;
    std::uint16_t carbon_intensity_g_per_kwh = 0;
    std::uint16_t green_fraction_bp = 0;      // basis points, 0..10000
    std::uint16_t grade = 0;
    std::uint16_t mass_flow_rate = 0;
    MacAddress sender;
    MacAddress receiver;

    std::uint32_t delivery_end() const noexcept {
        return delivery_start + static_cast<std::uint32_t>(delivery_duration_min) * 60u;
    }

    friend bool operator==(const Bee&, const Bee&) = default;
};

inline constexpr std::size_t kBeeSize = 48;
inline constexpr std::uint16_t kMaxGreenFractionBp = 10000;

using BeeBytes = std::array<std::uint8_t, kBeeSize>;

/// Throws Error{InvariantViolation} naming the first violated invariant.
void validate(const Bee& bee);

/// 16-bit ones'-complement sum of big-endian words, complemented (RFC 1071).
/// An odd trailing byte is padded with zero.
std::uint16_t internet_checksum(std::span<const std::uint8_t> bytes) noexcept;

BeeBytes encode_bee(const Bee& bee);

/// Errors: BadLength, BadChecksum, InvariantViolation (checked in that order).
Bee decode_bee(std::span<const std::uint8_t> bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Errors: BadLength on odd length, InvariantViolation on a non-hex digit.
std::vector<std::uint8_t> from_hex(std::string_view hex);

/// Multi-line "field: value" rendering used by the CLI.
std::string describe(const Bee& bee);

} // namespace ei
