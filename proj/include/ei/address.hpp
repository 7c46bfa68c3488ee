#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace ei {

/// EUI-48 style identifier burned into an Energy Internet Card. Stays with the
/// resource for its lifetime, regardless of which LAN it is attached to.
struct MacAddress {
    std::array<std::uint8_t, 6> octets{};

    static MacAddress broadcast() noexcept;
    /// Parses "aa:bb:cc:dd:ee:ff" (also accepts '-' separators).
    static MacAddress parse(std::string_view text);

    bool is_zero() const noexcept;
    bool is_broadcast() const noexcept;
    std::string to_string() const;
    std::uint64_t to_u64() const noexcept;

    friend auto operator<=>(const MacAddress&, const MacAddress&) = default;
};

/// 32-bit Energy IP address: wan_prefix(8) | lan_subnet(12) | host(12).
/// Host 0 of every subnet belongs to the LAN's router (the VPP operator).
class EnergyIpAddress {
public:
    static constexpr unsigned kWanBits = 8;
    static constexpr unsigned kSubnetBits = 12;
    static constexpr unsigned kHostBits = 12;
    static constexpr std::uint32_t kMaxHost = (1u << kHostBits) - 1;
    static constexpr std::uint32_t kMaxSubnet = (1u << kSubnetBits) - 1;

    constexpr EnergyIpAddress() = default;
    constexpr explicit EnergyIpAddress(std::uint32_t raw) : raw_(raw) {}

    static EnergyIpAddress make(std::uint32_t wan, std::uint32_t subnet, std::uint32_t host);
    /// Parses the dotted "wan.subnet.host" form produced by to_string().
    static EnergyIpAddress parse(std::string_view text);

    constexpr std::uint32_t raw() const noexcept { return raw_; }
    constexpr std::uint32_t wan() const noexcept { return raw_ >> (kSubnetBits + kHostBits); }
    constexpr std::uint32_t subnet() const noexcept { return (raw_ >> kHostBits) & kMaxSubnet; }
    constexpr std::uint32_t host() const noexcept { return raw_ & kMaxHost; }
    constexpr bool is_router() const noexcept { return host() == 0; }
    /// Address with the host bits cleared (the LAN's router address).
    constexpr EnergyIpAddress network() const noexcept { return EnergyIpAddress(raw_ & ~kMaxHost); }

    std::string to_string() const;

    friend constexpr auto operator<=>(const EnergyIpAddress&, const EnergyIpAddress&) = default;

private:
    std::uint32_t raw_ = 0;
};

} // namespace ei

template <>
struct std::hash<ei::MacAddress> {
    std::size_t operator()(const ei::MacAddress& mac) const noexcept {
        return std::hash<std::uint64_t>{}(mac.to_u64());
    }
};

template <>
struct std::hash<ei::EnergyIpAddress> {
    std::size_t operator()(const ei::EnergyIpAddress& eip) const noexcept {
        return std::hash<std::uint32_t>{}(eip.raw());
    }
};
