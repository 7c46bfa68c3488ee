#pragma once

#include "ei/address.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace ei {

inline constexpr std::size_t kIpHeaderSize = 20;
inline constexpr std::size_t kTcpHeaderSize = 20;
inline constexpr std::size_t kFrameHeaderSize = 14;
inline constexpr std::size_t kFrameCheckSize = 4;
inline constexpr std::uint16_t kEnergyEthertype = 0x88B5;
inline constexpr std::uint8_t kProtocolEnergyTcp = 6;

/// IPv4 header layout. The flags/fragment-offset word carries the static
/// per-period exchange ceiling of the source address, in kWh.
struct EnergyIpHeader {
    std::uint8_t version = 4;
    std::uint8_t header_length = 5;  // 32-bit words
    std::uint16_t total_length = 0;
    std::uint16_t identification = 0;
    std::uint16_t static_limit_kwh = 0;
    std::uint8_t ttl = 64;
    std::uint8_t protocol = kProtocolEnergyTcp;
    std::uint16_t header_checksum = 0;
    EnergyIpAddress source;
    EnergyIpAddress dest;

    /// Serializes with a freshly computed header checksum.
    std::array<std::uint8_t, kIpHeaderSize> encode() const;
    /// Errors: BadLength, ChecksumFailure.
    static EnergyIpHeader decode(std::span<const std::uint8_t> bytes);
};

namespace tcp_flags {
inline constexpr std::uint8_t Fin = 0x01;
inline constexpr std::uint8_t Syn = 0x02;
inline constexpr std::uint8_t Rst = 0x04;
inline constexpr std::uint8_t Psh = 0x08;
inline constexpr std::uint8_t Ack = 0x10;
} // namespace tcp_flags

/// TCP header layout; the window advertises the sender's remaining dynamic
/// exchange allowance in kWh.
struct EnergyTcpHeader {
    std::uint16_t source_port = 0;
    std::uint16_t dest_port = 0;
    std::uint32_t sequence = 0;
    std::uint32_t ack_number = 0;
    std::uint8_t flags = 0;
    std::uint16_t window = 0;
    std::uint16_t checksum = 0;

    bool has(std::uint8_t flag) const noexcept { return (flags & flag) != 0; }

    /// Serializes with the checksum computed over header and payload.
    std::array<std::uint8_t, kTcpHeaderSize> encode(std::span<const std::uint8_t> payload) const;
    /// Verifies the checksum over header and payload. Errors: BadLength, ChecksumFailure.
    static EnergyTcpHeader decode(std::span<const std::uint8_t> segment);
};

/// Link-layer frame: Ethernet II addressing with a CRC-32 frame check.
struct EnergyFrame {
    MacAddress dest_mac;
    MacAddress src_mac;
    std::uint16_t ethertype = kEnergyEthertype;
    std::vector<std::uint8_t> payload;  // IP header + TCP header + optional BEE

    std::vector<std::uint8_t> encode() const;
    /// Errors: BadLength, ChecksumFailure.
    static EnergyFrame decode(std::span<const std::uint8_t> bytes);
};

std::uint32_t frame_check(std::span<const std::uint8_t> bytes) noexcept;

/// Sequence-space comparison modulo 2^32 (a precedes b).
constexpr bool seq_before(std::uint32_t a, std::uint32_t b) noexcept {
    return static_cast<std::int32_t>(a - b) < 0;
}

} // namespace ei
