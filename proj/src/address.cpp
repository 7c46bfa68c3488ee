#include "ei/address.hpp"

#include "ei/error.hpp"

#include <charconv>
#include <cstdio>

namespace ei {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

MacAddress MacAddress::broadcast() noexcept {
    MacAddress mac;
    mac.octets.fill(0xFF);
    return mac;
}

MacAddress MacAddress::parse(std::string_view text) {
    if (text.size() != 17) {
        throw Error(Errc::InvalidMac, "malformed MAC address '" + std::string(text) + "'");
    }
    MacAddress mac;
    for (std::size_t i = 0; i < 6; ++i) {
        const int hi = hex_value(text[i * 3]);
        const int lo = hex_value(text[i * 3 + 1]);
        if (hi < 0 || lo < 0 || (i < 5 && text[i * 3 + 2] != ':' && text[i * 3 + 2] != '-')) {
            throw Error(Errc::InvalidMac, "malformed MAC address '" + std::string(text) + "'");
        }
        mac.octets[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return mac;
}

bool MacAddress::is_zero() const noexcept {
    for (auto o : octets) {
        if (o != 0) return false;
    }
    return true;
}

bool MacAddress::is_broadcast() const noexcept {
    for (auto o : octets) {
        if (o != 0xFF) return false;
    }
    return true;
}

std::string MacAddress::to_string() const {
    char buf[18];
    std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1],
                  octets[2], octets[3], octets[4], octets[5]);
    return buf;
}

std::uint64_t MacAddress::to_u64() const noexcept {
    std::uint64_t v = 0;
    for (auto o : octets) v = (v << 8) | o;
    return v;
}

EnergyIpAddress EnergyIpAddress::make(std::uint32_t wan, std::uint32_t subnet, std::uint32_t host) {
    if (wan > 0xFF || subnet > kMaxSubnet || host > kMaxHost) {
        throw Error(Errc::ConfigError, "Energy IP component out of range");
    }
    return EnergyIpAddress((wan << (kSubnetBits + kHostBits)) | (subnet << kHostBits) | host);
}

EnergyIpAddress EnergyIpAddress::parse(std::string_view text) {
    std::uint32_t parts[3] = {0, 0, 0};
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int i = 0; i < 3; ++i) {
        auto [next, ec] = std::from_chars(p, end, parts[i]);
        if (ec != std::errc{} || (i < 2 && (next == end || *next != '.'))) {
            throw Error(Errc::ConfigError, "malformed Energy IP '" + std::string(text) + "'");
        }
        p = (i < 2) ? next + 1 : next;
    }
    if (p != end) throw Error(Errc::ConfigError, "malformed Energy IP '" + std::string(text) + "'");
    return make(parts[0], parts[1], parts[2]);
}

std::string EnergyIpAddress::to_string() const {
    return std::to_string(wan()) + "." + std::to_string(subnet()) + "." + std::to_string(host());
}

} // namespace ei
