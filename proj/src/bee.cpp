#include "ei/bee.hpp"

#include "ei/error.hpp"

#include <sstream>

namespace ei {

namespace {

// Wire offsets; see WIRE.md.
constexpr std::size_t kOffVersion = 0;
constexpr std::size_t kOffKind = 1;
constexpr std::size_t kOffCarrier = 2;
constexpr std::size_t kOffQuantity = 4;
constexpr std::size_t kOffStart = 8;
constexpr std::size_t kOffDuration = 12;
constexpr std::size_t kOffPrice = 14;
constexpr std::size_t kOffCarbon = 18;
constexpr std::size_t kOffGreen = 20;
constexpr std::size_t kOffGrade = 22;
constexpr std::size_t kOffMassFlow = 24;
constexpr std::size_t kOffSender = 28;
constexpr std::size_t kOffReceiver = 34;
constexpr std::size_t kOffChecksum = 46;

void put_u16(BeeBytes& out, std::size_t off, std::uint16_t v) {
    out[off] = static_cast<std::uint8_t>(v >> 8);
    out[off + 1] = static_cast<std::uint8_t>(v);
}

void put_u32(BeeBytes& out, std::size_t off, std::uint32_t v) {
    out[off] = static_cast<std::uint8_t>(v >> 24);
    out[off + 1] = static_cast<std::uint8_t>(v >> 16);
    out[off + 2] = static_cast<std::uint8_t>(v >> 8);
    out[off + 3] = static_cast<std::uint8_t>(v);
}

std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t off) {
    return static_cast<std::uint16_t>((in[off] << 8) | in[off + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t off) {
    return (std::uint32_t{in[off]} << 24) | (std::uint32_t{in[off + 1]} << 16) |
           (std::uint32_t{in[off + 2]} << 8) | std::uint32_t{in[off + 3]};
}

bool is_zero_range(std::span<const std::uint8_t> in, std::size_t off, std::size_t len) {
    for (std::size_t i = off; i < off + len; ++i) {
        if (in[i] != 0) return false;
    }
    return true;
}

} // namespace

std::string_view to_string(BeeKind kind) noexcept {
    switch (kind) {
        case BeeKind::Offer:   return "Offer";
        case BeeKind::Request: return "Request";
        case BeeKind::Confirm: return "Confirm";
        case BeeKind::Settle:  return "Settle";
    }
    return "?";
}

std::string_view to_string(Carrier carrier) noexcept {
    switch (carrier) {
        case Carrier::Electricity: return "Electricity";
        case Carrier::Heat:        return "Heat";
        case Carrier::Gas:         return "Gas";
        case Carrier::Hydrogen:    return "Hydrogen";
    }
    return "?";
}

void validate(const Bee& bee) {
    if (static_cast<std::uint8_t>(bee.kind) > static_cast<std::uint8_t>(BeeKind::Settle)) {
        throw Error(Errc::InvariantViolation, "unknown BEE kind");
    }
    if (static_cast<std::uint8_t>(bee.carrier) > static_cast<std::uint8_t>(Carrier::Hydrogen)) {
        throw Error(Errc::InvariantViolation, "unknown carrier");
    }
    if (bee.green_fraction_bp > kMaxGreenFractionBp) {
        throw Error(Errc::InvariantViolation, "green_fraction_bp exceeds 10000");
    }
    if (bee.kind != BeeKind::Confirm && bee.quantity_wh == 0) {
        throw Error(Errc::InvariantViolation, "quantity_wh must be positive");
    }
    if (bee.carrier == Carrier::Electricity && bee.mass_flow_rate != 0) {
        throw Error(Errc::InvariantViolation, "electricity carries no mass flow rate");
    }
    if (bee.delivery_duration_min == 0) {
        throw Error(Errc::InvariantViolation, "delivery_duration_min must be positive");
    }
}

std::uint16_t internet_checksum(std::span<const std::uint8_t> bytes) noexcept {
    std::uint32_t sum = 0;
    std::size_t i = 0;
    for (; i + 1 < bytes.size(); i += 2) {
        sum += static_cast<std::uint32_t>((bytes[i] << 8) | bytes[i + 1]);
    }
    if (i < bytes.size()) sum += static_cast<std::uint32_t>(bytes[i] << 8);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum & 0xFFFF);
}

BeeBytes encode_bee(const Bee& bee) {
    validate(bee);
    BeeBytes out{};
    out[kOffVersion] = bee.version;
    out[kOffKind] = static_cast<std::uint8_t>(bee.kind);
    out[kOffCarrier] = static_cast<std::uint8_t>(bee.carrier);
    put_u32(out, kOffQuantity, bee.quantity_wh);
    put_u32(out, kOffStart, bee.delivery_start);
    put_u16(out, kOffDuration, bee.delivery_duration_min);
    put_u32(out, kOffPrice, bee.price_mcny_per_kwh);
    put_u16(out, kOffCarbon, bee.carbon_intensity_g_per_kwh);
    put_u16(out, kOffGreen, bee.green_fraction_bp);
    put_u16(out, kOffGrade, bee.grade);
    put_u16(out, kOffMassFlow, bee.mass_flow_rate);
    std::copy(bee.sender.octets.begin(), bee.sender.octets.end(), out.begin() + kOffSender);
    std::copy(bee.receiver.octets.begin(), bee.receiver.octets.end(), out.begin() + kOffReceiver);
    put_u16(out, kOffChecksum, internet_checksum(std::span(out).first(kOffChecksum)));
    return out;
}

Bee decode_bee(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kBeeSize) {
        throw Error(Errc::BadLength, "BEE record must be 48 bytes, got " + std::to_string(bytes.size()));
    }
    if (internet_checksum(bytes.first(kOffChecksum)) != get_u16(bytes, kOffChecksum)) {
        throw Error(Errc::BadChecksum, "BEE checksum mismatch");
    }
    if (!is_zero_range(bytes, 3, 1) || !is_zero_range(bytes, 26, 2) || !is_zero_range(bytes, 40, 6)) {
        throw Error(Errc::InvariantViolation, "non-zero padding");
    }
    Bee bee;
    bee.version = bytes[kOffVersion];
    bee.kind = static_cast<BeeKind>(bytes[kOffKind]);
    bee.carrier = static_cast<Carrier>(bytes[kOffCarrier]);
    bee.quantity_wh = get_u32(bytes, kOffQuantity);
    bee.delivery_start = get_u32(bytes, kOffStart);
    bee.delivery_duration_min = get_u16(bytes, kOffDuration);
    bee.price_mcny_per_kwh = get_u32(bytes, kOffPrice);
    bee.carbon_intensity_g_per_kwh = get_u16(bytes, kOffCarbon);
    bee.green_fraction_bp = get_u16(bytes, kOffGreen);
    bee.grade = get_u16(bytes, kOffGrade);
    bee.mass_flow_rate = get_u16(bytes, kOffMassFlow);
    std::copy_n(bytes.begin() + kOffSender, 6, bee.sender.octets.begin());
    std::copy_n(bytes.begin() + kOffReceiver, 6, bee.receiver.octets.begin());
    validate(bee);
    return bee;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw Error(Errc::BadLength, "odd-length hex string");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw Error(Errc::InvariantViolation, std::string("invalid hex digit '") + c + "'");
    };
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) * 16 + nibble(hex[2 * i + 1]));
    }
    return out;
}

std::string describe(const Bee& bee) {
    std::ostringstream os;
    os << "version: " << int(bee.version) << '\n'
       << "kind: " << to_string(bee.kind) << '\n'
       << "carrier: " << to_string(bee.carrier) << '\n'
       << "quantity_wh: " << bee.quantity_wh << '\n'
       << "delivery_start: " << bee.delivery_start << '\n'
       << "delivery_duration_min: " << bee.delivery_duration_min << '\n'
       << "price_mcny_per_kwh: " << bee.price_mcny_per_kwh << '\n'
       << "carbon_intensity_g_per_kwh: " << bee.carbon_intensity_g_per_kwh << '\n'
       << "green_fraction_bp: " << bee.green_fraction_bp << '\n'
       << "grade: " << bee.grade << '\n'
       << "mass_flow_rate: " << bee.mass_flow_rate << '\n'
       << "sender: " << bee.sender.to_string() << '\n'
       << "receiver: " << bee.receiver.to_string() << '\n';
    return os.str();
}

} // namespace ei
