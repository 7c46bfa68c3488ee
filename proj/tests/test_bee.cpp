#include "support.hpp"

#include "ei/error.hpp"
#include "ei/headers.hpp"

#include <doctest.h>

using namespace ei;
using namespace ei::testing;

namespace {

/// Reference ones'-complement sum written out independently of the codec.
std::uint16_t reference_checksum(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < bytes.size(); i += 2) {
        const std::uint64_t hi = bytes[i];
        const std::uint64_t lo = i + 1 < bytes.size() ? bytes[i + 1] : 0;
        sum += hi * 256 + lo;
    }
    while (sum > 0xFFFF) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum & 0xFFFF);
}

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::IoError;
}

} // namespace

TEST_CASE("checksum of fixed byte strings matches hand computation") {
    const std::vector<std::uint8_t> even{0x01, 0x02, 0x03, 0x04, 0x05, 0x06};
    // 0x0102 + 0x0304 + 0x0506 = 0x090C, complement 0xF6F3
    CHECK(internet_checksum(even) == 0xF6F3);
    const std::vector<std::uint8_t> odd{0x01, 0x02, 0x03};
    // 0x0102 + 0x0300 = 0x0402, complement 0xFBFD
    CHECK(internet_checksum(odd) == 0xFBFD);
    const std::vector<std::uint8_t> carry{0xFF, 0xFF, 0x00, 0x02};
    // 0xFFFF + 0x0002 = 0x10001, folded 0x0002, complement 0xFFFD
    CHECK(internet_checksum(carry) == 0xFFFD);
    CHECK(internet_checksum(std::vector<std::uint8_t>{}) == 0xFFFF);
}

TEST_CASE("zero confirm record carries the complement of its header sum") {
    Bee b;
    b.kind = BeeKind::Confirm;
    b.delivery_duration_min = 1;
    b.sender = mac(1);
    b.receiver = mac(2);
    const BeeBytes bytes = encode_bee(b);
    REQUIRE(bytes.size() == 48);
    const std::vector<std::uint8_t> header(bytes.begin(), bytes.begin() + 46);
    const std::uint16_t stored = static_cast<std::uint16_t>(bytes[46] << 8 | bytes[47]);
    CHECK(stored == reference_checksum(header));
    CHECK(decode_bee(bytes) == b);
}

TEST_CASE("randomized round trip and reference checksum agree") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const Bee b = random_bee(rng);
        const BeeBytes bytes = encode_bee(b);
        CHECK(decode_bee(bytes) == b);
        CHECK(encode_bee(b) == bytes);
        const std::vector<std::uint8_t> all(bytes.begin(), bytes.end());
        CHECK(reference_checksum(all) == 0);
    }
}

TEST_CASE("decode error ordering") {
    Bee b = make_bee(BeeKind::Offer, 1000, 500, mac(1));
    BeeBytes bytes = encode_bee(b);

    SUBCASE("flipped bit") {
        bytes[10] ^= 0x04;
        CHECK(code_of([&] { decode_bee(bytes); }) == Errc::BadChecksum);
    }
    SUBCASE("short input") {
        CHECK(code_of([&] { decode_bee(std::span<const std::uint8_t>(bytes.data(), 47)); }) == Errc::BadLength);
    }
    SUBCASE("short and corrupt reports length first") {
        bytes[0] ^= 0xFF;
        CHECK(code_of([&] { decode_bee(std::span<const std::uint8_t>(bytes.data(), 47)); }) == Errc::BadLength);
    }
    SUBCASE("valid checksum over an invalid green fraction") {
        b.green_fraction_bp = 10001;
        CHECK(code_of([&] { encode_bee(b); }) == Errc::InvariantViolation);
        // Green fraction lives at offset 20 (see WIRE.md). Patch it and
        // recompute the checksum so only the invariant is wrong.
        std::vector<std::uint8_t> raw(bytes.begin(), bytes.end());
        raw[20] = 0x27;
        raw[21] = 0x11;  // 10001
        const auto sum = reference_checksum(std::vector<std::uint8_t>(raw.begin(), raw.begin() + 46));
        raw[46] = static_cast<std::uint8_t>(sum >> 8);
        raw[47] = static_cast<std::uint8_t>(sum & 0xFF);
        CHECK(code_of([&] { decode_bee(raw); }) == Errc::InvariantViolation);
    }
}

TEST_CASE("invariants") {
    Bee b = make_bee(BeeKind::Offer, 0, 500, mac(1));
    CHECK(code_of([&] { validate(b); }) == Errc::InvariantViolation);
    b.kind = BeeKind::Confirm;
    CHECK_NOTHROW(validate(b));
    b.delivery_duration_min = 0;
    CHECK(code_of([&] { validate(b); }) == Errc::InvariantViolation);
    b = make_bee(BeeKind::Offer, 1, 1, mac(1));
    b.mass_flow_rate = 3;
    CHECK(code_of([&] { validate(b); }) == Errc::InvariantViolation);
    b.carrier = Carrier::Gas;
    CHECK_NOTHROW(validate(b));
}

TEST_CASE("hex form") {
    const Bee b = make_bee(BeeKind::Request, 6000, 600, mac(3));
    const std::string hex = to_hex(encode_bee(b));
    CHECK(hex.size() == 96);
    CHECK(decode_bee(from_hex(hex)) == b);
    CHECK(code_of([] { from_hex("abc"); }) == Errc::BadLength);
    CHECK(code_of([] { from_hex("zz"); }) == Errc::InvariantViolation);
    CHECK(describe(b).find("quantity_wh: 6000") != std::string::npos);
}

TEST_CASE("protocol headers round trip and detect corruption") {
    EnergyIpHeader ip;
    ip.total_length = 88;
    ip.identification = 7;
    ip.static_limit_kwh = 10;
    ip.source = EnergyIpAddress::make(1, 2, 3);
    ip.dest = EnergyIpAddress::make(1, 4, 5);
    auto ip_bytes = ip.encode();
    const auto ip_back = EnergyIpHeader::decode(ip_bytes);
    CHECK(ip_back.source == ip.source);
    CHECK(ip_back.dest == ip.dest);
    CHECK(ip_back.static_limit_kwh == 10);
    ip_bytes[8] ^= 0x01;
    CHECK(code_of([&] { EnergyIpHeader::decode(ip_bytes); }) == Errc::ChecksumFailure);

    EnergyTcpHeader tcp;
    tcp.source_port = 5000;
    tcp.dest_port = 5000;
    tcp.sequence = 0xFFFFFFF0u;
    tcp.flags = tcp_flags::Ack | tcp_flags::Psh;
    tcp.window = 3;
    const BeeBytes payload = encode_bee(make_bee(BeeKind::Settle, 5000, 500, mac(1), mac(2)));
    const auto head = tcp.encode(payload);
    std::vector<std::uint8_t> segment(head.begin(), head.end());
    segment.insert(segment.end(), payload.begin(), payload.end());
    const auto tcp_back = EnergyTcpHeader::decode(segment);
    CHECK(tcp_back.window == 3);
    CHECK(tcp_back.has(tcp_flags::Psh));
    CHECK_FALSE(tcp_back.has(tcp_flags::Syn));
    segment.back() ^= 0x80;
    CHECK(code_of([&] { EnergyTcpHeader::decode(segment); }) == Errc::ChecksumFailure);

    EnergyFrame frame{mac(9), mac(8), kEnergyEthertype, segment};
    auto wire = frame.encode();
    CHECK(wire.size() == kFrameHeaderSize + segment.size() + kFrameCheckSize);
    CHECK(EnergyFrame::decode(wire).payload == segment);
    wire[20] ^= 0x10;
    CHECK(code_of([&] { EnergyFrame::decode(wire); }) == Errc::ChecksumFailure);

    CHECK(seq_before(0xFFFFFFF0u, 5u));
    CHECK_FALSE(seq_before(5u, 0xFFFFFFF0u));
}

TEST_CASE("addresses") {
    const auto eip = EnergyIpAddress::make(1, 4095, 4095);
    CHECK(eip.wan() == 1);
    CHECK(eip.subnet() == 4095);
    CHECK(eip.host() == 4095);
    CHECK(EnergyIpAddress::parse(eip.to_string()) == eip);
    CHECK(eip.network().is_router());
    CHECK(MacAddress::parse("02-00-00-00-0a-0b") == mac(10, 11));
    CHECK(MacAddress::broadcast().is_broadcast());
}
