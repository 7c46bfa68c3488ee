#include "ei/headers.hpp"

#include "ei/bee.hpp"
#include "ei/error.hpp"

#include <boost/crc.hpp>

namespace ei {

namespace {

template <std::size_t N>
void put16(std::array<std::uint8_t, N>& out, std::size_t off, std::uint16_t v) {
    out[off] = static_cast<std::uint8_t>(v >> 8);
    out[off + 1] = static_cast<std::uint8_t>(v);
}

template <std::size_t N>
void put32(std::array<std::uint8_t, N>& out, std::size_t off, std::uint32_t v) {
    out[off] = static_cast<std::uint8_t>(v >> 24);
    out[off + 1] = static_cast<std::uint8_t>(v >> 16);
    out[off + 2] = static_cast<std::uint8_t>(v >> 8);
    out[off + 3] = static_cast<std::uint8_t>(v);
}

std::uint16_t get16(std::span<const std::uint8_t> in, std::size_t off) {
    return static_cast<std::uint16_t>((in[off] << 8) | in[off + 1]);
}

std::uint32_t get32(std::span<const std::uint8_t> in, std::size_t off) {
    return (std::uint32_t{in[off]} << 24) | (std::uint32_t{in[off + 1]} << 16) |
           (std::uint32_t{in[off + 2]} << 8) | std::uint32_t{in[off + 3]};
}

} // namespace

std::array<std::uint8_t, kIpHeaderSize> EnergyIpHeader::encode() const {
    std::array<std::uint8_t, kIpHeaderSize> out{};
    out[0] = static_cast<std::uint8_t>((version << 4) | (header_length & 0x0F));
    put16(out, 2, total_length);
    put16(out, 4, identification);
    put16(out, 6, static_limit_kwh);
    out[8] = ttl;
    out[9] = protocol;
    put32(out, 12, source.raw());
    put32(out, 16, dest.raw());
    put16(out, 10, internet_checksum(out));
    return out;
}

EnergyIpHeader EnergyIpHeader::decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kIpHeaderSize) throw Error(Errc::BadLength, "short Energy IP header");
    const auto hdr = bytes.first(kIpHeaderSize);
    // Summing a header that includes its own checksum yields 0 after complement.
    if (internet_checksum(hdr) != 0) throw Error(Errc::ChecksumFailure, "Energy IP header checksum");
    EnergyIpHeader h;
    h.version = hdr[0] >> 4;
    h.header_length = hdr[0] & 0x0F;
    h.total_length = get16(hdr, 2);
    h.identification = get16(hdr, 4);
    h.static_limit_kwh = get16(hdr, 6);
    h.ttl = hdr[8];
    h.protocol = hdr[9];
    h.header_checksum = get16(hdr, 10);
    h.source = EnergyIpAddress(get32(hdr, 12));
    h.dest = EnergyIpAddress(get32(hdr, 16));
    return h;
}

std::array<std::uint8_t, kTcpHeaderSize> EnergyTcpHeader::encode(std::span<const std::uint8_t> payload) const {
    std::array<std::uint8_t, kTcpHeaderSize> out{};
    put16(out, 0, source_port);
    put16(out, 2, dest_port);
    put32(out, 4, sequence);
    put32(out, 8, ack_number);
    out[12] = static_cast<std::uint8_t>(5u << 4);
    out[13] = flags;
    put16(out, 14, window);
    std::vector<std::uint8_t> seg(out.begin(), out.end());
    seg.insert(seg.end(), payload.begin(), payload.end());
    put16(out, 16, internet_checksum(seg));
    return out;
}

EnergyTcpHeader EnergyTcpHeader::decode(std::span<const std::uint8_t> segment) {
    if (segment.size() < kTcpHeaderSize) throw Error(Errc::BadLength, "short Energy TCP header");
    if (internet_checksum(segment) != 0) throw Error(Errc::ChecksumFailure, "Energy TCP checksum");
    EnergyTcpHeader h;
    h.source_port = get16(segment, 0);
    h.dest_port = get16(segment, 2);
    h.sequence = get32(segment, 4);
    h.ack_number = get32(segment, 8);
    h.flags = segment[13];
    h.window = get16(segment, 14);
    h.checksum = get16(segment, 16);
    return h;
}

std::uint32_t frame_check(std::span<const std::uint8_t> bytes) noexcept {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

std::vector<std::uint8_t> EnergyFrame::encode() const {
    std::vector<std::uint8_t> out;
    out.reserve(kFrameHeaderSize + payload.size() + kFrameCheckSize);
    out.insert(out.end(), dest_mac.octets.begin(), dest_mac.octets.end());
    out.insert(out.end(), src_mac.octets.begin(), src_mac.octets.end());
    out.push_back(static_cast<std::uint8_t>(ethertype >> 8));
    out.push_back(static_cast<std::uint8_t>(ethertype));
    out.insert(out.end(), payload.begin(), payload.end());
    const std::uint32_t fcs = frame_check(out);
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(fcs >> shift));
    return out;
}

EnergyFrame EnergyFrame::decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFrameHeaderSize + kFrameCheckSize) throw Error(Errc::BadLength, "runt frame");
    const auto body = bytes.first(bytes.size() - kFrameCheckSize);
    if (frame_check(body) != get32(bytes, bytes.size() - kFrameCheckSize)) {
        throw Error(Errc::ChecksumFailure, "frame check sequence mismatch");
    }
    EnergyFrame f;
    std::copy_n(bytes.begin(), 6, f.dest_mac.octets.begin());
    std::copy_n(bytes.begin() + 6, 6, f.src_mac.octets.begin());
    f.ethertype = get16(bytes, 12);
    f.payload.assign(body.begin() + kFrameHeaderSize, body.end());
    return f;
}

} // namespace ei
