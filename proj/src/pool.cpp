#include "ei/pool.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace ei {

namespace {

bool offer_before(const PoolEntry& a, const PoolEntry& b) {
    if (a.bee.price_mcny_per_kwh != b.bee.price_mcny_per_kwh) {
        return a.bee.price_mcny_per_kwh < b.bee.price_mcny_per_kwh;
    }
    return a.arrival_seq < b.arrival_seq;
}

bool request_before(const PoolEntry& a, const PoolEntry& b) {
    if (a.bee.price_mcny_per_kwh != b.bee.price_mcny_per_kwh) {
        return a.bee.price_mcny_per_kwh > b.bee.price_mcny_per_kwh;
    }
    return a.arrival_seq < b.arrival_seq;
}

bool in_filter(const PoolEntry& e, const PoolFilter& f) {
    return e.bee.carrier == f.carrier && e.bee.delivery_start < f.window_end &&
           f.window_start < e.bee.delivery_end();
}

} // namespace

std::optional<DeliveryWindow> intersect_windows(const Bee& a, const Bee& b) {
    const std::uint32_t start = std::max(a.delivery_start, b.delivery_start);
    const std::uint32_t end = std::min(a.delivery_end(), b.delivery_end());
    if (end <= start || end - start < 60) return std::nullopt;
    const auto minutes = std::min<std::uint32_t>((end - start) / 60, 0xFFFF);
    return DeliveryWindow{start, static_cast<std::uint16_t>(minutes)};
}

std::uint64_t MatchResult::matched_wh() const {
    std::uint64_t total = 0;
    for (const auto& f : fills) total += f.matched_wh;
    return total;
}

Bee settle_bee_for(const Fill& fill) {
    const Bee& offer = fill.offer.bee;
    Bee bee = offer;
    bee.kind = BeeKind::Settle;
    bee.quantity_wh = fill.matched_wh;
    bee.delivery_start = fill.window.start;
    bee.delivery_duration_min = fill.window.duration_min;
    bee.price_mcny_per_kwh = fill.clearing_price_mcny_per_kwh;
    bee.sender = offer.sender;
    bee.receiver = fill.request.bee.sender;
    return bee;
}

bool BeePool::compatible(const Bee& offer, const Bee& request) const {
    if (offer.carrier != request.carrier) return false;
    if (request.price_mcny_per_kwh < offer.price_mcny_per_kwh) return false;
    if (!intersect_windows(offer, request)) return false;
    return !hook_ || hook_(offer, request);
}

std::vector<PoolEntry> BeePool::browse_offers(const PoolFilter& filter) const {
    std::vector<PoolEntry> out;
    std::copy_if(offers_.begin(), offers_.end(), std::back_inserter(out),
                 [&](const PoolEntry& e) { return in_filter(e, filter); });
    return out;
}

std::vector<PoolEntry> BeePool::browse_requests(const PoolFilter& filter) const {
    std::vector<PoolEntry> out;
    std::copy_if(requests_.begin(), requests_.end(), std::back_inserter(out),
                 [&](const PoolEntry& e) { return in_filter(e, filter); });
    return out;
}

std::vector<PoolEntry> BeePool::browse(const PoolFilter& filter) const {
    auto out = browse_offers(filter);
    auto req = browse_requests(filter);
    out.insert(out.end(), req.begin(), req.end());
    return out;
}

void BeePool::insert(std::vector<PoolEntry>& side, PoolEntry entry) {
    const bool is_offer = &side == &offers_;
    auto pos = std::upper_bound(side.begin(), side.end(), entry, is_offer ? offer_before : request_before);
    side.insert(pos, std::move(entry));
}

void BeePool::purge(std::uint32_t now) {
    auto expired = [now](const PoolEntry& e) { return e.bee.delivery_end() <= now; };
    std::erase_if(offers_, expired);
    std::erase_if(requests_, expired);
}

MatchResult BeePool::submit(const Bee& bee, std::uint32_t now) {
    if (bee.kind != BeeKind::Offer && bee.kind != BeeKind::Request) {
        throw Error(Errc::IncompatibleKind,
                    "only Offer and Request may enter the pool, got " + std::string(to_string(bee.kind)));
    }
    validate(bee);
    if (now > 0) purge(now);

    const bool incoming_offer = bee.kind == BeeKind::Offer;
    PoolEntry incoming{bee, bee.quantity_wh, next_seq_++};
    auto& book = incoming_offer ? requests_ : offers_;

    MatchResult result;
    for (auto it = book.begin(); it != book.end() && incoming.remaining_wh > 0;) {
        const Bee& offer = incoming_offer ? incoming.bee : it->bee;
        const Bee& request = incoming_offer ? it->bee : incoming.bee;
        if (!compatible(offer, request)) {
            ++it;
            continue;
        }
        Fill fill;
        fill.offer = incoming_offer ? incoming : *it;
        fill.request = incoming_offer ? *it : incoming;
        fill.matched_wh = std::min(incoming.remaining_wh, it->remaining_wh);
        fill.clearing_price_mcny_per_kwh = offer.price_mcny_per_kwh;
        fill.window = *intersect_windows(offer, request);
        result.fills.push_back(fill);

        incoming.remaining_wh -= fill.matched_wh;
        it->remaining_wh -= fill.matched_wh;
        it = it->remaining_wh == 0 ? book.erase(it) : std::next(it);
    }

    if (incoming.remaining_wh > 0) {
        result.residual = incoming;
        insert(incoming_offer ? offers_ : requests_, incoming);
    }
    return result;
}

void BeePool::rollback(const Fill& fill) {
    auto restore = [&](std::vector<PoolEntry>& side, const PoolEntry& entry) {
        auto it = std::find_if(side.begin(), side.end(),
                               [&](const PoolEntry& e) { return e.arrival_seq == entry.arrival_seq; });
        if (it != side.end()) {
            it->remaining_wh += fill.matched_wh;
        } else {
            PoolEntry back = entry;
            back.remaining_wh = fill.matched_wh;
            insert(side, back);
        }
    };
    restore(offers_, fill.offer);
    restore(requests_, fill.request);
}

SettlementOutcome BeePool::settle_fills(const MatchResult& result, Ledger& ledger, Network& net) {
    SettlementOutcome out;
    for (const auto& fill : result.fills) {
        const Bee bee = settle_bee_for(fill);
        try {
            if (!ledger.contains(bee.sender) || !ledger.contains(bee.receiver)) {
                throw Error(Errc::UnknownMac, "fill between unregistered cards");
            }
            const auto src = net.eip_of(bee.sender);
            const auto dst = net.eip_of(bee.receiver);
            if (!src || !dst) throw Error(Errc::Unroutable, "party not attached to any LAN");
            const ConnectionId conn = net.connection_between(*src, *dst);
            (void)net.send_bee(conn, bee);
            ledger.apply_settlement(bee);
            out.settled.push_back(bee);
        } catch (const Error& e) {
            rollback(fill);
            out.failed.push_back({fill, e.code(), e.what()});
        }
    }
    return out;
}

std::uint64_t BeePool::resting_wh() const {
    std::uint64_t total = 0;
    for (const auto& e : offers_) total += e.remaining_wh;
    for (const auto& e : requests_) total += e.remaining_wh;
    return total;
}

void BeePool::clear() {
    offers_.clear();
    requests_.clear();
}

void BeePool::write_csv(std::ostream& out) const {
    out << "side,arrival_seq,remaining_wh,bee_hex\n";
    auto rows = [&](const std::vector<PoolEntry>& side, const char* name) {
        for (const auto& e : side) {
            const auto bytes = encode_bee(e.bee);
            out << name << ',' << e.arrival_seq << ',' << e.remaining_wh << ',' << to_hex(bytes) << '\n';
        }
    };
    rows(offers_, "offer");
    rows(requests_, "request");
}

BeePool BeePool::read_csv(std::istream& in) {
    BeePool pool;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.rfind("side,", 0) == 0) continue;
        std::istringstream row(line);
        std::string side, seq, remaining, hex;
        if (!std::getline(row, side, ',') || !std::getline(row, seq, ',') || !std::getline(row, remaining, ',') ||
            !std::getline(row, hex)) {
            throw Error(Errc::ConfigError, "pool state line " + std::to_string(line_no) + " is malformed");
        }
        PoolEntry e;
        try {
            e.arrival_seq = std::stoull(seq);
            e.remaining_wh = static_cast<std::uint32_t>(std::stoul(remaining));
        } catch (const std::exception&) {
            throw Error(Errc::ConfigError, "pool state line " + std::to_string(line_no) + " has a bad number");
        }
        e.bee = decode_bee(from_hex(hex));
        if (e.remaining_wh == 0 || e.remaining_wh > e.bee.quantity_wh) {
            throw Error(Errc::ConfigError, "pool state line " + std::to_string(line_no) + " remaining out of range");
        }
        if (side == "offer" && e.bee.kind == BeeKind::Offer) {
            pool.insert(pool.offers_, e);
        } else if (side == "request" && e.bee.kind == BeeKind::Request) {
            pool.insert(pool.requests_, e);
        } else {
            throw Error(Errc::ConfigError, "pool state line " + std::to_string(line_no) + " side/kind mismatch");
        }
        pool.next_seq_ = std::max(pool.next_seq_, e.arrival_seq + 1);
    }
    return pool;
}

} // namespace ei
