#include "ei/stack.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <ostream>

namespace ei {

namespace {

constexpr std::uint16_t kServicePort = 5000;
constexpr std::uint16_t kSaturated16 = 0xFFFF;

std::uint16_t to_kwh_field(std::uint64_t wh) {
    return static_cast<std::uint16_t>(std::min<std::uint64_t>(wh / 1000, kSaturated16));
}

MacAddress router_mac(std::uint32_t wan, std::uint32_t subnet) {
    MacAddress mac;
    mac.octets = {0x02, 0x00, 0x00, static_cast<std::uint8_t>(wan), static_cast<std::uint8_t>(subnet >> 8),
                  static_cast<std::uint8_t>(subnet)};
    return mac;
}

bool prefix_matches(EnergyIpAddress prefix, unsigned len, EnergyIpAddress addr) {
    if (len == 0) return true;
    const unsigned shift = 32 - len;
    return (prefix.raw() >> shift) == (addr.raw() >> shift);
}

} // namespace

std::string_view to_string(Layer layer) noexcept {
    switch (layer) {
        case Layer::Application: return "application";
        case Layer::Transport:   return "transport";
        case Layer::Network:     return "network";
        case Layer::Link:        return "link";
        case Layer::Control:     return "control";
    }
    return "?";
}

Network::Network(Ledger& ledger, std::uint64_t seed) : ledger_(ledger), rng_(seed) {}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

RouterId Network::add_router(std::string name, std::uint32_t wan, std::uint32_t subnet) {
    const auto eip = EnergyIpAddress::make(wan, subnet, 0);
    for (const auto& r : routers_) {
        if (r.eip == eip) throw Error(Errc::ConfigError, "subnet " + eip.to_string() + " already routed");
        if (r.name == name) throw Error(Errc::ConfigError, "duplicate router name '" + name + "'");
    }
    Router r;
    r.name = std::move(name);
    r.eip = eip;
    r.mac = router_mac(wan, subnet);
    routers_.push_back(std::move(r));
    return routers_.size() - 1;
}

void Network::add_route(RouterId from, EnergyIpAddress prefix, unsigned prefix_len, RouterId next_hop) {
    if (from >= routers_.size() || next_hop >= routers_.size() || prefix_len > 32) {
        throw Error(Errc::ConfigError, "invalid route");
    }
    routers_[from].routes.push_back({prefix, prefix_len, next_hop});
}

void Network::connect_routers(RouterId a, RouterId b) {
    constexpr unsigned kSubnetPrefix = EnergyIpAddress::kWanBits + EnergyIpAddress::kSubnetBits;
    add_route(a, routers_.at(b).eip, kSubnetPrefix, b);
    add_route(b, routers_.at(a).eip, kSubnetPrefix, a);
}

void Network::install_shortest_routes() {
    constexpr unsigned kSubnetPrefix = EnergyIpAddress::kWanBits + EnergyIpAddress::kSubnetBits;
    std::vector<std::vector<RouterId>> adjacent(routers_.size());
    for (RouterId a = 0; a < routers_.size(); ++a) {
        for (const auto& route : routers_[a].routes) {
            if (route.prefix_len == kSubnetPrefix && routers_[route.next_hop].eip == route.prefix) {
                adjacent[a].push_back(route.next_hop);
            }
        }
    }
    for (RouterId src = 0; src < routers_.size(); ++src) {
        std::vector<std::optional<RouterId>> first(routers_.size());
        std::deque<RouterId> queue;
        for (RouterId n : adjacent[src]) {
            if (!first[n]) {
                first[n] = n;
                queue.push_back(n);
            }
        }
        while (!queue.empty()) {
            const RouterId at = queue.front();
            queue.pop_front();
            for (RouterId n : adjacent[at]) {
                if (n == src || first[n]) continue;
                first[n] = first[at];
                queue.push_back(n);
            }
        }
        for (RouterId dst = 0; dst < routers_.size(); ++dst) {
            if (dst == src || !first[dst]) continue;
            const auto& routes = routers_[src].routes;
            const bool present = std::any_of(routes.begin(), routes.end(), [&](const Route& r) {
                return r.prefix_len == kSubnetPrefix && r.prefix == routers_[dst].eip;
            });
            if (!present) add_route(src, routers_[dst].eip, kSubnetPrefix, *first[dst]);
        }
    }
}

std::optional<RouterId> Network::find_router(std::string_view name) const {
    for (RouterId i = 0; i < routers_.size(); ++i) {
        if (routers_[i].name == name) return i;
    }
    return std::nullopt;
}

std::optional<RouterId> Network::router_for(EnergyIpAddress eip) const {
    for (RouterId i = 0; i < routers_.size(); ++i) {
        if (routers_[i].eip == eip.network()) return i;
    }
    return std::nullopt;
}

EnergyIpAddress Network::assign_eip(RouterId router_id, const MacAddress& mac) {
    if (!ledger_.contains(mac)) {
        throw Error(Errc::UnknownMac, mac.to_string() + " has no registered Energy Internet Card");
    }
    Router& router = routers_.at(router_id);
    if (auto it = bindings_.find(mac); it != bindings_.end() && it->second.network() == router.eip) {
        return it->second;
    }

    std::uint32_t host = 1;
    const auto net = router.eip;
    while (host <= EnergyIpAddress::kMaxHost &&
           hosts_.contains(EnergyIpAddress(net.raw() | host))) {
        ++host;
    }
    if (host > EnergyIpAddress::kMaxHost) {
        throw Error(Errc::SubnetFull, "no free host address in " + router.name);
    }

    if (auto it = bindings_.find(mac); it != bindings_.end()) {
        const auto old = it->second;
        const RouterId old_router = hosts_.at(old).router;
        routers_[old_router].members.erase(mac);
        hosts_.erase(old);
        for (auto& [_, c] : connections_) {
            if (c.initiator == old || c.responder == old) {
                c.stale = true;
                c.client.state = ConnectionState::Closed;
                c.server.state = ConnectionState::Closed;
            }
        }
        log(Layer::Control, old, old, "release", 0, mac.to_string());
    }

    const EnergyIpAddress eip(net.raw() | host);
    hosts_[eip] = Host{mac, eip, router_id, false, false};
    bindings_[mac] = eip;
    router.members[mac] = eip;
    ledger_.set_current_eip(mac, eip);
    log(Layer::Control, router.eip, eip, "assign", 0, mac.to_string());
    return eip;
}

std::optional<EnergyIpAddress> Network::eip_of(const MacAddress& mac) const {
    if (auto it = bindings_.find(mac); it != bindings_.end()) return it->second;
    return std::nullopt;
}

std::optional<MacAddress> Network::mac_at(EnergyIpAddress eip) const {
    if (const Host* h = find_host(eip)) return h->mac;
    return std::nullopt;
}

Network::Host& Network::host_at(EnergyIpAddress eip) {
    auto it = hosts_.find(eip);
    if (it == hosts_.end()) throw Error(Errc::Unroutable, "no host at " + eip.to_string());
    return it->second;
}

const Network::Host* Network::find_host(EnergyIpAddress eip) const {
    auto it = hosts_.find(eip);
    return it == hosts_.end() ? nullptr : &it->second;
}

std::optional<RouterId> Network::next_hop(RouterId at, EnergyIpAddress dest) const {
    const Router& r = routers_[at];
    if (dest.network() == r.eip) return at;
    const Route* best = nullptr;
    for (const auto& route : r.routes) {
        if (prefix_matches(route.prefix, route.prefix_len, dest) &&
            (best == nullptr || route.prefix_len > best->prefix_len)) {
            best = &route;
        }
    }
    if (best == nullptr) return std::nullopt;
    return best->next_hop;
}

bool Network::routable(EnergyIpAddress src, EnergyIpAddress dst) const {
    const Host* s = find_host(src);
    if (s == nullptr || find_host(dst) == nullptr) return false;
    RouterId at = s->router;
    for (std::size_t steps = 0; steps <= routers_.size(); ++steps) {
        if (routers_[at].eip == dst.network()) return true;
        auto next = next_hop(at, dst);
        if (!next || *next == at) return false;
        at = *next;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

ConnectionId Network::open_connection(EnergyIpAddress src, EnergyIpAddress dst) {
    ++tick_;
    if (!routable(src, dst)) {
        log(Layer::Network, src, dst, "SYN", 0, "rejected:Unroutable");
        throw Error(Errc::Unroutable, "no route from " + src.to_string() + " to " + dst.to_string());
    }
    const ConnectionId cid = next_connection_++;
    Connection c;
    c.initiator = src;
    c.responder = dst;
    c.client.port = next_port_++;
    if (next_port_ == 0) next_port_ = 49152;
    c.server.port = kServicePort;
    c.client.snd_nxt = static_cast<std::uint32_t>(rng_());
    c.client.state = ConnectionState::SynSent;
    connections_.emplace(cid, c);

    Op op;
    op.id = next_op_++;
    op.kind = OpKind::Handshake;
    op.conn = cid;
    auto& stored = ops_.emplace(op.id, std::move(op)).first->second;
    start_attempt(stored);
    run_until_done(stored.id);

    const Op& done = ops_.at(stored.id);
    if (done.error) {
        auto& conn = connections_.at(cid);
        conn.client.state = ConnectionState::Closed;
        conn.server.state = ConnectionState::Closed;
        throw Error(*done.error, "handshake " + src.to_string() + " -> " + dst.to_string());
    }
    return cid;
}

ConnectionId Network::connection_between(EnergyIpAddress src, EnergyIpAddress dst) {
    for (const auto& [id, c] : connections_) {
        if (!c.stale && c.initiator == src && c.responder == dst &&
            c.client.state == ConnectionState::Established) {
            return id;
        }
    }
    return open_connection(src, dst);
}

ConnectionState Network::state(ConnectionId id) const {
    auto it = connections_.find(id);
    if (it == connections_.end()) return ConnectionState::Closed;
    return it->second.client.state;
}

unsigned Network::handshake_segments(ConnectionId id) const {
    return connections_.at(id).handshake_segments;
}

SendId Network::submit_bee(ConnectionId id, const Bee& bee) {
    auto it = connections_.find(id);
    if (it == connections_.end() || it->second.stale || it->second.client.state != ConnectionState::Established) {
        throw Error(Errc::NotEstablished, "connection " + std::to_string(id) + " is not established");
    }
    (void)encode_bee(bee);  // validates
    Connection& conn = it->second;
    const auto src = conn.initiator;
    const auto dst = conn.responder;
    const std::uint64_t q = bee.quantity_wh;
    ++tick_;
    log(Layer::Application, src, dst, "BEE", q, "submitted");

    // The BEE descends the stack: the transport window is checked first, then
    // the static limit carried in the Energy IP header.
    const bool limited = leaves_lan(src, dst);
    if (limited) {
        const auto window = dynamic_allowance(src);
        if (q > window) {
            log(Layer::Transport, src, dst, "BEE", q, "rejected:DynamicLimitExceeded");
            throw Error(Errc::DynamicLimitExceeded,
                        std::to_string(q) + " Wh exceeds window " + std::to_string(window));
        }
    }
    log(Layer::Transport, src, dst, "BEE", q, "admitted");
    if (limited) {
        const auto limit = static_limit(src);
        const auto used = static_used(src);
        if (limit != kUnlimited && used + q > limit) {
            log(Layer::Network, src, dst, "BEE", q, "rejected:StaticLimitExceeded");
            throw Error(Errc::StaticLimitExceeded,
                        std::to_string(used + q) + " Wh would exceed static limit " + std::to_string(limit));
        }
    }
    log(Layer::Network, src, dst, "BEE", q, "admitted");

    Op op;
    op.id = next_op_++;
    op.kind = OpKind::Data;
    op.conn = id;
    op.bee = bee;
    op.seq = conn.client.snd_nxt;
    conn.client.snd_nxt += static_cast<std::uint32_t>(kBeeSize);
    if (limited) {
        static_used_wh_[src] += q;
        auto& window = dynamic_wh_.try_emplace(src, kUnlimited).first->second;
        if (window != kUnlimited) window -= q;
        op.charged = true;
    }
    auto& stored = ops_.emplace(op.id, std::move(op)).first->second;
    start_attempt(stored);
    return stored.id;
}

DeliveryReceipt Network::send_bee(ConnectionId id, const Bee& bee) {
    const SendId sid = submit_bee(id, bee);
    run_until_done(sid);
    return result(sid);
}

const DeliveryReceipt& Network::result(SendId id) const {
    const Op& op = ops_.at(id);
    if (!op.done) throw Error(Errc::DeliveryFailed, "send " + std::to_string(id) + " still in flight");
    if (op.error) throw Error(*op.error, "send " + std::to_string(id));
    return op.receipt;
}

void Network::run() {
    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        switch (ev.type) {
            case EventType::FrameAtRouter: tick_ = std::max(tick_, ev.tick); on_router_frame(ev); break;
            case EventType::FrameAtHost:   tick_ = std::max(tick_, ev.tick); on_host_frame(ev); break;
            case EventType::Timeout:       on_timeout(ev); break;
            case EventType::Nack:          on_nack(ev); break;
            case EventType::Abort:         break;
        }
    }
}

void Network::run_until_done(SendId id) {
    (void)id;
    run();
}

void Network::start_attempt(Op& op) {
    op.hops.clear();
    Connection& c = connections_.at(op.conn);
    if (op.attempt > 0) {
        log(Layer::Transport, c.initiator, c.responder, op.kind == OpKind::Data ? "BEE" : "SYN",
            op.bee.quantity_wh, "retransmit:" + std::to_string(op.attempt));
    }
    if (op.kind == OpKind::Handshake) {
        emit_segment(op.conn, true, tcp_flags::Syn, c.client.snd_nxt, 0, {}, op.id, op.attempt);
    } else {
        const auto bytes = encode_bee(op.bee);
        emit_segment(op.conn, true, tcp_flags::Psh | tcp_flags::Ack, op.seq, c.client.rcv_nxt, bytes, op.id,
                     op.attempt);
    }
    Event timeout;
    timeout.tick = tick_ + kRetransmitTimeoutTicks;
    timeout.type = EventType::Timeout;
    timeout.op = op.id;
    timeout.attempt = op.attempt;
    schedule(std::move(timeout));
}

void Network::emit_segment(ConnectionId cid, bool from_initiator, std::uint8_t flags, std::uint32_t seq,
                           std::uint32_t ack, std::span<const std::uint8_t> payload, SendId op,
                           unsigned attempt) {
    Connection& c = connections_.at(cid);
    const auto src = from_initiator ? c.initiator : c.responder;
    const auto dst = from_initiator ? c.responder : c.initiator;
    const Host* host = find_host(src);
    if (host == nullptr) return;

    EnergyTcpHeader tcp;
    tcp.source_port = from_initiator ? c.client.port : c.server.port;
    tcp.dest_port = from_initiator ? c.server.port : c.client.port;
    tcp.sequence = seq;
    tcp.ack_number = ack;
    tcp.flags = flags;
    tcp.window = to_kwh_field(dynamic_allowance(src));
    const auto tcp_bytes = tcp.encode(payload);

    EnergyIpHeader ip;
    ip.total_length = static_cast<std::uint16_t>(kIpHeaderSize + kTcpHeaderSize + payload.size());
    ip.identification = ip_identification_++;
    ip.static_limit_kwh = to_kwh_field(static_limit(src));
    ip.ttl = initial_ttl_;
    ip.source = src;
    ip.dest = dst;
    const auto ip_bytes = ip.encode();

    EnergyFrame frame;
    frame.src_mac = host->mac;
    frame.dest_mac = routers_.at(host->router).mac;
    frame.payload.insert(frame.payload.end(), ip_bytes.begin(), ip_bytes.end());
    frame.payload.insert(frame.payload.end(), tcp_bytes.begin(), tcp_bytes.end());
    frame.payload.insert(frame.payload.end(), payload.begin(), payload.end());

    if ((flags & (tcp_flags::Syn | tcp_flags::Rst)) != 0 ||
        (payload.empty() && c.server.state == ConnectionState::SynReceived && from_initiator)) {
        ++c.handshake_segments;
    }
    log(Layer::Transport, src, dst, describe_flags(flags, !payload.empty()), payload.empty() ? 0 : ops_.count(op) ? ops_.at(op).bee.quantity_wh : 0,
        "sent");
    transmit(host->router, frame, op, attempt, ip);
}

void Network::schedule(Event ev) {
    ev.seq = event_seq_++;
    queue_.push(std::move(ev));
}

namespace {

void maybe_corrupt(std::vector<std::uint8_t>& bytes, unsigned& budget, std::mt19937_64& rng) {
    if (budget == 0 || bytes.empty()) return;
    --budget;
    const auto bit = rng() % (bytes.size() * 8);
    bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
}

} // namespace

void Network::transmit(RouterId to_router, const EnergyFrame& frame, SendId op, unsigned attempt,
                       const EnergyIpHeader& ip) {
    Event ev;
    ev.tick = tick_;
    ev.type = EventType::FrameAtRouter;
    ev.router = to_router;
    ev.frame = frame.encode();
    ev.op = op;
    ev.attempt = attempt;
    maybe_corrupt(ev.frame, corrupt_budget_, rng_);
    ++frames_transmitted_;
    log(Layer::Link, ip.source, ip.dest, "frame", 0, "tx->" + routers_[to_router].name);
    schedule(std::move(ev));
}

void Network::transmit_to_host(EnergyIpAddress host, const EnergyFrame& frame, SendId op, unsigned attempt,
                               const EnergyIpHeader& ip) {
    Event ev;
    ev.tick = tick_;
    ev.type = EventType::FrameAtHost;
    ev.host = host;
    ev.frame = frame.encode();
    ev.op = op;
    ev.attempt = attempt;
    maybe_corrupt(ev.frame, corrupt_budget_, rng_);
    ++frames_transmitted_;
    log(Layer::Link, ip.source, ip.dest, "frame", 0, "tx->" + host.to_string());
    schedule(std::move(ev));
}

void Network::nack(const Event& ev, Errc cause, std::string_view where, EnergyIpAddress src, EnergyIpAddress dst) {
    log(Layer::Link, src, dst, "frame", 0, std::string("dropped:") + std::string(to_string(cause)) + "@" +
                                               std::string(where));
    Event n;
    n.tick = tick_;
    n.type = EventType::Nack;
    n.op = ev.op;
    n.attempt = ev.attempt;
    n.cause = cause;
    schedule(std::move(n));
}

void Network::on_router_frame(const Event& ev) {
    Router& r = routers_[ev.router];
    auto op_it = ops_.find(ev.op);
    const Connection* conn = op_it != ops_.end() ? &connections_.at(op_it->second.conn) : nullptr;
    const auto fallback_src = conn ? conn->initiator : r.eip;
    const auto fallback_dst = conn ? conn->responder : r.eip;

    EnergyFrame frame;
    EnergyIpHeader ip;
    try {
        frame = EnergyFrame::decode(ev.frame);
        ip = EnergyIpHeader::decode(frame.payload);
    } catch (const Error& e) {
        nack(ev, Errc::ChecksumFailure, r.name, fallback_src, fallback_dst);
        return;
    }

    if (ip.ttl <= 1) {
        log(Layer::Network, ip.source, ip.dest, "packet", 0, "dropped:TtlExpired@" + r.name);
        if (op_it != ops_.end() && op_it->second.attempt == ev.attempt) finish(op_it->second, Errc::TtlExpired);
        return;
    }
    --ip.ttl;
    const bool carries_bee = ip.total_length > kIpHeaderSize + kTcpHeaderSize;
    if (carries_bee && op_it != ops_.end() && op_it->second.attempt == ev.attempt) {
        op_it->second.hops.push_back(r.eip);
    }

    EnergyFrame out;
    out.src_mac = r.mac;
    const auto header = ip.encode();
    out.payload.assign(header.begin(), header.end());
    out.payload.insert(out.payload.end(), frame.payload.begin() + kIpHeaderSize, frame.payload.end());

    if (ip.dest.network() == r.eip) {
        const Host* dest = find_host(ip.dest);
        if (dest == nullptr) {
            log(Layer::Network, ip.source, ip.dest, "packet", 0, "dropped:Unroutable@" + r.name);
            if (op_it != ops_.end() && op_it->second.attempt == ev.attempt) finish(op_it->second, Errc::Unroutable);
            return;
        }
        out.dest_mac = dest->mac;
        log(Layer::Network, ip.source, ip.dest, "packet", 0, "forwarded@" + r.name);
        transmit_to_host(ip.dest, out, ev.op, ev.attempt, ip);
        return;
    }
    const auto next = next_hop(ev.router, ip.dest);
    if (!next || *next == ev.router) {
        log(Layer::Network, ip.source, ip.dest, "packet", 0, "dropped:Unroutable@" + r.name);
        if (op_it != ops_.end() && op_it->second.attempt == ev.attempt) finish(op_it->second, Errc::Unroutable);
        return;
    }
    out.dest_mac = routers_[*next].mac;
    log(Layer::Network, ip.source, ip.dest, "packet", 0, "forwarded@" + r.name);
    transmit(*next, out, ev.op, ev.attempt, ip);
}

std::optional<ConnectionId> Network::find_connection(EnergyIpAddress local, std::uint16_t local_port,
                                                     EnergyIpAddress remote, std::uint16_t remote_port,
                                                     bool& is_initiator) {
    for (const auto& [id, c] : connections_) {
        if (c.stale) continue;
        if (c.initiator == local && c.client.port == local_port && c.responder == remote &&
            c.server.port == remote_port) {
            is_initiator = true;
            return id;
        }
        if (c.responder == local && c.server.port == local_port && c.initiator == remote &&
            c.client.port == remote_port) {
            is_initiator = false;
            return id;
        }
    }
    return std::nullopt;
}

void Network::on_host_frame(const Event& ev) {
    const Host* host = find_host(ev.host);
    if (host == nullptr || host->down) {
        log(Layer::Link, ev.host, ev.host, "frame", 0, "dropped:host-unavailable");
        return;
    }
    auto op_it = ops_.find(ev.op);
    const Connection* any = op_it != ops_.end() ? &connections_.at(op_it->second.conn) : nullptr;

    EnergyIpHeader ip;
    EnergyTcpHeader tcp;
    std::span<const std::uint8_t> payload;
    EnergyFrame frame;
    try {
        frame = EnergyFrame::decode(ev.frame);
        ip = EnergyIpHeader::decode(frame.payload);
        if (ip.total_length != frame.payload.size()) throw Error(Errc::ChecksumFailure, "length mismatch");
        const auto segment = std::span<const std::uint8_t>(frame.payload).subspan(kIpHeaderSize);
        tcp = EnergyTcpHeader::decode(segment);
        payload = segment.subspan(kTcpHeaderSize);
        if (!payload.empty()) (void)decode_bee(payload);
    } catch (const Error&) {
        nack(ev, Errc::ChecksumFailure, ev.host.to_string(), any ? any->initiator : ev.host,
             any ? any->responder : ev.host);
        return;
    }

    bool local_is_initiator = false;
    const auto cid = find_connection(ev.host, tcp.dest_port, ip.source, tcp.source_port, local_is_initiator);
    if (!cid) {
        log(Layer::Transport, ip.source, ip.dest, describe_flags(tcp.flags, !payload.empty()), 0,
            "dropped:no-connection");
        return;
    }
    Connection& c = connections_.at(*cid);
    Host& h = hosts_.at(ev.host);

    if (!local_is_initiator) {
        Endpoint& server = c.server;
        if (tcp.has(tcp_flags::Syn) && !tcp.has(tcp_flags::Ack)) {
            if (h.refuse) {
                log(Layer::Transport, ip.source, ip.dest, "SYN", 0, "refused");
                emit_segment(*cid, false, tcp_flags::Rst | tcp_flags::Ack, 0, tcp.sequence + 1, {}, ev.op,
                             ev.attempt);
                return;
            }
            if (server.state == ConnectionState::Closed) {
                server.snd_nxt = static_cast<std::uint32_t>(rng_());
                server.rcv_nxt = tcp.sequence + 1;
                server.state = ConnectionState::SynReceived;
            }
            log(Layer::Transport, ip.source, ip.dest, "SYN", 0, "accepted");
            emit_segment(*cid, false, tcp_flags::Syn | tcp_flags::Ack, server.snd_nxt, server.rcv_nxt, {}, ev.op,
                         ev.attempt);
            return;
        }
        if (server.state == ConnectionState::SynReceived && tcp.has(tcp_flags::Ack)) {
            server.snd_nxt += 1;
            server.state = ConnectionState::Established;
            log(Layer::Transport, ip.source, ip.dest, "ACK", 0, "established");
        }
        if (payload.empty()) return;
        const Bee bee = decode_bee(payload);
        if (!seq_before(tcp.sequence, server.rcv_nxt)) {
            server.rcv_nxt = tcp.sequence + static_cast<std::uint32_t>(kBeeSize);
            inboxes_[h.mac].push_back(bee);
            log(Layer::Application, ip.source, ip.dest, "BEE", bee.quantity_wh, "delivered");
        } else {
            log(Layer::Transport, ip.source, ip.dest, "BEE", bee.quantity_wh, "duplicate");
        }
        emit_segment(*cid, false, tcp_flags::Ack, server.snd_nxt, tcp.sequence + static_cast<std::uint32_t>(kBeeSize),
                     {}, ev.op, ev.attempt);
        return;
    }

    Endpoint& client = c.client;
    if (tcp.has(tcp_flags::Rst)) {
        client.state = ConnectionState::Closed;
        log(Layer::Transport, ip.source, ip.dest, "RST", 0, "reset");
        if (op_it != ops_.end() && !op_it->second.done) finish(op_it->second, Errc::ResetByPeer);
        return;
    }
    if (tcp.has(tcp_flags::Syn) && tcp.has(tcp_flags::Ack)) {
        if (client.state == ConnectionState::SynSent) {
            client.snd_nxt += 1;
            client.rcv_nxt = tcp.sequence + 1;
            client.state = ConnectionState::Established;
            c.peer_window_kwh = tcp.window;
        }
        log(Layer::Transport, ip.source, ip.dest, "SYN+ACK", 0, "established");
        emit_segment(*cid, true, tcp_flags::Ack, client.snd_nxt, client.rcv_nxt, {}, ev.op, ev.attempt);
        if (op_it != ops_.end() && op_it->second.kind == OpKind::Handshake && !op_it->second.done) {
            finish(op_it->second, std::nullopt);
        }
        return;
    }
    if (tcp.has(tcp_flags::Ack) && op_it != ops_.end()) {
        Op& op = op_it->second;
        if (op.kind == OpKind::Data && !op.done &&
            tcp.ack_number == op.seq + static_cast<std::uint32_t>(kBeeSize)) {
            log(Layer::Transport, ip.source, ip.dest, "ACK", op.bee.quantity_wh, "acknowledged");
            finish(op, std::nullopt);
        }
    }
}

void Network::on_timeout(const Event& ev) {
    auto it = ops_.find(ev.op);
    if (it == ops_.end() || it->second.done || it->second.attempt != ev.attempt) return;
    tick_ = std::max(tick_, ev.tick);
    Op& op = it->second;
    const Connection& c = connections_.at(op.conn);
    log(Layer::Transport, c.initiator, c.responder, op.kind == OpKind::Data ? "BEE" : "SYN", op.bee.quantity_wh,
        "timeout");
    retransmit_or_fail(op, op.kind == OpKind::Data ? Errc::DeliveryFailed : Errc::HandshakeTimeout);
}

void Network::on_nack(const Event& ev) {
    auto it = ops_.find(ev.op);
    if (it == ops_.end() || it->second.done || it->second.attempt != ev.attempt) return;
    retransmit_or_fail(it->second, ev.cause);
}

void Network::retransmit_or_fail(Op& op, Errc cause) {
    op.last_cause = cause;
    if (op.attempt < kMaxRetries) {
        ++op.attempt;
        start_attempt(op);
        return;
    }
    if (op.kind == OpKind::Handshake) {
        finish(op, Errc::HandshakeTimeout);
    } else {
        finish(op, cause);
    }
}

void Network::finish(Op& op, std::optional<Errc> error) {
    op.done = true;
    op.error = error;
    const Connection& c = connections_.at(op.conn);
    if (error) {
        release_charge(op);
        log(Layer::Application, c.initiator, c.responder, op.kind == OpKind::Data ? "BEE" : "SYN",
            op.bee.quantity_wh, std::string("failed:") + std::string(to_string(*error)));
        return;
    }
    if (op.kind == OpKind::Data) {
        op.receipt.id = op.id;
        op.receipt.connection = op.conn;
        op.receipt.bee = op.bee;
        op.receipt.hops = op.hops;
        op.receipt.hop_count = op.hops.size();
        op.receipt.delivered_tick = tick_;
        op.receipt.retransmissions = op.attempt;
        ++receipts_issued_;
        log(Layer::Application, c.initiator, c.responder, "BEE", op.bee.quantity_wh, "receipt");
    }
}

void Network::release_charge(Op& op) {
    if (!op.charged) return;
    op.charged = false;
    const auto src = connections_.at(op.conn).initiator;
    static_used_wh_[src] -= op.bee.quantity_wh;
    auto& window = dynamic_wh_.try_emplace(src, kUnlimited).first->second;
    if (window != kUnlimited) window += op.bee.quantity_wh;
}

// ---------------------------------------------------------------------------
// Limits
// ---------------------------------------------------------------------------

void Network::set_static_limit(EnergyIpAddress eip, std::uint64_t limit_wh) {
    const auto rid = router_for(eip);
    if (!rid) throw Error(Errc::Unroutable, "no router for " + eip.to_string());
    routers_[*rid].static_limit_wh[eip] = limit_wh;
    log(Layer::Control, routers_[*rid].eip, eip, "static-limit", limit_wh, "installed");
}

void Network::update_dynamic_limit(EnergyIpAddress eip, std::uint64_t window_wh) {
    if (!router_for(eip)) throw Error(Errc::Unroutable, "no router for " + eip.to_string());
    dynamic_wh_[eip] = window_wh;
    log(Layer::Control, eip.network(), eip, "dynamic-limit", window_wh, "installed");
}

std::uint64_t Network::static_limit(EnergyIpAddress eip) const {
    const auto rid = router_for(eip);
    if (!rid) return kUnlimited;
    const auto& table = routers_[*rid].static_limit_wh;
    auto it = table.find(eip);
    return it == table.end() ? kUnlimited : it->second;
}

std::uint64_t Network::static_used(EnergyIpAddress eip) const {
    auto it = static_used_wh_.find(eip);
    return it == static_used_wh_.end() ? 0 : it->second;
}

std::uint64_t Network::dynamic_allowance(EnergyIpAddress eip) const {
    auto it = dynamic_wh_.find(eip);
    return it == dynamic_wh_.end() ? kUnlimited : it->second;
}

std::uint64_t Network::exportable_wh(EnergyIpAddress eip) const {
    const auto limit = static_limit(eip);
    const auto used = static_used(eip);
    const auto static_room = limit == kUnlimited ? kUnlimited : (used >= limit ? 0 : limit - used);
    return std::min(static_room, dynamic_allowance(eip));
}

void Network::begin_period() {
    static_used_wh_.clear();
    log(Layer::Control, EnergyIpAddress{}, EnergyIpAddress{}, "period", 0, "static-usage-reset");
}

void Network::set_host_down(EnergyIpAddress eip, bool down) { host_at(eip).down = down; }

void Network::set_refuse_connections(EnergyIpAddress eip, bool refuse) { host_at(eip).refuse = refuse; }

// ---------------------------------------------------------------------------
// Observation
// ---------------------------------------------------------------------------

const std::vector<Bee>& Network::inbox(const MacAddress& mac) const {
    static const std::vector<Bee> empty;
    auto it = inboxes_.find(mac);
    return it == inboxes_.end() ? empty : it->second;
}

void Network::log(Layer layer, EnergyIpAddress src, EnergyIpAddress dst, std::string kind, std::uint64_t q,
                  std::string verdict) {
    trace_.push_back({tick_, layer, layer == Layer::Control && src.raw() == 0 ? "isp" : src.to_string(),
                      dst.to_string(), std::move(kind), q, std::move(verdict)});
}

std::string Network::describe_flags(std::uint8_t flags, bool has_payload) {
    if (has_payload) return "BEE";
    if ((flags & tcp_flags::Rst) != 0) return "RST";
    if ((flags & tcp_flags::Syn) != 0) return (flags & tcp_flags::Ack) != 0 ? "SYN+ACK" : "SYN";
    if ((flags & tcp_flags::Fin) != 0) return "FIN";
    return "ACK";
}

void Network::write_trace_csv(std::ostream& out) const { ei::write_trace_csv(out, trace_); }

void write_trace_csv(std::ostream& out, std::span<const TraceEntry> trace) {
    out << "tick,layer,src,dst,kind,quantity_wh,verdict\n";
    for (const auto& e : trace) {
        out << e.tick << ',' << to_string(e.layer) << ',' << e.src << ',' << e.dst << ',' << e.kind << ','
            << e.quantity_wh << ',' << e.verdict << '\n';
    }
}

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

void NameRegistry::bind(std::string name, const MacAddress& mac) { names_[std::move(name)] = mac; }

std::optional<MacAddress> NameRegistry::lookup(std::string_view name) const {
    auto it = names_.find(name);
    if (it == names_.end()) return std::nullopt;
    return it->second;
}

EnergyIpAddress NameRegistry::resolve_name(const Network& net, std::string_view name) const {
    const auto mac = lookup(name);
    if (!mac) throw Error(Errc::UnknownName, "no resource named '" + std::string(name) + "'");
    const auto eip = net.eip_of(*mac);
    if (!eip) throw Error(Errc::UnknownName, "'" + std::string(name) + "' is not attached to any LAN");
    return *eip;
}

} // namespace ei
