#pragma once

#include "ei/address.hpp"
#include "ei/bee.hpp"
#include "ei/error.hpp"
#include "ei/headers.hpp"
#include "ei/profile.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ei {

using RouterId = std::size_t;
using ConnectionId = std::uint32_t;
using SendId = std::uint64_t;

enum class Layer : std::uint8_t { Application, Transport, Network, Link, Control };
std::string_view to_string(Layer layer) noexcept;

/// One line of the per-layer trace. src/dst are Energy IP addresses (or the
/// ISP for control-plane entries).
struct TraceEntry {
    std::uint64_t tick = 0;
    Layer layer = Layer::Application;
    std::string src;
    std::string dst;
    std::string kind;
    std::uint64_t quantity_wh = 0;
    std::string verdict;
};

void write_trace_csv(std::ostream& out, std::span<const TraceEntry> trace);

struct DeliveryReceipt {
    SendId id = 0;
    ConnectionId connection = 0;
    Bee bee;
    std::size_t hop_count = 0;
    std::vector<EnergyIpAddress> hops;  // routers traversed, in order
    std::uint64_t delivered_tick = 0;
    unsigned retransmissions = 0;
};

struct Route {
    EnergyIpAddress prefix;
    unsigned prefix_len = 0;
    RouterId next_hop = 0;
};

/// A VPP operator: owns one LAN subnet, binds member MACs to host addresses
/// and holds the static limit table for its hosts.
struct Router {
    std::string name;
    EnergyIpAddress eip;  // host 0 of the subnet
    MacAddress mac;
    std::vector<Route> routes;
    std::map<MacAddress, EnergyIpAddress> members;
    std::map<EnergyIpAddress, std::uint64_t> static_limit_wh;
};

enum class ConnectionState : std::uint8_t { Closed, SynSent, SynReceived, Established };

/// Deterministic in-process Energy Internet: hosts, VPP routers and a single
/// event queue. Link transmissions are instantaneous and FIFO within a tick;
/// retransmission timers run in whole ticks.
///
/// Exchange limits govern energy leaving a LAN: the static per-period ceiling
/// is checked at the network layer before a segment is built, the dynamic
/// allowance at the transport layer. Exchanges between two hosts of the same
/// LAN never load the feeder and are not limited.
class Network {
public:
    static constexpr unsigned kMaxRetries = 3;
    static constexpr std::uint64_t kRetransmitTimeoutTicks = 2;
    static constexpr std::uint64_t kUnlimited = ~std::uint64_t{0};

    explicit Network(Ledger& ledger, std::uint64_t seed = 1);

    // ---- topology ---------------------------------------------------------
    RouterId add_router(std::string name, std::uint32_t wan, std::uint32_t subnet);
    void add_route(RouterId from, EnergyIpAddress prefix, unsigned prefix_len, RouterId next_hop);
    /// Installs subnet routes in both directions between two routers.
    void connect_routers(RouterId a, RouterId b);
    /// Adds subnet routes along fewest-hop paths over the connected routers,
    /// keeping any route already present for a destination.
    void install_shortest_routes();
    const Router& router(RouterId id) const { return routers_.at(id); }
    std::size_t router_count() const noexcept { return routers_.size(); }
    std::optional<RouterId> find_router(std::string_view name) const;
    std::optional<RouterId> router_for(EnergyIpAddress eip) const;

    /// Binds a registered card to the lowest free host number of the router's
    /// subnet, releasing any previous binding and updating the profile.
    /// Errors: UnknownMac, SubnetFull.
    EnergyIpAddress assign_eip(RouterId router, const MacAddress& mac);
    std::optional<EnergyIpAddress> eip_of(const MacAddress& mac) const;
    std::optional<MacAddress> mac_at(EnergyIpAddress eip) const;

    // ---- transport --------------------------------------------------------
    /// Three-way handshake. Errors: Unroutable, HandshakeTimeout, ResetByPeer.
    ConnectionId open_connection(EnergyIpAddress src, EnergyIpAddress dst);
    /// Existing established connection between the pair, or a new one.
    ConnectionId connection_between(EnergyIpAddress src, EnergyIpAddress dst);
    ConnectionState state(ConnectionId id) const;
    /// Segments (not per-hop frames) exchanged by the connection's handshake.
    unsigned handshake_segments(ConnectionId id) const;

    /// Admits, transmits and waits for the acknowledgment.
    /// Errors: NotEstablished, InvariantViolation, StaticLimitExceeded,
    /// DynamicLimitExceeded, TtlExpired, ChecksumFailure, DeliveryFailed, Unroutable.
    DeliveryReceipt send_bee(ConnectionId id, const Bee& bee);
    /// Admission happens now (same errors as send_bee's admission); delivery
    /// progresses on run(). Returns a handle for result().
    SendId submit_bee(ConnectionId id, const Bee& bee);
    /// Drains the event queue.
    void run();
    /// Receipt of a finished send, or throws its failure.
    const DeliveryReceipt& result(SendId id) const;

    // ---- limits (one-way control plane) -----------------------------------
    void set_static_limit(EnergyIpAddress eip, std::uint64_t limit_wh);
    void update_dynamic_limit(EnergyIpAddress eip, std::uint64_t window_wh);
    std::uint64_t static_limit(EnergyIpAddress eip) const;
    std::uint64_t static_used(EnergyIpAddress eip) const;
    std::uint64_t dynamic_allowance(EnergyIpAddress eip) const;
    /// Quantity a new LAN-leaving BEE from eip could carry right now.
    std::uint64_t exportable_wh(EnergyIpAddress eip) const;
    /// Starts a new limit period: clears cumulative static usage.
    void begin_period();
    static bool leaves_lan(EnergyIpAddress src, EnergyIpAddress dst) noexcept {
        return src.network() != dst.network();
    }

    // ---- fault injection --------------------------------------------------
    /// Flips one pseudo-random bit in each of the next `frames` transmissions.
    void inject_corruption(unsigned frames) { corrupt_budget_ += frames; }
    void set_host_down(EnergyIpAddress eip, bool down);
    void set_refuse_connections(EnergyIpAddress eip, bool refuse);
    void set_initial_ttl(std::uint8_t ttl) { initial_ttl_ = ttl; }

    // ---- observation ------------------------------------------------------
    const std::vector<TraceEntry>& trace() const noexcept { return trace_; }
    void write_trace_csv(std::ostream& out) const;
    void clear_trace() { trace_.clear(); }
    std::uint64_t frames_transmitted() const noexcept { return frames_transmitted_; }
    std::uint64_t tick() const noexcept { return tick_; }
    /// BEEs delivered to the application layer of a resource, by MAC.
    const std::vector<Bee>& inbox(const MacAddress& mac) const;
    std::size_t receipts_issued() const noexcept { return receipts_issued_; }

private:
    struct Host {
        MacAddress mac;
        EnergyIpAddress eip;
        RouterId router = 0;
        bool down = false;
        bool refuse = false;
    };

    struct Endpoint {
        ConnectionState state = ConnectionState::Closed;
        std::uint16_t port = 0;
        std::uint32_t snd_nxt = 0;
        std::uint32_t rcv_nxt = 0;
    };

    struct Connection {
        EnergyIpAddress initiator;
        EnergyIpAddress responder;
        Endpoint client;
        Endpoint server;
        std::uint16_t peer_window_kwh = 0;
        unsigned handshake_segments = 0;
        bool stale = false;
    };

    enum class OpKind : std::uint8_t { Handshake, Data };

    struct Op {
        SendId id = 0;
        OpKind kind = OpKind::Handshake;
        ConnectionId conn = 0;
        unsigned attempt = 0;
        bool done = false;
        std::optional<Errc> error;
        Errc last_cause = Errc::DeliveryFailed;
        Bee bee;
        std::uint32_t seq = 0;
        bool charged = false;
        std::vector<EnergyIpAddress> hops;
        DeliveryReceipt receipt;
    };

    enum class EventType : std::uint8_t { FrameAtRouter, FrameAtHost, Timeout, Nack, Abort };

    struct Event {
        std::uint64_t tick = 0;
        std::uint64_t seq = 0;
        EventType type = EventType::FrameAtRouter;
        RouterId router = 0;
        EnergyIpAddress host;
        std::vector<std::uint8_t> frame;
        SendId op = 0;
        unsigned attempt = 0;
        Errc cause = Errc::DeliveryFailed;
    };

    struct EventOrder {
        bool operator()(const Event& a, const Event& b) const noexcept {
            return a.tick != b.tick ? a.tick > b.tick : a.seq > b.seq;
        }
    };

    Host& host_at(EnergyIpAddress eip);
    const Host* find_host(EnergyIpAddress eip) const;
    std::optional<RouterId> next_hop(RouterId at, EnergyIpAddress dest) const;
    bool routable(EnergyIpAddress src, EnergyIpAddress dst) const;

    void schedule(Event ev);
    void transmit(RouterId to_router, const EnergyFrame& frame, SendId op, unsigned attempt,
                  const EnergyIpHeader& ip);
    void transmit_to_host(EnergyIpAddress host, const EnergyFrame& frame, SendId op, unsigned attempt,
                          const EnergyIpHeader& ip);
    void emit_segment(ConnectionId cid, bool from_initiator, std::uint8_t flags, std::uint32_t seq,
                      std::uint32_t ack, std::span<const std::uint8_t> payload, SendId op, unsigned attempt);

    void on_router_frame(const Event& ev);
    void on_host_frame(const Event& ev);
    void on_timeout(const Event& ev);
    void on_nack(const Event& ev);
    void nack(const Event& ev, Errc cause, std::string_view where, EnergyIpAddress src, EnergyIpAddress dst);
    void retransmit_or_fail(Op& op, Errc cause);
    void start_attempt(Op& op);
    void finish(Op& op, std::optional<Errc> error);
    void release_charge(Op& op);
    void run_until_done(SendId op);

    std::optional<ConnectionId> find_connection(EnergyIpAddress local, std::uint16_t local_port,
                                                EnergyIpAddress remote, std::uint16_t remote_port,
                                                bool& is_initiator);

    void log(Layer layer, EnergyIpAddress src, EnergyIpAddress dst, std::string kind, std::uint64_t q,
             std::string verdict);
    static std::string describe_flags(std::uint8_t flags, bool has_payload);

    Ledger& ledger_;
    std::mt19937_64 rng_;
    std::vector<Router> routers_;
    std::unordered_map<EnergyIpAddress, Host> hosts_;
    std::unordered_map<MacAddress, EnergyIpAddress> bindings_;
    std::map<ConnectionId, Connection> connections_;
    std::map<SendId, Op> ops_;
    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
    std::unordered_map<EnergyIpAddress, std::uint64_t> dynamic_wh_;
    std::unordered_map<EnergyIpAddress, std::uint64_t> static_used_wh_;
    std::unordered_map<MacAddress, std::vector<Bee>> inboxes_;
    std::vector<TraceEntry> trace_;

    std::uint64_t tick_ = 0;
    std::uint64_t event_seq_ = 0;
    std::uint64_t frames_transmitted_ = 0;
    std::size_t receipts_issued_ = 0;
    ConnectionId next_connection_ = 1;
    SendId next_op_ = 1;
    std::uint16_t next_port_ = 49152;
    std::uint16_t ip_identification_ = 0;
    unsigned corrupt_budget_ = 0;
    std::uint8_t initial_ttl_ = 64;
};

/// Flat name -> MAC directory; resolution follows the resource's current
/// attachment, so a name keeps working after the resource changes LAN.
class NameRegistry {
public:
    void bind(std::string name, const MacAddress& mac);
    std::optional<MacAddress> lookup(std::string_view name) const;
    /// Errors: UnknownName (unbound, or bound but not attached anywhere).
    EnergyIpAddress resolve_name(const Network& net, std::string_view name) const;

private:
    std::map<std::string, MacAddress, std::less<>> names_;
};

} // namespace ei
