#pragma once

#include "ei/bee.hpp"
#include "ei/error.hpp"
#include "ei/profile.hpp"
#include "ei/stack.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace ei {

struct PoolEntry {
    Bee bee;
    std::uint32_t remaining_wh = 0;
    std::uint64_t arrival_seq = 0;

    friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

/// Intersection of two delivery windows, in whole minutes.
struct DeliveryWindow {
    std::uint32_t start = 0;
    std::uint16_t duration_min = 0;
};

/// Windows are compatible when they share at least one whole minute.
std::optional<DeliveryWindow> intersect_windows(const Bee& a, const Bee& b);

struct Fill {
    PoolEntry offer;    // state of the offer side before this fill
    PoolEntry request;  // state of the request side before this fill
    std::uint32_t matched_wh = 0;
    std::uint32_t clearing_price_mcny_per_kwh = 0;
    DeliveryWindow window;
};

struct MatchResult {
    std::vector<Fill> fills;
    std::optional<PoolEntry> residual;

    std::uint64_t matched_wh() const;
};

struct PoolFilter {
    Carrier carrier = Carrier::Electricity;
    std::uint32_t window_start = 0;
    std::uint32_t window_end = ~std::uint32_t{0};
};

struct FailedFill {
    Fill fill;
    Errc error = Errc::DeliveryFailed;
    std::string message;
};

struct SettlementOutcome {
    std::vector<Bee> settled;
    std::vector<FailedFill> failed;
};

/// Settle-kind BEE for a fill: seller sends to buyer over the intersected window
/// at the clearing price, carrying the offer's carbon and green attributes.
Bee settle_bee_for(const Fill& fill);

/// Continuous double auction over BEE offers and requests. Price priority,
/// FIFO within a price, clearing at the offer's ask. Single writer.
class BeePool {
public:
    /// Optional extra compatibility rule applied on top of carrier, window and
    /// price (e.g. a green-only request). Arguments are (offer, request).
    using CompatibilityHook = std::function<bool(const Bee&, const Bee&)>;

    /// Offers ascending by price then requests descending, both FIFO on ties,
    /// restricted to the filter's carrier and window.
    std::vector<PoolEntry> browse(const PoolFilter& filter) const;
    std::vector<PoolEntry> browse_offers(const PoolFilter& filter) const;
    std::vector<PoolEntry> browse_requests(const PoolFilter& filter) const;

    /// Matches an incoming Offer or Request against the opposite side. Entries
    /// whose delivery window ended at or before `now` are purged first.
    /// Errors: InvariantViolation, IncompatibleKind.
    MatchResult submit(const Bee& bee, std::uint32_t now = 0);

    /// Delivers each fill as a Settle BEE through the stack and applies it to
    /// the ledger. A fill that fails is rolled back into the pool; the others
    /// still settle.
    SettlementOutcome settle_fills(const MatchResult& result, Ledger& ledger, Network& net);

    /// Returns a fill's quantity to both of its entries.
    void rollback(const Fill& fill);

    void set_compatibility_hook(CompatibilityHook hook) { hook_ = std::move(hook); }
    bool compatible(const Bee& offer, const Bee& request) const;

    const std::vector<PoolEntry>& offers() const noexcept { return offers_; }
    const std::vector<PoolEntry>& requests() const noexcept { return requests_; }
    std::uint64_t resting_wh() const;
    std::size_t size() const noexcept { return offers_.size() + requests_.size(); }
    bool empty() const noexcept { return size() == 0; }
    void clear();

    /// CSV: side,arrival_seq,remaining_wh,bee_hex
    void write_csv(std::ostream& out) const;
    /// Errors: ConfigError on malformed rows, plus BEE decode errors.
    static BeePool read_csv(std::istream& in);

private:
    void purge(std::uint32_t now);
    void insert(std::vector<PoolEntry>& side, PoolEntry entry);

    std::vector<PoolEntry> offers_;    // kept ascending by (price, seq)
    std::vector<PoolEntry> requests_;  // kept descending by price, ascending seq
    std::uint64_t next_seq_ = 1;
    CompatibilityHook hook_;
};

} // namespace ei
