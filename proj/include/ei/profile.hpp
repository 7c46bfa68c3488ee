#pragma once

#include "ei/address.hpp"
#include "ei/bee.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ei {

enum class TradeRole : std::uint8_t { Sender, Receiver };

struct TradeRecord {
    Bee bee;
    TradeRole role = TradeRole::Sender;
    std::uint32_t settled_at = 0;  // epoch seconds, end of the delivery window

    friend bool operator==(const TradeRecord&, const TradeRecord&) = default;
};

/// Green certificates and carbon emission rights. Only Ledger::apply_settlement
/// moves these balances.
class CertificateInventory {
public:
    std::int64_t green_certificates_wh() const noexcept { return green_certificates_wh_; }
    std::int64_t carbon_rights_g() const noexcept { return carbon_rights_g_; }

    friend bool operator==(const CertificateInventory&, const CertificateInventory&) = default;

private:
    friend class Ledger;
    std::int64_t green_certificates_wh_ = 0;
    std::int64_t carbon_rights_g_ = 0;
};

struct UserProfile {
    MacAddress mac;
    EnergyIpAddress current_eip;
    std::string display_name;
    std::vector<TradeRecord> trades;
    std::int64_t net_energy_wh = 0;     // + received, - delivered
    std::int64_t net_payment_mcny = 0;  // + received money, - paid
    CertificateInventory inventory;
};

/// Monetary value of a settled quantity, rounded half-up to whole mCNY.
std::int64_t settlement_value_mcny(std::uint32_t quantity_wh, std::uint32_t price_mcny_per_kwh) noexcept;
std::int64_t green_transfer_wh(std::uint32_t quantity_wh, std::uint16_t green_fraction_bp) noexcept;
std::int64_t carbon_transfer_g(std::uint32_t quantity_wh, std::uint16_t carbon_g_per_kwh) noexcept;

/// Canonical text form of a profile; equal profiles serialize identically.
std::string serialize_profile(const UserProfile& profile);

/// Per-MAC profile store updated only by settled BEEs. Single writer: callers
/// serialize mutations; snapshots returned by value are independent copies.
///
/// Accounting conventions:
///   - sender delivers energy and receives payment, receiver the reverse;
///   - green certificates follow the energy (q x green fraction);
///   - the receiver takes on the embodied emissions: its carbon rights are
///     debited by q x carbon intensity and the sender's credited by the same.
class Ledger {
public:
    /// Errors: InvalidMac (zero or broadcast), DuplicateMac.
    UserProfile register_card(const MacAddress& mac, std::string name);

    /// Errors: NotSettleKind, InvariantViolation, SelfTrade, UnknownMac.
    std::pair<UserProfile, UserProfile> apply_settlement(const Bee& bee);

    /// Errors: UnknownMac.
    UserProfile query_profile(const MacAddress& mac) const;

    bool contains(const MacAddress& mac) const { return profiles_.contains(mac); }
    std::vector<UserProfile> profiles() const;
    std::size_t settlement_count() const noexcept { return log_.size(); }

    /// Records the resource's current attachment point. Errors: UnknownMac.
    void set_current_eip(const MacAddress& mac, EnergyIpAddress eip);

    /// One lowercase hex line per settled BEE, in settlement order.
    void write_event_log(std::ostream& out) const;
    const std::vector<BeeBytes>& event_log() const noexcept { return log_; }

    /// Re-applies a hex event log. Unknown MACs are registered on first sight
    /// (named after the MAC) when auto_register is set; otherwise UnknownMac.
    void replay(std::istream& in, bool auto_register = true);

private:
    UserProfile& lookup(const MacAddress& mac);

    std::map<MacAddress, UserProfile> profiles_;
    std::vector<BeeBytes> log_;
};

} // namespace ei
