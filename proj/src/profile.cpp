#include "ei/profile.hpp"

#include "ei/error.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace ei {

namespace {

std::int64_t div_round_half_up(std::uint64_t num, std::uint64_t den) noexcept {
    return static_cast<std::int64_t>((num + den / 2) / den);
}

} // namespace

std::int64_t settlement_value_mcny(std::uint32_t quantity_wh, std::uint32_t price_mcny_per_kwh) noexcept {
    return div_round_half_up(std::uint64_t{quantity_wh} * price_mcny_per_kwh, 1000);
}

std::int64_t green_transfer_wh(std::uint32_t quantity_wh, std::uint16_t green_fraction_bp) noexcept {
    return div_round_half_up(std::uint64_t{quantity_wh} * green_fraction_bp, kMaxGreenFractionBp);
}

std::int64_t carbon_transfer_g(std::uint32_t quantity_wh, std::uint16_t carbon_g_per_kwh) noexcept {
    return div_round_half_up(std::uint64_t{quantity_wh} * carbon_g_per_kwh, 1000);
}

std::string serialize_profile(const UserProfile& p) {
    std::ostringstream os;
    os << p.mac.to_string() << '|' << p.current_eip.to_string() << '|' << p.display_name << '|'
       << p.net_energy_wh << '|' << p.net_payment_mcny << '|' << p.inventory.green_certificates_wh()
       << '|' << p.inventory.carbon_rights_g() << '\n';
    for (const auto& t : p.trades) {
        os << (t.role == TradeRole::Sender ? 'S' : 'R') << ' ' << t.settled_at << ' '
           << to_hex(encode_bee(t.bee)) << '\n';
    }
    return os.str();
}

UserProfile Ledger::register_card(const MacAddress& mac, std::string name) {
    if (mac.is_zero() || mac.is_broadcast()) {
        throw Error(Errc::InvalidMac, "reserved MAC " + mac.to_string());
    }
    if (profiles_.contains(mac)) {
        throw Error(Errc::DuplicateMac, mac.to_string() + " already registered");
    }
    UserProfile profile;
    profile.mac = mac;
    profile.display_name = std::move(name);
    return profiles_.emplace(mac, std::move(profile)).first->second;
}

std::pair<UserProfile, UserProfile> Ledger::apply_settlement(const Bee& bee) {
    if (bee.kind != BeeKind::Settle) {
        throw Error(Errc::NotSettleKind, "only Settle BEEs update profiles");
    }
    validate(bee);
    if (bee.sender == bee.receiver) {
        throw Error(Errc::SelfTrade, "sender and receiver are both " + bee.sender.to_string());
    }
    UserProfile& sender = lookup(bee.sender);
    UserProfile& receiver = lookup(bee.receiver);

    const auto q = static_cast<std::int64_t>(bee.quantity_wh);
    const auto value = settlement_value_mcny(bee.quantity_wh, bee.price_mcny_per_kwh);
    const auto green = green_transfer_wh(bee.quantity_wh, bee.green_fraction_bp);
    const auto carbon = carbon_transfer_g(bee.quantity_wh, bee.carbon_intensity_g_per_kwh);
    const auto settled_at = bee.delivery_end();

    sender.trades.push_back({bee, TradeRole::Sender, settled_at});
    sender.net_energy_wh -= q;
    sender.net_payment_mcny += value;
    sender.inventory.green_certificates_wh_ -= green;
    sender.inventory.carbon_rights_g_ += carbon;

    receiver.trades.push_back({bee, TradeRole::Receiver, settled_at});
    receiver.net_energy_wh += q;
    receiver.net_payment_mcny -= value;
    receiver.inventory.green_certificates_wh_ += green;
    receiver.inventory.carbon_rights_g_ -= carbon;

    log_.push_back(encode_bee(bee));
    return {sender, receiver};
}

UserProfile Ledger::query_profile(const MacAddress& mac) const {
    auto it = profiles_.find(mac);
    if (it == profiles_.end()) throw Error(Errc::UnknownMac, mac.to_string() + " is not registered");
    return it->second;
}

std::vector<UserProfile> Ledger::profiles() const {
    std::vector<UserProfile> out;
    out.reserve(profiles_.size());
    for (const auto& [_, p] : profiles_) out.push_back(p);
    return out;
}

void Ledger::set_current_eip(const MacAddress& mac, EnergyIpAddress eip) {
    lookup(mac).current_eip = eip;
}

void Ledger::write_event_log(std::ostream& out) const {
    for (const auto& rec : log_) out << to_hex(rec) << '\n';
}

void Ledger::replay(std::istream& in, bool auto_register) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const Bee bee = decode_bee(from_hex(line));
        if (auto_register) {
            for (const auto& mac : {bee.sender, bee.receiver}) {
                if (!profiles_.contains(mac)) register_card(mac, mac.to_string());
            }
        }
        apply_settlement(bee);
    }
}

UserProfile& Ledger::lookup(const MacAddress& mac) {
    auto it = profiles_.find(mac);
    if (it == profiles_.end()) throw Error(Errc::UnknownMac, mac.to_string() + " is not registered");
    return it->second;
}

} // namespace ei
