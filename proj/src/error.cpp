#include "ei/error.hpp"

namespace ei {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::BadLength:            return "BadLength";
        case Errc::BadChecksum:          return "BadChecksum";
        case Errc::InvariantViolation:   return "InvariantViolation";
        case Errc::DuplicateMac:         return "DuplicateMac";
        case Errc::InvalidMac:           return "InvalidMac";
        case Errc::UnknownMac:           return "UnknownMac";
        case Errc::SelfTrade:            return "SelfTrade";
        case Errc::NotSettleKind:        return "NotSettleKind";
        case Errc::SubnetFull:           return "SubnetFull";
        case Errc::Unroutable:           return "Unroutable";
        case Errc::HandshakeTimeout:     return "HandshakeTimeout";
        case Errc::ResetByPeer:          return "ResetByPeer";
        case Errc::NotEstablished:       return "NotEstablished";
        case Errc::StaticLimitExceeded:  return "StaticLimitExceeded";
        case Errc::DynamicLimitExceeded: return "DynamicLimitExceeded";
        case Errc::TtlExpired:           return "TtlExpired";
        case Errc::ChecksumFailure:      return "ChecksumFailure";
        case Errc::DeliveryFailed:       return "DeliveryFailed";
        case Errc::UnknownName:          return "UnknownName";
        case Errc::IncompatibleKind:     return "IncompatibleKind";
        case Errc::Infeasible:           return "Infeasible";
        case Errc::NotConverged:         return "NotConverged";
        case Errc::BadElasticity:        return "BadElasticity";
        case Errc::AccountingMismatch:   return "AccountingMismatch";
        case Errc::ConfigError:          return "ConfigError";
        case Errc::IoError:              return "IoError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

} // namespace ei
