#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ei {

/// Error categories raised across the library. Each operation documents which
/// subset it can produce; callers distinguish them via Error::code().
enum class Errc {
    // codec
    BadLength,
    BadChecksum,
    InvariantViolation,
    // identity / ledger
    DuplicateMac,
    InvalidMac,
    UnknownMac,
    SelfTrade,
    NotSettleKind,
    // protocol stack
    SubnetFull,
    Unroutable,
    HandshakeTimeout,
    ResetByPeer,
    NotEstablished,
    StaticLimitExceeded,
    DynamicLimitExceeded,
    TtlExpired,
    ChecksumFailure,
    DeliveryFailed,
    UnknownName,
    // matching
    IncompatibleKind,
    // grid
    Infeasible,
    NotConverged,
    BadElasticity,
    AccountingMismatch,
    // plumbing
    ConfigError,
    IoError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

} // namespace ei
