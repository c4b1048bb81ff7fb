#pragma once

#include <stdexcept>
#include <string>

namespace fitsim {

enum class Err {
    Range,          // field value exceeds its wire width
    Length,         // buffer shorter/longer than the fixed layout
    Malformed,      // unparseable input (unknown code, bad base64/xml, ...)
    BankRange,      // opcode names a memory bank the device does not have
    Dead,           // battery exhausted, device unresponsive
    Singular,       // calibration system has no positive solution
    UnknownTracker, // serial/id not present in the registry
    OutOfRange,     // radio peers farther apart than the range model allows
    Unreachable,    // relay target not connected
    Timeout,        // peer stopped answering mid-session
    ServerError,    // webserver refused a session step
    Protocol,       // endpoint called out of phase
    AuthFail,       // envelope failed authenticated decryption
    NoMatch,        // no pending bind with that nonce
    Expired,        // pending bind existed but lapsed
    Disconnected,   // retry budget exhausted, session id bumped
    NoTrace,        // mule check requested without a position trace
    BadParams,      // generator parameters outside the modeled regime
    Parse,          // scenario/report JSON rejected
};

inline const char* to_string(Err e) {
    switch (e) {
        case Err::Range: return "RANGE";
        case Err::Length: return "LENGTH";
        case Err::Malformed: return "MALFORMED";
        case Err::BankRange: return "BANK_RANGE";
        case Err::Dead: return "DEAD";
        case Err::Singular: return "SINGULAR";
        case Err::UnknownTracker: return "UNKNOWN_TRACKER";
        case Err::OutOfRange: return "OUT_OF_RANGE";
        case Err::Unreachable: return "UNREACHABLE";
        case Err::Timeout: return "TIMEOUT";
        case Err::ServerError: return "SERVER_ERROR";
        case Err::Protocol: return "PROTOCOL";
        case Err::AuthFail: return "AUTH_FAIL";
        case Err::NoMatch: return "NO_MATCH";
        case Err::Expired: return "EXPIRED";
        case Err::Disconnected: return "DISCONNECTED";
        case Err::NoTrace: return "NO_TRACE";
        case Err::BadParams: return "BAD_PARAMS";
        case Err::Parse: return "PARSE";
    }
    return "?";
}

class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Err code() const { return code_; }

private:
    Err code_;
};

}  // namespace fitsim
