#pragma once

#include <optional>
#include <string>

#include "fitsim/wire.hpp"

// Framing for the base<->webserver leg. Every body is the XML transport
// envelope (base64 of TLV items), matching the protocol's HTTP-carried
// blocks; the preamble adds a kind, an endpoint path and a transaction id so
// responses pair with requests. Pushes are unsolicited (retransmission
// relays and aborts).

namespace fitsim {

namespace endpoint {
inline constexpr const char* kUploadData = "/device/tracker/uploadData";
inline constexpr const char* kLookupTracker = "/device/tracker/dumpData/lookupTracker";
inline constexpr const char* kDumpData = "/device/tracker/dumpData/dumpData";
inline constexpr const char* kClearData = "/device/tracker/dumpData/clearDataConfigTracker";
inline constexpr const char* kLogin = "/login";
// simulator control paths for the secure mode's retransmission channel
inline constexpr const char* kRelay = "/relay";
inline constexpr const char* kRelayResp = "/relay/resp";
inline constexpr const char* kRelayBind = "/relay/bind";
inline constexpr const char* kAbort = "/relay/abort";
}  // namespace endpoint

struct WiredMsg {
    enum class Kind : std::uint8_t { Request = 0x10, Response = 0x11, Push = 0x12 };
    Kind kind = Kind::Request;
    std::string path;
    std::uint32_t txn = 0;
    wire::Envelope env;

    bool operator==(const WiredMsg&) const = default;
};

inline Bytes encode_wired(const WiredMsg& m) {
    if (m.path.size() > 255) throw Error(Err::Range, "path too long");
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(m.kind));
    out.push_back(static_cast<std::uint8_t>(m.path.size()));
    out.insert(out.end(), m.path.begin(), m.path.end());
    put_u32be(out, m.txn);
    std::string xml = wire::wrap_envelope(m.env);
    out.insert(out.end(), xml.begin(), xml.end());
    return out;
}

inline std::optional<WiredMsg> decode_wired(ByteSpan b) {
    if (b.size() < 6) return std::nullopt;
    auto k = b[0];
    if (k < 0x10 || k > 0x12) return std::nullopt;
    WiredMsg m;
    m.kind = static_cast<WiredMsg::Kind>(k);
    std::size_t path_len = b[1];
    if (b.size() < 2 + path_len + 4) return std::nullopt;
    m.path.assign(b.begin() + 2, b.begin() + 2 + path_len);
    m.txn = get_u32be(b, 2 + path_len);
    try {
        m.env = wire::unwrap_envelope(
            std::string_view(reinterpret_cast<const char*>(b.data()) + 6 + path_len,
                             b.size() - 6 - path_len));
    } catch (const Error&) {
        return std::nullopt;
    }
    return m;
}

}  // namespace fitsim
