#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <string>

#include "fitsim/crypto.hpp"
#include "fitsim/rng.hpp"
#include "fitsim/simnet.hpp"
#include "fitsim/wire.hpp"

// Authenticated session channel between tracker and webserver. Every message
// is sealed under the tracker's pre-shared 256-bit key; the cleartext carries
// only the tracker id, which the base uses for routing. Inside the seal:
// message type, session id, per-type transmission counter, payload. Receivers
// accept a message only if it authenticates, names the current session, and
// carries a counter strictly above the last one seen for that type — replays
// and forgeries are dropped without a reply.

namespace fitsim::fitlock {

inline constexpr SimTime kRetransmitTimeoutMs = 500;  // delta-t
inline constexpr int kMaxRetries = 3;                 // r
inline constexpr SimTime kBindFreshnessMs = 60 * kMsPerSecond;
inline constexpr SimTime kBindExpiryMs = 120 * kMsPerSecond;
inline constexpr std::uint32_t kNonceSpace = 1000000;  // 6-digit bind nonces

enum class MsgType : std::uint8_t {
    // requests, webserver -> tracker
    TrqReq = 0x01,
    ReadTrq = 0x02,
    Write = 0x03,
    Erase = 0x04,
    Close = 0x05,
    // responses, tracker -> webserver
    TrqInfo = 0x11,
    TrqData = 0x12,
    Clear = 0x13,
};

inline bool is_request(MsgType t) {
    switch (t) {
        case MsgType::TrqReq:
        case MsgType::ReadTrq:
        case MsgType::Write:
        case MsgType::Erase:
        case MsgType::Close: return true;
        default: return false;
    }
}

inline bool is_response(MsgType t) {
    switch (t) {
        case MsgType::TrqInfo:
        case MsgType::TrqData:
        case MsgType::Clear: return true;
        default: return false;
    }
}

inline MsgType expected_response(MsgType req) {
    switch (req) {
        case MsgType::TrqReq: return MsgType::TrqInfo;
        case MsgType::ReadTrq: return MsgType::TrqData;
        default: return MsgType::Clear;  // Write / Erase / Close acknowledge with CLEAR
    }
}

inline const char* to_string(MsgType t) {
    switch (t) {
        case MsgType::TrqReq: return "TRQ-REQ";
        case MsgType::ReadTrq: return "READ-TRQ";
        case MsgType::Write: return "WRITE";
        case MsgType::Erase: return "ERASE";
        case MsgType::Close: return "CLOSE";
        case MsgType::TrqInfo: return "TRQ-INFO";
        case MsgType::TrqData: return "TRQ-DATA";
        case MsgType::Clear: return "CLEAR";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Sealed plaintext layout: [type u8][session u32][counter u32][payload]
// ---------------------------------------------------------------------------

struct Plain {
    MsgType type = MsgType::TrqReq;
    std::uint32_t session = 0;
    std::uint32_t counter = 0;
    Bytes payload;

    bool operator==(const Plain&) const = default;
};

inline Bytes encode_plain(const Plain& p) {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(p.type));
    put_u32be(out, p.session);
    put_u32be(out, p.counter);
    out.insert(out.end(), p.payload.begin(), p.payload.end());
    return out;
}

inline std::optional<Plain> decode_plain(ByteSpan b) {
    if (b.size() < 9) return std::nullopt;
    Plain p;
    auto t = b[0];
    if (!is_request(static_cast<MsgType>(t)) && !is_response(static_cast<MsgType>(t)))
        return std::nullopt;
    p.type = static_cast<MsgType>(t);
    p.session = get_u32be(b, 1);
    p.counter = get_u32be(b, 5);
    p.payload.assign(b.begin() + 9, b.end());
    return p;
}

// ---------------------------------------------------------------------------
// Envelope wire layout: [id_len u8][id][nonce 12B][ciphertext][tag 16B]
// The cleartext id doubles as associated data, so it cannot be re-pointed.
// ---------------------------------------------------------------------------

struct SecureEnvelope {
    std::string tracker_id;
    crypto::Nonce nonce{};
    Bytes sealed;  // ciphertext || tag

    bool operator==(const SecureEnvelope&) const = default;
};

inline Bytes encode_envelope(const SecureEnvelope& e) {
    if (e.tracker_id.empty() || e.tracker_id.size() > 255)
        throw Error(Err::Range, "tracker id length");
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(e.tracker_id.size()));
    out.insert(out.end(), e.tracker_id.begin(), e.tracker_id.end());
    out.insert(out.end(), e.nonce.begin(), e.nonce.end());
    out.insert(out.end(), e.sealed.begin(), e.sealed.end());
    return out;
}

inline std::optional<SecureEnvelope> decode_envelope(ByteSpan b) {
    if (b.size() < 1) return std::nullopt;
    std::size_t id_len = b[0];
    if (id_len == 0 || b.size() < 1 + id_len + crypto::kNonceLen + crypto::kTagLen)
        return std::nullopt;
    SecureEnvelope e;
    e.tracker_id.assign(b.begin() + 1, b.begin() + 1 + id_len);
    std::copy(b.begin() + 1 + id_len, b.begin() + 1 + id_len + crypto::kNonceLen, e.nonce.begin());
    e.sealed.assign(b.begin() + 1 + id_len + crypto::kNonceLen, b.end());
    return e;
}

inline SecureEnvelope seal(Rng& rng, const crypto::Key& key, const std::string& tracker_id,
                           const Plain& p) {
    SecureEnvelope e;
    e.tracker_id = tracker_id;
    Bytes nb = rng.bytes(crypto::kNonceLen);
    std::copy(nb.begin(), nb.end(), e.nonce.begin());
    e.sealed = crypto::aead_seal(key, e.nonce, to_bytes(tracker_id), encode_plain(p));
    return e;
}

/// Authenticated open. Empty on wrong key, any tamper, or an unparseable
/// inner layout — the caller treats all of those as a silent drop.
inline std::optional<Plain> open(const crypto::Key& key, const SecureEnvelope& e) {
    auto pt = crypto::aead_open(key, e.nonce, to_bytes(e.tracker_id), e.sealed);
    if (!pt) return std::nullopt;
    return decode_plain(*pt);
}

// ---------------------------------------------------------------------------
// Bind challenge: sealed ("WS", issue time, 6-digit nonce)
// ---------------------------------------------------------------------------

struct BindChallenge {
    SimTime issued_ms = 0;
    std::uint32_t nonce_value = 0;  // in [0, 999999]

    bool operator==(const BindChallenge&) const = default;
};

inline SecureEnvelope seal_bind(Rng& rng, const crypto::Key& key, const std::string& tracker_id,
                                const BindChallenge& c) {
    Bytes pt;
    pt.push_back('W');
    pt.push_back('S');
    put_u64be(pt, c.issued_ms);
    put_u32be(pt, c.nonce_value);
    SecureEnvelope e;
    e.tracker_id = tracker_id;
    Bytes nb = rng.bytes(crypto::kNonceLen);
    std::copy(nb.begin(), nb.end(), e.nonce.begin());
    e.sealed = crypto::aead_seal(key, e.nonce, to_bytes(tracker_id), pt);
    return e;
}

inline std::optional<BindChallenge> open_bind(const crypto::Key& key, const SecureEnvelope& e) {
    auto pt = crypto::aead_open(key, e.nonce, to_bytes(e.tracker_id), e.sealed);
    if (!pt || pt->size() != 14) return std::nullopt;
    if ((*pt)[0] != 'W' || (*pt)[1] != 'S') return std::nullopt;  // issuer tag must match
    BindChallenge c;
    c.issued_ms = get_u64be(*pt, 2);
    c.nonce_value = get_u32be(*pt, 10);
    if (c.nonce_value >= kNonceSpace) return std::nullopt;
    return c;
}

/// Display form of a bind nonce: zero-padded so leading zeros stay enterable.
inline std::string format_nonce(std::uint32_t n) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%06u", n);
    return buf;
}

// ---------------------------------------------------------------------------
// Per-session counter bookkeeping, symmetric on both ends
// ---------------------------------------------------------------------------

class SessionCounters {
public:
    void reset() {
        last_seen_.clear();
        next_send_.clear();
    }

    /// Stored high-water mark for a type; -1 until something was accepted.
    std::int64_t last_seen(MsgType t) const {
        auto it = last_seen_.find(static_cast<std::uint8_t>(t));
        return it == last_seen_.end() ? -1 : it->second;
    }

    bool accepts(MsgType t, std::uint32_t counter) const {
        return static_cast<std::int64_t>(counter) > last_seen(t);
    }

    void record_accepted(MsgType t, std::uint32_t counter) {
        last_seen_[static_cast<std::uint8_t>(t)] = counter;
    }

    /// Counter for the next transmission of this type: 0 for the first use of
    /// a type in a session, then strictly increasing across fresh sends and
    /// retransmissions alike.
    std::uint32_t next_counter(MsgType t) {
        return next_send_[static_cast<std::uint8_t>(t)]++;
    }

private:
    std::map<std::uint8_t, std::int64_t> last_seen_;
    std::map<std::uint8_t, std::uint32_t> next_send_;
};

enum class Verdict { Accept, AdoptNewSession, Drop };

/// Receiver-side acceptance rule for a decrypted message.
inline Verdict judge(std::uint32_t current_session, const SessionCounters& counters,
                     const Plain& p, bool expect_request) {
    if (expect_request ? !is_request(p.type) : !is_response(p.type)) return Verdict::Drop;
    if (p.session == current_session)
        return counters.accepts(p.type, p.counter) ? Verdict::Accept : Verdict::Drop;
    if (p.session == current_session + 1) return Verdict::AdoptNewSession;
    return Verdict::Drop;  // older or far-future session ids are never accepted
}

}  // namespace fitsim::fitlock
