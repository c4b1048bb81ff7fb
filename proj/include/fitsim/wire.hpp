#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fitsim/bytes.hpp"
#include "fitsim/errors.hpp"

// Wire formats for the tracker/base/webserver protocol: 7-byte command words,
// 16-byte fitness records, memory-bank images, and the base64-in-XML transport
// envelope used on the base<->webserver leg. All multi-byte fields are
// big-endian. Layouts are normative for the whole simulator; see
// docs/protocol.md.

namespace fitsim::wire {

inline constexpr std::size_t kOpcodeLen = 7;
inline constexpr std::size_t kRecordLen = 16;
inline constexpr std::size_t kSettingsBankLen = 64;

// ---------------------------------------------------------------------------
// Opcodes: commands sent webserver -> tracker
// ---------------------------------------------------------------------------

enum class OpKind : std::uint8_t {
    TrqReq = 0x24,   // retrieve device information
    ReadTrq = 0x22,  // read a memory bank
    Write = 0x23,    // overwrite a write bank
    Erase = 0x25,    // clear records up to a deadline
    Close = 0x26,    // end of session (byte value is simulator-assigned)
};

struct Opcode {
    OpKind kind = OpKind::TrqReq;
    std::uint8_t bank = 0;         // ReadTrq / Write / Erase
    std::uint8_t data_length = 0;  // Write
    std::uint32_t deadline = 0;    // Erase, seconds

    bool operator==(const Opcode&) const = default;
};

inline Bytes encode_opcode(const Opcode& op) {
    Bytes out(kOpcodeLen, 0x00);
    out[0] = static_cast<std::uint8_t>(op.kind);
    switch (op.kind) {
        case OpKind::TrqReq:
        case OpKind::Close:
            if (op.bank || op.data_length || op.deadline)
                throw Error(Err::Range, "fields set on a bare opcode");
            break;
        case OpKind::ReadTrq:
            if (op.data_length || op.deadline) throw Error(Err::Range, "extra fields on READ-TRQ");
            out[1] = op.bank;
            break;
        case OpKind::Write:
            if (op.deadline) throw Error(Err::Range, "deadline on WRITE");
            out[1] = op.bank;
            out[2] = op.data_length;
            break;
        case OpKind::Erase:
            if (op.data_length) throw Error(Err::Range, "data length on ERASE");
            out[1] = op.bank;
            out[2] = static_cast<std::uint8_t>(op.deadline >> 24);
            out[3] = static_cast<std::uint8_t>(op.deadline >> 16);
            out[4] = static_cast<std::uint8_t>(op.deadline >> 8);
            out[5] = static_cast<std::uint8_t>(op.deadline);
            break;
    }
    return out;
}

inline Opcode decode_opcode(ByteSpan b) {
    if (b.size() != kOpcodeLen) throw Error(Err::Length, "opcode must be exactly 7 bytes");
    auto zeros_from = [&](std::size_t i) {
        for (; i < kOpcodeLen; ++i)
            if (b[i] != 0) throw Error(Err::Malformed, "nonzero filler byte");
    };
    Opcode op;
    switch (b[0]) {
        case 0x24:
            op.kind = OpKind::TrqReq;
            zeros_from(1);
            break;
        case 0x22:
            op.kind = OpKind::ReadTrq;
            op.bank = b[1];
            zeros_from(2);
            break;
        case 0x23:
            op.kind = OpKind::Write;
            op.bank = b[1];
            op.data_length = b[2];
            zeros_from(3);
            break;
        case 0x25:
            op.kind = OpKind::Erase;
            op.bank = b[1];
            op.deadline = get_u32be(b, 2);
            zeros_from(6);
            break;
        case 0x26:
            op.kind = OpKind::Close;
            zeros_from(1);
            break;
        default:
            throw Error(Err::Malformed, "unassigned opcode byte");
    }
    return op;
}

// ---------------------------------------------------------------------------
// Responses: tracker -> webserver
// ---------------------------------------------------------------------------

enum class RespKind : std::uint8_t {
    Ok = 0x41,       // bare acknowledgement, always exactly [0x41, 0 x6]
    TrqInfo = 0x42,  // device information reply
    TrqData = 0x43,  // memory bank contents
    Clear = 0x44,    // erase/close acknowledgement (session protocol)
};

struct Response {
    RespKind kind = RespKind::Ok;
    Bytes payload;

    bool operator==(const Response&) const = default;
};

inline Bytes encode_response(const Response& r) {
    if (r.kind == RespKind::Ok) {
        if (!r.payload.empty()) throw Error(Err::Range, "OK carries no payload");
        return Bytes{0x41, 0, 0, 0, 0, 0, 0};
    }
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(r.kind));
    out.insert(out.end(), r.payload.begin(), r.payload.end());
    return out;
}

inline Response decode_response(ByteSpan b) {
    if (b.empty()) throw Error(Err::Length, "empty response");
    switch (b[0]) {
        case 0x41: {
            if (b.size() != 7) throw Error(Err::Length, "OK must be exactly 7 bytes");
            for (std::size_t i = 1; i < 7; ++i)
                if (b[i] != 0) throw Error(Err::Malformed, "nonzero filler in OK");
            return {RespKind::Ok, {}};
        }
        case 0x42: return {RespKind::TrqInfo, Bytes(b.begin() + 1, b.end())};
        case 0x43: return {RespKind::TrqData, Bytes(b.begin() + 1, b.end())};
        case 0x44: return {RespKind::Clear, Bytes(b.begin() + 1, b.end())};
        default: throw Error(Err::Malformed, "unassigned response byte");
    }
}

// ---------------------------------------------------------------------------
// Fitness records: 16 bytes, timestamp/calories/steps/distance/floors
// ---------------------------------------------------------------------------

/// Distance is stored in device units of 1 cm (meters x 100).
struct FitnessRecord {
    std::uint32_t timestamp = 0;  // seconds since epoch
    std::uint16_t calories = 0;
    std::uint32_t steps = 0;
    std::uint32_t distance_cm = 0;
    std::uint16_t floors = 0;

    bool operator==(const FitnessRecord&) const = default;
};

inline Bytes encode_record(const FitnessRecord& r) {
    Bytes out;
    out.reserve(kRecordLen);
    put_u32be(out, r.timestamp);
    put_u16be(out, r.calories);
    put_u32be(out, r.steps);
    put_u32be(out, r.distance_cm);
    put_u16be(out, r.floors);
    return out;
}

inline FitnessRecord decode_record(ByteSpan b) {
    if (b.size() != kRecordLen) throw Error(Err::Length, "record must be exactly 16 bytes");
    FitnessRecord r;
    r.timestamp = get_u32be(b, 0);
    r.calories = get_u16be(b, 4);
    r.steps = get_u32be(b, 6);
    r.distance_cm = get_u32be(b, 10);
    r.floors = get_u16be(b, 14);
    return r;
}

inline Bytes encode_records(const std::vector<FitnessRecord>& rs) {
    Bytes out;
    out.reserve(rs.size() * kRecordLen);
    for (const auto& r : rs) {
        Bytes one = encode_record(r);
        out.insert(out.end(), one.begin(), one.end());
    }
    return out;
}

inline std::vector<FitnessRecord> decode_records(ByteSpan b) {
    if (b.size() % kRecordLen != 0) throw Error(Err::Length, "record bank not a multiple of 16");
    std::vector<FitnessRecord> out;
    out.reserve(b.size() / kRecordLen);
    for (std::size_t off = 0; off < b.size(); off += kRecordLen)
        out.push_back(decode_record(b.subspan(off, kRecordLen)));
    return out;
}

// ---------------------------------------------------------------------------
// Memory bank images
// ---------------------------------------------------------------------------

struct BankImage {
    enum class Kind { Read, Write };
    std::uint8_t index = 0;
    Kind kind = Kind::Read;
    Bytes bytes;

    bool operator==(const BankImage&) const = default;
};

/// Shape rules: write bank 0 is exactly the 64-byte settings image; write
/// bank 1 and the record banks hold whole 16-byte records.
inline void validate_bank_image(const BankImage& b) {
    if (b.kind == BankImage::Kind::Write) {
        if (b.index == 0 && b.bytes.size() != kSettingsBankLen)
            throw Error(Err::Length, "settings bank must be 64 bytes");
        if (b.index == 1 && b.bytes.size() != kRecordLen)
            throw Error(Err::Length, "write record bank is one 16-byte record");
    } else if (b.index == 1 || b.index == 2) {
        if (b.bytes.size() % kRecordLen != 0)
            throw Error(Err::Length, "record bank must be whole records");
    }
}

// ---------------------------------------------------------------------------
// Device information payload (TRQ-INFO)
// ---------------------------------------------------------------------------

struct DeviceInfo {
    std::string serial;    // exactly 5 bytes on the wire
    std::string firmware;  // length-prefixed
    bool on_base = false;

    bool operator==(const DeviceInfo&) const = default;
};

inline Bytes encode_device_info(const DeviceInfo& d) {
    if (d.serial.size() != 5) throw Error(Err::Range, "serial must be 5 bytes");
    if (d.firmware.size() > 255) throw Error(Err::Range, "firmware string too long");
    Bytes out(d.serial.begin(), d.serial.end());
    out.push_back(static_cast<std::uint8_t>(d.firmware.size()));
    out.insert(out.end(), d.firmware.begin(), d.firmware.end());
    out.push_back(d.on_base ? 1 : 0);
    return out;
}

inline DeviceInfo decode_device_info(ByteSpan b) {
    if (b.size() < 7) throw Error(Err::Length, "device info too short");
    DeviceInfo d;
    d.serial.assign(b.begin(), b.begin() + 5);
    std::size_t fw_len = b[5];
    if (b.size() != 7 + fw_len) throw Error(Err::Length, "device info length mismatch");
    d.firmware.assign(b.begin() + 6, b.begin() + 6 + fw_len);
    std::uint8_t flag = b[6 + fw_len];
    if (flag > 1) throw Error(Err::Malformed, "bad on-base flag");
    d.on_base = flag == 1;
    return d;
}

// ---------------------------------------------------------------------------
// TLV items: structure of envelope bodies on the wired leg
// ---------------------------------------------------------------------------

namespace tag {
inline constexpr std::uint8_t Opcode = 0x01;    // 7-byte command
inline constexpr std::uint8_t Data = 0x02;      // payload for the preceding WRITE
inline constexpr std::uint8_t Serial = 0x03;
inline constexpr std::uint8_t Firmware = 0x04;
inline constexpr std::uint8_t OnBase = 0x05;
inline constexpr std::uint8_t Tpi = 0x06;
inline constexpr std::uint8_t Upi = 0x07;
inline constexpr std::uint8_t Response = 0x08;  // raw response bytes
inline constexpr std::uint8_t BankIndex = 0x09;
inline constexpr std::uint8_t BankBytes = 0x0a;
inline constexpr std::uint8_t Platform = 0x0b;
inline constexpr std::uint8_t TrackerId = 0x0c;
inline constexpr std::uint8_t Sealed = 0x0d;    // authenticated envelope (secure mode)
inline constexpr std::uint8_t ErrorCode = 0x0e;
inline constexpr std::uint8_t User = 0x0f;
inline constexpr std::uint8_t Password = 0x10;
inline constexpr std::uint8_t Done = 0x11;
inline constexpr std::uint8_t Phase = 0x12;
}  // namespace tag

struct TlvItem {
    std::uint8_t tag = 0;
    Bytes value;

    bool operator==(const TlvItem&) const = default;
};

inline Bytes encode_tlv(const std::vector<TlvItem>& items) {
    Bytes out;
    for (const auto& it : items) {
        if (it.value.size() > 0xffff) throw Error(Err::Range, "TLV value too long");
        out.push_back(it.tag);
        put_u16be(out, static_cast<std::uint16_t>(it.value.size()));
        out.insert(out.end(), it.value.begin(), it.value.end());
    }
    return out;
}

inline std::vector<TlvItem> decode_tlv(ByteSpan b) {
    std::vector<TlvItem> out;
    std::size_t off = 0;
    while (off < b.size()) {
        if (off + 3 > b.size()) throw Error(Err::Length, "truncated TLV header");
        TlvItem it;
        it.tag = b[off];
        std::size_t len = get_u16be(b, off + 1);
        off += 3;
        if (off + len > b.size()) throw Error(Err::Length, "truncated TLV value");
        it.value.assign(b.begin() + off, b.begin() + off + len);
        off += len;
        out.push_back(std::move(it));
    }
    return out;
}

inline const TlvItem* find_tlv(const std::vector<TlvItem>& items, std::uint8_t tag) {
    for (const auto& it : items)
        if (it.tag == tag) return &it;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Transport envelope: base64 body inside one fixed XML element
// ---------------------------------------------------------------------------

struct Envelope {
    std::string tracker_id;
    Bytes body;

    bool operator==(const Envelope&) const = default;
};

namespace detail {
inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

inline std::string xml_unescape(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        auto take = [&](std::string_view ent, char repl) {
            if (s.substr(i, ent.size()) == ent) {
                out.push_back(repl);
                i += ent.size();
                return true;
            }
            return false;
        };
        if (take("&amp;", '&') || take("&lt;", '<') || take("&gt;", '>') || take("&quot;", '"')) continue;
        throw Error(Err::Malformed, "unknown XML entity");
    }
    return out;
}
}  // namespace detail

inline std::string wrap_envelope(const Envelope& e) {
    return "<tracker-data tracker-id=\"" + detail::xml_escape(e.tracker_id) + "\">" +
           base64_encode(e.body) + "</tracker-data>";
}

inline Envelope unwrap_envelope(std::string_view text) {
    constexpr std::string_view open = "<tracker-data tracker-id=\"";
    constexpr std::string_view mid = "\">";
    constexpr std::string_view close = "</tracker-data>";
    if (text.substr(0, open.size()) != open) throw Error(Err::Malformed, "bad envelope open tag");
    std::size_t id_end = text.find('"', open.size());
    if (id_end == std::string_view::npos) throw Error(Err::Malformed, "unterminated tracker-id");
    if (text.substr(id_end, mid.size()) != mid) throw Error(Err::Malformed, "bad attribute close");
    if (text.substr(text.size() - close.size()) != close) throw Error(Err::Malformed, "bad envelope close tag");
    Envelope e;
    e.tracker_id = detail::xml_unescape(text.substr(open.size(), id_end - open.size()));
    std::size_t body_begin = id_end + mid.size();
    std::size_t body_len = text.size() - close.size() - body_begin;
    e.body = base64_decode(text.substr(body_begin, body_len));
    return e;
}

}  // namespace fitsim::wire
