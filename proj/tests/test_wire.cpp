#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fitsim/rng.hpp"
#include "fitsim/wire.hpp"

using namespace fitsim;
using namespace fitsim::wire;

namespace {

Opcode random_opcode(Rng& rng) {
    Opcode op;
    switch (rng.uniform(0, 4)) {
        case 0: op.kind = OpKind::TrqReq; break;
        case 1:
            op.kind = OpKind::ReadTrq;
            op.bank = static_cast<std::uint8_t>(rng.uniform(0, 255));
            break;
        case 2:
            op.kind = OpKind::Write;
            op.bank = static_cast<std::uint8_t>(rng.uniform(0, 255));
            op.data_length = static_cast<std::uint8_t>(rng.uniform(0, 255));
            break;
        case 3:
            op.kind = OpKind::Erase;
            op.bank = static_cast<std::uint8_t>(rng.uniform(0, 255));
            op.deadline = static_cast<std::uint32_t>(rng.uniform(0, 0xffffffffULL));
            break;
        default: op.kind = OpKind::Close; break;
    }
    return op;
}

FitnessRecord random_record(Rng& rng) {
    FitnessRecord r;
    r.timestamp = static_cast<std::uint32_t>(rng.uniform(0, 0xffffffffULL));
    r.calories = static_cast<std::uint16_t>(rng.uniform(0, 0xffff));
    r.steps = static_cast<std::uint32_t>(rng.uniform(0, 0xffffffffULL));
    r.distance_cm = static_cast<std::uint32_t>(rng.uniform(0, 0xffffffffULL));
    r.floors = static_cast<std::uint16_t>(rng.uniform(0, 0xffff));
    return r;
}

}  // namespace

TEST_CASE("opcode fixed layouts") {
    CHECK(to_hex(encode_opcode({OpKind::TrqReq})) == "24000000000000");
    CHECK(to_hex(encode_opcode({OpKind::ReadTrq, 1})) == "22010000000000");
    CHECK(to_hex(encode_opcode({OpKind::Erase, 0, 0, 0})) == "25000000000000");
    CHECK(to_hex(encode_opcode({OpKind::Write, 1, 16})) == "23011000000000");
    CHECK(to_hex(encode_opcode({OpKind::Close})) == "26000000000000");

    // ERASE deadline is a 4-byte big-endian field after the bank index
    CHECK(to_hex(encode_opcode({OpKind::Erase, 3, 0, 0x01020304})) == "25030102030400");
}

TEST_CASE("opcode decode") {
    Opcode op = decode_opcode(from_hex("24000000000000"));
    CHECK(op.kind == OpKind::TrqReq);

    op = decode_opcode(from_hex("23011000000000"));
    CHECK(op.kind == OpKind::Write);
    CHECK(op.bank == 1);
    CHECK(op.data_length == 16);

    CHECK_THROWS_WITH_AS(decode_opcode(from_hex("ff000000000000")), doctest::Contains("MALFORMED"),
                         Error);
    CHECK_THROWS_AS(decode_opcode(from_hex("2400000000")), Error);        // short
    CHECK_THROWS_AS(decode_opcode(from_hex("240000000000000000")), Error);  // long
    CHECK_THROWS_AS(decode_opcode(from_hex("24010000000000")), Error);     // nonzero filler
}

TEST_CASE("opcode length errors carry LENGTH, not a partial value") {
    for (std::size_t n = 0; n < 12; ++n) {
        if (n == kOpcodeLen) continue;
        Bytes b(n, 0x24);
        try {
            decode_opcode(b);
            FAIL("accepted length " << n);
        } catch (const Error& e) {
            CHECK(e.code() == Err::Length);
        }
    }
}

TEST_CASE("opcode round trip over random valid opcodes") {
    Rng rng(42);
    for (int i = 0; i < 10000; ++i) {
        Opcode op = random_opcode(rng);
        Bytes b = encode_opcode(op);
        REQUIRE(b.size() == kOpcodeLen);
        REQUIRE(decode_opcode(b) == op);
    }
}

TEST_CASE("response codes") {
    CHECK(to_hex(encode_response({RespKind::Ok, {}})) == "41000000000000");
    CHECK(decode_response(from_hex("41000000000000")).kind == RespKind::Ok);
    CHECK_THROWS_AS(decode_response(from_hex("4100000000000001")), Error);
    CHECK_THROWS_AS(decode_response(from_hex("41000100000000")), Error);

    Response r{RespKind::TrqData, from_hex("deadbeef")};
    CHECK(decode_response(encode_response(r)) == r);
    CHECK_THROWS_AS(decode_response(from_hex("99")), Error);
    CHECK_THROWS_AS(decode_response(Bytes{}), Error);
}

TEST_CASE("record fixed layout") {
    CHECK(to_hex(encode_record({})) == "00000000000000000000000000000000");

    FitnessRecord r{1, 2, 3, 4, 5};
    CHECK(to_hex(encode_record(r)) == "00000001" "0002" "00000003" "00000004" "0005");
    CHECK(decode_record(encode_record(r)) == r);
}

TEST_CASE("record round trip, 10^4 random records") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        FitnessRecord r = random_record(rng);
        Bytes b = encode_record(r);
        REQUIRE(b.size() == kRecordLen);
        REQUIRE(decode_record(b) == r);
    }
}

TEST_CASE("record length errors") {
    for (std::size_t n : {0, 1, 15, 17, 32}) {
        if (n == kRecordLen) continue;
        try {
            decode_record(Bytes(n, 0));
            FAIL("accepted length " << n);
        } catch (const Error& e) {
            CHECK(e.code() == Err::Length);
        }
    }
    CHECK_THROWS_AS(decode_records(Bytes(24, 0)), Error);
    CHECK(decode_records(Bytes(32, 0)).size() == 2);
}

TEST_CASE("device info payload") {
    DeviceInfo d{"AB123", "1.47", true};
    CHECK(decode_device_info(encode_device_info(d)) == d);
    CHECK_THROWS_AS(encode_device_info({"toolong", "", false}), Error);
    CHECK_THROWS_AS(decode_device_info(from_hex("0000")), Error);
}

TEST_CASE("base64 reference vectors") {
    CHECK(base64_encode(to_bytes("")) == "");
    CHECK(base64_encode(to_bytes("f")) == "Zg==");
    CHECK(base64_encode(to_bytes("fo")) == "Zm8=");
    CHECK(base64_encode(to_bytes("foo")) == "Zm9v");
    CHECK(base64_encode(to_bytes("foob")) == "Zm9vYg==");
    CHECK(base64_encode(to_bytes("fooba")) == "Zm9vYmE=");
    CHECK(base64_encode(to_bytes("foobar")) == "Zm9vYmFy");
    CHECK(base64_decode("Zm9vYmFy") == to_bytes("foobar"));
    CHECK_THROWS_AS(base64_decode("Zm9"), Error);
    CHECK_THROWS_AS(base64_decode("Zm=v"), Error);
}

TEST_CASE("envelope wraps the body as base64 in one XML element") {
    Envelope e{"AB123", {}};
    std::string text = wrap_envelope(e);
    CHECK(text == "<tracker-data tracker-id=\"AB123\"></tracker-data>");
    CHECK(unwrap_envelope(text) == e);

    // reference base64 of the 7-byte device-info request
    e.body = encode_opcode({OpKind::TrqReq});
    text = wrap_envelope(e);
    CHECK(text.find("JAAAAAAAAA==") != std::string::npos);
    CHECK(unwrap_envelope(text) == e);

    CHECK_THROWS_AS(unwrap_envelope("<tracker-data tracker-id=\"X\">!!!!</tracker-data>"), Error);
    CHECK_THROWS_AS(unwrap_envelope("<other>JAAA</other>"), Error);
}

TEST_CASE("envelope round trip over random bodies") {
    Rng rng(99);
    for (int i = 0; i < 10000; ++i) {
        Envelope e;
        e.tracker_id = "T" + std::to_string(rng.uniform(0, 9999));
        e.body = rng.bytes(rng.uniform(0, 64));
        REQUIRE(unwrap_envelope(wrap_envelope(e)) == e);
    }
}

TEST_CASE("bank image shape rules") {
    using wire::BankImage;
    CHECK_NOTHROW(wire::validate_bank_image({0, BankImage::Kind::Write, Bytes(64, 0)}));
    CHECK_THROWS_AS(wire::validate_bank_image({0, BankImage::Kind::Write, Bytes(63, 0)}), Error);
    CHECK_NOTHROW(wire::validate_bank_image({1, BankImage::Kind::Write, Bytes(16, 0)}));
    CHECK_THROWS_AS(wire::validate_bank_image({1, BankImage::Kind::Write, Bytes(32, 0)}), Error);
    CHECK_NOTHROW(wire::validate_bank_image({1, BankImage::Kind::Read, Bytes(48, 0)}));
    CHECK_THROWS_AS(wire::validate_bank_image({2, BankImage::Kind::Read, Bytes(40, 0)}), Error);
    CHECK_NOTHROW(wire::validate_bank_image({5, BankImage::Kind::Read, Bytes(3, 0)}));  // aux blob
}

TEST_CASE("tlv round trip and truncation") {
    std::vector<TlvItem> items{{tag::Serial, to_bytes("AB123")},
                               {tag::Opcode, encode_opcode({OpKind::TrqReq})},
                               {tag::Data, {}}};
    Bytes b = encode_tlv(items);
    CHECK(decode_tlv(b) == items);

    Bytes cut(b.begin(), b.end() - 1);
    CHECK_THROWS_AS(decode_tlv(cut), Error);
    CHECK_THROWS_AS(decode_tlv(from_hex("01")), Error);

    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        std::vector<TlvItem> v;
        int n = static_cast<int>(rng.uniform(0, 5));
        for (int j = 0; j < n; ++j)
            v.push_back({static_cast<std::uint8_t>(rng.uniform(1, 17)), rng.bytes(rng.uniform(0, 40))});
        REQUIRE(decode_tlv(encode_tlv(v)) == v);
    }
}
