#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fitsim/base.hpp"
#include "fitsim/rng.hpp"
#include "fitsim/webserver.hpp"

using namespace fitsim;

namespace {

struct BaselineWorld {
    Network net{3};
    Tracker tracker;
    Base base;
    Webserver ws;

    BaselineWorld() : tracker(cfg()), base({.id = "base1"}), ws(Webserver::make(DeviceMode::Baseline)) {
        net.add_node("TRK01", NodeKind::Tracker, {0, 0}, &tracker);
        net.add_node("base1", NodeKind::Base, {5, 0}, &base);
        net.add_node("ws", NodeKind::Webserver, {50, 50}, &ws);
        net.add_wired("base1", "ws");
        tracker.start(net);
        ws.register_tracker("TRK01", "TPI-1", crypto::Key{});
        ws.add_account("alice", "pw");
        ws.bind_directly("TRK01", "alice");
    }

    static Tracker::Config cfg() {
        Tracker::Config c;
        c.serial = "TRK01";
        return c;
    }
};

}  // namespace

TEST_CASE("badges: strictly above 40,000 daily steps") {
    Webserver ws(Webserver::make(DeviceMode::Baseline));
    Account a;
    a.steps = 40000;
    CHECK(ws.award_badges(a).count("Top Daily Step") == 0);  // boundary: no badge
    a.steps = 40001;
    CHECK(ws.award_badges(a).count("Top Daily Step") == 1);
    Account b;
    b.steps = 12580000;
    CHECK(ws.award_badges(b).count("Top Daily Step") == 1);
    Account z;
    CHECK(ws.award_badges(z).empty());
}

TEST_CASE("reward points formula and tier") {
    CHECK(reward_points(0, 0) == 0.0);
    CHECK(reward_points(0, 2000) == 200.0);
    CHECK(reward_points(100, 0) == 75.0);
    CHECK(reward_points(10, 10) == doctest::Approx(8.5));
    CHECK(reward_tier(200.0) == "$20 gift card");
    CHECK(reward_tier(199.9) == "");
}

TEST_CASE("consistency: the 12.58M-steps / 0.02-mile pair violates distance") {
    UserProfile p{0.7, 0.9, 1500.0};
    wire::FitnessRecord forged{0, 5, 12580000, 3219, 0};  // 0.02 miles = 3219 cm
    ConsistencyResult r = check_consistency(forged, p);
    CHECK_FALSE(r.ok);
    CHECK(r.violation == "distance");
}

TEST_CASE("consistency: plausible records pass, with and without the split") {
    UserProfile p{0.9, 0.9, 1500.0};
    wire::FitnessRecord rec{0, 790, 1000, 90000, 0};  // 1000 steps, 900 m, bmr-day calories
    CHECK(check_consistency(rec, p).ok);
    CHECK(check_consistency(rec, p, std::pair<std::uint64_t, std::uint64_t>{1000, 0}).ok);

    wire::FitnessRecord zero{};
    CHECK(check_consistency(zero, p).ok);

    // calories far below what the steps alone imply
    wire::FitnessRecord starved{0, 0, 100000, 100000 * 90, 0};
    ConsistencyResult r = check_consistency(starved, p);
    CHECK_FALSE(r.ok);
    CHECK(r.violation == "calories");
}

TEST_CASE("consistency holds for every tracker-produced record (closure)") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        UserProfile p;
        p.walk_stride_m = 0.4 + rng.real01();
        p.run_stride_m = 0.4 + rng.real01();
        p.bmr_kcal_per_day = 1000 + rng.uniform(0, 1500);
        Tracker::Config c;
        c.serial = "TRK01";
        c.profile = p;
        Tracker t(c);
        int events = static_cast<int>(rng.uniform(1, 10));
        for (int i = 0; i < events; ++i)
            t.record_activity(0, rng.uniform(0, 5000), rng.uniform(0, 2000), rng.uniform(0, 5),
                              rng.uniform(1, 4) * kMsPerHour);
        REQUIRE_FALSE(t.records().empty());
        ConsistencyResult r = check_consistency(t.records().back(), p);
        INFO("violation: " << r.violation);
        CHECK(r.ok);
    }
}

TEST_CASE("mule detection thresholds") {
    wire::FitnessRecord spun{0, 0, 1166, 104940, 0};  // stationary rope session
    GpsTrace stationary{{0, 0, 0}, {60000, 0.5, 0}, {120000, 0, 0}};
    CHECK(detect_mule(stationary, spun).kind == MuleVerdict::Kind::Rope);

    // a driven tracker: GPS 5.51 km against 1.44 km recorded
    wire::FitnessRecord wheel{0, 211, 1166, 144000, 0};
    GpsTrace drive{{0, 0, 0}, {600000, 2755, 0}, {1200000, 5510, 0}};
    MuleVerdict v = detect_mule(drive, wheel);
    CHECK(v.kind == MuleVerdict::Kind::Wheel);
    CHECK(v.gps_m / v.tracker_m == doctest::Approx(3.83).epsilon(0.01));

    // honest walk: ratio 1
    wire::FitnessRecord walk{0, 50, 1000, 90000, 0};
    GpsTrace walked{{0, 0, 0}, {600000, 450, 0}, {1200000, 900, 0}};
    CHECK(detect_mule(walked, walk).kind == MuleVerdict::Kind::None);

    // below both thresholds: a short stroll is not a mule
    wire::FitnessRecord idle{0, 2, 300, 20000, 0};
    CHECK(detect_mule(stationary, idle).kind == MuleVerdict::Kind::None);

    CHECK_THROWS_AS(detect_mule(GpsTrace{}, walk), Error);
    CHECK_THROWS_AS(detect_mule(GpsTrace{{0, 0, 0}}, walk), Error);
}

TEST_CASE("endpoint dispatch: upload returns the tracker id and the info opcode") {
    BaselineWorld w;
    auto reply = w.ws.dispatch(w.net, "base1", endpoint::kUploadData,
                               {"TRK01", wire::encode_tlv({{wire::tag::Platform, to_bytes("x")}})});
    const auto* op = wire::find_tlv(reply, wire::tag::Opcode);
    REQUIRE(op);
    CHECK(wire::decode_opcode(op->value).kind == wire::OpKind::TrqReq);
    const auto* tid = wire::find_tlv(reply, wire::tag::TrackerId);
    REQUIRE(tid);
    CHECK(to_string(tid->value) == "TRK01");
}

TEST_CASE("endpoint dispatch: lookup resolves ids; unknown serial rejected") {
    BaselineWorld w;
    w.ws.dispatch(w.net, "base1", endpoint::kUploadData, {"TRK01", {}});
    auto reply = w.ws.dispatch(
        w.net, "base1", endpoint::kLookupTracker,
        {"TRK01", wire::encode_tlv({{wire::tag::Serial, to_bytes("TRK01")},
                                    {wire::tag::Firmware, to_bytes("1.47")},
                                    {wire::tag::OnBase, {1}}})});
    const auto* tpi = wire::find_tlv(reply, wire::tag::Tpi);
    const auto* upi = wire::find_tlv(reply, wire::tag::Upi);
    REQUIRE(tpi);
    REQUIRE(upi);
    CHECK(to_string(upi->value) == "alice");
    int reads = 0;
    for (const auto& item : reply)
        if (item.tag == wire::tag::Opcode &&
            wire::decode_opcode(item.value).kind == wire::OpKind::ReadTrq)
            ++reads;
    CHECK(reads == 6);

    w.ws.dispatch(w.net, "base2", endpoint::kUploadData, {"NOONE", {}});
    CHECK_THROWS_AS(
        w.ws.dispatch(w.net, "base2", endpoint::kLookupTracker,
                      {"NOONE", wire::encode_tlv({{wire::tag::Serial, to_bytes("NOONE")}})}),
        Error);
}

TEST_CASE("no two registered trackers share a tracker public id") {
    Webserver ws(Webserver::make(DeviceMode::Baseline));
    std::set<std::string> tpis;
    for (int i = 0; i < 50; ++i) {
        std::string serial = "TRK" + std::to_string(10 + i);
        ws.register_tracker(serial, "TPI-" + serial, crypto::Key{});
        tpis.insert(ws.registry(serial).tpi);
    }
    CHECK(tpis.size() == 50);
}

TEST_CASE("out-of-phase clearData is a protocol error") {
    BaselineWorld w;
    CHECK_THROWS_AS(w.ws.dispatch(w.net, "base1", endpoint::kClearData, {"TRK01", {}}), Error);
    try {
        w.ws.dispatch(w.net, "base1", endpoint::kClearData, {"TRK01", {}});
    } catch (const Error& e) {
        CHECK(e.code() == Err::Protocol);
    }
}

TEST_CASE("malformed dump bodies are rejected, not half-applied") {
    BaselineWorld w;
    w.ws.dispatch(w.net, "base1", endpoint::kUploadData, {"TRK01", {}});
    w.ws.dispatch(w.net, "base1", endpoint::kLookupTracker,
                  {"TRK01", wire::encode_tlv({{wire::tag::Serial, to_bytes("TRK01")}})});
    // record bank not a multiple of 16 bytes
    CHECK_THROWS_AS(
        w.ws.dispatch(w.net, "base1", endpoint::kDumpData,
                      {"TRK01", wire::encode_tlv({{wire::tag::BankIndex, {kRecordBankA}},
                                                  {wire::tag::BankBytes, Bytes(10, 0)}})}),
        Error);
    CHECK(w.ws.account("alice").steps == 0);
}

TEST_CASE("baseline dump accepts any well-formed records, no questions asked") {
    BaselineWorld w;
    w.ws.dispatch(w.net, "base1", endpoint::kUploadData, {"TRK01", {}});
    w.ws.dispatch(w.net, "base1", endpoint::kLookupTracker,
                  {"TRK01", wire::encode_tlv({{wire::tag::Serial, to_bytes("TRK01")}})});
    wire::FitnessRecord absurd{0, 5, 12580000, 3219, 0};
    auto reply = w.ws.dispatch(
        w.net, "base1", endpoint::kDumpData,
        {"TRK01", wire::encode_tlv({{wire::tag::BankIndex, {kRecordBankA}},
                                    {wire::tag::BankBytes, wire::encode_records({absurd})}})});
    CHECK(w.ws.account("alice").steps == 12580000);
    CHECK(w.ws.account("alice").badges.count("Top Daily Step") == 1);

    // phase-4 reply: two writes (with payloads) and five erases
    int writes = 0, erases = 0;
    for (const auto& item : reply) {
        if (item.tag != wire::tag::Opcode) continue;
        auto op = wire::decode_opcode(item.value);
        if (op.kind == wire::OpKind::Write) ++writes;
        if (op.kind == wire::OpKind::Erase) ++erases;
    }
    CHECK(writes == 2);
    CHECK(erases == 5);
}

TEST_CASE("the same dump is flagged once the consistency checker is on") {
    BaselineWorld w;
    w.ws.set_consistency_check(true);
    w.ws.dispatch(w.net, "base1", endpoint::kUploadData, {"TRK01", {}});
    w.ws.dispatch(w.net, "base1", endpoint::kLookupTracker,
                  {"TRK01", wire::encode_tlv({{wire::tag::Serial, to_bytes("TRK01")}})});
    wire::FitnessRecord absurd{0, 5, 12580000, 3219, 0};
    w.ws.dispatch(w.net, "base1", endpoint::kDumpData,
                  {"TRK01", wire::encode_tlv({{wire::tag::BankIndex, {kRecordBankA}},
                                              {wire::tag::BankBytes,
                                               wire::encode_records({absurd})}})});
    CHECK(w.ws.account("alice").steps == 0);
    CHECK(w.ws.dumps_rejected() == 1);
    REQUIRE_FALSE(w.ws.rejection_log().empty());
    CHECK(w.ws.rejection_log()[0].find("REJECTED_INCONSISTENT") != std::string::npos);
}

TEST_CASE("bind lifecycle: pending entries, confirmation, expiry, guesses") {
    BaselineWorld w;
    w.ws.add_account("bob", "pw2");

    std::uint32_t n = w.ws.bind_initiate(w.net, "TRK01", "base1");
    CHECK(n < 1000000);
    CHECK(w.ws.pending_bind_count() == 1);

    SUBCASE("correct nonce within the window binds") {
        CHECK(w.ws.bind_confirm(w.net.now(), "bob", n) == BindResult::Bound);
        CHECK(w.ws.registry("TRK01").upi == "bob");
        CHECK(w.ws.pending_bind_count() == 0);
    }
    SUBCASE("wrong nonce never matches") {
        CHECK(w.ws.bind_confirm(w.net.now(), "bob", (n + 1) % 1000000) == BindResult::NoMatch);
        CHECK(w.ws.registry("TRK01").upi == "alice");  // unchanged
    }
    SUBCASE("correct nonce after expiry is refused") {
        w.net.advance(fitlock::kBindExpiryMs + kMsPerSecond);
        CHECK(w.ws.bind_confirm(w.net.now(), "bob", n) == BindResult::Expired);
        CHECK(w.ws.registry("TRK01").upi == "alice");
    }
    SUBCASE("expired entries are pruned on the next initiate") {
        w.net.advance(fitlock::kBindExpiryMs + kMsPerSecond);
        w.ws.bind_initiate(w.net, "TRK01", "base1");
        CHECK(w.ws.pending_bind_count() == 1);
    }

    CHECK_THROWS_AS(w.ws.bind_initiate(w.net, "GHOST", "base1"), Error);
}

TEST_CASE("webserver snapshot never contains secret key bytes") {
    Webserver ws(Webserver::make(DeviceMode::Fitlock));
    crypto::Key key{};
    for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<std::uint8_t>(0xc0 + i);
    ws.register_tracker("TRK01", "TPI-1", key);
    ws.add_account("alice", "pw");
    std::string dump = ws.snapshot_json().dump();
    CHECK(dump.find(to_hex(ByteSpan(key.data(), 8))) == std::string::npos);
}
