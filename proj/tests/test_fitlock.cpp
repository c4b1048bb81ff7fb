#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fitsim/base.hpp"
#include "fitsim/fitlock.hpp"
#include "fitsim/tracker.hpp"
#include "fitsim/webserver.hpp"

using namespace fitsim;
using namespace fitsim::fitlock;

namespace {

crypto::Key test_key(std::uint8_t fill = 0x42) {
    crypto::Key k{};
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<std::uint8_t>(fill + i);
    return k;
}

/// One secured tracker, one base, one webserver, with an eavesdropping tap.
struct SecureWorld {
    Network net;
    crypto::Key key = test_key();
    Tracker tracker;
    Base base;
    Webserver ws;

    explicit SecureWorld(std::uint64_t seed = 7)
        : net(seed),
          tracker(tracker_cfg(key)),
          base({.id = "base1", .webserver = "ws", .mode = DeviceMode::Fitlock}),
          ws(Webserver::make(DeviceMode::Fitlock)) {
        net.add_node("TRK01", NodeKind::Tracker, {0, 0}, &tracker);
        net.add_node("base1", NodeKind::Base, {4, 0}, &base);
        net.add_node("ws", NodeKind::Webserver, {100, 100}, &ws);
        net.add_node("spy01", NodeKind::Attacker, {2, 0}, nullptr);
        net.add_wired("base1", "ws");
        net.add_tap("spy01", "TRK01", "base1");
        tracker.start(net);
        ws.register_tracker("TRK01", "TPI-1", key);
        ws.add_account("alice", "pw");
        ws.bind_directly("TRK01", "alice");
    }

    static Tracker::Config tracker_cfg(const crypto::Key& k) {
        Tracker::Config c;
        c.serial = "TRK01";
        c.mode = DeviceMode::Fitlock;
        c.key = k;
        return c;
    }

    SessionReport sync() {
        base.start_session(net, "TRK01");
        net.run_until([&] { return !base.busy(); }, 10 * kMsPerMinute);
        return base.last_report();
    }

    /// Decrypt everything the tap heard, request direction only.
    std::vector<Plain> captured_requests() {
        std::vector<Plain> out;
        for (const auto& cap : net.captured("spy01")) {
            if (cap.bytes.empty() || cap.bytes[0] != frame::Secure) continue;
            if (cap.from != "base1") continue;
            auto env = decode_envelope(ByteSpan(cap.bytes).subspan(1));
            REQUIRE(env);
            auto plain = open(key, *env);
            REQUIRE(plain);
            out.push_back(*plain);
        }
        return out;
    }
};

}  // namespace

TEST_CASE("envelope wire layout round-trips; short buffers are rejected") {
    Rng rng(1);
    crypto::Key k = test_key();
    Plain p{MsgType::ReadTrq, 5, 0, wire::encode_opcode({wire::OpKind::ReadTrq, 1})};
    SecureEnvelope e = seal(rng, k, "TRK01", p);
    Bytes b = encode_envelope(e);
    auto d = decode_envelope(b);
    REQUIRE(d);
    CHECK(*d == e);
    CHECK_FALSE(decode_envelope(ByteSpan(b).first(10)).has_value());
    CHECK_FALSE(decode_envelope(Bytes{}).has_value());

    auto opened = open(k, *d);
    REQUIRE(opened);
    CHECK(*opened == p);
}

TEST_CASE("open(seal(...)) round-trips; wrong key fails; tampering fails") {
    Rng rng(1);
    crypto::Key k = test_key(), other = test_key(0x99);
    Plain p{MsgType::TrqReq, 7, 0, {}};
    SecureEnvelope e = seal(rng, k, "TRK01", p);
    CHECK(open(k, e).has_value());
    CHECK_FALSE(open(other, e).has_value());

    // every single-bit flip of the encoded envelope is rejected
    Bytes b = encode_envelope(e);
    int rejected = 0, total = 0;
    for (std::size_t byte = 1 + 5; byte < b.size(); ++byte) {  // nonce + ciphertext + tag
        for (int bit = 0; bit < 8; ++bit) {
            Bytes mut = b;
            mut[byte] ^= static_cast<std::uint8_t>(1u << bit);
            ++total;
            auto env = decode_envelope(mut);
            if (!env || !open(k, *env)) ++rejected;
        }
    }
    CHECK(rejected == total);
}

TEST_CASE("sealing the same plaintext twice produces different ciphertexts") {
    Rng rng(1);
    crypto::Key k = test_key();
    Plain p{MsgType::TrqReq, 1, 0, {0x01}};
    SecureEnvelope a = seal(rng, k, "T", p);
    SecureEnvelope b = seal(rng, k, "T", p);
    CHECK(a.sealed != b.sealed);
    CHECK(a.nonce != b.nonce);
    CHECK(open(k, a) == open(k, b));
}

TEST_CASE("acceptance rule: session ids and per-type counters") {
    SessionCounters c;
    std::uint32_t s = 5;
    Plain req{MsgType::ReadTrq, 5, 0, {}};

    CHECK(judge(s, c, req, true) == Verdict::Accept);
    c.record_accepted(req.type, req.counter);
    CHECK(judge(s, c, req, true) == Verdict::Drop);  // exact replay

    req.counter = 1;
    CHECK(judge(s, c, req, true) == Verdict::Accept);

    req.session = 4;  // older session id: never accepted
    CHECK(judge(s, c, req, true) == Verdict::Drop);
    req.session = 6;  // larger by one: adopt and drop current session state
    CHECK(judge(s, c, req, true) == Verdict::AdoptNewSession);
    req.session = 7;  // too far ahead
    CHECK(judge(s, c, req, true) == Verdict::Drop);

    // responses are judged with the same machinery
    Plain resp{MsgType::TrqData, 5, 0, {}};
    CHECK(judge(s, c, resp, false) == Verdict::Accept);
    CHECK(judge(s, c, resp, true) == Verdict::Drop);  // a response is not a request
}

TEST_CASE("counters: distinct same-type requests keep climbing within a session") {
    SessionCounters c;
    CHECK(c.next_counter(MsgType::ReadTrq) == 0);
    CHECK(c.next_counter(MsgType::ReadTrq) == 1);
    CHECK(c.next_counter(MsgType::Write) == 0);
    c.reset();
    CHECK(c.next_counter(MsgType::ReadTrq) == 0);
}

TEST_CASE("bind challenge: fresh displays the nonce, stale and wrong-key drop silently") {
    SecureWorld w;
    w.net.advance(10 * kMsPerSecond);

    SUBCASE("fresh challenge displays a zero-padded nonce") {
        w.tracker.press_switch(w.net);
        std::uint32_t n = w.ws.bind_initiate(w.net, "TRK01", "base1");
        w.net.advance(kMsPerSecond);
        CHECK(w.tracker.displayed_bind_nonce() == format_nonce(n));
        CHECK(w.tracker.displayed_bind_nonce().size() == 6);
    }

    SUBCASE("stale challenge beyond the freshness window is ignored") {
        w.tracker.press_switch(w.net);
        BindChallenge stale{w.net.now() - 61 * kMsPerSecond, 123456};
        auto env = seal_bind(w.net.rng(), w.key, "TRK01", stale);
        w.tracker.on_message(w.net, "base1", make_frame(frame::Bind, encode_envelope(env)));
        CHECK(w.tracker.displayed_bind_nonce().empty());
    }

    SUBCASE("challenge under a different key is ignored") {
        w.tracker.press_switch(w.net);
        auto env = seal_bind(w.net.rng(), test_key(0x77), "TRK01",
                             BindChallenge{w.net.now(), 1234});
        w.tracker.on_message(w.net, "base1", make_frame(frame::Bind, encode_envelope(env)));
        CHECK(w.tracker.displayed_bind_nonce().empty());
    }

    SUBCASE("without the switch press the challenge is ignored") {
        auto env = seal_bind(w.net.rng(), w.key, "TRK01", BindChallenge{w.net.now(), 1234});
        w.tracker.on_message(w.net, "base1", make_frame(frame::Bind, encode_envelope(env)));
        CHECK(w.tracker.displayed_bind_nonce().empty());
    }
}

TEST_CASE("lossless session: every request sent once, counters start at zero") {
    SecureWorld w;
    SessionReport r = w.sync();
    REQUIRE(r.completed);
    CHECK(r.round_trips == 15);

    auto reqs = w.captured_requests();
    REQUIRE(reqs.size() == 15);
    for (const auto& p : reqs) {
        CHECK(p.session == 0);
        CHECK(is_request(p.type));
    }
    // first use of each type carries counter 0
    CHECK(reqs[0].type == MsgType::TrqReq);
    CHECK(reqs[0].counter == 0);
    CHECK(reqs[1].type == MsgType::ReadTrq);
    CHECK(reqs[1].counter == 0);
    // six reads climb 0..5
    for (std::uint32_t i = 0; i < 6; ++i) CHECK(reqs[1 + i].counter == i);

    CHECK(w.tracker.session_id() == 1);
    CHECK(w.ws.session_id("TRK01") == 1);
}

TEST_CASE("two dropped transmissions: the accepted request carries counter 2") {
    SecureWorld w;
    // connect ack passes, then the first two sealed requests vanish
    w.net.script_link("base1", "TRK01",
                      {{LinkDirective::Action::Deliver},
                       {LinkDirective::Action::Drop},
                       {LinkDirective::Action::Drop}});
    SessionReport r = w.sync();
    REQUIRE(r.completed);

    auto reqs = w.captured_requests();
    std::vector<std::uint32_t> trq_counters;
    for (const auto& p : reqs)
        if (p.type == MsgType::TrqReq) trq_counters.push_back(p.counter);
    CHECK(trq_counters == std::vector<std::uint32_t>{0, 1, 2});
    CHECK(w.tracker.session_id() == 1);
    CHECK(w.ws.session_id("TRK01") == 1);
}

TEST_CASE("response loss is repaired by retransmission, not duplication of effect") {
    SecureWorld w;
    w.tracker.record_activity(0, 300, 0, 0, kMsPerHour);
    // the connect ack passes, then two tracker replies vanish
    w.net.script_link("TRK01", "base1",
                      {{LinkDirective::Action::Deliver},
                       {LinkDirective::Action::Drop},
                       {LinkDirective::Action::Drop}});
    SessionReport r = w.sync();
    REQUIRE(r.completed);
    CHECK(w.ws.account("alice").steps == 300);  // merged exactly once
    CHECK(w.tracker.session_id() == w.ws.session_id("TRK01"));
}

TEST_CASE("dead link: retries exhaust, both ends converge on the next session id") {
    SecureWorld w;
    // connect passes; the original send and all three retransmissions vanish
    std::vector<LinkDirective> script{{LinkDirective::Action::Deliver},
                                      {LinkDirective::Action::Drop},
                                      {LinkDirective::Action::Drop},
                                      {LinkDirective::Action::Drop},
                                      {LinkDirective::Action::Drop}};
    w.net.script_link("base1", "TRK01", script);

    SessionReport r = w.sync();
    CHECK_FALSE(r.completed);
    CHECK(r.error == "DISCONNECTED");
    CHECK(w.ws.session_id("TRK01") == 1);   // bumped after exhausting retries
    CHECK(w.tracker.session_id() == 0);     // never heard a thing

    // next session: the tracker adopts the larger-by-one id and re-synchronizes
    w.net.advance(kMsPerMinute);
    SessionReport r2 = w.sync();
    REQUIRE(r2.completed);
    CHECK(w.tracker.session_id() == 2);
    CHECK(w.ws.session_id("TRK01") == 2);
}

TEST_CASE("session ids are strictly monotone across clean sessions") {
    SecureWorld w;
    for (std::uint32_t i = 1; i <= 3; ++i) {
        SessionReport r = w.sync();
        REQUIRE(r.completed);
        CHECK(w.tracker.session_id() == i);
        CHECK(w.ws.session_id("TRK01") == i);
        w.net.advance(16 * kMsPerMinute);  // past the sleep window
    }
}

TEST_CASE("replaying every captured request after the session yields zero acceptances") {
    SecureWorld w;
    SessionReport r = w.sync();
    REQUIRE(r.completed);

    std::uint64_t accepted_before = w.tracker.accepted_secure();
    for (const auto& cap : w.net.captured("spy01")) {
        if (cap.bytes.empty() || cap.bytes[0] != frame::Secure) continue;
        w.tracker.on_message(w.net, "spy01", cap.bytes);
    }
    CHECK(w.tracker.accepted_secure() == accepted_before);
    CHECK(w.tracker.dropped_replay() > 0);
    CHECK(w.tracker.battery().query_count() == 0);  // drops cost the victim nothing
}

TEST_CASE("plaintext opcodes are dead in secure mode") {
    SecureWorld w;
    Bytes cmd = make_frame(frame::Cmd, wire::encode_opcode({wire::OpKind::TrqReq}));
    w.tracker.on_message(w.net, "spy01", cmd);
    CHECK(w.tracker.dropped_plaintext() == 1);
    CHECK(w.tracker.battery().query_count() == 0);
}

TEST_CASE("envelopes relayed by the base are bit-identical at both ends") {
    SecureWorld w;
    SessionReport r = w.sync();
    REQUIRE(r.completed);

    // every sealed frame the tracker received must appear, byte for byte,
    // inside an earlier wired message from the webserver
    std::vector<Bytes> wired_sealed;
    std::vector<Bytes> radio_sealed;
    for (const auto& e : w.net.event_log()) {
        if (e.type != "send") continue;
        Bytes raw = from_hex(e.detail);
        if (e.from == "ws") {
            auto msg = decode_wired(raw);
            if (!msg) continue;
            for (const auto& item : wire::decode_tlv(msg->env.body))
                if (item.tag == wire::tag::Sealed) wired_sealed.push_back(item.value);
        } else if (e.from == "base1" && !raw.empty() && raw[0] == frame::Secure) {
            radio_sealed.push_back(Bytes(raw.begin() + 1, raw.end()));
        }
    }
    REQUIRE(radio_sealed.size() == 15);
    for (const auto& env : radio_sealed) {
        bool found = false;
        for (const auto& ws_env : wired_sealed) found = found || ws_env == env;
        CHECK(found);
    }
}
