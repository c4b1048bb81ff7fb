#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fitsim/scenario.hpp"

// Bundled scenarios, one per experiment: the plain upload session, each
// attack against an unprotected world and against a secured one, the battery
// regimes, the bind ceremony and its rush variant, and the replay storm.

namespace fitsim::scenarios {

namespace detail {

inline NodeSpec tracker(const std::string& id, double x, double y, const std::string& mode) {
    NodeSpec n;
    n.id = id;
    n.kind = "tracker";
    n.x_ft = x;
    n.y_ft = y;
    n.mode = mode;
    return n;
}

inline NodeSpec base(const std::string& id, double x, double y, const std::string& mode,
                     const std::string& ws) {
    NodeSpec n;
    n.id = id;
    n.kind = "base";
    n.x_ft = x;
    n.y_ft = y;
    n.mode = mode;
    n.webserver = ws;
    return n;
}

inline NodeSpec webserver(const std::string& id, const std::string& mode) {
    NodeSpec n;
    n.id = id;
    n.kind = "webserver";
    n.x_ft = 100;
    n.y_ft = 100;
    n.mode = mode;
    return n;
}

inline NodeSpec attacker(const std::string& id, double x, double y,
                         std::vector<std::pair<std::string, std::string>> taps = {}) {
    NodeSpec n;
    n.id = id;
    n.kind = "attacker";
    n.x_ft = x;
    n.y_ft = y;
    n.taps = std::move(taps);
    return n;
}

inline Directive step(const std::string& op, Json args = Json::object(),
                      const std::string& id = "") {
    return Directive{op, id, std::move(args)};
}

inline Directive expect(const std::string& kind, Json args) {
    args["kind"] = kind;
    return Directive{"expect", "", std::move(args)};
}

/// One unprotected world and one secured world side by side, with an
/// eavesdropper in radio reach of both trackers.
inline Scenario dual_world(const std::string& name) {
    Scenario s;
    s.name = name;
    s.nodes = {
        webserver("wsb", "BASELINE"),
        webserver("wsf", "FITLOCK"),
        base("baseb", 4, 0, "BASELINE", "wsb"),
        base("basef", 4, 8, "FITLOCK", "wsf"),
        tracker("TRK0B", 0, 0, "BASELINE"),
        tracker("TRK0F", 0, 8, "FITLOCK"),
        attacker("atk01", 0, 4, {{"TRK0F", "basef"}, {"TRK0B", "baseb"}}),
    };
    s.accounts = {{"alice", "pw-alice", "TRK0B"}, {"bob", "pw-bob", "TRK0F"}};
    return s;
}

}  // namespace detail

inline Scenario baseline_sync() {
    using namespace detail;
    Scenario s;
    s.name = "baseline-sync";
    s.description = "Plain upload session: login leaks credentials on the wire, the four "
                    "endpoints fire in order, records land in the account, banks are cleared.";
    s.nodes = {webserver("ws", "BASELINE"), base("base1", 5, 0, "BASELINE", "ws"),
               tracker("TRK01", 0, 0, "BASELINE")};
    s.accounts = {{"alice", "opensesame", "TRK01"}};
    s.steps = {
        step("login", {{"base", "base1"}, {"user", "alice"}, {"password", "opensesame"}}),
        step("record-activity",
             {{"tracker", "TRK01"}, {"walk_steps", 1000}, {"floors", 2}, {"hours", 1.0}}),
        step("sync", {{"base", "base1"}, {"tracker", "TRK01"}}, "s1"),
        expect("session", {{"of", "s1"}, {"completed", true}}),
        expect("endpoints", {{"of", "s1"},
                             {"paths", {endpoint::kUploadData, endpoint::kLookupTracker,
                                        endpoint::kDumpData, endpoint::kClearData}}}),
        expect("opcodes", {{"of", "s1"},
                           {"sequence", {"TRQ-REQ", "READ-TRQ[0]", "READ-TRQ[1]", "READ-TRQ[2]",
                                         "READ-TRQ[3]", "READ-TRQ[4]", "READ-TRQ[5]", "WRITE[0]",
                                         "WRITE[1]", "ERASE[1]", "ERASE[2]", "ERASE[3]",
                                         "ERASE[4]", "ERASE[5]", "CLOSE"}}}),
        expect("account", {{"webserver", "ws"}, {"upi", "alice"}, {"field", "steps"},
                           {"cmp", "eq"}, {"value", 1000}}),
        expect("banks-zeroed", {{"tracker", "TRK01"}}),
        expect("cleartext-captured", {{"needle", "opensesame"}}),
    };
    return s;
}

inline Scenario tpdc() {
    using namespace detail;
    Scenario s = dual_world("tpdc");
    s.description = "Private data capture: over-the-air reads recover the unprotected victim's "
                    "records; the secured victim yields only undecryptable ciphertext.";
    s.steps = {
        step("record-activity",
             {{"tracker", "TRK0B"}, {"walk_steps", 500}, {"run_steps", 100}, {"hours", 1.0}}),
        step("record-activity",
             {{"tracker", "TRK0F"}, {"walk_steps", 500}, {"run_steps", 100}, {"hours", 1.0}}),
        step("attack", {{"kind", "tpdc"}, {"attacker", "atk01"}, {"victim", "TRK0B"}}, "a1"),
        expect("attack-succeeded", {{"of", "a1"}, {"expected", true}}),
        step("sync", {{"base", "basef"}, {"tracker", "TRK0F"}}, "s1"),
        step("attack", {{"kind", "tpdc"}, {"attacker", "atk01"}, {"victim", "TRK0F"}}, "a2"),
        expect("attack-succeeded", {{"of", "a2"}, {"expected", false}}),
        expect("evidence", {{"of", "a2"}, {"key", "ciphertext_frames"}, {"min", 1}}),
    };
    return s;
}

inline Scenario ti() {
    using namespace detail;
    Scenario s = dual_world("ti");
    s.description = "Tracker injection: read-patch-write sets the victim's step count while "
                    "leaving every other byte untouched.";
    s.steps = {
        step("record-activity", {{"tracker", "TRK0B"}, {"walk_steps", 100}, {"hours", 0.5}}),
        step("record-activity", {{"tracker", "TRK0F"}, {"walk_steps", 100}, {"hours", 0.5}}),
        step("attack",
             {{"kind", "ti"}, {"attacker", "atk01"}, {"victim", "TRK0B"}, {"steps", 999999}},
             "a1"),
        expect("attack-succeeded", {{"of", "a1"}, {"expected", true}}),
        expect("evidence", {{"of", "a1"}, {"key", "only_step_bytes_changed"}, {"value", true}}),
        expect("display",
               {{"tracker", "TRK0B"}, {"metric", "steps"}, {"text", "999999"}, {"truncated", false}}),
        step("attack",
             {{"kind", "ti"}, {"attacker", "atk01"}, {"victim", "TRK0F"}, {"steps", 999999}},
             "a2"),
        expect("attack-succeeded", {{"of", "a2"}, {"expected", false}}),
        expect("display", {{"tracker", "TRK0F"}, {"metric", "steps"}, {"text", "100"}}),
    };
    return s;
}

inline Scenario uai_badge() {
    using namespace detail;
    Scenario s;
    s.name = "uai-badge";
    s.description = "Account injection through a corrupt base: 12.58M fabricated steps land in "
                    "the unprotected account and earn the top-steps badge; the secured world "
                    "rejects the forgery, and a consistency-checking webserver flags the "
                    "steps/distance pair even on the plaintext path.";
    s.nodes = {
        webserver("wsb", "BASELINE"), webserver("wsf", "FITLOCK"), webserver("wsc", "BASELINE"),
        base("baseb", 4, 0, "BASELINE", "wsb"), base("basef", 4, 8, "FITLOCK", "wsf"),
        base("basec", 4, 16, "BASELINE", "wsc"),
        tracker("TRK0B", 0, 0, "BASELINE"), tracker("TRK0F", 0, 8, "FITLOCK"),
        tracker("TRK0C", 0, 16, "BASELINE"),
    };
    s.nodes[2].consistency_check = true;  // wsc: plaintext protocol, checker enabled
    s.accounts = {{"alice", "pw", "TRK0B"}, {"bob", "pw", "TRK0F"}, {"carol", "pw", "TRK0C"}};
    s.steps = {
        step("attack",
             {{"kind", "uai"}, {"base", "baseb"}, {"webserver", "wsb"}, {"victim", "TRK0B"},
              {"upi", "alice"}, {"steps", 12580000}, {"distance_cm", 3219}},
             "u1"),
        expect("attack-succeeded", {{"of", "u1"}, {"expected", true}}),
        expect("account", {{"webserver", "wsb"}, {"upi", "alice"}, {"field", "steps"},
                           {"cmp", "eq"}, {"value", 12580000}}),
        expect("badge", {{"webserver", "wsb"}, {"upi", "alice"}, {"badge", "Top Daily Step"},
                         {"present", true}}),
        step("attack",
             {{"kind", "uai"}, {"base", "basef"}, {"webserver", "wsf"}, {"victim", "TRK0F"},
              {"upi", "bob"}, {"steps", 12580000}, {"distance_cm", 3219}},
             "u2"),
        expect("attack-succeeded", {{"of", "u2"}, {"expected", false}}),
        expect("account", {{"webserver", "wsf"}, {"upi", "bob"}, {"field", "steps"},
                           {"cmp", "eq"}, {"value", 0}}),
        expect("badge", {{"webserver", "wsf"}, {"upi", "bob"}, {"badge", "Top Daily Step"},
                         {"present", false}}),
        step("attack",
             {{"kind", "uai"}, {"base", "basec"}, {"webserver", "wsc"}, {"victim", "TRK0C"},
              {"upi", "carol"}, {"steps", 12580000}, {"distance_cm", 3219}},
             "u3"),
        expect("attack-succeeded", {{"of", "u3"}, {"expected", false}}),
        expect("rejection", {{"webserver", "wsc"}, {"needle", "REJECTED_INCONSISTENT"}}),
        expect("account", {{"webserver", "wsc"}, {"upi", "carol"}, {"field", "steps"},
                           {"cmp", "eq"}, {"value", 0}}),
    };
    return s;
}

inline Scenario uai_vs_fitlock() {
    using namespace detail;
    Scenario s;
    s.name = "uai-vs-fitlock";
    s.description = "Account injection, one leg per mode: succeeds against the plaintext "
                    "webserver, blocked by the sealed channel.";
    s.nodes = {
        webserver("wsb", "BASELINE"), webserver("wsf", "FITLOCK"),
        base("baseb", 4, 0, "BASELINE", "wsb"), base("basef", 4, 8, "FITLOCK", "wsf"),
        tracker("TRK0B", 0, 0, "BASELINE"), tracker("TRK0F", 0, 8, "FITLOCK"),
    };
    s.accounts = {{"alice", "pw", "TRK0B"}, {"bob", "pw", "TRK0F"}};
    s.steps = {
        step("attack",
             {{"kind", "uai"}, {"base", "baseb"}, {"webserver", "wsb"}, {"victim", "TRK0B"},
              {"upi", "alice"}, {"steps", 12580000}, {"distance_cm", 3219}},
             "u1"),
        step("attack",
             {{"kind", "uai"}, {"base", "basef"}, {"webserver", "wsf"}, {"victim", "TRK0F"},
              {"upi", "bob"}, {"steps", 12580000}, {"distance_cm", 3219}},
             "u2"),
        expect("attack-succeeded", {{"of", "u1"}, {"expected", true}}),
        expect("attack-succeeded", {{"of", "u2"}, {"expected", false}}),
    };
    return s;
}

inline Scenario reward_farm() {
    using namespace detail;
    Scenario s;
    s.name = "reward-farm";
    s.description = "Fabricated quarter-hourly uploads accrue fairly-active minutes; 2000 "
                    "minutes redeem as a $20 gift card. The sealed channel starves the farm.";
    s.nodes = {
        webserver("wsb", "BASELINE"), webserver("wsf", "FITLOCK"),
        base("baseb", 4, 0, "BASELINE", "wsb"), base("basef", 4, 8, "FITLOCK", "wsf"),
        tracker("TRK0B", 0, 0, "BASELINE"), tracker("TRK0F", 0, 8, "FITLOCK"),
    };
    s.accounts = {{"mallory", "pw", "TRK0B"}, {"bob", "pw", "TRK0F"}};
    s.steps = {
        step("attack",
             {{"kind", "reward-farm"}, {"base", "baseb"}, {"webserver", "wsb"},
              {"victim", "TRK0B"}, {"upi", "mallory"}, {"duration_min", 2000.0}},
             "r1"),
        expect("attack-succeeded", {{"of", "r1"}, {"expected", true}}),
        expect("account", {{"webserver", "wsb"}, {"upi", "mallory"}, {"field", "fairly_active_min"},
                           {"cmp", "near"}, {"value", 2000.0}, {"tol", 1e-6}}),
        expect("account", {{"webserver", "wsb"}, {"upi", "mallory"}, {"field", "points"},
                           {"cmp", "near"}, {"value", 200.0}, {"tol", 1e-6}}),
        expect("tier", {{"webserver", "wsb"}, {"upi", "mallory"}, {"tier", "$20 gift card"}}),
        step("attack",
             {{"kind", "reward-farm"}, {"base", "basef"}, {"webserver", "wsf"},
              {"victim", "TRK0F"}, {"upi", "bob"}, {"duration_min", 120.0}},
             "r2"),
        expect("attack-succeeded", {{"of", "r2"}, {"expected", false}}),
        expect("account", {{"webserver", "wsf"}, {"upi", "bob"}, {"field", "points"},
                           {"cmp", "eq"}, {"value", 0}}),
    };
    return s;
}

inline Scenario battery_modes() {
    using namespace detail;
    Scenario s;
    s.name = "battery-modes";
    s.description = "Re-simulates the three measured battery regimes with the calibrated "
                    "model: 29 days, 186.38 h, 32.71 h.";
    s.steps = {
        step("simulate-battery", {{"mode", "daily"}}, "m1"),
        step("simulate-battery", {{"mode", "quarter-hourly"}}, "m2"),
        step("simulate-battery", {{"mode", "query-flood"}}, "m3"),
        expect("lifetime", {{"of", "m1"}, {"hours", 696.0}, {"tol_pct", 1.0}}),
        expect("lifetime", {{"of", "m2"}, {"hours", 186.38}, {"tol_pct", 1.0}}),
        expect("lifetime", {{"of", "m3"}, {"hours", 32.71}, {"tol_pct", 1.0}}),
        expect("lifetime-ratio", {{"of", "m2"}, {"over", "m3"}, {"ratio", 5.63}, {"tol_pct", 2.0}}),
        expect("lifetime-ratio", {{"of", "m1"}, {"over", "m3"}, {"ratio", 21.28}, {"tol_pct", 2.0}}),
    };
    return s;
}

inline Scenario dos_overflow() {
    using namespace detail;
    Scenario s = dual_world("dos-overflow");
    s.description = "Display overflow: injected values past six digits lose their least "
                    "significant digits on the device.";
    s.steps = {
        step("record-activity", {{"tracker", "TRK0B"}, {"walk_steps", 120}, {"hours", 0.5}}),
        step("record-activity", {{"tracker", "TRK0F"}, {"walk_steps", 120}, {"hours", 0.5}}),
        step("attack",
             {{"kind", "dos"}, {"attacker", "atk01"}, {"victim", "TRK0B"}, {"steps", 1000000}},
             "d2"),
        expect("attack-succeeded", {{"of", "d2"}, {"expected", true}}),
        expect("display", {{"tracker", "TRK0B"}, {"metric", "steps"}, {"truncated", true}}),
        step("attack",
             {{"kind", "dos"}, {"attacker", "atk01"}, {"victim", "TRK0B"}, {"steps", 12580000}},
             "d1"),
        expect("attack-succeeded", {{"of", "d1"}, {"expected", true}}),
        expect("display",
               {{"tracker", "TRK0B"}, {"metric", "steps"}, {"text", "125800"}, {"truncated", true}}),
        step("attack",
             {{"kind", "dos"}, {"attacker", "atk01"}, {"victim", "TRK0F"}, {"steps", 12580000}},
             "d3"),
        expect("attack-succeeded", {{"of", "d3"}, {"expected", false}}),
        expect("display",
               {{"tracker", "TRK0F"}, {"metric", "steps"}, {"text", "120"}, {"truncated", false}}),
    };
    return s;
}

namespace detail {
inline Scenario mule_scenario(const std::string& name, const std::string& kind, Json gen_args,
                              Json expectations_gps) {
    using namespace detail;
    Scenario s;
    s.name = name;
    s.nodes = {
        webserver("wsb", "BASELINE"), webserver("wsf", "FITLOCK"),
        base("baseb", 4, 0, "BASELINE", "wsb"), base("basef", 4, 8, "FITLOCK", "wsf"),
        tracker("MULEB", 0, 0, "BASELINE"), tracker("MULEF", 0, 8, "FITLOCK"),
    };
    s.accounts = {{"mallory-b", "pw", "MULEB"}, {"mallory-f", "pw", "MULEF"}};

    Json g1 = gen_args;
    g1["kind"] = kind;
    g1["tracker"] = "MULEB";
    Json g2 = gen_args;
    g2["kind"] = kind;
    g2["tracker"] = "MULEF";

    s.steps = {
        step("mule", g1, "g1"),
        step("sync", {{"base", "baseb"}, {"tracker", "MULEB"}}, "s1"),
        expect("session", {{"of", "s1"}, {"completed", true}}),
        expect("mule-verdict", {{"of", "g1"}, {"verdict", kind}}),
        step("mule", g2, "g2"),
        step("sync", {{"base", "basef"}, {"tracker", "MULEF"}}, "s2"),
        expect("account", {{"webserver", "wsf"}, {"upi", "mallory-f"}, {"field", "steps"},
                           {"cmp", "eq"}, {"value", 0}}),
        expect("mule-flag", {{"webserver", "wsf"}, {"tracker", "MULEF"}, {"flag", kind}}),
    };
    for (auto& e : expectations_gps) {
        Directive d;
        d.op = "expect";
        d.args = e;
        s.steps.push_back(d);
    }
    return s;
}
}  // namespace detail

inline Scenario rope_mule() {
    Scenario s = detail::mule_scenario(
        "rope-mule", "rope",
        Json{{"rope_length_ft", 2.0}, {"revolutions", 600}, {"duration_min", 20.0}},
        Json::array({
            Json{{"kind", "result"}, {"of", "g1"}, {"key", "steps"}, {"cmp", "eq"}, {"value", 1200}},
            Json{{"kind", "account"}, {"webserver", "wsb"}, {"upi", "mallory-b"},
                 {"field", "steps"}, {"cmp", "eq"}, {"value", 1200}},
        }));
    s.description = "Tracker spun on a 2 ft rope: two steps per revolution, stationary GPS. "
                    "Credited by the unprotected webserver, flagged as a rope mule by the "
                    "GPS-aware one.";
    return s;
}

inline Scenario wheel_mule() {
    Scenario s = detail::mule_scenario(
        "wheel-mule", "wheel", Json{{"speed_kmh", 16.53}, {"duration_min", 20.0}},
        Json::array({
            Json{{"kind", "result"}, {"of", "g1"}, {"key", "steps"}, {"cmp", "eq"}, {"value", 1160}},
            Json{{"kind", "result"}, {"of", "g1"}, {"key", "gps_m"}, {"cmp", "near_pct"},
                 {"value", 5510.0}, {"tol_pct", 1.0}},
            Json{{"kind", "result"}, {"of", "g1"}, {"key", "tracker_distance_cm"},
                 {"cmp", "between"}, {"lo", 100000.0}, {"hi", 150000.0}},
            Json{{"kind", "account"}, {"webserver", "wsb"}, {"upi", "mallory-b"},
                 {"field", "steps"}, {"cmp", "eq"}, {"value", 1160}},
        }));
    s.description = "Tracker on a car wheel at 16.53 km/h for 20 minutes: 58 steps/min, GPS "
                    "covers 5.51 km while the tracker converts steps to about 1 km.";
    return s;
}

inline Scenario bind_ceremony() {
    using namespace detail;
    Scenario s;
    s.name = "bind-ceremony";
    s.description = "Nonce-display binding: a fresh challenge binds the tracker to the account; "
                    "stale confirmations expire; wrong nonces never match.";
    s.nodes = {webserver("ws", "FITLOCK"), base("base1", 5, 0, "FITLOCK", "ws"),
               tracker("TRK0F", 0, 0, "FITLOCK"), tracker("TRK1F", 0, 6, "FITLOCK")};
    s.accounts = {{"alice", "pw", ""}, {"bob", "pw", ""}};
    s.steps = {
        step("bind",
             {{"tracker", "TRK0F"}, {"base", "base1"}, {"webserver", "ws"}, {"account", "alice"},
              {"enter", "correct"}},
             "b1"),
        expect("bind-result", {{"of", "b1"}, {"result", "bound"}}),
        step("sync", {{"base", "base1"}, {"tracker", "TRK0F"}}, "s1"),
        expect("session", {{"of", "s1"}, {"completed", true}}),
        step("bind",
             {{"tracker", "TRK1F"}, {"base", "base1"}, {"webserver", "ws"}, {"account", "bob"},
              {"enter", "correct"}, {"confirm_delay_s", 130.0}},
             "b2"),
        expect("bind-result", {{"of", "b2"}, {"result", "expired"}}),
        step("bind",
             {{"tracker", "TRK1F"}, {"base", "base1"}, {"webserver", "ws"}, {"account", "bob"},
              {"enter", "wrong"}},
             "b3"),
        expect("bind-result", {{"of", "b3"}, {"result", "no_match"}}),
    };
    return s;
}

inline Scenario bind_rush() {
    using namespace detail;
    Scenario s;
    s.name = "bind-rush";
    s.description = "Rush attacker guessing the 6-digit bind nonce: success rate stays "
                    "statistically consistent with 1e-6 per guess.";
    s.nodes = {webserver("ws", "FITLOCK"), base("base1", 5, 0, "FITLOCK", "ws"),
               tracker("TRK0F", 0, 0, "FITLOCK")};
    s.accounts = {{"mallory", "pw", ""}};
    s.steps = {
        step("rush-bind",
             {{"tracker", "TRK0F"}, {"base", "base1"}, {"webserver", "ws"},
              {"account", "mallory"}, {"trials", 20000}, {"guesses", 100}},
             "r1"),
        expect("rush-stats", {{"of", "r1"}, {"max_sigma", 3.0}}),
    };
    return s;
}

inline Scenario replay_storm() {
    using namespace detail;
    Scenario s;
    s.name = "replay-storm";
    s.description = "Mutated and replayed envelopes against a secured tracker: zero acceptances, "
                    "zero per-query battery debits.";
    s.nodes = {webserver("ws", "FITLOCK"), base("base1", 4, 0, "FITLOCK", "ws"),
               tracker("TRK0F", 0, 0, "FITLOCK"),
               attacker("atk01", 0, 3, {{"TRK0F", "base1"}})};
    s.accounts = {{"alice", "pw", "TRK0F"}};
    s.steps = {
        step("record-activity", {{"tracker", "TRK0F"}, {"walk_steps", 400}, {"hours", 1.0}}),
        step("sync", {{"base", "base1"}, {"tracker", "TRK0F"}}, "s1"),
        expect("session", {{"of", "s1"}, {"completed", true}}),
        step("replay-storm",
             {{"victim", "TRK0F"}, {"attacker", "atk01"}, {"attempts", 2000}}, "r1"),
        expect("storm", {{"of", "r1"}, {"max_acceptances", 0}}),
        expect("query-debits", {{"tracker", "TRK0F"}, {"cmp", "eq"}, {"value", 0}}),
    };
    return s;
}

inline Scenario fitlock_full_suite() {
    using namespace detail;
    Scenario s;
    s.name = "fitlock-full-suite";
    s.description = "Same activity uploaded through both protocol variants: identical round-trip "
                    "counts on a lossless link, session ids advance in lockstep, and a lossy "
                    "retry still converges.";
    s.nodes = {
        webserver("wsb", "BASELINE"), webserver("wsf", "FITLOCK"),
        base("baseb", 4, 0, "BASELINE", "wsb"), base("basef", 4, 8, "FITLOCK", "wsf"),
        tracker("TRK0B", 0, 0, "BASELINE"), tracker("TRK0F", 0, 8, "FITLOCK"),
    };
    s.accounts = {{"alice", "pw", "TRK0B"}, {"bob", "pw", "TRK0F"}};
    s.link_scripts = {{"basef",
                       "TRK0F",
                       {{LinkDirective::Action::Deliver},
                        {LinkDirective::Action::Drop},
                        {LinkDirective::Action::Drop}}}};
    s.steps = {
        step("record-activity", {{"tracker", "TRK0B"}, {"walk_steps", 800}, {"hours", 1.0}}),
        step("record-activity", {{"tracker", "TRK0F"}, {"walk_steps", 800}, {"hours", 1.0}}),
        step("sync", {{"base", "baseb"}, {"tracker", "TRK0B"}}, "s1"),
        // the scripted drops hit this first secure session; retries recover it
        step("sync", {{"base", "basef"}, {"tracker", "TRK0F"}}, "s2"),
        expect("session", {{"of", "s1"}, {"completed", true}}),
        expect("session", {{"of", "s2"}, {"completed", true}}),
        expect("account", {{"webserver", "wsb"}, {"upi", "alice"}, {"field", "steps"},
                           {"cmp", "eq"}, {"value", 800}}),
        expect("account", {{"webserver", "wsf"}, {"upi", "bob"}, {"field", "steps"},
                           {"cmp", "eq"}, {"value", 800}}),
        expect("session-ids-equal", {{"tracker", "TRK0F"}, {"webserver", "wsf"}}),
        step("record-activity", {{"tracker", "TRK0B"}, {"walk_steps", 50}, {"hours", 0.2}}),
        step("record-activity", {{"tracker", "TRK0F"}, {"walk_steps", 50}, {"hours", 0.2}}),
        step("advance", {{"minutes", 16.0}}),  // past the post-session sleep
        step("sync", {{"base", "baseb"}, {"tracker", "TRK0B"}}, "s3"),
        step("sync", {{"base", "basef"}, {"tracker", "TRK0F"}}, "s4"),
        expect("parity", {{"of", "s3"}, {"over", "s4"}}),
        expect("session-ids-equal", {{"tracker", "TRK0F"}, {"webserver", "wsf"}}),
    };
    return s;
}

inline const std::map<std::string, std::function<Scenario()>>& registry() {
    static const std::map<std::string, std::function<Scenario()>> reg = {
        {"baseline-sync", baseline_sync},
        {"tpdc", tpdc},
        {"ti", ti},
        {"uai-badge", uai_badge},
        {"uai-vs-fitlock", uai_vs_fitlock},
        {"reward-farm", reward_farm},
        {"battery-modes", battery_modes},
        {"dos-overflow", dos_overflow},
        {"rope-mule", rope_mule},
        {"wheel-mule", wheel_mule},
        {"bind-ceremony", bind_ceremony},
        {"bind-rush", bind_rush},
        {"replay-storm", replay_storm},
        {"fitlock-full-suite", fitlock_full_suite},
    };
    return reg;
}

inline Scenario by_name(const std::string& name) {
    auto it = registry().find(name);
    if (it == registry().end()) throw Error(Err::Parse, "no bundled scenario named " + name);
    return it->second();
}

}  // namespace fitsim::scenarios
