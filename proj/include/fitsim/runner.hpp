#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fitsim/fitbite.hpp"
#include "fitsim/lifetime.hpp"
#include "fitsim/scenario.hpp"

// Directive interpreter: builds the simulated world from a Scenario, executes
// the steps in order, evaluates the expectations, and produces the Report.

namespace fitsim {

class ScenarioRunner {
public:
    Report run(const Scenario& sc, std::optional<std::uint64_t> seed_override = std::nullopt) {
        std::uint64_t seed = seed_override.value_or(sc.seed);
        report_ = Report{};
        report_.scenario = sc.name;
        report_.seed = seed;
        build(sc, seed);
        for (const auto& d : sc.steps) execute(d);
        report_.metrics["event_log_entries"] = net_->event_log().size();
        Json snapshots{{"trackers", Json::object()}, {"webservers", Json::object()}};
        for (const auto& [id, t] : trackers_) snapshots["trackers"][id] = t->snapshot_json();
        for (const auto& [id, w] : webservers_) snapshots["webservers"][id] = w->snapshot_json();
        report_.metrics["snapshots"] = snapshots;
        return report_;
    }

    Network& net() { return *net_; }
    Tracker& tracker(const std::string& id) { return *trackers_.at(id); }
    Webserver& webserver(const std::string& id) { return *webservers_.at(id); }

private:
    // -- world construction ------------------------------------------------------

    void build(const Scenario& sc, std::uint64_t seed) {
        net_ = std::make_unique<Network>(seed);
        net_->set_radio_range_ft(sc.radio_range_ft);
        trackers_.clear();
        bases_.clear();
        webservers_.clear();
        attackers_.clear();
        keys_.clear();
        outcomes_.clear();
        results_.clear();

        for (const auto& n : sc.nodes) {
            if (n.kind == "tracker") {
                Tracker::Config tc;
                tc.serial = n.id;
                tc.mode = parse_mode(n.mode);
                tc.tpi = "TPI" + n.id.substr(n.id.size() >= 2 ? n.id.size() - 2 : 0);
                tc.profile = n.profile;
                if (n.calibrated_battery) tc.battery = calibrate_battery({});
                tc.auto_beacon = n.auto_beacon;
                tc.sleep_interval = static_cast<SimTime>(n.sleep_minutes) * kMsPerMinute;
                tc.hrm_equipped = n.hrm_equipped;
                crypto::Key key{};
                Bytes kb = net_->rng().bytes(crypto::kKeyLen);
                std::copy(kb.begin(), kb.end(), key.begin());
                keys_[n.id] = key;
                if (tc.mode == DeviceMode::Fitlock) tc.key = key;
                trackers_[n.id] = std::make_unique<Tracker>(tc);
                net_->add_node(n.id, NodeKind::Tracker, {n.x_ft, n.y_ft}, trackers_[n.id].get());
            } else if (n.kind == "base") {
                Base::Config bc;
                bc.id = n.id;
                bc.webserver = n.webserver;
                bc.mode = parse_mode(n.mode);
                bc.auto_sync = n.auto_sync;
                bc.sleep_minutes = n.sleep_minutes;
                bases_[n.id] = std::make_unique<Base>(bc);
                net_->add_node(n.id, NodeKind::Base, {n.x_ft, n.y_ft}, bases_[n.id].get());
            } else if (n.kind == "webserver") {
                Webserver::Config wc = Webserver::make(parse_mode(n.mode));
                wc.id = n.id;
                if (n.consistency_check) wc.consistency_check = *n.consistency_check;
                if (n.mule_detection) wc.mule_detection = *n.mule_detection;
                webservers_[n.id] = std::make_unique<Webserver>(wc);
                net_->add_node(n.id, NodeKind::Webserver, {n.x_ft, n.y_ft}, webservers_[n.id].get());
            } else if (n.kind == "attacker") {
                attackers_[n.id] = std::make_unique<fitbite::Attacker>(n.id);
                net_->add_node(n.id, NodeKind::Attacker, {n.x_ft, n.y_ft}, attackers_[n.id].get());
            } else {
                throw Error(Err::Parse, "unknown node kind " + n.kind);
            }
        }

        // wire every base to its webserver, then register trackers everywhere
        for (const auto& n : sc.nodes)
            if (n.kind == "base") net_->add_wired(n.id, n.webserver);
        for (const auto& n : sc.nodes) {
            if (n.kind == "attacker")
                for (const auto& [a, b] : n.taps) net_->add_tap(n.id, a, b);
        }
        for (auto& [wid, ws] : webservers_) {
            for (const auto& n : sc.nodes) {
                if (n.kind != "tracker") continue;
                ws->register_tracker(n.id, "TPI-" + n.id, keys_.at(n.id));
                ws->set_profile(n.id, n.profile);
            }
            for (const auto& a : sc.accounts) {
                ws->add_account(a.upi, a.password);
                if (!a.tracker.empty()) ws->bind_directly(a.tracker, a.upi);
            }
        }
        for (const auto& ls : sc.link_scripts) net_->script_link(ls.from, ls.to, ls.directives);
        for (auto& [id, t] : trackers_) t->start(*net_);
    }

    static DeviceMode parse_mode(const std::string& m) {
        if (m == "BASELINE") return DeviceMode::Baseline;
        if (m == "FITLOCK") return DeviceMode::Fitlock;
        throw Error(Err::Parse, "unknown mode " + m);
    }

    // -- directive dispatch ----------------------------------------------------------

    void execute(const Directive& d) {
        Json result{{"op", d.op}};
        if (!d.id.empty()) result["id"] = d.id;
        try {
            if (d.op == "advance") result["advanced_ms"] = do_advance(d.args);
            else if (d.op == "record-activity") do_record(d.args);
            else if (d.op == "login") do_login(d.args);
            else if (d.op == "sync") result.update(do_sync(d));
            else if (d.op == "attack") result.update(do_attack(d));
            else if (d.op == "mule") result.update(do_mule(d));
            else if (d.op == "simulate-battery") result.update(do_battery(d));
            else if (d.op == "press-switch") trackers_.at(arg_str(d.args, "tracker"))->press_switch(*net_);
            else if (d.op == "bind") result.update(do_bind(d));
            else if (d.op == "rush-bind") result.update(do_rush(d));
            else if (d.op == "replay-storm") result.update(do_storm(d));
            else if (d.op == "expect") do_expect(d);
            else throw Error(Err::Parse, "unknown directive op " + d.op);
        } catch (const Error& e) {
            result["error"] = e.what();
            report_.passed = false;
            report_.expectations.push_back({d.op + (d.id.empty() ? "" : ":" + d.id), false, e.what()});
        }
        if (!d.id.empty()) results_[d.id] = result;
        report_.directives.push_back(result);
    }

    static std::string arg_str(const Json& a, const char* key) {
        if (!a.contains(key)) throw Error(Err::Parse, std::string("missing argument ") + key);
        return a[key].get<std::string>();
    }

    SimTime do_advance(const Json& a) {
        SimTime ms = a.value("ms", 0ull) + static_cast<SimTime>(a.value("minutes", 0.0) * kMsPerMinute) +
                     static_cast<SimTime>(a.value("hours", 0.0) * kMsPerHour);
        net_->advance(ms);
        return ms;
    }

    void do_record(const Json& a) {
        Tracker& t = *trackers_.at(arg_str(a, "tracker"));
        t.record_activity(net_->now(), a.value("walk_steps", 0ull), a.value("run_steps", 0ull),
                          a.value("floors", 0ull),
                          static_cast<SimTime>(a.value("hours", 0.0) * kMsPerHour));
    }

    void do_login(const Json& a) {
        Base& b = *bases_.at(arg_str(a, "base"));
        b.login(*net_, arg_str(a, "user"), arg_str(a, "password"));
        net_->advance(kMsPerSecond);
    }

    Json do_sync(const Directive& d) {
        Base& b = *bases_.at(arg_str(d.args, "base"));
        b.start_session(*net_, arg_str(d.args, "tracker"));
        net_->run_until([&] { return !b.busy(); }, 10 * kMsPerMinute);
        const SessionReport& r = b.last_report();
        Json steps = Json::array();
        for (const auto& s : r.steps) steps.push_back({{"phase", s.phase}, {"what", s.what}});
        Json jr{{"tracker", r.tracker},       {"mode", r.mode},
                {"completed", r.completed},   {"error", r.error},
                {"endpoints", r.endpoints},   {"opcodes", r.opcodes_relayed},
                {"round_trips", r.round_trips}};
        report_.trace.push_back({{"sync", d.id.empty() ? r.tracker : d.id}, {"steps", steps}});
        if (!d.id.empty()) sessions_[d.id] = r;
        return jr;
    }

    Json do_attack(const Directive& d) {
        const Json& a = d.args;
        std::string kind = arg_str(a, "kind");
        fitbite::AttackOutcome out;
        if (kind == "tpdc") {
            out = fitbite::tpdc_capture(*net_, *attackers_.at(arg_str(a, "attacker")),
                                        arg_str(a, "victim"));
        } else if (kind == "ti") {
            out = fitbite::ti_inject(*net_, *attackers_.at(arg_str(a, "attacker")),
                                     arg_str(a, "victim"), a.value("steps", 9999999u));
        } else if (kind == "dos") {
            out = fitbite::dos_overflow(*net_, *attackers_.at(arg_str(a, "attacker")),
                                        arg_str(a, "victim"), a.value("steps", 12580000u));
        } else if (kind == "uai") {
            std::vector<wire::FitnessRecord> recs{{static_cast<std::uint32_t>(net_->now() / 1000),
                                                   static_cast<std::uint16_t>(a.value("calories", 5u)),
                                                   a.value("steps", 12580000u),
                                                   a.value("distance_cm", 3219u),
                                                   static_cast<std::uint16_t>(a.value("floors", 0u))}};
            out = fitbite::uai_inject(*net_, *bases_.at(arg_str(a, "base")),
                                      *webservers_.at(arg_str(a, "webserver")),
                                      arg_str(a, "victim"), arg_str(a, "upi"), recs);
        } else if (kind == "reward-farm") {
            out = fitbite::reward_farm(*net_, *bases_.at(arg_str(a, "base")),
                                       *webservers_.at(arg_str(a, "webserver")),
                                       arg_str(a, "victim"), arg_str(a, "upi"),
                                       a.value("duration_min", 2000.0),
                                       a.value("steps_per_window", 600u));
        } else if (kind == "battery-drain") {
            out = fitbite::battery_drain(*net_, *attackers_.at(arg_str(a, "attacker")),
                                         arg_str(a, "victim"), a.value("rate_per_min", 4.0),
                                         static_cast<SimTime>(a.value("duration_min", 60.0) *
                                                              kMsPerMinute),
                                         trackers_.at(arg_str(a, "victim")).get());
        } else {
            throw Error(Err::Parse, "unknown attack kind " + kind);
        }
        outcomes_[d.id.empty() ? kind : d.id] = out;
        return out.to_json();
    }

    Json do_mule(const Directive& d) {
        const Json& a = d.args;
        std::string kind = arg_str(a, "kind");
        Tracker& t = *trackers_.at(arg_str(a, "tracker"));
        std::uint64_t steps_before = t.records().empty() ? 0 : t.records().back().steps;
        std::uint64_t dist_before = t.records().empty() ? 0 : t.records().back().distance_cm;

        fitbite::MuleStream stream;
        if (kind == "rope")
            stream = fitbite::mule_rope(a.value("rope_length_ft", 2.0),
                                        a.value("revolutions", 1000ull),
                                        a.value("duration_min", 20.0));
        else if (kind == "wheel")
            stream = fitbite::mule_wheel(a.value("speed_kmh", 16.53), a.value("duration_min", 20.0));
        else
            throw Error(Err::Parse, "unknown mule kind " + kind);

        GpsTrace trace = fitbite::absolute_trace(stream, net_->now());
        fitbite::run_stream(*net_, t, stream);

        wire::FitnessRecord rec = t.records().empty() ? wire::FitnessRecord{} : t.records().back();
        rec.steps -= steps_before;
        rec.distance_cm -= dist_before;

        Json jr{{"kind", kind},
                {"steps", rec.steps},
                {"tracker_distance_cm", rec.distance_cm},
                {"gps_m", gps_path_m(trace)}};
        if (a.value("attach_gps", true)) {
            for (auto& [wid, ws] : webservers_) ws->attach_gps_trace(t.serial(), trace);
            MuleVerdict v = detect_mule(trace, rec);
            jr["verdict"] = to_string(v.kind);
        }
        return jr;
    }

    Json do_battery(const Directive& d) {
        std::string mode = arg_str(d.args, "mode");
        LifetimeMode m = mode == "daily"            ? LifetimeMode::DailyUpload
                         : mode == "quarter-hourly" ? LifetimeMode::QuarterHourUpload
                                                    : LifetimeMode::QueryFlood;
        BatteryModel model = calibrate_battery({});
        LifetimeResult r = simulate_lifetime(model, m, report_.seed);
        report_.metrics["lifetime_hours_" + (d.id.empty() ? mode : d.id)] = r.hours;
        return {{"mode", mode}, {"hours", r.hours}, {"syncs", r.syncs}, {"queries", r.queries}};
    }

    Json do_bind(const Directive& d) {
        const Json& a = d.args;
        Tracker& t = *trackers_.at(arg_str(a, "tracker"));
        Webserver& ws = *webservers_.at(arg_str(a, "webserver"));
        std::string base = arg_str(a, "base");
        std::string enter = a.value("enter", "correct");

        t.press_switch(*net_);
        net_->advance(50);
        std::uint32_t n = ws.bind_initiate(*net_, t.serial(), base);
        net_->run_until([&] { return !t.displayed_bind_nonce().empty(); }, 5 * kMsPerSecond);
        std::string displayed = t.displayed_bind_nonce();

        double delay_s = a.value("confirm_delay_s", 0.0);
        if (delay_s > 0) net_->advance(static_cast<SimTime>(delay_s * kMsPerSecond));

        Json jr{{"displayed", displayed}};
        if (enter == "none") {
            jr["confirm"] = "skipped";
            return jr;
        }
        std::uint32_t entered = enter == "wrong" ? (n + 1) % fitlock::kNonceSpace
                                                 : static_cast<std::uint32_t>(std::stoul(
                                                       displayed.empty() ? "0" : displayed));
        BindResult r = ws.bind_confirm(net_->now(), arg_str(a, "account"), entered);
        jr["confirm"] = r == BindResult::Bound    ? "bound"
                        : r == BindResult::NoMatch ? "no_match"
                                                   : "expired";
        return jr;
    }

    Json do_rush(const Directive& d) {
        const Json& a = d.args;
        Tracker& t = *trackers_.at(arg_str(a, "tracker"));
        Webserver& ws = *webservers_.at(arg_str(a, "webserver"));
        std::string base = arg_str(a, "base");
        std::string account = arg_str(a, "account");
        std::uint64_t trials = a.value("trials", 20000ull);
        std::uint64_t guesses = a.value("guesses", 100ull);

        net_->set_logging(false);
        std::uint64_t successes = 0;
        for (std::uint64_t i = 0; i < trials; ++i) {
            ws.bind_initiate(*net_, t.serial(), base);
            // the rush attacker fires `guesses` distinct values before expiry
            std::uint32_t start = static_cast<std::uint32_t>(
                net_->rng().uniform(0, fitlock::kNonceSpace - 1));
            bool hit = false;
            for (std::uint64_t g = 0; g < guesses; ++g) {
                std::uint32_t guess = static_cast<std::uint32_t>((start + g) % fitlock::kNonceSpace);
                if (ws.bind_confirm(net_->now(), account, guess) == BindResult::Bound) {
                    hit = true;
                    break;
                }
            }
            if (hit) ++successes;
            net_->advance(fitlock::kBindExpiryMs + kMsPerSecond);  // let the pending entry lapse
        }
        net_->set_logging(true);

        double p = static_cast<double>(guesses) / fitlock::kNonceSpace;
        double expected = static_cast<double>(trials) * p;
        double sigma = std::sqrt(expected * (1.0 - p));
        return {{"trials", trials},   {"guesses_per_trial", guesses}, {"successes", successes},
                {"expected", expected}, {"sigma", sigma}};
    }

    Json do_storm(const Directive& d) {
        const Json& a = d.args;
        Tracker& t = *trackers_.at(arg_str(a, "victim"));
        std::string attacker = a.value("attacker", "");
        std::uint64_t attempts = a.value("attempts", 1000ull);

        // seed material: envelopes a tap captured toward or from the victim
        std::vector<Bytes> samples;
        if (!attacker.empty())
            for (const auto& cap : net_->captured(attacker))
                if (!cap.bytes.empty() && cap.bytes[0] == frame::Secure)
                    samples.push_back(Bytes(cap.bytes.begin() + 1, cap.bytes.end()));
        if (samples.empty()) throw Error(Err::BadParams, "storm needs captured envelopes");

        std::uint64_t before = t.accepted_secure();
        net_->set_logging(false);
        Rng& rng = net_->rng();
        NodeId from = attacker.empty() ? "storm" : attacker;
        for (std::uint64_t i = 0; i < attempts; ++i) {
            Bytes env = samples[rng.uniform(0, samples.size() - 1)];
            switch (rng.uniform(0, 4)) {
                case 0:  // single bit flip
                    env[rng.uniform(0, env.size() - 1)] ^= static_cast<std::uint8_t>(
                        1u << rng.uniform(0, 7));
                    break;
                case 1:  // random bytes, same shape
                    env = rng.bytes(env.size());
                    break;
                case 2:  // truncation
                    env.resize(rng.uniform(0, env.size()));
                    break;
                case 3:  // exact replay
                    break;
                case 4: {  // reseal under a random key
                    crypto::Key k{};
                    Bytes kb = rng.bytes(crypto::kKeyLen);
                    std::copy(kb.begin(), kb.end(), k.begin());
                    fitlock::Plain p{fitlock::MsgType::ReadTrq, t.session_id(),
                                     static_cast<std::uint32_t>(rng.uniform(0, 1000)),
                                     wire::encode_opcode({wire::OpKind::ReadTrq, 1})};
                    env = fitlock::encode_envelope(fitlock::seal(rng, k, t.serial(), p));
                    break;
                }
            }
            t.on_message(*net_, from, make_frame(frame::Secure, env));
        }
        net_->set_logging(true);
        std::uint64_t acceptances = t.accepted_secure() - before;
        return {{"attempts", attempts},
                {"acceptances", acceptances},
                {"auth_drops", t.dropped_auth()},
                {"replay_drops", t.dropped_replay()}};
    }

    // -- expectations ---------------------------------------------------------------

    void do_expect(const Directive& d) {
        const Json& a = d.args;
        std::string kind = arg_str(a, "kind");
        std::string name = a.value("name", kind + (d.id.empty() ? "" : ":" + d.id));
        bool pass = false;
        std::string detail;

        auto fail_detail = [&](const std::string& s) { detail = s; };

        if (kind == "attack-succeeded") {
            const auto& out = outcomes_.at(arg_str(a, "of"));
            bool expected = a.value("expected", true);
            pass = out.succeeded == expected;
            fail_detail("succeeded=" + std::string(out.succeeded ? "true" : "false") +
                        " expected=" + (expected ? "true" : "false"));
        } else if (kind == "account") {
            const Account& acc = webservers_.at(arg_str(a, "webserver"))->account(arg_str(a, "upi"));
            std::string field = arg_str(a, "field");
            double v = field == "steps"              ? static_cast<double>(acc.steps)
                       : field == "distance_cm"      ? static_cast<double>(acc.distance_cm)
                       : field == "calories"         ? static_cast<double>(acc.calories)
                       : field == "floors"           ? static_cast<double>(acc.floors)
                       : field == "points"           ? acc.points
                       : field == "fairly_active_min" ? acc.fairly_active_min
                       : field == "very_active_min"  ? acc.very_active_min
                                                      : throw Error(Err::Parse, "field " + field);
            double want = a.at("value").get<double>();
            std::string op = a.value("cmp", "eq");
            if (op == "eq") pass = v == want;
            else if (op == "ge") pass = v >= want;
            else if (op == "le") pass = v <= want;
            else if (op == "near") pass = std::fabs(v - want) <= a.value("tol", 1e-9);
            fail_detail(field + "=" + std::to_string(v) + " " + op + " " + std::to_string(want));
        } else if (kind == "badge") {
            const Account& acc = webservers_.at(arg_str(a, "webserver"))->account(arg_str(a, "upi"));
            bool present = acc.badges.count(arg_str(a, "badge")) != 0;
            pass = present == a.value("present", true);
            fail_detail("badge present=" + std::string(present ? "true" : "false"));
        } else if (kind == "tier") {
            const Account& acc = webservers_.at(arg_str(a, "webserver"))->account(arg_str(a, "upi"));
            pass = reward_tier(acc.points) == arg_str(a, "tier");
            fail_detail("points=" + std::to_string(acc.points) + " tier=" + reward_tier(acc.points));
        } else if (kind == "display") {
            Tracker& t = *trackers_.at(arg_str(a, "tracker"));
            DisplayValue dv = t.display_value(parse_metric(a.value("metric", "steps")));
            pass = true;
            if (a.contains("text")) pass = pass && dv.text == a["text"].get<std::string>();
            if (a.contains("truncated")) pass = pass && dv.truncated == a["truncated"].get<bool>();
            fail_detail("display=" + dv.text + (dv.truncated ? " (truncated)" : ""));
        } else if (kind == "lifetime") {
            double hours = results_.at(arg_str(a, "of")).at("hours").get<double>();
            double want = a.at("hours").get<double>();
            double tol = a.value("tol_pct", 1.0) / 100.0;
            pass = std::fabs(hours - want) <= want * tol;
            fail_detail("hours=" + std::to_string(hours) + " want=" + std::to_string(want));
        } else if (kind == "lifetime-ratio") {
            double ha = results_.at(arg_str(a, "of")).at("hours").get<double>();
            double hb = results_.at(arg_str(a, "over")).at("hours").get<double>();
            double want = a.at("ratio").get<double>();
            double tol = a.value("tol_pct", 2.0) / 100.0;
            pass = std::fabs(ha / hb - want) <= want * tol;
            fail_detail("ratio=" + std::to_string(ha / hb) + " want=" + std::to_string(want));
        } else if (kind == "session") {
            const SessionReport& r = sessions_.at(arg_str(a, "of"));
            pass = r.completed == a.value("completed", true);
            if (a.contains("error")) pass = pass && r.error == a["error"].get<std::string>();
            fail_detail("completed=" + std::string(r.completed ? "true" : "false") + " error=" +
                        r.error);
        } else if (kind == "endpoints") {
            const SessionReport& r = sessions_.at(arg_str(a, "of"));
            std::vector<std::string> want = a.at("paths").get<std::vector<std::string>>();
            pass = r.endpoints == want;
            std::string got;
            for (const auto& e : r.endpoints) got += e + " ";
            fail_detail("endpoints: " + got);
        } else if (kind == "opcodes") {
            const SessionReport& r = sessions_.at(arg_str(a, "of"));
            std::vector<std::string> want = a.at("sequence").get<std::vector<std::string>>();
            pass = r.opcodes_relayed == want;
            std::string got;
            for (const auto& e : r.opcodes_relayed) got += e + " ";
            fail_detail("opcodes: " + got);
        } else if (kind == "parity") {
            const SessionReport& ra = sessions_.at(arg_str(a, "of"));
            const SessionReport& rb = sessions_.at(arg_str(a, "over"));
            pass = ra.completed && rb.completed && ra.round_trips == rb.round_trips;
            fail_detail("round_trips " + std::to_string(ra.round_trips) + " vs " +
                        std::to_string(rb.round_trips));
        } else if (kind == "banks-zeroed") {
            Tracker& t = *trackers_.at(arg_str(a, "tracker"));
            pass = t.records().empty();
            fail_detail("records=" + std::to_string(t.records().size()));
        } else if (kind == "cleartext-captured") {
            // an eavesdropper only has to undo the base64 transport coding
            std::string needle = arg_str(a, "needle");
            pass = false;
            for (const auto& e : net_->event_log()) {
                if (e.type != "send") continue;
                auto msg = decode_wired(from_hex(e.detail));
                if (!msg) continue;
                for (const auto& item : wire::decode_tlv(msg->env.body))
                    if (to_string(item.value).find(needle) != std::string::npos) pass = true;
            }
            bool in_service_log = false;
            for (auto& [wid, ws] : webservers_)
                for (const auto& line : ws->service_log())
                    if (line.find(needle) != std::string::npos) in_service_log = true;
            pass = pass && in_service_log;
            fail_detail("needle \"" + needle + "\" recoverable=" + (pass ? "yes" : "no"));
        } else if (kind == "mule-flag") {
            const auto& flags = webservers_.at(arg_str(a, "webserver"))->mule_flags();
            auto it = flags.find(arg_str(a, "tracker"));
            std::string got = it == flags.end() ? "none" : it->second;
            pass = got == a.value("flag", "none");
            fail_detail("mule flag=" + got);
        } else if (kind == "mule-verdict") {
            pass = results_.at(arg_str(a, "of")).value("verdict", "") == arg_str(a, "verdict");
            fail_detail("verdict=" + results_.at(arg_str(a, "of")).value("verdict", ""));
        } else if (kind == "bind-result") {
            pass = results_.at(arg_str(a, "of")).value("confirm", "") == arg_str(a, "result");
            fail_detail("confirm=" + results_.at(arg_str(a, "of")).value("confirm", ""));
        } else if (kind == "rush-stats") {
            const Json& r = results_.at(arg_str(a, "of"));
            double successes = r.at("successes").get<double>();
            double expected = r.at("expected").get<double>();
            double sigma = r.at("sigma").get<double>();
            double max_sigma = a.value("max_sigma", 3.0);
            pass = std::fabs(successes - expected) <= max_sigma * sigma;
            fail_detail("successes=" + std::to_string(successes) + " expected=" +
                        std::to_string(expected) + " sigma=" + std::to_string(sigma));
        } else if (kind == "storm") {
            const Json& r = results_.at(arg_str(a, "of"));
            pass = r.at("acceptances").get<std::uint64_t>() <= a.value("max_acceptances", 0ull);
            fail_detail("acceptances=" + std::to_string(r.at("acceptances").get<std::uint64_t>()));
        } else if (kind == "query-debits") {
            Tracker& t = *trackers_.at(arg_str(a, "tracker"));
            std::uint64_t v = t.battery().query_count();
            std::string op = a.value("cmp", "eq");
            std::uint64_t want = a.value("value", 0ull);
            pass = op == "eq" ? v == want : op == "ge" ? v >= want : v <= want;
            fail_detail("query_count=" + std::to_string(v));
        } else if (kind == "session-ids-equal") {
            Tracker& t = *trackers_.at(arg_str(a, "tracker"));
            std::uint32_t ws_id = webservers_.at(arg_str(a, "webserver"))->session_id(t.serial());
            pass = t.session_id() == ws_id;
            fail_detail("tracker=" + std::to_string(t.session_id()) + " ws=" + std::to_string(ws_id));
        } else if (kind == "rejection") {
            const auto& log = webservers_.at(arg_str(a, "webserver"))->rejection_log();
            std::string needle = arg_str(a, "needle");
            bool found = false;
            for (const auto& line : log)
                if (line.find(needle) != std::string::npos) found = true;
            pass = found == a.value("present", true);
            fail_detail("rejection log entries=" + std::to_string(log.size()));
        } else if (kind == "result") {
            const Json& r = results_.at(arg_str(a, "of"));
            const Json& v = r.at(arg_str(a, "key"));
            std::string op = a.value("cmp", "eq");
            if (op == "eq") {
                pass = v == a.at("value");
            } else if (op == "between") {
                double x = v.get<double>();
                pass = x >= a.at("lo").get<double>() && x <= a.at("hi").get<double>();
            } else {
                double x = v.get<double>(), want = a.at("value").get<double>();
                if (op == "near") pass = std::fabs(x - want) <= a.value("tol", 1e-9);
                else if (op == "near_pct") pass = std::fabs(x - want) <= want * a.value("tol_pct", 1.0) / 100.0;
                else if (op == "ge") pass = x >= want;
                else if (op == "le") pass = x <= want;
            }
            fail_detail(arg_str(a, "key") + "=" + v.dump());
        } else if (kind == "evidence") {
            const auto& out = outcomes_.at(arg_str(a, "of"));
            const Json& v = out.evidence.at(arg_str(a, "key"));
            if (a.contains("min")) pass = v.get<double>() >= a["min"].get<double>();
            else pass = v == a.at("value");
            fail_detail("evidence " + arg_str(a, "key") + "=" + v.dump());
        } else {
            throw Error(Err::Parse, "unknown expectation kind " + kind);
        }

        report_.expectations.push_back({name, pass, detail});
        if (!pass) report_.passed = false;
    }

    static Metric parse_metric(const std::string& m) {
        if (m == "steps") return Metric::Steps;
        if (m == "distance") return Metric::DistanceM;
        if (m == "calories") return Metric::Calories;
        if (m == "floors") return Metric::Floors;
        throw Error(Err::Parse, "unknown metric " + m);
    }

    std::unique_ptr<Network> net_;
    std::map<std::string, std::unique_ptr<Tracker>> trackers_;
    std::map<std::string, std::unique_ptr<Base>> bases_;
    std::map<std::string, std::unique_ptr<Webserver>> webservers_;
    std::map<std::string, std::unique_ptr<fitbite::Attacker>> attackers_;
    std::map<std::string, crypto::Key> keys_;
    std::map<std::string, fitbite::AttackOutcome> outcomes_;
    std::map<std::string, SessionReport> sessions_;
    std::map<std::string, Json> results_;
    Report report_;
};

/// Render the phase-labeled message sequence of every sync in a report.
inline std::string render_trace(const Json& report) {
    std::ostringstream out;
    for (const auto& sync : report.value("trace", Json::array())) {
        out << "session " << sync.value("sync", "?") << "\n";
        int last_phase = -1;
        int step_no = 0;
        for (const auto& s : sync.value("steps", Json::array())) {
            int phase = s.value("phase", 0);
            if (phase != last_phase && phase > 0) {
                out << "  Phase " << phase << ":\n";
                last_phase = phase;
            }
            out << "    " << ++step_no << ". " << s.value("what", "") << "\n";
        }
    }
    return out.str();
}

}  // namespace fitsim
