#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fitsim/errors.hpp"
#include "fitsim/types.hpp"

// Scenario schema: a topology, provisioning data, and an ordered list of
// directives (actions and expectations). Scenarios serialize to JSON so runs
// are reproducible from files; every bundled experiment is expressed in this
// schema. Reports are deterministic for a fixed (scenario, seed) pair.

namespace fitsim {

using Json = nlohmann::json;

struct NodeSpec {
    std::string id;
    std::string kind;  // tracker | base | webserver | attacker
    double x_ft = 0;
    double y_ft = 0;

    // tracker
    std::string mode = "BASELINE";  // tracker/base/webserver modes
    UserProfile profile;
    bool calibrated_battery = false;  // use the reference-lifetime model
    bool auto_beacon = false;
    std::uint32_t sleep_minutes = 15;
    bool hrm_equipped = false;

    // base
    std::string webserver = "ws";
    bool auto_sync = false;

    // webserver
    std::optional<bool> consistency_check;  // default: on iff FITLOCK
    std::optional<bool> mule_detection;

    // attacker
    std::vector<std::pair<std::string, std::string>> taps;
};

struct AccountSpec {
    std::string upi;
    std::string password;
    std::string tracker;  // pre-bound tracker serial, empty for none
};

struct LinkScriptSpec {
    std::string from;
    std::string to;
    std::vector<LinkDirective> directives;
};

/// One step of a scenario. `op` selects the action; the remaining fields are
/// a union, JSON keeps only the relevant ones.
struct Directive {
    std::string op;  // advance | record-activity | login | sync | attack | mule |
                     // simulate-battery | bind | rush-bind | replay-storm | expect
    std::string id;  // handle for expectations to reference
    Json args = Json::object();
};

struct Scenario {
    std::string name;
    std::string description;
    std::uint64_t seed = 1;
    double radio_range_ft = 15.0;
    std::vector<NodeSpec> nodes;
    std::vector<AccountSpec> accounts;
    std::vector<LinkScriptSpec> link_scripts;
    std::vector<Directive> steps;
};

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

inline Json to_json(const LinkDirective& d) {
    const char* a = "deliver";
    switch (d.action) {
        case LinkDirective::Action::Deliver: a = "deliver"; break;
        case LinkDirective::Action::Drop: a = "drop"; break;
        case LinkDirective::Action::Delay: a = "delay"; break;
        case LinkDirective::Action::Duplicate: a = "duplicate"; break;
    }
    Json j{{"action", a}};
    if (d.action == LinkDirective::Action::Delay) j["delay_ms"] = d.delay_ms;
    if (d.action == LinkDirective::Action::Duplicate) j["copies"] = d.copies;
    return j;
}

inline LinkDirective link_directive_from_json(const Json& j) {
    LinkDirective d;
    std::string a = j.at("action").get<std::string>();
    if (a == "deliver") d.action = LinkDirective::Action::Deliver;
    else if (a == "drop") d.action = LinkDirective::Action::Drop;
    else if (a == "delay") d.action = LinkDirective::Action::Delay;
    else if (a == "duplicate") d.action = LinkDirective::Action::Duplicate;
    else throw Error(Err::Parse, "unknown link action " + a);
    d.delay_ms = j.value("delay_ms", 0);
    d.copies = j.value("copies", 2);
    return d;
}

inline Json to_json(const NodeSpec& n) {
    Json j{{"id", n.id}, {"kind", n.kind}, {"x_ft", n.x_ft}, {"y_ft", n.y_ft}};
    if (n.kind == "tracker") {
        j["mode"] = n.mode;
        j["profile"] = {{"walk_stride_m", n.profile.walk_stride_m},
                        {"run_stride_m", n.profile.run_stride_m},
                        {"bmr_kcal_per_day", n.profile.bmr_kcal_per_day}};
        j["calibrated_battery"] = n.calibrated_battery;
        j["auto_beacon"] = n.auto_beacon;
        j["sleep_minutes"] = n.sleep_minutes;
        j["hrm_equipped"] = n.hrm_equipped;
    } else if (n.kind == "base") {
        j["mode"] = n.mode;
        j["webserver"] = n.webserver;
        j["auto_sync"] = n.auto_sync;
        j["sleep_minutes"] = n.sleep_minutes;
    } else if (n.kind == "webserver") {
        j["mode"] = n.mode;
        if (n.consistency_check) j["consistency_check"] = *n.consistency_check;
        if (n.mule_detection) j["mule_detection"] = *n.mule_detection;
    } else if (n.kind == "attacker") {
        Json taps = Json::array();
        for (const auto& [a, b] : n.taps) taps.push_back({a, b});
        j["taps"] = taps;
    }
    return j;
}

inline NodeSpec node_from_json(const Json& j) {
    NodeSpec n;
    n.id = j.at("id").get<std::string>();
    n.kind = j.at("kind").get<std::string>();
    n.x_ft = j.value("x_ft", 0.0);
    n.y_ft = j.value("y_ft", 0.0);
    n.mode = j.value("mode", "BASELINE");
    if (j.contains("profile")) {
        n.profile.walk_stride_m = j["profile"].value("walk_stride_m", 0.7);
        n.profile.run_stride_m = j["profile"].value("run_stride_m", 0.9);
        n.profile.bmr_kcal_per_day = j["profile"].value("bmr_kcal_per_day", 1500.0);
    }
    n.calibrated_battery = j.value("calibrated_battery", false);
    n.auto_beacon = j.value("auto_beacon", false);
    n.sleep_minutes = j.value("sleep_minutes", 15u);
    n.hrm_equipped = j.value("hrm_equipped", false);
    n.webserver = j.value("webserver", "ws");
    n.auto_sync = j.value("auto_sync", false);
    if (j.contains("consistency_check")) n.consistency_check = j["consistency_check"].get<bool>();
    if (j.contains("mule_detection")) n.mule_detection = j["mule_detection"].get<bool>();
    if (j.contains("taps"))
        for (const auto& t : j["taps"])
            n.taps.emplace_back(t.at(0).get<std::string>(), t.at(1).get<std::string>());
    return n;
}

inline Json to_json(const Scenario& s) {
    Json nodes = Json::array();
    for (const auto& n : s.nodes) nodes.push_back(to_json(n));
    Json accounts = Json::array();
    for (const auto& a : s.accounts)
        accounts.push_back({{"upi", a.upi}, {"password", a.password}, {"tracker", a.tracker}});
    Json scripts = Json::array();
    for (const auto& ls : s.link_scripts) {
        Json ds = Json::array();
        for (const auto& d : ls.directives) ds.push_back(to_json(d));
        scripts.push_back({{"from", ls.from}, {"to", ls.to}, {"directives", ds}});
    }
    Json steps = Json::array();
    for (const auto& d : s.steps) {
        Json j = d.args;
        j["op"] = d.op;
        if (!d.id.empty()) j["id"] = d.id;
        steps.push_back(j);
    }
    return {{"name", s.name},       {"description", s.description},
            {"seed", s.seed},       {"radio_range_ft", s.radio_range_ft},
            {"nodes", nodes},       {"accounts", accounts},
            {"link_scripts", scripts}, {"steps", steps}};
}

inline Scenario scenario_from_json(const Json& j) {
    try {
        Scenario s;
        s.name = j.at("name").get<std::string>();
        s.description = j.value("description", "");
        s.seed = j.value("seed", 1ull);
        s.radio_range_ft = j.value("radio_range_ft", 15.0);
        for (const auto& n : j.value("nodes", Json::array())) s.nodes.push_back(node_from_json(n));
        for (const auto& a : j.value("accounts", Json::array()))
            s.accounts.push_back({a.at("upi").get<std::string>(),
                                  a.value("password", ""), a.value("tracker", "")});
        for (const auto& ls : j.value("link_scripts", Json::array())) {
            LinkScriptSpec spec;
            spec.from = ls.at("from").get<std::string>();
            spec.to = ls.at("to").get<std::string>();
            for (const auto& d : ls.value("directives", Json::array()))
                spec.directives.push_back(link_directive_from_json(d));
            s.link_scripts.push_back(std::move(spec));
        }
        for (const auto& st : j.value("steps", Json::array())) {
            Directive d;
            d.op = st.at("op").get<std::string>();
            d.id = st.value("id", "");
            d.args = st;
            d.args.erase("op");
            d.args.erase("id");
            s.steps.push_back(std::move(d));
        }
        return s;
    } catch (const Json::exception& e) {
        throw Error(Err::Parse, e.what());
    }
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ExpectationResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct Report {
    std::string scenario;
    std::uint64_t seed = 0;
    bool passed = true;
    std::vector<ExpectationResult> expectations;
    Json directives = Json::array();  // per-directive outcomes, in order
    Json metrics = Json::object();
    Json trace = Json::array();       // sync session steps for trace rendering

    Json to_json() const {
        Json ex = Json::array();
        for (const auto& e : expectations)
            ex.push_back({{"name", e.name}, {"pass", e.pass}, {"detail", e.detail}});
        return {{"schema", 1},        {"scenario", scenario}, {"seed", seed},
                {"passed", passed},   {"expectations", ex},   {"directives", directives},
                {"metrics", metrics}, {"trace", trace}};
    }
};

}  // namespace fitsim
