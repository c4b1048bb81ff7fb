#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fitsim/fitlock.hpp"
#include "fitsim/simnet.hpp"
#include "fitsim/tracker.hpp"
#include "fitsim/types.hpp"
#include "fitsim/wired.hpp"

// Social-network backend. Keeps user accounts and the tracker registry,
// serves the four upload-session endpoints, awards badges and activity
// points, and optionally validates uploads: a step/distance/calorie
// consistency check and a GPS-vs-tracker mule check. In BASELINE mode the
// endpoints authenticate nothing and accept any well-formed dump; in FITLOCK
// mode account state changes only through envelopes sealed under the
// registered key with the current session id.

namespace fitsim {

// ---------------------------------------------------------------------------
// Pure account math
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kTopDailyStepThreshold = 40000;  // badge iff strictly above
inline constexpr double kPointsPerVeryActiveMin = 0.75;
inline constexpr double kPointsPerFairlyActiveMin = 0.10;
inline constexpr double kVeryActiveStepsPerMin = 120;
inline constexpr double kFairlyActiveStepsPerMin = 30;

inline double reward_points(double very_active_min, double fairly_active_min) {
    return kPointsPerVeryActiveMin * very_active_min + kPointsPerFairlyActiveMin * fairly_active_min;
}

inline std::string reward_tier(double points) {
    return points >= 200.0 ? "$20 gift card" : "";
}

// ---------------------------------------------------------------------------
// Data consistency: steps vs distance vs calories
// ---------------------------------------------------------------------------

inline constexpr double kConsistencyMargin = 0.10;
inline constexpr double kCalorieFloorGraceKcal = 2.0;  // integer storage slack

struct ConsistencyResult {
    bool ok = true;
    std::string violation;  // "distance" | "calories" when !ok
};

/// Validate the field relations of one record against a profile. When the
/// walk/run split is known the distance check is exact (within the margin);
/// otherwise distance is bounded between the all-walk and all-run extremes.
inline ConsistencyResult check_consistency(const wire::FitnessRecord& r, const UserProfile& p,
                                           std::optional<std::pair<std::uint64_t, std::uint64_t>>
                                               walk_run_split = std::nullopt,
                                           double margin = kConsistencyMargin) {
    double dist_cm = r.distance_cm;
    double lo_stride = std::min(p.walk_stride_m, p.run_stride_m);
    double hi_stride = std::max(p.walk_stride_m, p.run_stride_m);

    double d_lo, d_hi;
    if (walk_run_split) {
        double expected =
            (static_cast<double>(walk_run_split->first) * p.walk_stride_m +
             static_cast<double>(walk_run_split->second) * p.run_stride_m) * 100.0;
        d_lo = expected * (1.0 - margin);
        d_hi = expected * (1.0 + margin);
    } else {
        d_lo = static_cast<double>(r.steps) * lo_stride * 100.0 * (1.0 - margin);
        d_hi = static_cast<double>(r.steps) * hi_stride * 100.0 * (1.0 + margin);
    }
    if (dist_cm < d_lo || dist_cm > d_hi) return {false, "distance"};

    double k_lo = std::min(kKcalPerWalkStep, kKcalPerRunStep);
    double k_hi = std::max(kKcalPerWalkStep, kKcalPerRunStep);
    double c_lo = std::max(0.0, static_cast<double>(r.steps) * k_lo * (1.0 - margin) -
                                    kCalorieFloorGraceKcal);
    // the basal contribution spans zero to one full day's worth
    double c_hi = (static_cast<double>(r.steps) * k_hi + p.bmr_kcal_per_day) * (1.0 + margin);
    double cal = r.calories;
    if (cal < c_lo || cal > c_hi) return {false, "calories"};
    return {true, ""};
}

// ---------------------------------------------------------------------------
// Mule detection: GPS trace vs tracker record
// ---------------------------------------------------------------------------

inline constexpr double kRopeMaxGpsMeters = 50.0;
inline constexpr std::uint64_t kRopeMinSteps = 500;
inline constexpr double kWheelDistanceRatio = 2.0;

struct MuleVerdict {
    enum class Kind { None, Rope, Wheel };
    Kind kind = Kind::None;
    double gps_m = 0;
    double tracker_m = 0;
};

inline const char* to_string(MuleVerdict::Kind k) {
    switch (k) {
        case MuleVerdict::Kind::None: return "none";
        case MuleVerdict::Kind::Rope: return "rope";
        case MuleVerdict::Kind::Wheel: return "wheel";
    }
    return "?";
}

/// Compare the distance the GPS saw against the distance the tracker
/// recorded. A pile of steps with no GPS movement is a spun tracker; GPS
/// distance far above tracker distance is a tracker riding a vehicle.
inline MuleVerdict detect_mule(const GpsTrace& trace, const wire::FitnessRecord& r) {
    if (trace.size() < 2) throw Error(Err::NoTrace, "mule check needs a position trace");
    MuleVerdict v;
    v.gps_m = gps_path_m(trace);
    v.tracker_m = static_cast<double>(r.distance_cm) / 100.0;
    if (v.gps_m < kRopeMaxGpsMeters && r.steps > kRopeMinSteps) {
        v.kind = MuleVerdict::Kind::Rope;
    } else if (v.tracker_m > 0 && v.gps_m / v.tracker_m > kWheelDistanceRatio) {
        v.kind = MuleVerdict::Kind::Wheel;
    } else if (v.tracker_m == 0 && v.gps_m > kRopeMaxGpsMeters) {
        v.kind = MuleVerdict::Kind::Wheel;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Accounts and registry
// ---------------------------------------------------------------------------

struct Account {
    std::string upi;
    std::string credentials;  // cleartext, exactly like the system being modeled
    std::uint64_t steps = 0;
    std::uint64_t distance_cm = 0;
    std::uint64_t calories = 0;
    std::uint64_t floors = 0;
    std::set<std::string> badges;
    double very_active_min = 0;
    double fairly_active_min = 0;
    double points = 0;
    Bytes settings_image = Bytes(wire::kSettingsBankLen, 0);
    SimTime last_upload = 0;
    bool has_uploaded = false;
};

struct RegistryEntry {
    crypto::Key key{};    // pre-shared at manufacture
    std::string tpi;
    std::string upi;      // empty until bound
    std::uint32_t session = 0;
};

struct PendingBind {
    std::string serial;
    std::uint32_t nonce = 0;
    SimTime issued = 0;
    SimTime expires = 0;
};

enum class BindResult { Bound, NoMatch, Expired };

class Webserver : public Node {
public:
    struct Config {
        NodeId id = "ws";
        DeviceMode mode = DeviceMode::Baseline;
        bool consistency_check = false;  // on by default in FITLOCK via make()
        bool mule_detection = false;
    };

    explicit Webserver(Config cfg) : cfg_(std::move(cfg)) {}

    static Config make(DeviceMode mode) {
        Config c;
        c.mode = mode;
        c.consistency_check = mode == DeviceMode::Fitlock;
        c.mule_detection = mode == DeviceMode::Fitlock;
        return c;
    }

    const NodeId& id() const { return cfg_.id; }
    DeviceMode mode() const { return cfg_.mode; }
    void set_consistency_check(bool on) { cfg_.consistency_check = on; }
    void set_mule_detection(bool on) { cfg_.mule_detection = on; }

    // -- provisioning ---------------------------------------------------------

    Account& add_account(const std::string& upi, const std::string& credentials) {
        Account& a = accounts_[upi];
        a.upi = upi;
        a.credentials = credentials;
        return a;
    }

    /// Registry starts with id -> key only; binding fills in the account.
    void register_tracker(const std::string& serial, const std::string& tpi,
                          const crypto::Key& key) {
        RegistryEntry e;
        e.key = key;
        e.tpi = tpi;
        registry_[serial] = e;
    }

    /// Pre-provisioned association, used by scenarios that skip the ceremony.
    void bind_directly(const std::string& serial, const std::string& upi) {
        require_entry(serial).upi = upi;
    }

    void attach_gps_trace(const std::string& serial, GpsTrace trace) {
        gps_feeds_[serial] = std::move(trace);
    }

    const Account& account(const std::string& upi) const {
        auto it = accounts_.find(upi);
        if (it == accounts_.end()) throw Error(Err::UnknownTracker, "no account " + upi);
        return it->second;
    }
    Account& account_mut(const std::string& upi) { return accounts_.at(upi); }
    bool has_account(const std::string& upi) const { return accounts_.count(upi) != 0; }

    const RegistryEntry& registry(const std::string& serial) const { return require_entry(serial); }
    std::uint32_t session_id(const std::string& serial) const { return require_entry(serial).session; }

    // -- badges ------------------------------------------------------------------

    std::set<std::string> award_badges(Account& a) const {
        if (a.steps > kTopDailyStepThreshold) a.badges.insert("Top Daily Step");
        return a.badges;
    }

    // -- bind ceremony -------------------------------------------------------------

    /// Generate the 6-digit nonce, record the pending request, and push the
    /// sealed challenge toward the tracker through `via_base`.
    std::uint32_t bind_initiate(Network& net, const std::string& serial, const NodeId& via_base) {
        RegistryEntry& e = require_entry(serial);
        prune_pending(net.now());
        std::uint32_t n = static_cast<std::uint32_t>(net.rng().uniform(0, fitlock::kNonceSpace - 1));
        pending_binds_.push_back({serial, n, net.now(), net.now() + fitlock::kBindExpiryMs});
        auto env = fitlock::seal_bind(net.rng(), e.key, serial,
                                      fitlock::BindChallenge{net.now(), n});
        WiredMsg push{WiredMsg::Kind::Push, endpoint::kRelayBind, 0,
                      {serial, wire::encode_tlv({{wire::tag::Sealed, fitlock::encode_envelope(env)}})}};
        net.send(cfg_.id, via_base, encode_wired(push));
        return n;
    }

    /// The user typed a nonce into their account page.
    BindResult bind_confirm(SimTime now, const std::string& upi, std::uint32_t nonce) {
        for (auto it = pending_binds_.begin(); it != pending_binds_.end(); ++it) {
            if (it->nonce != nonce) continue;
            if (now > it->expires) {
                pending_binds_.erase(it);
                return BindResult::Expired;
            }
            require_entry(it->serial).upi = upi;
            pending_binds_.erase(it);
            return BindResult::Bound;
        }
        return BindResult::NoMatch;
    }

    std::size_t pending_bind_count() const { return pending_binds_.size(); }

    // -- node interface ---------------------------------------------------------------

    void on_message(Network& net, const NodeId& from, const Bytes& bytes) override {
        auto msg = decode_wired(bytes);
        if (!msg) return;
        if (msg->kind == WiredMsg::Kind::Request) {
            std::vector<wire::TlvItem> reply;
            try {
                reply = dispatch(net, from, msg->path, msg->env);
            } catch (const Error& e) {
                reply = {{wire::tag::ErrorCode, to_bytes(to_string(e.code()))}};
            }
            WiredMsg resp{WiredMsg::Kind::Response, msg->path, msg->txn,
                          {msg->env.tracker_id, wire::encode_tlv(reply)}};
            net.send(cfg_.id, from, encode_wired(resp));
        } else if (msg->kind == WiredMsg::Kind::Push && msg->path == endpoint::kRelayResp) {
            // tracker response that arrived outside the endpoint flow
            auto items = wire::decode_tlv(msg->env.body);
            if (const auto* sealed = wire::find_tlv(items, wire::tag::Sealed))
                if (auto st = find_session(from))
                    if (auto plain = open_response(*st, sealed->value)) {
                        std::vector<wire::TlvItem> next;
                        secure_advance(net, from, *st, *plain, next);
                        if (!next.empty()) {
                            WiredMsg push{WiredMsg::Kind::Push, endpoint::kRelay, 0,
                                          {st->serial, wire::encode_tlv(next)}};
                            net.send(cfg_.id, from, encode_wired(push));
                        }
                    }
        }
    }

    void on_timer(Network& net, std::uint64_t token) override {
        auto it = timer_sessions_.find(token);
        if (it == timer_sessions_.end()) return;
        NodeId base = it->second;
        timer_sessions_.erase(it);
        auto st = find_session(base);
        if (!st || !st->outstanding || st->outstanding_timer != token) return;
        secure_retransmit(net, base, *st);
    }

    // -- introspection ------------------------------------------------------------------

    const std::vector<std::string>& rejection_log() const { return rejection_log_; }
    const std::vector<std::string>& service_log() const { return service_log_; }
    std::uint64_t dumps_accepted() const { return dumps_accepted_; }
    std::uint64_t dumps_rejected() const { return dumps_rejected_; }

    nlohmann::json snapshot_json() const {
        nlohmann::json accounts = nlohmann::json::object();
        for (const auto& [upi, a] : accounts_) {
            accounts[upi] = {
                {"steps", a.steps},           {"distance_cm", a.distance_cm},
                {"calories", a.calories},     {"floors", a.floors},
                {"badges", a.badges},         {"very_active_min", a.very_active_min},
                {"fairly_active_min", a.fairly_active_min}, {"points", a.points},
            };
        }
        nlohmann::json registry = nlohmann::json::object();
        for (const auto& [serial, e] : registry_)
            registry[serial] = {{"tpi", e.tpi}, {"upi", e.upi}, {"session", e.session}};
        return {{"accounts", accounts},
                {"registry", registry},
                {"dumps_accepted", dumps_accepted_},
                {"dumps_rejected", dumps_rejected_}};
    }

    // -- endpoint logic, callable directly by tests --------------------------------------

    std::vector<wire::TlvItem> dispatch(Network& net, const NodeId& base, const std::string& path,
                                        const wire::Envelope& env) {
        auto items = wire::decode_tlv(env.body);
        if (path == endpoint::kLogin) return ep_login(items);
        if (path == endpoint::kUploadData) return ep_upload_data(net, base, env.tracker_id, items);
        if (path == endpoint::kLookupTracker) return ep_lookup_tracker(net, base, items);
        if (path == endpoint::kDumpData) return ep_dump_data(net, base, items);
        if (path == endpoint::kClearData) return ep_clear_data(net, base, items);
        throw Error(Err::Malformed, "unknown endpoint " + path);
    }

private:
    // -- wired session state ---------------------------------------------------------

    struct PlannedOp {
        fitlock::MsgType type;
        wire::Opcode op;
        Bytes payload;
    };

    struct WsSession {
        std::string serial;
        std::string tpi;
        std::string upi;
        int phase = 1;
        // secure mode
        std::uint32_t session_id = 0;
        fitlock::SessionCounters counters;
        std::deque<PlannedOp> plan;
        std::optional<PlannedOp> outstanding;
        fitlock::MsgType outstanding_expect = fitlock::MsgType::TrqInfo;
        int retransmissions = 0;
        std::uint64_t outstanding_timer = 0;
        std::map<std::uint8_t, Bytes> read_banks;
        int acks_pending = 0;
    };

    WsSession* find_session(const NodeId& base) {
        auto it = sessions_.find(base);
        return it == sessions_.end() ? nullptr : &it->second;
    }

    RegistryEntry& require_entry(const std::string& serial) {
        auto it = registry_.find(serial);
        if (it == registry_.end()) throw Error(Err::UnknownTracker, serial + " not in registry");
        return it->second;
    }
    const RegistryEntry& require_entry(const std::string& serial) const {
        auto it = registry_.find(serial);
        if (it == registry_.end()) throw Error(Err::UnknownTracker, serial + " not in registry");
        return it->second;
    }

    // -- endpoints ----------------------------------------------------------------------

    std::vector<wire::TlvItem> ep_login(const std::vector<wire::TlvItem>& items) {
        const auto* user = wire::find_tlv(items, wire::tag::User);
        const auto* pass = wire::find_tlv(items, wire::tag::Password);
        if (!user || !pass) throw Error(Err::Malformed, "login needs user and password");
        // stored verbatim: the service log leaks whatever arrived on the wire
        service_log_.push_back("POST /login user=" + to_string(user->value) +
                               " password=" + to_string(pass->value));
        auto it = accounts_.find(to_string(user->value));
        if (it == accounts_.end() || it->second.credentials != to_string(pass->value))
            throw Error(Err::ServerError, "bad credentials");
        return {{wire::tag::Done, {}}};
    }

    std::vector<wire::TlvItem> ep_upload_data(Network& net, const NodeId& base,
                                              const std::string& tracker_id,
                                              const std::vector<wire::TlvItem>& items) {
        (void)items;  // platform info is logged but has no protocol effect
        if (tracker_id.empty() || tracker_id == "-")
            throw Error(Err::Malformed, "uploadData without a tracker id");
        WsSession st;
        st.serial = tracker_id;
        st.phase = 2;
        if (cfg_.mode == DeviceMode::Fitlock) {
            RegistryEntry& e = require_entry(tracker_id);
            st.session_id = e.session;
            st.plan.push_back({fitlock::MsgType::TrqReq,
                               wire::Opcode{wire::OpKind::TrqReq}, {}});
        }
        sessions_[base] = st;
        service_log_.push_back("POST " + std::string(endpoint::kUploadData) + " tracker=" + tracker_id);

        if (cfg_.mode == DeviceMode::Baseline) {
            return {{wire::tag::TrackerId, to_bytes(tracker_id)},
                    {wire::tag::Opcode, wire::encode_opcode({wire::OpKind::TrqReq})}};
        }
        std::vector<wire::TlvItem> out{{wire::tag::TrackerId, to_bytes(tracker_id)}};
        secure_send_next(net, base, sessions_[base], out);
        return out;
    }

    std::vector<wire::TlvItem> ep_lookup_tracker(Network& net, const NodeId& base,
                                                 const std::vector<wire::TlvItem>& items) {
        WsSession* st = find_session(base);
        if (!st || st->phase != 2) throw Error(Err::Protocol, "lookupTracker out of phase");

        std::string serial;
        std::vector<wire::TlvItem> out;
        if (cfg_.mode == DeviceMode::Baseline) {
            const auto* s = wire::find_tlv(items, wire::tag::Serial);
            if (!s) throw Error(Err::Malformed, "lookupTracker without serial");
            serial = to_string(s->value);
            const RegistryEntry& e = require_entry(serial);
            if (e.upi.empty()) throw Error(Err::UnknownTracker, serial + " not bound");
            st->serial = serial;
            st->tpi = e.tpi;
            st->upi = e.upi;
            st->phase = 3;
            out.push_back({wire::tag::Tpi, to_bytes(e.tpi)});
            out.push_back({wire::tag::Upi, to_bytes(e.upi)});
            for (std::uint8_t bank = 0; bank < kNumReadBanks; ++bank)
                out.push_back({wire::tag::Opcode,
                               wire::encode_opcode({wire::OpKind::ReadTrq, bank})});
            return out;
        }

        // secure mode: the posted item is the sealed TRQ-INFO
        const auto* sealed = wire::find_tlv(items, wire::tag::Sealed);
        if (!sealed) throw Error(Err::Malformed, "lookupTracker without sealed reply");
        auto plain = open_response(*st, sealed->value);
        if (!plain) throw Error(Err::AuthFail, "sealed reply rejected");
        wire::Response resp = wire::decode_response(plain->payload);
        wire::DeviceInfo info = wire::decode_device_info(resp.payload);
        const RegistryEntry& e = require_entry(info.serial);
        if (e.upi.empty()) throw Error(Err::UnknownTracker, info.serial + " not bound");
        st->tpi = e.tpi;
        st->upi = e.upi;
        st->phase = 3;
        for (std::uint8_t bank = 0; bank < kNumReadBanks; ++bank)
            st->plan.push_back({fitlock::MsgType::ReadTrq,
                                wire::Opcode{wire::OpKind::ReadTrq, bank}, {}});
        out.push_back({wire::tag::Tpi, to_bytes(e.tpi)});
        out.push_back({wire::tag::Upi, to_bytes(e.upi)});
        secure_send_next(net, base, *st, out);
        return out;
    }

    std::vector<wire::TlvItem> ep_dump_data(Network& net, const NodeId& base,
                                            const std::vector<wire::TlvItem>& items) {
        WsSession* st = find_session(base);
        if (!st || st->phase != 3) throw Error(Err::Protocol, "dumpData out of phase");

        if (cfg_.mode == DeviceMode::Baseline) {
            std::optional<Bytes> record_bank;
            std::uint8_t current = 0xff;
            for (const auto& it : items) {
                if (it.tag == wire::tag::BankIndex && it.value.size() == 1) current = it.value[0];
                if (it.tag == wire::tag::BankBytes && current == kRecordBankA)
                    record_bank = it.value;
            }
            if (!record_bank) throw Error(Err::Malformed, "dump without the record bank");
            merge_dump(net.now(), *st, *record_bank);
            st->phase = 4;
            st->acks_pending = 7;  // two writes, five erases
            return phase4_opcodes(net.now(), *st);
        }

        const auto* sealed = wire::find_tlv(items, wire::tag::Sealed);
        if (!sealed) throw Error(Err::Malformed, "dumpData without sealed reply");
        auto plain = open_response(*st, sealed->value);
        if (!plain) throw Error(Err::AuthFail, "sealed reply rejected");
        std::vector<wire::TlvItem> out;
        secure_advance(net, base, *st, *plain, out);
        return out;
    }

    std::vector<wire::TlvItem> ep_clear_data(Network& net, const NodeId& base,
                                             const std::vector<wire::TlvItem>& items) {
        WsSession* st = find_session(base);
        if (!st || st->phase != 4) throw Error(Err::Protocol, "clearDataConfigTracker out of phase");

        if (cfg_.mode == DeviceMode::Baseline) {
            int oks = 0;
            for (const auto& it : items) {
                if (it.tag != wire::tag::Response) continue;
                if (wire::decode_response(it.value).kind != wire::RespKind::Ok)
                    throw Error(Err::ServerError, "tracker refused a configuration opcode");
                ++oks;
            }
            if (oks < st->acks_pending) throw Error(Err::Malformed, "missing configuration acks");
            sessions_.erase(base);
            return {{wire::tag::Opcode, wire::encode_opcode({wire::OpKind::Close})}};
        }

        const auto* sealed = wire::find_tlv(items, wire::tag::Sealed);
        if (!sealed) throw Error(Err::Malformed, "clearData without sealed reply");
        auto plain = open_response(*st, sealed->value);
        if (!plain) throw Error(Err::AuthFail, "sealed reply rejected");
        std::vector<wire::TlvItem> out;
        secure_advance(net, base, *st, *plain, out);
        return out;
    }

    // -- dump merging and the two validators -----------------------------------------------

    void merge_dump(SimTime now, WsSession& st, ByteSpan record_bank) {
        std::vector<wire::FitnessRecord> records = wire::decode_records(record_bank);
        Account& a = accounts_.at(st.upi);

        std::uint64_t delta_steps = 0;
        for (const auto& r : records) {
            if (cfg_.consistency_check) {
                ConsistencyResult c = check_consistency(r, profile_for(st.serial));
                if (!c.ok) {
                    ++dumps_rejected_;
                    rejection_log_.push_back("REJECTED_INCONSISTENT " + st.serial + " " +
                                             c.violation);
                    continue;
                }
            }
            if (cfg_.mule_detection) {
                auto feed = gps_feeds_.find(st.serial);
                if (feed != gps_feeds_.end() && feed->second.size() >= 2) {
                    MuleVerdict v = detect_mule(feed->second, r);
                    if (v.kind != MuleVerdict::Kind::None) {
                        ++dumps_rejected_;
                        rejection_log_.push_back(std::string("REJECTED_MULE ") + st.serial + " " +
                                                 to_string(v.kind));
                        mule_flags_[st.serial] = to_string(v.kind);
                        continue;
                    }
                }
            }
            a.steps += r.steps;
            a.distance_cm += r.distance_cm;
            a.calories += r.calories;
            a.floors += r.floors;
            delta_steps += r.steps;
            ++dumps_accepted_;
        }

        // activity-minute classification over the window since the last upload,
        // credited in whole minutes
        if (a.has_uploaded && now > a.last_upload) {
            double window_min = static_cast<double>(now - a.last_upload) / kMsPerMinute;
            double rate = delta_steps / window_min;
            if (rate >= kVeryActiveStepsPerMin)
                a.very_active_min += std::round(window_min);
            else if (rate >= kFairlyActiveStepsPerMin)
                a.fairly_active_min += std::round(window_min);
        }
        a.last_upload = now;
        a.has_uploaded = true;
        a.points = reward_points(a.very_active_min, a.fairly_active_min);
        award_badges(a);
    }

    UserProfile profile_for(const std::string& serial) const {
        auto it = profiles_.find(serial);
        return it == profiles_.end() ? UserProfile{} : it->second;
    }

public:
    /// Profile the consistency checker uses for a tracker (stride lengths and
    /// basal rate as configured on the account).
    void set_profile(const std::string& serial, UserProfile p) { profiles_[serial] = p; }

    const std::map<std::string, std::string>& mule_flags() const { return mule_flags_; }

private:
    std::vector<wire::TlvItem> phase4_opcodes(SimTime now, const WsSession& st) {
        std::vector<wire::TlvItem> out;
        const Account& a = accounts_.at(st.upi);
        out.push_back({wire::tag::Opcode,
                       wire::encode_opcode({wire::OpKind::Write, 0,
                                            static_cast<std::uint8_t>(wire::kSettingsBankLen)})});
        out.push_back({wire::tag::Data, a.settings_image});
        out.push_back({wire::tag::Opcode,
                       wire::encode_opcode({wire::OpKind::Write, 1,
                                            static_cast<std::uint8_t>(wire::kRecordLen)})});
        out.push_back({wire::tag::Data, wire::encode_record({})});  // cleared daily slate
        std::uint32_t deadline_s = static_cast<std::uint32_t>(now / 1000);
        for (std::uint8_t bank = 1; bank <= 5; ++bank)
            out.push_back({wire::tag::Opcode,
                           wire::encode_opcode({wire::OpKind::Erase, bank, 0, deadline_s})});
        return out;
    }

    std::deque<PlannedOp> phase4_plan(SimTime now, const WsSession& st) {
        std::deque<PlannedOp> plan;
        const Account& a = accounts_.at(st.upi);
        plan.push_back({fitlock::MsgType::Write,
                        {wire::OpKind::Write, 0, static_cast<std::uint8_t>(wire::kSettingsBankLen)},
                        a.settings_image});
        plan.push_back({fitlock::MsgType::Write,
                        {wire::OpKind::Write, 1, static_cast<std::uint8_t>(wire::kRecordLen)},
                        wire::encode_record({})});
        std::uint32_t deadline_s = static_cast<std::uint32_t>(now / 1000);
        for (std::uint8_t bank = 1; bank <= 5; ++bank)
            plan.push_back({fitlock::MsgType::Erase, {wire::OpKind::Erase, bank, 0, deadline_s}, {}});
        plan.push_back({fitlock::MsgType::Close, {wire::OpKind::Close}, {}});
        return plan;
    }

    // -- secure-session engine ---------------------------------------------------------------

    /// Open and judge a sealed tracker response for this session.
    std::optional<fitlock::Plain> open_response(WsSession& st, ByteSpan envelope_bytes) {
        auto env = fitlock::decode_envelope(envelope_bytes);
        if (!env || env->tracker_id != st.serial) return std::nullopt;
        const RegistryEntry& e = require_entry(st.serial);
        auto plain = fitlock::open(e.key, *env);
        if (!plain) {
            rejection_log_.push_back("AUTH_FAIL " + st.serial);
            return std::nullopt;
        }
        if (fitlock::judge(st.session_id, st.counters, *plain, /*expect_request=*/false) !=
            fitlock::Verdict::Accept) {
            rejection_log_.push_back("REPLAY_DROP " + st.serial);
            return std::nullopt;
        }
        st.counters.record_accepted(plain->type, plain->counter);
        return plain;
    }

    /// Accepted response: match it to the outstanding request, advance the
    /// plan, and emit the next sealed request into `out`.
    void secure_advance(Network& net, const NodeId& base, WsSession& st, const fitlock::Plain& plain,
                        std::vector<wire::TlvItem>& out) {
        if (!st.outstanding || plain.type != st.outstanding_expect) return;
        PlannedOp done = *st.outstanding;
        st.outstanding.reset();
        st.outstanding_timer = 0;

        switch (done.type) {
            case fitlock::MsgType::ReadTrq: {
                wire::Response resp = wire::decode_response(plain.payload);
                st.read_banks[done.op.bank] = resp.payload;
                if (st.plan.empty()) {
                    auto bank = st.read_banks.find(kRecordBankA);
                    if (bank != st.read_banks.end()) {
                        try {
                            merge_dump(net.now(), st, bank->second);
                        } catch (const Error&) {
                            ++dumps_rejected_;
                            rejection_log_.push_back("MALFORMED_DUMP " + st.serial);
                        }
                    }
                    st.phase = 4;
                    st.plan = phase4_plan(net.now(), st);
                }
                break;
            }
            case fitlock::MsgType::Close: {
                // session completed on both ends
                RegistryEntry& e = require_entry(st.serial);
                e.session = st.session_id + 1;
                service_log_.push_back("SESSION_COMPLETE " + st.serial);
                out.push_back({wire::tag::Done, {}});
                sessions_.erase(base);
                return;
            }
            default: break;
        }
        secure_send_next(net, base, st, out);
    }

    /// Seal the head of the plan and arm the retransmission timer.
    void secure_send_next(Network& net, const NodeId& base, WsSession& st,
                          std::vector<wire::TlvItem>& out) {
        if (st.plan.empty()) return;
        PlannedOp op = st.plan.front();
        st.plan.pop_front();
        st.outstanding = op;
        st.outstanding_expect = fitlock::expected_response(op.type);
        st.retransmissions = 0;
        out.push_back({wire::tag::Sealed, seal_op(net, st, op)});
        out.push_back({wire::tag::Phase, {post_phase_for(op.type)}});
        arm_timer(net, base, st);
    }

    /// Which endpoint the base should post the tracker's reply to.
    static std::uint8_t post_phase_for(fitlock::MsgType req) {
        switch (req) {
            case fitlock::MsgType::TrqReq: return 2;
            case fitlock::MsgType::ReadTrq: return 3;
            default: return 4;
        }
    }

    Bytes seal_op(Network& net, WsSession& st, const PlannedOp& op) {
        const RegistryEntry& e = require_entry(st.serial);
        Bytes payload = wire::encode_opcode(op.op);
        payload.insert(payload.end(), op.payload.begin(), op.payload.end());
        fitlock::Plain p{op.type, st.session_id, st.counters.next_counter(op.type), payload};
        return fitlock::encode_envelope(fitlock::seal(net.rng(), e.key, st.serial, p));
    }

    void arm_timer(Network& net, const NodeId& base, WsSession& st) {
        st.outstanding_timer = net.schedule_timer(cfg_.id, fitlock::kRetransmitTimeoutMs);
        timer_sessions_[st.outstanding_timer] = base;
    }

    void secure_retransmit(Network& net, const NodeId& base, WsSession& st) {
        if (st.retransmissions >= fitlock::kMaxRetries) {
            // retry budget exhausted: bump the session id and give up
            RegistryEntry& e = require_entry(st.serial);
            e.session = st.session_id + 1;
            rejection_log_.push_back("DISCONNECTED " + st.serial);
            WiredMsg abort{WiredMsg::Kind::Push, endpoint::kAbort, 0,
                           {st.serial, wire::encode_tlv({{wire::tag::ErrorCode,
                                                          to_bytes("DISCONNECTED")}})}};
            net.send(cfg_.id, base, encode_wired(abort));
            sessions_.erase(base);
            return;
        }
        ++st.retransmissions;
        Bytes sealed = seal_op(net, st, *st.outstanding);
        WiredMsg push{WiredMsg::Kind::Push, endpoint::kRelay, 0,
                      {st.serial,
                       wire::encode_tlv({{wire::tag::Sealed, sealed},
                                         {wire::tag::Phase, {post_phase_for(st.outstanding->type)}}})}};
        net.send(cfg_.id, base, encode_wired(push));
        arm_timer(net, base, st);
    }

    Config cfg_;
    std::map<std::string, RegistryEntry> registry_;
    std::map<std::string, Account> accounts_;
    std::map<std::string, UserProfile> profiles_;
    std::vector<PendingBind> pending_binds_;
    std::map<NodeId, WsSession> sessions_;
    std::map<std::uint64_t, NodeId> timer_sessions_;
    std::map<std::string, GpsTrace> gps_feeds_;
    std::map<std::string, std::string> mule_flags_;
    std::vector<std::string> rejection_log_;
    std::vector<std::string> service_log_;
    std::uint64_t dumps_accepted_ = 0;
    std::uint64_t dumps_rejected_ = 0;

    void prune_pending(SimTime now) {
        std::erase_if(pending_binds_, [&](const PendingBind& p) { return now > p.expires; });
    }
};

}  // namespace fitsim
