#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fitsim/battery.hpp"
#include "fitsim/fitlock.hpp"
#include "fitsim/simnet.hpp"
#include "fitsim/types.hpp"
#include "fitsim/wire.hpp"

// Tracker device: memory banks, step/distance/calorie accounting, the 6-digit
// display, and two request paths. In BASELINE mode any radio peer can read
// and write the banks with plain opcodes. In FITLOCK mode the plaintext path
// is gone: only sealed envelopes that pass the session/counter rules are
// executed, everything else is dropped without a reply and without a battery
// debit.

namespace fitsim {

inline constexpr std::uint8_t kNumReadBanks = 6;   // banks 0..5 readable
inline constexpr std::uint8_t kNumWriteBanks = 2;  // banks 0..1 writable
inline constexpr std::uint8_t kRecordBankA = 1;    // redundant fitness-record pair
inline constexpr std::uint8_t kRecordBankB = 2;

enum class Metric { Steps, DistanceM, Calories, Floors };

struct DisplayValue {
    std::string text;
    bool truncated = false;

    bool operator==(const DisplayValue&) const = default;
};

/// 6-digit display: larger values lose their least significant digits.
inline DisplayValue render_display(std::uint64_t value) {
    std::string s = std::to_string(value);
    if (s.size() <= 6) return {s, false};
    return {s.substr(0, 6), true};
}

class Tracker : public Node {
public:
    struct Config {
        std::string serial;  // 5 bytes, immutable
        std::string firmware = "1.47";
        std::string tpi;
        DeviceMode mode = DeviceMode::Baseline;
        UserProfile profile;
        BatteryModel battery;  // zero rates = battery never a factor
        std::optional<crypto::Key> key;
        SimTime sleep_interval = 15 * kMsPerMinute;
        bool auto_beacon = false;
        bool hrm_equipped = false;  // records activity only while worn
    };

    explicit Tracker(Config cfg) : cfg_(std::move(cfg)) {
        if (cfg_.serial.size() != 5) throw Error(Err::BadParams, "serial must be 5 bytes");
        if (cfg_.mode == DeviceMode::Fitlock && !cfg_.key)
            throw Error(Err::BadParams, "secure mode needs a key");
        settings_.assign(wire::kSettingsBankLen, 0);
    }

    const std::string& serial() const { return cfg_.serial; }
    DeviceMode mode() const { return cfg_.mode; }
    const UserProfile& profile() const { return cfg_.profile; }
    const BatteryLedger& battery() const { return battery_; }
    std::uint32_t session_id() const { return session_; }
    bool wearing() const { return wearing_; }
    void set_wearing(bool w) { wearing_ = w; }

    void start(Network& net) {
        battery_.reset(cfg_.battery, net.now());
        if (cfg_.auto_beacon) arm_beacon(net, cfg_.sleep_interval);
    }

    // -- activity -------------------------------------------------------------

    /// Record a labeled activity burst covering `elapsed_ms` ending at `now`.
    void record_activity(SimTime now, std::uint64_t walk_steps, std::uint64_t run_steps,
                         std::uint64_t floors, SimTime elapsed_ms) {
        battery_.advance_idle(now);
        if (cfg_.hrm_equipped && !wearing_) return;  // no cardiac signal, nothing recorded
        wire::FitnessRecord& rec = current_record(now);
        rec.steps = sat_add32(rec.steps, walk_steps + run_steps);
        std::uint64_t dist_cm =
            std::llround(static_cast<double>(walk_steps) * cfg_.profile.walk_stride_m * 100.0) +
            std::llround(static_cast<double>(run_steps) * cfg_.profile.run_stride_m * 100.0);
        rec.distance_cm = sat_add32(rec.distance_cm, dist_cm);
        rec.floors = sat_add16(rec.floors, floors);
        calorie_accum_ += cfg_.profile.bmr_kcal_per_day * (static_cast<double>(elapsed_ms) / kMsPerDay) +
                          kKcalPerWalkStep * static_cast<double>(walk_steps) +
                          kKcalPerRunStep * static_cast<double>(run_steps);
        double cal = std::floor(calorie_accum_);
        rec.calories = static_cast<std::uint16_t>(
            std::min<double>(cal, std::numeric_limits<std::uint16_t>::max()));
    }

    DisplayValue display_value(Metric m) const {
        const wire::FitnessRecord rec = latest_record();
        switch (m) {
            case Metric::Steps: return render_display(rec.steps);
            case Metric::DistanceM: return render_display(rec.distance_cm / 100);
            case Metric::Calories: return render_display(rec.calories);
            case Metric::Floors: return render_display(rec.floors);
        }
        return {};
    }

    const std::string& displayed_bind_nonce() const { return displayed_nonce_; }

    // -- memory banks -----------------------------------------------------------

    Bytes read_bank(std::uint8_t index) const {
        switch (index) {
            case 0: return settings_;
            case kRecordBankA:
            case kRecordBankB: return wire::encode_records(records_);
            case 3:
            case 4:
            case 5: return aux_banks_[index - 3];
            default: throw Error(Err::BankRange, "read bank " + std::to_string(index));
        }
    }

    const std::vector<wire::FitnessRecord>& records() const { return records_; }
    const Bytes& settings_bank() const { return settings_; }

    // -- plaintext request path (BASELINE) ---------------------------------------

    /// Execute one opcode against the banks. Battery debits are the caller's
    /// concern; throws BANK_RANGE / MALFORMED on bad requests.
    wire::Response execute_opcode(const wire::Opcode& op, ByteSpan payload, bool on_base) {
        switch (op.kind) {
            case wire::OpKind::TrqReq:
                return {wire::RespKind::TrqInfo,
                        wire::encode_device_info({cfg_.serial, cfg_.firmware, on_base})};
            case wire::OpKind::ReadTrq: return {wire::RespKind::TrqData, read_bank(op.bank)};
            case wire::OpKind::Write: {
                if (payload.size() != op.data_length)
                    throw Error(Err::Malformed, "WRITE payload length mismatch");
                write_bank(op.bank, payload);
                return {wire::RespKind::Ok, {}};
            }
            case wire::OpKind::Erase:
                erase_bank(op.bank, op.deadline);
                return {wire::RespKind::Ok, {}};
            case wire::OpKind::Close: return {wire::RespKind::Ok, {}};
        }
        throw Error(Err::Malformed, "unhandled opcode");
    }

    /// BASELINE entry point: no authentication of any kind. Returns the
    /// response, or nothing when the battery is flat. `in_session` requests
    /// ride the per-sync budget; anything else debits per-query energy.
    std::optional<wire::Response> handle_request_baseline(SimTime now, const wire::Opcode& op,
                                                          ByteSpan payload, bool in_session) {
        battery_.advance_idle(now);
        if (battery_.dead()) return std::nullopt;
        if (!in_session) battery_.debit_query(now);
        return execute_opcode(op, payload, in_session);
    }

    // -- node interface -----------------------------------------------------------

    void on_message(Network& net, const NodeId& from, const Bytes& f) override {
        battery_.advance_idle(net.now());
        if (f.empty()) return;
        if (battery_.dead()) return;  // a dead tracker never responds
        switch (f[0]) {
            case frame::Connect: handle_connect(net, from); break;
            case frame::Cmd: handle_cmd(net, from, ByteSpan(f).subspan(1)); break;
            case frame::Secure: handle_secure(net, from, ByteSpan(f).subspan(1)); break;
            case frame::Bind: handle_bind(net, ByteSpan(f).subspan(1)); break;
            case frame::Sleep: handle_sleep(net, from, ByteSpan(f).subspan(1)); break;
            default: break;  // unknown radio frames are ignored
        }
    }

    void on_timer(Network& net, std::uint64_t token) override {
        battery_.advance_idle(net.now());
        if (token == beacon_timer_) {
            beacon_timer_ = 0;
            do_beacon(net);
        } else if (token == retrans_timer_) {
            retrans_timer_ = 0;
            fitlock_retransmit(net);
        }
    }

    // -- bind ceremony -------------------------------------------------------------

    /// The user holds the switch: device becomes bind-ready and announces its
    /// id through any base in range.
    void press_switch(Network& net) {
        bind_ready_until_ = net.now() + fitlock::kBindExpiryMs;
        do_beacon(net);
    }

    // -- introspection for tests and reports -----------------------------------------

    std::uint64_t round_trips() const { return round_trips_; }
    std::uint64_t dropped_plaintext() const { return dropped_plaintext_; }
    std::uint64_t dropped_auth() const { return dropped_auth_; }
    std::uint64_t dropped_replay() const { return dropped_replay_; }
    std::uint64_t accepted_secure() const { return accepted_secure_; }

    nlohmann::json snapshot_json() const {
        nlohmann::json banks;
        for (std::uint8_t i = 0; i < kNumReadBanks; ++i)
            banks["read" + std::to_string(i)] = to_hex(read_bank(i));
        banks["write0"] = to_hex(settings_);
        banks["write1"] = to_hex(write_bank1_);
        return {
            {"serial", cfg_.serial},
            {"firmware", cfg_.firmware},
            {"tpi", cfg_.tpi},
            {"mode", to_string(cfg_.mode)},
            {"battery", {{"charge", battery_.charge()},
                         {"dead", battery_.dead()},
                         {"sync_count", battery_.sync_count()},
                         {"query_count", battery_.query_count()},
                         {"idle_consumed", battery_.idle_consumed()},
                         {"sync_consumed", battery_.sync_consumed()},
                         {"query_consumed", battery_.query_consumed()}}},
            {"banks", banks},
            {"display_steps", display_value(Metric::Steps).text},
            {"session_id", session_},
            {"counters", {{"round_trips", round_trips_},
                          {"dropped_plaintext", dropped_plaintext_},
                          {"dropped_auth", dropped_auth_},
                          {"dropped_replay", dropped_replay_},
                          {"accepted_secure", accepted_secure_}}},
        };
    }

private:
    // -- banks ---------------------------------------------------------------------

    wire::FitnessRecord latest_record() const {
        return records_.empty() ? wire::FitnessRecord{} : records_.back();
    }

    wire::FitnessRecord& current_record(SimTime now) {
        std::uint32_t day_start_s = static_cast<std::uint32_t>(now / kMsPerDay * (kMsPerDay / 1000));
        if (records_.empty() || records_.back().timestamp != day_start_s) {
            records_.push_back({day_start_s, 0, 0, 0, 0});
            calorie_accum_ = 0;
        }
        return records_.back();
    }

    void write_bank(std::uint8_t index, ByteSpan payload) {
        switch (index) {
            case 0:
                if (payload.size() != wire::kSettingsBankLen)
                    throw Error(Err::Malformed, "settings bank is exactly 64 bytes");
                settings_.assign(payload.begin(), payload.end());
                break;
            case 1: {
                if (payload.size() != wire::kRecordLen)
                    throw Error(Err::Malformed, "record bank write is exactly 16 bytes");
                wire::FitnessRecord rec = wire::decode_record(payload);
                write_bank1_.assign(payload.begin(), payload.end());
                // the device adopts the written record as its running totals
                if (records_.empty())
                    records_.push_back(rec);
                else
                    records_.back() = rec;
                calorie_accum_ = rec.calories;
                break;
            }
            default: throw Error(Err::BankRange, "write bank " + std::to_string(index));
        }
    }

    void erase_bank(std::uint8_t index, std::uint32_t deadline_s) {
        switch (index) {
            case 0: std::fill(settings_.begin(), settings_.end(), 0); break;
            case kRecordBankA:
            case kRecordBankB: {
                std::erase_if(records_, [&](const wire::FitnessRecord& r) {
                    return r.timestamp <= deadline_s;
                });
                if (records_.empty()) calorie_accum_ = 0;
                break;
            }
            case 3:
            case 4:
            case 5: aux_banks_[index - 3].clear(); break;
            default: throw Error(Err::BankRange, "erase bank " + std::to_string(index));
        }
    }

    // -- radio handlers ----------------------------------------------------------------

    void handle_connect(Network& net, const NodeId& from) {
        if (in_session_ && session_base_ != from) return;  // one session at a time
        in_session_ = true;
        session_base_ = from;
        battery_.debit_sync(net.now());
        net.try_send(cfg_.serial, from, make_frame(frame::Resp, wire::encode_response({wire::RespKind::Ok, {}})));
    }

    void handle_cmd(Network& net, const NodeId& from, ByteSpan body) {
        if (cfg_.mode == DeviceMode::Fitlock) {
            ++dropped_plaintext_;  // no plaintext path in secure mode
            return;
        }
        if (body.size() < wire::kOpcodeLen) return;
        wire::Opcode op;
        try {
            op = wire::decode_opcode(body.first(wire::kOpcodeLen));
        } catch (const Error&) {
            return;
        }
        bool in_session = in_session_ && session_base_ == from;
        std::optional<wire::Response> resp;
        try {
            resp = handle_request_baseline(net.now(), op, body.subspan(wire::kOpcodeLen), in_session);
        } catch (const Error&) {
            return;  // bad bank or payload: no reply on the radio path
        }
        if (!resp) return;
        if (in_session) ++round_trips_;
        net.try_send(cfg_.serial, from, make_frame(frame::Resp, wire::encode_response(*resp)));
    }

    void handle_sleep(Network& net, const NodeId& from, ByteSpan body) {
        if (in_session_ && session_base_ != from) return;
        in_session_ = false;
        session_base_.clear();
        std::uint32_t minutes = body.size() >= 4 ? get_u32be(body, 0) : 15;
        sleeping_until_ = net.now() + static_cast<SimTime>(minutes) * kMsPerMinute;
        if (cfg_.auto_beacon) arm_beacon(net, sleeping_until_ - net.now());
    }

    void do_beacon(Network& net) {
        if (battery_.dead()) return;
        if (net.now() < sleeping_until_ || in_session_) return;
        NodeId self = cfg_.serial;
        for (const NodeId& base : net.nodes_of_kind(NodeKind::Base, &self))
            net.try_send(cfg_.serial, base, make_frame(frame::Beacon, to_bytes(cfg_.serial)));
    }

    void arm_beacon(Network& net, SimTime delay) {
        beacon_timer_ = net.schedule_timer(cfg_.serial, delay);
    }

    // -- secure path -------------------------------------------------------------------

    void handle_secure(Network& net, const NodeId& from, ByteSpan body) {
        if (cfg_.mode != DeviceMode::Fitlock || !cfg_.key) {
            return;  // secure frames mean nothing to a baseline device
        }
        auto env = fitlock::decode_envelope(body);
        if (!env || env->tracker_id != cfg_.serial) {
            ++dropped_auth_;
            return;
        }
        auto plain = fitlock::open(*cfg_.key, *env);
        if (!plain) {
            ++dropped_auth_;  // forged or tampered: no reply, no battery debit
            return;
        }
        switch (fitlock::judge(session_, counters_, *plain, /*expect_request=*/true)) {
            case fitlock::Verdict::Drop:
                ++dropped_replay_;
                return;
            case fitlock::Verdict::AdoptNewSession:
                // peer moved on: discard the current session's state
                set_session(plain->session);
                break;
            case fitlock::Verdict::Accept: break;
        }
        counters_.record_accepted(plain->type, plain->counter);
        ++accepted_secure_;

        if (plain->payload.size() < wire::kOpcodeLen) return;
        wire::Opcode op;
        try {
            op = wire::decode_opcode(ByteSpan(plain->payload).first(wire::kOpcodeLen));
        } catch (const Error&) {
            return;
        }
        if (request_type_for(op.kind) != plain->type) return;  // type/opcode mismatch

        wire::Response resp;
        try {
            resp = execute_opcode(op, ByteSpan(plain->payload).subspan(wire::kOpcodeLen), true);
        } catch (const Error&) {
            return;
        }
        ++round_trips_;

        fitlock::MsgType resp_type = fitlock::expected_response(plain->type);
        fitlock::Plain reply{resp_type, session_, counters_.next_counter(resp_type),
                             wire::encode_response(resp)};
        send_secure(net, from, reply);

        if (plain->type == fitlock::MsgType::Close) {
            // successful completion: both ends move to the next session id
            set_session(session_ + 1);
            retrans_timer_ = 0;
            last_reply_.reset();
        } else {
            last_reply_ = reply;
            last_reply_to_ = from;
            retrans_count_ = 0;
            retrans_timer_ = net.schedule_timer(cfg_.serial, fitlock::kRetransmitTimeoutMs);
        }
    }

    void fitlock_retransmit(Network& net) {
        if (!last_reply_) return;
        if (retrans_count_ >= fitlock::kMaxRetries) {
            // peer is gone; treat the session as disconnected
            set_session(session_ + 1);
            last_reply_.reset();
            return;
        }
        ++retrans_count_;
        fitlock::Plain again = *last_reply_;
        again.counter = counters_.next_counter(again.type);
        send_secure(net, last_reply_to_, again);
        retrans_timer_ = net.schedule_timer(cfg_.serial, fitlock::kRetransmitTimeoutMs);
    }

    void send_secure(Network& net, const NodeId& to, const fitlock::Plain& p) {
        auto env = fitlock::seal(net.rng(), *cfg_.key, cfg_.serial, p);
        net.try_send(cfg_.serial, to, make_frame(frame::Secure, fitlock::encode_envelope(env)));
    }

    void handle_bind(Network& net, ByteSpan body) {
        if (cfg_.mode != DeviceMode::Fitlock || !cfg_.key) return;
        if (net.now() > bind_ready_until_) return;  // switch not held recently
        auto env = fitlock::decode_envelope(body);
        if (!env || env->tracker_id != cfg_.serial) return;
        auto challenge = fitlock::open_bind(*cfg_.key, *env);
        if (!challenge) {
            ++bind_drops_;
            return;
        }
        SimTime now = net.now(), issued = challenge->issued_ms;
        SimTime skew = now > issued ? now - issued : issued - now;
        if (skew > fitlock::kBindFreshnessMs) {
            ++bind_drops_;  // stale challenge, silently ignored
            return;
        }
        displayed_nonce_ = fitlock::format_nonce(challenge->nonce_value);
    }

    static fitlock::MsgType request_type_for(wire::OpKind k) {
        switch (k) {
            case wire::OpKind::TrqReq: return fitlock::MsgType::TrqReq;
            case wire::OpKind::ReadTrq: return fitlock::MsgType::ReadTrq;
            case wire::OpKind::Write: return fitlock::MsgType::Write;
            case wire::OpKind::Erase: return fitlock::MsgType::Erase;
            case wire::OpKind::Close: return fitlock::MsgType::Close;
        }
        return fitlock::MsgType::TrqReq;
    }

    void set_session(std::uint32_t s) {
        session_ = s;
        counters_.reset();
    }

    static std::uint32_t sat_add32(std::uint32_t a, std::uint64_t b) {
        std::uint64_t v = a + b;
        return v > std::numeric_limits<std::uint32_t>::max()
                   ? std::numeric_limits<std::uint32_t>::max()
                   : static_cast<std::uint32_t>(v);
    }

    static std::uint16_t sat_add16(std::uint16_t a, std::uint64_t b) {
        std::uint64_t v = a + b;
        return v > std::numeric_limits<std::uint16_t>::max()
                   ? std::numeric_limits<std::uint16_t>::max()
                   : static_cast<std::uint16_t>(v);
    }

    Config cfg_;
    BatteryLedger battery_;
    std::vector<wire::FitnessRecord> records_;
    double calorie_accum_ = 0;
    Bytes settings_;
    Bytes write_bank1_ = Bytes(wire::kRecordLen, 0);
    std::array<Bytes, 3> aux_banks_;
    bool wearing_ = true;

    bool in_session_ = false;
    NodeId session_base_;
    SimTime sleeping_until_ = 0;
    std::uint64_t beacon_timer_ = 0;

    // secure-channel state (sk lives in cfg_.key, write-once)
    std::uint32_t session_ = 0;
    fitlock::SessionCounters counters_;
    std::optional<fitlock::Plain> last_reply_;
    NodeId last_reply_to_;
    int retrans_count_ = 0;
    std::uint64_t retrans_timer_ = 0;

    SimTime bind_ready_until_ = 0;
    std::string displayed_nonce_;
    std::uint64_t bind_drops_ = 0;

    std::uint64_t round_trips_ = 0;
    std::uint64_t dropped_plaintext_ = 0;
    std::uint64_t dropped_auth_ = 0;
    std::uint64_t dropped_replay_ = 0;
    std::uint64_t accepted_secure_ = 0;
};

}  // namespace fitsim
