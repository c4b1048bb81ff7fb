#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fitsim/base.hpp"
#include "fitsim/simnet.hpp"
#include "fitsim/tracker.hpp"
#include "fitsim/types.hpp"
#include "fitsim/webserver.hpp"

// Attack suite against the tracker/base/webserver protocol. Every attack is
// a simnet participant with capture/inject reach over radio links in its
// vicinity and no physical access to the victim. Each returns a
// machine-checkable outcome: succeeded only with evidence of the capture or
// state change, blocked when the secure channel stopped it.

namespace fitsim::fitbite {

struct AttackOutcome {
    std::string kind;
    bool succeeded = false;
    std::string blocked_reason;
    nlohmann::json evidence = nlohmann::json::object();

    nlohmann::json to_json() const {
        return {{"attack", kind},
                {"succeeded", succeeded},
                {"blocked_reason", blocked_reason},
                {"evidence", evidence}};
    }
};

/// Radio adversary: collects every frame addressed to it and can sustain a
/// periodic query flood against one target.
class Attacker : public Node {
public:
    explicit Attacker(NodeId id) : id_(std::move(id)) {}

    const NodeId& id() const { return id_; }

    void on_message(Network& net, const NodeId& from, const Bytes& frame) override {
        (void)net;
        inbox_.push_back({from, frame});
        if (flooding_ && from == flood_target_ && !frame.empty() && frame[0] == frame::Resp)
            ++flood_responses_;
    }

    void on_timer(Network& net, std::uint64_t token) override {
        if (token != flood_timer_) return;
        flood_timer_ = 0;
        if (!flooding_) return;
        if (net.now() > flood_until_) {
            flooding_ = false;
            return;
        }
        Bytes cmd = make_frame(frame::Cmd, wire::encode_opcode({wire::OpKind::TrqReq}));
        if (net.try_send(id_, flood_target_, cmd)) ++flood_queries_;
        flood_timer_ = net.schedule_timer(id_, flood_interval_);
    }

    /// Start querying `target` every `interval_ms` until `until`.
    void start_flood(Network& net, const NodeId& target, SimTime interval_ms, SimTime until) {
        flooding_ = true;
        flood_target_ = target;
        flood_interval_ = interval_ms;
        flood_until_ = until;
        flood_queries_ = 0;
        flood_responses_ = 0;
        flood_timer_ = net.schedule_timer(id_, interval_ms);
    }

    std::uint64_t flood_queries() const { return flood_queries_; }
    std::uint64_t flood_responses() const { return flood_responses_; }

    void clear_inbox() { inbox_.clear(); }
    const std::vector<std::pair<NodeId, Bytes>>& inbox() const { return inbox_; }

    /// Send one plaintext opcode and wait for the victim's reply.
    std::optional<wire::Response> query(Network& net, const NodeId& victim, const wire::Opcode& op,
                                        const Bytes& payload = {}, SimTime timeout = 1000) {
        std::size_t mark = inbox_.size();
        Bytes body = wire::encode_opcode(op);
        body.insert(body.end(), payload.begin(), payload.end());
        net.send(id_, victim, make_frame(frame::Cmd, body));
        bool got = net.run_until(
            [&] {
                for (std::size_t i = mark; i < inbox_.size(); ++i)
                    if (inbox_[i].first == victim && !inbox_[i].second.empty() &&
                        inbox_[i].second[0] == frame::Resp)
                        return true;
                return false;
            },
            timeout);
        if (!got) return std::nullopt;
        for (std::size_t i = inbox_.size(); i-- > mark;)
            if (inbox_[i].first == victim && inbox_[i].second[0] == frame::Resp)
                return wire::decode_response(ByteSpan(inbox_[i].second).subspan(1));
        return std::nullopt;
    }

    /// Inject a raw secure-looking frame (forgery attempts).
    void inject_secure(Network& net, const NodeId& victim, const Bytes& envelope_bytes) {
        net.try_send(id_, victim, make_frame(frame::Secure, envelope_bytes));
    }

private:
    NodeId id_;
    std::vector<std::pair<NodeId, Bytes>> inbox_;
    bool flooding_ = false;
    NodeId flood_target_;
    SimTime flood_interval_ = 15000;
    SimTime flood_until_ = 0;
    std::uint64_t flood_timer_ = 0;
    std::uint64_t flood_queries_ = 0;
    std::uint64_t flood_responses_ = 0;
};

// ---------------------------------------------------------------------------
// Tracker Private Data Capture
// ---------------------------------------------------------------------------

/// Query the victim's device info and fitness banks over the air. Against a
/// plaintext victim this recovers the stored records; against a secure one
/// only undecryptable ciphertext (from the tap) is available.
inline AttackOutcome tpdc_capture(Network& net, Attacker& atk, const NodeId& victim) {
    if (!net.in_range(atk.id(), victim))
        throw Error(Err::OutOfRange, "victim beyond radio range");
    AttackOutcome out;
    out.kind = "tpdc";

    auto info = atk.query(net, victim, {wire::OpKind::TrqReq});
    if (info && info->kind == wire::RespKind::TrqInfo) {
        wire::DeviceInfo di = wire::decode_device_info(info->payload);
        nlohmann::json banks = nlohmann::json::object();
        Bytes record_bank;
        for (std::uint8_t bank = 0; bank < kNumReadBanks; ++bank) {
            auto data = atk.query(net, victim, {wire::OpKind::ReadTrq, bank});
            if (!data || data->kind != wire::RespKind::TrqData) continue;
            banks["bank" + std::to_string(bank)] = to_hex(data->payload);
            if (bank == kRecordBankA) record_bank = data->payload;
        }
        nlohmann::json records = nlohmann::json::array();
        for (const auto& r : wire::decode_records(record_bank))
            records.push_back({{"timestamp", r.timestamp},
                               {"calories", r.calories},
                               {"steps", r.steps},
                               {"distance_cm", r.distance_cm},
                               {"floors", r.floors}});
        out.succeeded = true;
        out.evidence = {{"serial", di.serial}, {"banks", banks}, {"records", records}};
        return out;
    }

    // no plaintext reply: fall back to whatever the tap overheard
    std::size_t ciphertexts = 0;
    std::string sample;
    crypto::Key no_key{};
    std::size_t failed_opens = 0;
    for (const auto& cap : net.captured(atk.id())) {
        if (cap.bytes.empty() || cap.bytes[0] != frame::Secure) continue;
        ++ciphertexts;
        if (sample.empty()) sample = to_hex(cap.bytes);
        if (auto env = fitlock::decode_envelope(ByteSpan(cap.bytes).subspan(1)))
            if (!fitlock::open(no_key, *env)) ++failed_opens;
    }
    out.succeeded = false;
    out.blocked_reason = "FITLOCK";
    out.evidence = {{"ciphertext_frames", ciphertexts},
                    {"decrypt_failures_without_key", failed_opens},
                    {"sample", sample.substr(0, 64)}};
    return out;
}

// ---------------------------------------------------------------------------
// Tracker Injection
// ---------------------------------------------------------------------------

/// Read the record bank, patch the step field of the newest record, write it
/// back, leaving every other byte as it was.
inline AttackOutcome ti_inject(Network& net, Attacker& atk, const NodeId& victim,
                               std::uint32_t steps_value) {
    AttackOutcome out;
    out.kind = "ti";

    auto before = atk.query(net, victim, {wire::OpKind::ReadTrq, kRecordBankA});
    if (!before || before->kind != wire::RespKind::TrqData || before->payload.size() < wire::kRecordLen) {
        out.blocked_reason = "FITLOCK";
        out.evidence = {{"read_answered", false}};
        return out;
    }
    Bytes bank = before->payload;
    Bytes record(bank.end() - wire::kRecordLen, bank.end());
    Bytes patched = record;
    patched[6] = static_cast<std::uint8_t>(steps_value >> 24);
    patched[7] = static_cast<std::uint8_t>(steps_value >> 16);
    patched[8] = static_cast<std::uint8_t>(steps_value >> 8);
    patched[9] = static_cast<std::uint8_t>(steps_value);

    auto ack = atk.query(net, victim, {wire::OpKind::Write, 1, wire::kRecordLen}, patched);
    if (!ack || ack->kind != wire::RespKind::Ok) {
        out.blocked_reason = "FITLOCK";
        out.evidence = {{"write_acknowledged", false}};
        return out;
    }
    auto after = atk.query(net, victim, {wire::OpKind::ReadTrq, kRecordBankA});
    if (!after || after->payload.size() < wire::kRecordLen) {
        out.blocked_reason = "FITLOCK";
        return out;
    }
    Bytes readback(after->payload.end() - wire::kRecordLen, after->payload.end());

    std::vector<int> changed;
    for (std::size_t i = 0; i < wire::kRecordLen; ++i)
        if (readback[i] != record[i]) changed.push_back(static_cast<int>(i));
    bool only_steps = !changed.empty();
    for (int i : changed) only_steps = only_steps && i >= 6 && i <= 9;

    out.succeeded = wire::decode_record(readback).steps == steps_value && only_steps;
    out.evidence = {{"before", to_hex(record)},
                    {"after", to_hex(readback)},
                    {"changed_offsets", changed},
                    {"only_step_bytes_changed", only_steps}};
    return out;
}

// ---------------------------------------------------------------------------
// User Account Injection (through a corrupt base)
// ---------------------------------------------------------------------------

/// Run an upload session through the attacker's base, substituting a
/// fabricated dump. In secure mode the base cannot produce valid ciphertext,
/// so the best it can do is tamper, which the webserver rejects.
inline AttackOutcome uai_inject(Network& net, Base& corrupt_base, Webserver& ws,
                                const NodeId& victim, const std::string& victim_upi,
                                const std::vector<wire::FitnessRecord>& fabricated) {
    AttackOutcome out;
    out.kind = "uai";

    std::uint64_t steps_before = ws.has_account(victim_upi) ? ws.account(victim_upi).steps : 0;
    if (corrupt_base.mode() == DeviceMode::Fitlock || ws.mode() == DeviceMode::Fitlock)
        corrupt_base.install_sealed_tamper();
    else
        corrupt_base.install_dump_forgery(fabricated);

    corrupt_base.start_session(net, victim);
    net.run_until([&] { return !corrupt_base.busy(); }, 5 * kMsPerMinute);
    corrupt_base.clear_forgeries();

    std::uint64_t steps_after = ws.has_account(victim_upi) ? ws.account(victim_upi).steps : 0;
    std::uint64_t injected = 0;
    for (const auto& r : fabricated) injected += r.steps;

    out.succeeded = steps_after - steps_before == injected && injected > 0 &&
                    corrupt_base.last_report().completed;
    if (!out.succeeded) out.blocked_reason = "FITLOCK";
    out.evidence = {{"steps_before", steps_before},
                    {"steps_after", steps_after},
                    {"injected", injected},
                    {"session_completed", corrupt_base.last_report().completed},
                    {"session_error", corrupt_base.last_report().error}};
    return out;
}

// ---------------------------------------------------------------------------
// Reward farming
// ---------------------------------------------------------------------------

/// Keep the corrupt base posting modest fabricated dumps every 15 minutes so
/// the account keeps accruing fairly-active minutes.
inline AttackOutcome reward_farm(Network& net, Base& corrupt_base, Webserver& ws,
                                 const NodeId& own_tracker, const std::string& upi,
                                 double duration_min, std::uint32_t steps_per_window = 600) {
    AttackOutcome out;
    out.kind = "reward_farm";

    double points_before = ws.has_account(upi) ? ws.account(upi).points : 0;
    bool secure = ws.mode() == DeviceMode::Fitlock;

    auto one_session = [&](std::uint32_t steps) {
        if (secure)
            corrupt_base.install_sealed_tamper();
        else
            corrupt_base.install_dump_forgery(
                {{static_cast<std::uint32_t>(net.now() / 1000), 0, steps,
                  steps * 70, 0}});
        corrupt_base.start_session(net, own_tracker);
        net.run_until([&] { return !corrupt_base.busy(); }, 5 * kMsPerMinute);
        corrupt_base.clear_forgeries();
    };

    one_session(0);  // establish the upload baseline
    double done_min = 0;
    while (done_min < duration_min) {
        double window = std::min(15.0, duration_min - done_min);
        net.advance(static_cast<SimTime>(window * kMsPerMinute));
        done_min += window;
        one_session(steps_per_window);
    }

    double points_after = ws.has_account(upi) ? ws.account(upi).points : 0;
    out.succeeded = points_after > points_before;
    if (!out.succeeded) out.blocked_reason = "FITLOCK";
    out.evidence = {{"points_before", points_before},
                    {"points_after", points_after},
                    {"fairly_active_min", ws.has_account(upi) ? ws.account(upi).fairly_active_min : 0},
                    {"tier", reward_tier(points_after)}};
    return out;
}

// ---------------------------------------------------------------------------
// Battery drain
// ---------------------------------------------------------------------------

/// Flood the victim with device-info queries at `rate_per_min` for
/// `duration_ms` of simulated time. Pass the victim device to have the
/// outcome report its measured charge delta and a projected lifetime.
inline AttackOutcome battery_drain(Network& net, Attacker& atk, const NodeId& victim,
                                   double rate_per_min, SimTime duration_ms,
                                   const Tracker* victim_dev = nullptr) {
    AttackOutcome out;
    out.kind = "battery_drain";
    if (rate_per_min <= 0) {
        out.evidence = {{"queries", 0}, {"responses", 0}};
        return out;
    }
    double charge_before = victim_dev ? victim_dev->battery().charge() : 0;
    SimTime started = net.now();
    SimTime interval = static_cast<SimTime>(kMsPerMinute / rate_per_min);
    atk.start_flood(net, victim, interval, net.now() + duration_ms);
    net.advance(duration_ms + interval);
    out.succeeded = atk.flood_responses() > atk.flood_queries() / 2;
    if (!out.succeeded) out.blocked_reason = "FITLOCK";
    out.evidence = {{"queries", atk.flood_queries()}, {"responses", atk.flood_responses()}};
    if (victim_dev) {
        double delta = charge_before - victim_dev->battery().charge();
        out.evidence["charge_delta"] = delta;
        double hours = static_cast<double>(net.now() - started) / kMsPerHour;
        if (delta > 0)
            out.evidence["projected_lifetime_h"] = hours * charge_before / delta;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Display overflow denial of service
// ---------------------------------------------------------------------------

/// Inject a step count past the 6-digit display width.
inline AttackOutcome dos_overflow(Network& net, Attacker& atk, const NodeId& victim,
                                  std::uint32_t value = 12580000) {
    AttackOutcome out = ti_inject(net, atk, victim, value);
    out.kind = "dos_overflow";
    out.evidence["injected_value"] = value;
    out.evidence["display_digits_needed"] = std::to_string(value).size();
    return out;
}

// ---------------------------------------------------------------------------
// Mule attack generators
// ---------------------------------------------------------------------------

struct ActivityEvent {
    SimTime t_offset_ms = 0;
    std::uint64_t walk_steps = 0;
    std::uint64_t run_steps = 0;
    std::uint64_t floors = 0;
    SimTime elapsed_ms = 0;
};

struct MuleStream {
    std::vector<ActivityEvent> events;
    GpsTrace gps;
    SimTime duration_ms = 0;
};

/// Tracker spun on a rope: ceil(rope_length_ft) steps per revolution and a
/// GPS receiver that never moves.
inline MuleStream mule_rope(double rope_length_ft, std::uint64_t revolutions,
                            double duration_min) {
    if (rope_length_ft <= 0 || duration_min <= 0)
        throw Error(Err::BadParams, "rope length and duration must be positive");
    MuleStream s;
    s.duration_ms = static_cast<SimTime>(duration_min * kMsPerMinute);
    std::uint64_t steps_per_rev = static_cast<std::uint64_t>(std::ceil(rope_length_ft));
    std::uint64_t total_steps = steps_per_rev * revolutions;

    std::uint64_t minutes = static_cast<std::uint64_t>(std::ceil(duration_min));
    std::uint64_t emitted = 0;
    for (std::uint64_t m = 1; m <= minutes; ++m) {
        std::uint64_t target = total_steps * m / minutes;
        SimTime at = std::min<SimTime>(m * kMsPerMinute, s.duration_ms);
        s.events.push_back({at, target - emitted, 0, 0, at - (m - 1) * kMsPerMinute});
        emitted = target;
        s.gps.push_back({at, 0.0, 0.0});
    }
    s.gps.insert(s.gps.begin(), {0, 0.0, 0.0});
    return s;
}

inline constexpr double kWheelStepsPerMinAt16_53Kmh = 58.0;  // observed rate model

/// Tracker strapped to a car wheel: steps scale with speed from the observed
/// rate; the GPS trace covers the real driven distance.
inline MuleStream mule_wheel(double speed_kmh, double duration_min) {
    if (speed_kmh <= 0 || duration_min <= 0)
        throw Error(Err::BadParams, "speed and duration must be positive");
    MuleStream s;
    s.duration_ms = static_cast<SimTime>(duration_min * kMsPerMinute);
    double steps_per_min = kWheelStepsPerMinAt16_53Kmh * speed_kmh / 16.53;
    double meters_per_min = speed_kmh * 1000.0 / 60.0;

    std::uint64_t minutes = static_cast<std::uint64_t>(std::ceil(duration_min));
    std::uint64_t emitted = 0;
    s.gps.push_back({0, 0.0, 0.0});
    for (std::uint64_t m = 1; m <= minutes; ++m) {
        double mins = std::min<double>(static_cast<double>(m), duration_min);
        std::uint64_t target = static_cast<std::uint64_t>(std::llround(steps_per_min * mins));
        SimTime at = static_cast<SimTime>(mins * kMsPerMinute);
        s.events.push_back({at, 0, target - emitted, 0, at - (m - 1) * kMsPerMinute});
        emitted = target;
        s.gps.push_back({at, meters_per_min * mins, 0.0});
    }
    return s;
}

/// Feed a generated stream into a tracker, minute by minute.
inline void run_stream(Network& net, Tracker& tracker, const MuleStream& s) {
    SimTime start = net.now();
    SimTime last = 0;
    for (const auto& ev : s.events) {
        net.advance(ev.t_offset_ms - last);
        last = ev.t_offset_ms;
        tracker.record_activity(net.now(), ev.walk_steps, ev.run_steps, ev.floors, ev.elapsed_ms);
    }
    net.advance(s.duration_ms > last ? s.duration_ms - last : 0);
    (void)start;
}

/// Shift a stream's GPS trace onto absolute simulation time.
inline GpsTrace absolute_trace(const MuleStream& s, SimTime start) {
    GpsTrace t = s.gps;
    for (auto& p : t) p.t += start;
    return t;
}

}  // namespace fitsim::fitbite
