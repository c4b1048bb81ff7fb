#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fitsim/fitlock.hpp"
#include "fitsim/simnet.hpp"
#include "fitsim/tracker.hpp"
#include "fitsim/types.hpp"
#include "fitsim/wired.hpp"

// USB base station: bridges radio trackers to the wired webserver. Runs the
// four-phase upload session, relaying opcodes down and responses up. In
// secure mode the base never looks inside envelopes; it routes by the
// cleartext tracker id and forwards bytes verbatim. A corrupt base is the
// same machine with a forgery hook installed at the dump step.

namespace fitsim {

struct SessionStep {
    int phase = 0;  // 0 = connection management, 1..4 = protocol phases
    std::string what;
};

struct SessionReport {
    std::string tracker;
    std::string mode;
    bool completed = false;
    std::string error;  // TIMEOUT | SERVER_ERROR | DISCONNECTED | UNREACHABLE
    std::vector<std::string> endpoints;        // wired paths hit, in order
    std::vector<std::string> opcodes_relayed;  // opcode mnemonics, in order
    std::vector<SessionStep> steps;
    std::uint64_t round_trips = 0;
    SimTime started = 0;
    SimTime finished = 0;
};

/// Alive trackers currently inside the base's radio disc.
inline std::vector<std::string> discover(const Network& net, const NodeId& base,
                                         const std::map<NodeId, const Tracker*>& trackers) {
    std::vector<std::string> out;
    for (const auto& [id, t] : trackers) {
        if (t->battery().dead()) continue;
        if (!net.in_range(base, id)) continue;
        out.push_back(id);
    }
    return out;
}

class Base : public Node {
public:
    struct Config {
        NodeId id;
        NodeId webserver = "ws";
        DeviceMode mode = DeviceMode::Baseline;
        bool auto_sync = false;
        SimTime radio_timeout = 1500;        // per-opcode wait, plaintext mode
        SimTime session_watchdog = 30000;    // overall stall guard, secure mode
        std::uint32_t sleep_minutes = 15;
    };

    explicit Base(Config cfg) : cfg_(std::move(cfg)) {}

    const NodeId& id() const { return cfg_.id; }
    DeviceMode mode() const { return cfg_.mode; }
    bool busy() const { return state_ != State::Idle; }
    const SessionReport& last_report() const { return report_; }
    const std::vector<SessionReport>& reports() const { return reports_; }
    std::uint64_t sessions_completed() const { return sessions_completed_; }
    bool login_ok() const { return login_ok_; }

    // -- corruption hooks (attack suite) ---------------------------------------

    /// Replace the records posted at the dump step with fabricated ones.
    void install_dump_forgery(std::vector<wire::FitnessRecord> records) {
        forged_records_ = std::move(records);
    }

    /// Secure mode: tamper with every sealed tracker reply before posting it.
    void install_sealed_tamper() { tamper_sealed_ = true; }

    void clear_forgeries() {
        forged_records_.reset();
        tamper_sealed_ = false;
    }

    // -- session control ---------------------------------------------------------

    /// Kick off the upload session with a tracker in range. The session then
    /// runs on network events; poll busy()/last_report().
    void start_session(Network& net, const std::string& tracker) {
        if (state_ != State::Idle) throw Error(Err::Protocol, "session already running");
        report_ = SessionReport{};
        report_.tracker = tracker;
        report_.mode = to_string(cfg_.mode);
        report_.started = net.now();
        tracker_ = tracker;
        state_ = State::Connecting;
        step(0, "base connects to tracker " + tracker);
        if (!net.try_send(cfg_.id, tracker, make_frame(frame::Connect))) {
            fail(net, "UNREACHABLE");
            return;
        }
        arm_radio_timer(net);
    }

    /// Cleartext credential post, exactly as the client software would send it.
    void login(Network& net, const std::string& user, const std::string& password) {
        login_ok_ = false;
        WiredMsg req{WiredMsg::Kind::Request, endpoint::kLogin, next_txn_++,
                     {"-", wire::encode_tlv({{wire::tag::User, to_bytes(user)},
                                             {wire::tag::Password, to_bytes(password)}})}};
        net.send(cfg_.id, cfg_.webserver, encode_wired(req));
    }

    /// Route an envelope to the tracker it names. The body is forwarded
    /// bit-identically; the base has no key and nothing to rewrite.
    void relay(Network& net, const fitlock::SecureEnvelope& env, std::uint8_t frame_kind) {
        if (!net.try_send(cfg_.id, env.tracker_id,
                          make_frame(frame_kind, fitlock::encode_envelope(env))))
            throw Error(Err::Unreachable, env.tracker_id + " not in range");
    }

    // -- node interface --------------------------------------------------------------

    void on_message(Network& net, const NodeId& from, const Bytes& f) override {
        if (from == cfg_.webserver) {
            on_wired(net, f);
            return;
        }
        if (f.empty()) return;
        switch (f[0]) {
            case frame::Beacon:
                if (cfg_.auto_sync && state_ == State::Idle)
                    start_session(net, to_string(ByteSpan(f).subspan(1)));
                break;
            case frame::Resp: on_tracker_resp(net, from, ByteSpan(f).subspan(1)); break;
            case frame::Secure: on_tracker_secure(net, from, ByteSpan(f).subspan(1)); break;
            default: break;
        }
    }

    void on_timer(Network& net, std::uint64_t token) override {
        if (token != radio_timer_) return;
        radio_timer_ = 0;
        if (state_ == State::Idle) return;
        fail(net, "TIMEOUT");
    }

private:
    enum class State {
        Idle,
        Connecting,   // waiting for the connect ack
        AwaitWs,      // waiting for a wired response
        AwaitTracker, // waiting for a radio response
        Closing,      // CLOSE relayed, waiting for the final ack
    };

    struct QueuedOp {
        wire::Opcode op;
        Bytes payload;
    };

    // -- helpers ---------------------------------------------------------------------

    void step(int phase, const std::string& what) { report_.steps.push_back({phase, what}); }

    void arm_radio_timer(Network& net) {
        SimTime wait = cfg_.mode == DeviceMode::Fitlock ? cfg_.session_watchdog : cfg_.radio_timeout;
        radio_timer_ = net.schedule_timer(cfg_.id, wait);
    }

    void disarm_radio_timer() { radio_timer_ = 0; }

    void fail(Network& net, const std::string& error) {
        report_.error = error;
        report_.finished = net.now();
        finish();
    }

    void complete(Network& net) {
        report_.completed = true;
        report_.finished = net.now();
        ++sessions_completed_;
        finish();
    }

    void finish() {
        state_ = State::Idle;
        tracker_.clear();
        op_queue_.clear();
        collected_.clear();
        read_banks_.clear();
        disarm_radio_timer();
        reports_.push_back(report_);
    }

    void post(Network& net, const char* path, std::vector<wire::TlvItem> items) {
        report_.endpoints.push_back(path);
        step(phase_of(path), std::string("base POST ") + path);
        WiredMsg req{WiredMsg::Kind::Request, path, next_txn_++,
                     {tracker_, wire::encode_tlv(items)}};
        state_ = State::AwaitWs;
        net.send(cfg_.id, cfg_.webserver, encode_wired(req));
    }

    static int phase_of(const std::string& path) {
        if (path == endpoint::kUploadData) return 1;
        if (path == endpoint::kLookupTracker) return 2;
        if (path == endpoint::kDumpData) return 3;
        if (path == endpoint::kClearData) return 4;
        return 0;
    }

    void radio_cmd(Network& net, const wire::Opcode& op, const Bytes& payload) {
        Bytes body = wire::encode_opcode(op);
        body.insert(body.end(), payload.begin(), payload.end());
        report_.opcodes_relayed.push_back(opcode_name(op));
        step(current_phase_, "base relays " + opcode_name(op) + " to tracker");
        state_ = op.kind == wire::OpKind::Close ? State::Closing : State::AwaitTracker;
        if (!net.try_send(cfg_.id, tracker_, make_frame(frame::Cmd, body))) {
            fail(net, "TIMEOUT");  // tracker left range mid-session
            return;
        }
        arm_radio_timer(net);
    }

    static std::string opcode_name(const wire::Opcode& op) {
        switch (op.kind) {
            case wire::OpKind::TrqReq: return "TRQ-REQ";
            case wire::OpKind::ReadTrq: return "READ-TRQ[" + std::to_string(op.bank) + "]";
            case wire::OpKind::Write: return "WRITE[" + std::to_string(op.bank) + "]";
            case wire::OpKind::Erase: return "ERASE[" + std::to_string(op.bank) + "]";
            case wire::OpKind::Close: return "CLOSE";
        }
        return "?";
    }

    void sleep_tracker(Network& net) {
        Bytes minutes;
        put_u32be(minutes, cfg_.sleep_minutes);
        net.try_send(cfg_.id, tracker_, make_frame(frame::Sleep, minutes));
        step(4, "base requests SLEEP for " + std::to_string(cfg_.sleep_minutes) + " minutes");
    }

    // -- wired leg ----------------------------------------------------------------------

    void on_wired(Network& net, const Bytes& bytes) {
        auto msg = decode_wired(bytes);
        if (!msg) return;
        if (msg->kind == WiredMsg::Kind::Push) {
            on_push(net, *msg);
            return;
        }
        if (msg->kind != WiredMsg::Kind::Response) return;
        if (msg->path == endpoint::kLogin) {
            auto items = wire::decode_tlv(msg->env.body);
            login_ok_ = wire::find_tlv(items, wire::tag::Done) != nullptr;
            return;
        }
        if (state_ != State::AwaitWs) return;
        auto items = wire::decode_tlv(msg->env.body);
        if (const auto* err = wire::find_tlv(items, wire::tag::ErrorCode)) {
            (void)err;
            fail(net, "SERVER_ERROR");
            return;
        }
        if (cfg_.mode == DeviceMode::Baseline)
            on_ws_response_baseline(net, msg->path, items);
        else
            on_ws_response_secure(net, items);
    }

    void on_push(Network& net, const WiredMsg& msg) {
        auto items = wire::decode_tlv(msg.env.body);
        if (msg.path == endpoint::kAbort) {
            if (state_ != State::Idle) fail(net, "DISCONNECTED");
            return;
        }
        const auto* sealed = wire::find_tlv(items, wire::tag::Sealed);
        if (!sealed) return;
        auto env = fitlock::decode_envelope(sealed->value);
        if (!env) return;
        if (msg.path == endpoint::kRelayBind) {
            try {
                relay(net, *env, frame::Bind);
            } catch (const Error&) {
            }
            return;
        }
        if (msg.path == endpoint::kRelay) {
            if (const auto* ph = wire::find_tlv(items, wire::tag::Phase))
                if (ph->value.size() == 1) current_phase_ = ph->value[0];
            if (state_ != State::Idle) step(current_phase_, "base relays retransmitted envelope");
            try {
                relay(net, *env, frame::Secure);
            } catch (const Error&) {
                if (state_ != State::Idle) fail(net, "TIMEOUT");
            }
        }
    }

    // -- baseline session flow -------------------------------------------------------------

    void on_ws_response_baseline(Network& net, const std::string& path,
                                 const std::vector<wire::TlvItem>& items) {
        if (path == endpoint::kUploadData) {
            const auto* op = wire::find_tlv(items, wire::tag::Opcode);
            if (!op) return fail(net, "SERVER_ERROR");
            current_phase_ = 2;
            step(2, "webserver sends tracker id and TRQ-REQ");
            radio_cmd(net, wire::decode_opcode(op->value), {});
            return;
        }
        if (path == endpoint::kLookupTracker) {
            current_phase_ = 3;
            step(3, "webserver sends TPI/UPI and READ-TRQ opcodes");
            queue_ops(items);
            next_op(net);
            return;
        }
        if (path == endpoint::kDumpData) {
            current_phase_ = 4;
            step(4, "webserver sends WRITE and ERASE opcodes");
            queue_ops(items);
            next_op(net);
            return;
        }
        if (path == endpoint::kClearData) {
            const auto* op = wire::find_tlv(items, wire::tag::Opcode);
            if (!op) return fail(net, "SERVER_ERROR");
            step(4, "webserver replies with CLOSE");
            radio_cmd(net, wire::decode_opcode(op->value), {});
            return;
        }
    }

    void queue_ops(const std::vector<wire::TlvItem>& items) {
        op_queue_.clear();
        collected_.clear();
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].tag != wire::tag::Opcode) continue;
            QueuedOp q;
            q.op = wire::decode_opcode(items[i].value);
            if (i + 1 < items.size() && items[i + 1].tag == wire::tag::Data)
                q.payload = items[i + 1].value;
            op_queue_.push_back(std::move(q));
        }
    }

    void next_op(Network& net) {
        if (op_queue_.empty()) {
            post_collected(net);
            return;
        }
        QueuedOp q = op_queue_.front();
        op_queue_.pop_front();
        pending_op_ = q.op;
        radio_cmd(net, q.op, q.payload);
    }

    void post_collected(Network& net) {
        if (current_phase_ == 3) {
            std::vector<wire::TlvItem> items;
            for (const auto& bank : read_banks_) {
                items.push_back({wire::tag::BankIndex, {bank.index}});
                items.push_back({wire::tag::BankBytes, bank.bytes});
            }
            if (forged_records_) {
                // corrupt base: fabricated fitness data replaces the real dump
                items.clear();
                items.push_back({wire::tag::BankIndex, {kRecordBankA}});
                items.push_back({wire::tag::BankBytes, wire::encode_records(*forged_records_)});
                step(3, "corrupt base substitutes a fabricated dump");
            }
            post(net, endpoint::kDumpData, std::move(items));
            return;
        }
        post(net, endpoint::kClearData, collected_);
    }

    void on_tracker_resp(Network& net, const NodeId& from, ByteSpan body) {
        if (from != tracker_) return;
        disarm_radio_timer();
        wire::Response resp;
        try {
            resp = wire::decode_response(body);
        } catch (const Error&) {
            return fail(net, "TIMEOUT");
        }
        ++report_.round_trips;

        switch (state_) {
            case State::Connecting: {
                --report_.round_trips;  // connection ack is not a protocol round trip
                step(1, "connection established; base sends client and platform info");
                post(net, endpoint::kUploadData,
                     {{wire::tag::Platform, to_bytes("fitsim")},
                      {wire::tag::TrackerId, to_bytes(tracker_)}});
                return;
            }
            case State::AwaitTracker: break;
            case State::Closing: {
                complete_close(net);
                return;
            }
            default: return;
        }

        if (current_phase_ == 2 && resp.kind == wire::RespKind::TrqInfo) {
            wire::DeviceInfo info = wire::decode_device_info(resp.payload);
            step(2, "tracker answers TRQ-INFO; base posts it for lookup");
            post(net, endpoint::kLookupTracker,
                 {{wire::tag::Serial, to_bytes(info.serial)},
                  {wire::tag::Firmware, to_bytes(info.firmware)},
                  {wire::tag::OnBase, {static_cast<std::uint8_t>(info.on_base ? 1 : 0)}}});
            return;
        }
        if (current_phase_ == 3 && resp.kind == wire::RespKind::TrqData) {
            read_banks_.push_back({pending_op_.bank, wire::BankImage::Kind::Read, resp.payload});
            next_op(net);
            return;
        }
        if (current_phase_ == 4) {
            collected_.push_back({wire::tag::Response, wire::encode_response(resp)});
            next_op(net);
            return;
        }
    }

    void complete_close(Network& net) {
        disarm_radio_timer();
        sleep_tracker(net);
        complete(net);
    }

    // -- secure session flow ------------------------------------------------------------------

    void on_ws_response_secure(Network& net, const std::vector<wire::TlvItem>& items) {
        if (wire::find_tlv(items, wire::tag::Done)) {
            step(4, "webserver confirms session completion");
            sleep_tracker(net);
            complete(net);
            return;
        }
        const auto* sealed = wire::find_tlv(items, wire::tag::Sealed);
        if (!sealed) return fail(net, "SERVER_ERROR");
        if (const auto* ph = wire::find_tlv(items, wire::tag::Phase))
            if (ph->value.size() == 1) current_phase_ = ph->value[0];
        auto env = fitlock::decode_envelope(sealed->value);
        if (!env) return fail(net, "SERVER_ERROR");
        step(current_phase_, "base relays a sealed request to the tracker");
        report_.opcodes_relayed.push_back("SEALED");
        state_ = State::AwaitTracker;
        try {
            relay(net, *env, frame::Secure);
        } catch (const Error&) {
            return fail(net, "TIMEOUT");
        }
        arm_radio_timer(net);
    }

    void on_tracker_secure(Network& net, const NodeId& from, ByteSpan body) {
        if (cfg_.mode != DeviceMode::Fitlock) return;
        Bytes sealed(body.begin(), body.end());
        if (tamper_sealed_ && !sealed.empty()) {
            sealed[sealed.size() / 2] ^= 0x01;  // corrupt base garbles the reply
            step(current_phase_, "corrupt base tampers with the sealed reply");
        }
        if (state_ == State::AwaitTracker && from == tracker_) {
            disarm_radio_timer();
            ++report_.round_trips;
            const char* path = current_phase_ <= 2   ? endpoint::kLookupTracker
                               : current_phase_ == 3 ? endpoint::kDumpData
                                                     : endpoint::kClearData;
            post(net, path, {{wire::tag::Sealed, sealed}});
            return;
        }
        // unsolicited (retransmitted) reply: hand it to the webserver anyway
        WiredMsg push{WiredMsg::Kind::Push, endpoint::kRelayResp, 0,
                      {from, wire::encode_tlv({{wire::tag::Sealed, sealed}})}};
        net.send(cfg_.id, cfg_.webserver, encode_wired(push));
    }

    Config cfg_;
    State state_ = State::Idle;
    std::string tracker_;
    int current_phase_ = 1;
    std::deque<QueuedOp> op_queue_;
    wire::Opcode pending_op_;
    std::vector<wire::BankImage> read_banks_;
    std::vector<wire::TlvItem> collected_;
    std::uint32_t next_txn_ = 1;
    std::uint64_t radio_timer_ = 0;
    bool login_ok_ = false;
    std::optional<std::vector<wire::FitnessRecord>> forged_records_;
    bool tamper_sealed_ = false;
    SessionReport report_;
    std::vector<SessionReport> reports_;
    std::uint64_t sessions_completed_ = 0;
};

}  // namespace fitsim
