#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fitsim/bytes.hpp"
#include "fitsim/errors.hpp"
#include "fitsim/rng.hpp"

// Deterministic in-memory network. Radio links deliver iff the nodes are
// within range of a 15 ft disc model; base<->webserver links are wired and
// always connected. One virtual clock drives everything; with a fixed
// topology, link script and seed, two runs produce byte-identical event logs.

namespace fitsim {

using NodeId = std::string;
using SimTime = std::uint64_t;  // milliseconds of simulated time

inline constexpr SimTime kMsPerSecond = 1000;
inline constexpr SimTime kMsPerMinute = 60 * kMsPerSecond;
inline constexpr SimTime kMsPerHour = 60 * kMsPerMinute;
inline constexpr SimTime kMsPerDay = 24 * kMsPerHour;

enum class NodeKind { Tracker, Base, Webserver, Attacker };

inline const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Tracker: return "tracker";
        case NodeKind::Base: return "base";
        case NodeKind::Webserver: return "webserver";
        case NodeKind::Attacker: return "attacker";
    }
    return "?";
}

struct Vec2 {
    double x_ft = 0;
    double y_ft = 0;
};

inline double distance_ft(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x_ft - b.x_ft, a.y_ft - b.y_ft);
}

class Network;

class Node {
public:
    virtual ~Node() = default;
    virtual void on_message(Network& net, const NodeId& from, const Bytes& frame) = 0;
    virtual void on_timer(Network& net, std::uint64_t token) { (void)net, (void)token; }
};

/// One scripted action applied to one send on a directed link.
struct LinkDirective {
    enum class Action { Deliver, Drop, Delay, Duplicate };
    Action action = Action::Deliver;
    SimTime delay_ms = 0;  // Delay: extra latency on top of the link delay
    int copies = 2;        // Duplicate: total deliveries
};

struct CapturedFrame {
    SimTime t = 0;
    NodeId from;
    NodeId to;
    Bytes bytes;
};

struct EventLogEntry {
    SimTime t = 0;
    std::string type;  // send | drop | deliver | timer | note
    NodeId from;
    NodeId to;
    std::string detail;
};

class Network {
public:
    explicit Network(std::uint64_t seed = 1) : rng_(seed), seed_(seed) {}

    // -- topology -----------------------------------------------------------

    void add_node(const NodeId& id, NodeKind kind, Vec2 pos, Node* impl) {
        if (nodes_.count(id)) throw Error(Err::BadParams, "duplicate node id " + id);
        nodes_[id] = NodeInfo{kind, pos, impl};
    }

    void set_position(const NodeId& id, Vec2 pos) { info(id).pos = pos; }
    Vec2 position(const NodeId& id) const { return info(id).pos; }
    NodeKind kind_of(const NodeId& id) const { return info(id).kind; }
    bool has_node(const NodeId& id) const { return nodes_.count(id) != 0; }

    void add_wired(const NodeId& a, const NodeId& b) {
        info(a), info(b);
        wired_.insert(pair_key(a, b));
    }

    bool wired(const NodeId& a, const NodeId& b) const { return wired_.count(pair_key(a, b)) != 0; }

    void set_radio_range_ft(double ft) { radio_range_ft_ = ft; }
    double radio_range_ft() const { return radio_range_ft_; }

    /// Radio reachability. Wired pairs are always in range.
    bool in_range(const NodeId& a, const NodeId& b) const {
        if (wired(a, b)) return true;
        return distance_ft(info(a).pos, info(b).pos) <= radio_range_ft_;
    }

    /// Ids of all nodes of one kind, sorted, optionally radio-reachable from `from`.
    std::vector<NodeId> nodes_of_kind(NodeKind k, const NodeId* from = nullptr) const {
        std::vector<NodeId> out;
        for (const auto& [id, ni] : nodes_) {
            if (ni.kind != k) continue;
            if (from && *from != id && !in_range(*from, id)) continue;
            out.push_back(id);
        }
        return out;  // std::map iteration is already id-ordered
    }

    // -- link scripts and taps ------------------------------------------------

    void script_link(const NodeId& from, const NodeId& to, std::vector<LinkDirective> directives) {
        auto& q = scripts_[from + "->" + to];
        for (auto& d : directives) q.push_back(d);
    }

    void add_tap(const NodeId& owner, const NodeId& a, const NodeId& b) {
        if (wired(a, b)) throw Error(Err::BadParams, "taps attach to radio links only");
        taps_.push_back(TapState{owner, a, b, 0});
    }

    /// Attacker-initiated drop of the next n frames on a tapped link.
    void tap_drop_next(const NodeId& owner, const NodeId& a, const NodeId& b, int n) {
        for (auto& t : taps_)
            if (t.owner == owner && matches(t, a, b)) t.drop_budget += n;
    }

    const std::vector<CapturedFrame>& captured(const NodeId& owner) {
        return captures_[owner];
    }

    // -- traffic ---------------------------------------------------------------

    void set_radio_delay(SimTime ms) { radio_delay_ms_ = ms; }
    void set_wired_delay(SimTime ms) { wired_delay_ms_ = ms; }

    /// Schedule delivery of `frame`. Throws OUT_OF_RANGE for radio peers
    /// beyond the range model; scripted drops consume the send silently.
    void send(const NodeId& from, const NodeId& to, Bytes frame) {
        info(from);
        info(to);
        bool is_wired = wired(from, to);
        if (!is_wired && !in_range(from, to))
            throw Error(Err::OutOfRange, from + " -> " + to + " beyond radio range");

        if (logging_) log_.push_back({now_, "send", from, to, to_hex(frame)});

        SimTime delay = is_wired ? wired_delay_ms_ : radio_delay_ms_;
        int copies = 1;
        bool drop = false;

        auto it = scripts_.find(from + "->" + to);
        if (it != scripts_.end() && !it->second.empty()) {
            LinkDirective d = it->second.front();
            it->second.pop_front();
            switch (d.action) {
                case LinkDirective::Action::Deliver: break;
                case LinkDirective::Action::Drop: drop = true; break;
                case LinkDirective::Action::Delay: delay += d.delay_ms; break;
                case LinkDirective::Action::Duplicate: copies = d.copies; break;
            }
        }

        // taps on radio links observe, and may eat, the frame
        if (!is_wired) {
            for (auto& t : taps_) {
                if (!matches(t, from, to)) continue;
                if (!in_range(t.owner, from)) continue;  // out of the attacker's vicinity
                captures_[t.owner].push_back({now_, from, to, frame});
                if (logging_) log_.push_back({now_, "capture", from, t.owner,
                                              std::to_string(frame.size()) + "B"});
                if (t.drop_budget > 0) {
                    --t.drop_budget;
                    drop = true;
                }
            }
        }

        if (drop) {
            if (logging_) log_.push_back({now_, "drop", from, to, ""});
            return;
        }
        for (int c = 0; c < copies; ++c)
            push_event(Event{now_ + delay, 0, to, seq_++, Event::Kind::Delivery, from, frame, 0});
    }

    bool try_send(const NodeId& from, const NodeId& to, Bytes frame) {
        if (!wired(from, to) && !in_range(from, to)) return false;
        send(from, to, std::move(frame));
        return true;
    }

    // -- timers ------------------------------------------------------------------

    std::uint64_t schedule_timer(const NodeId& node, SimTime delay, std::uint64_t token = 0) {
        info(node);
        std::uint64_t id = token ? token : next_timer_token_++;
        push_event(Event{now_ + delay, 1, node, seq_++, Event::Kind::Timer, "", {}, id});
        return id;
    }

    void cancel_timer(const NodeId& node, std::uint64_t token) {
        cancelled_.insert(node + "#" + std::to_string(token));
    }

    std::uint64_t fresh_timer_token() { return next_timer_token_++; }

    // -- clock -------------------------------------------------------------------

    SimTime now() const { return now_; }
    Rng& rng() { return rng_; }
    std::uint64_t seed() const { return seed_; }

    /// Run every event scheduled in the next `ms` of simulated time.
    void advance(SimTime ms) {
        SimTime deadline = now_ + ms;
        while (!queue_.empty() && queue_.begin()->t <= deadline) dispatch_front();
        now_ = deadline;
    }

    /// Run until the queue drains or `limit` of simulated time passes.
    void run_until_idle(SimTime limit = 365ULL * kMsPerDay) {
        SimTime deadline = now_ + limit;
        while (!queue_.empty() && queue_.begin()->t <= deadline) dispatch_front();
        if (queue_.empty() && now_ < deadline) return;  // leave clock at last event
        now_ = std::min(deadline, now_);
    }

    /// Run until `pred()` holds, checking after every event. False on timeout.
    template <typename Pred>
    bool run_until(Pred pred, SimTime limit) {
        SimTime deadline = now_ + limit;
        if (pred()) return true;
        while (!queue_.empty() && queue_.begin()->t <= deadline) {
            dispatch_front();
            if (pred()) return true;
        }
        now_ = deadline;
        return false;
    }

    const std::vector<EventLogEntry>& event_log() const { return log_; }

    /// Heavy statistical scenarios switch the log off to keep memory flat.
    void set_logging(bool on) { logging_ = on; }

    void note(const std::string& who, const std::string& what) {
        log_.push_back({now_, "note", who, "", what});
    }

    std::string event_log_jsonl() const {
        std::string out;
        for (const auto& e : log_) {
            out += "{\"t\":" + std::to_string(e.t) + ",\"type\":\"" + e.type + "\",\"from\":\"" +
                   e.from + "\",\"to\":\"" + e.to + "\",\"detail\":\"" + e.detail + "\"}\n";
        }
        return out;
    }

private:
    struct NodeInfo {
        NodeKind kind = NodeKind::Tracker;
        Vec2 pos;
        Node* impl = nullptr;
    };

    struct Event {
        SimTime t;
        int phase;  // deliveries before timers at equal timestamps
        NodeId node;
        std::uint64_t seq;
        enum class Kind { Delivery, Timer } kind;
        NodeId from;
        Bytes frame;
        std::uint64_t token;

        bool operator<(const Event& o) const {
            if (t != o.t) return t < o.t;
            if (phase != o.phase) return phase < o.phase;
            if (node != o.node) return node < o.node;
            return seq < o.seq;
        }
    };

    struct TapState {
        NodeId owner;
        NodeId a, b;
        int drop_budget = 0;
    };

    static bool matches(const TapState& t, const NodeId& x, const NodeId& y) {
        return (t.a == x && t.b == y) || (t.a == y && t.b == x);
    }

    static std::string pair_key(const NodeId& a, const NodeId& b) {
        return a < b ? a + "|" + b : b + "|" + a;
    }

    const NodeInfo& info(const NodeId& id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw Error(Err::BadParams, "unknown node " + id);
        return it->second;
    }
    NodeInfo& info(const NodeId& id) {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw Error(Err::BadParams, "unknown node " + id);
        return it->second;
    }

    void push_event(Event e) { queue_.insert(std::move(e)); }

    void dispatch_front() {
        Event e = *queue_.begin();
        queue_.erase(queue_.begin());
        now_ = e.t;
        NodeInfo& ni = info(e.node);
        if (e.kind == Event::Kind::Delivery) {
            if (logging_) log_.push_back({now_, "deliver", e.from, e.node, to_hex(e.frame)});
            if (ni.impl) ni.impl->on_message(*this, e.from, e.frame);
        } else {
            auto key = e.node + "#" + std::to_string(e.token);
            if (cancelled_.erase(key)) return;
            if (logging_) log_.push_back({now_, "timer", e.node, e.node, std::to_string(e.token)});
            if (ni.impl) ni.impl->on_timer(*this, e.token);
        }
    }

    std::map<NodeId, NodeInfo> nodes_;
    std::set<std::string> wired_;
    std::map<std::string, std::deque<LinkDirective>> scripts_;
    std::vector<TapState> taps_;
    std::map<NodeId, std::vector<CapturedFrame>> captures_;
    std::multiset<Event> queue_;
    std::set<std::string> cancelled_;
    std::vector<EventLogEntry> log_;
    SimTime now_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t next_timer_token_ = 1;
    bool logging_ = true;
    double radio_range_ft_ = 15.0;
    SimTime radio_delay_ms_ = 5;
    SimTime wired_delay_ms_ = 10;
    Rng rng_;
    std::uint64_t seed_;
};

}  // namespace fitsim
