#pragma once

#include "fitsim/base.hpp"
#include "fitsim/battery.hpp"
#include "fitsim/fitbite.hpp"
#include "fitsim/tracker.hpp"
#include "fitsim/webserver.hpp"

// Battery lifetime driver: builds an isolated tracker/base/webserver world,
// runs one of the three operation regimes through the real event loop and
// debit ledger, and reports how long the battery lasted.

namespace fitsim {

enum class LifetimeMode { DailyUpload, QuarterHourUpload, QueryFlood };

inline const char* to_string(LifetimeMode m) {
    switch (m) {
        case LifetimeMode::DailyUpload: return "daily";
        case LifetimeMode::QuarterHourUpload: return "quarter-hourly";
        case LifetimeMode::QueryFlood: return "query-flood";
    }
    return "?";
}

struct LifetimeResult {
    double hours = 0;
    std::uint64_t syncs = 0;
    std::uint64_t queries = 0;
};

inline LifetimeResult simulate_lifetime(const BatteryModel& model, LifetimeMode mode,
                                        std::uint64_t seed = 1,
                                        DeviceMode device_mode = DeviceMode::Baseline) {
    Network net(seed);
    std::uint32_t sleep_min = mode == LifetimeMode::DailyUpload ? 1440 : 15;

    crypto::Key key{};
    for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<std::uint8_t>(i);

    Tracker::Config tc;
    tc.serial = "LIFE1";
    tc.mode = device_mode;
    if (device_mode == DeviceMode::Fitlock) tc.key = key;
    tc.battery = model;
    tc.auto_beacon = true;
    tc.sleep_interval = static_cast<SimTime>(sleep_min) * kMsPerMinute;
    Tracker tracker(tc);

    Base::Config bc;
    bc.id = "base1";
    bc.mode = device_mode;
    bc.auto_sync = true;
    bc.sleep_minutes = sleep_min;
    Base base(bc);

    Webserver ws(Webserver::make(device_mode));
    ws.register_tracker("LIFE1", "TPI-1", key);
    ws.add_account("owner", "pw");
    ws.bind_directly("LIFE1", "owner");

    net.add_node("LIFE1", NodeKind::Tracker, {0, 0}, &tracker);
    net.add_node("base1", NodeKind::Base, {5, 0}, &base);
    net.add_node("ws", NodeKind::Webserver, {0, 0}, &ws);
    net.add_wired("base1", "ws");
    tracker.start(net);

    fitbite::Attacker attacker("atk01");
    if (mode == LifetimeMode::QueryFlood) {
        net.add_node("atk01", NodeKind::Attacker, {10, 0}, &attacker);
        attacker.start_flood(net, "LIFE1", 15 * kMsPerSecond, 100ULL * kMsPerDay);
    }

    bool died = net.run_until([&] { return tracker.battery().dead(); }, 40ULL * kMsPerDay);
    LifetimeResult r;
    r.hours = died ? static_cast<double>(tracker.battery().death_time()) / kMsPerHour
                   : static_cast<double>(net.now()) / kMsPerHour;
    r.syncs = tracker.battery().sync_count();
    r.queries = tracker.battery().query_count();
    return r;
}

}  // namespace fitsim
