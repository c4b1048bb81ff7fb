#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fitsim/battery.hpp"
#include "fitsim/lifetime.hpp"

using namespace fitsim;

namespace {

/// Independent oracle: solve the same 3x3 system by Cramer's rule.
BatteryModel cramer_solve(double l1, double l2, double l3) {
    double a[3][3] = {{l1, l1 / 24.0, 0.0},
                      {l2, 4.0 * l2, 0.0},
                      {l3, 4.0 * l3, 240.0 * l3}};
    double b[3] = {1.0, 1.0, 1.0};
    auto det3 = [](double m[3][3]) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    double d = det3(a);
    BatteryModel m;
    double tmp[3][3];
    for (int col = 0; col < 3; ++col) {
        std::memcpy(tmp, a, sizeof tmp);
        for (int r = 0; r < 3; ++r) tmp[r][col] = b[r];
        double v = det3(tmp) / d;
        if (col == 0) m.idle_per_hour = v;
        if (col == 1) m.per_sync = v;
        if (col == 2) m.per_query = v;
    }
    return m;
}

}  // namespace

TEST_CASE("calibration matches an independent Cramer's-rule solve") {
    BatteryModel got = calibrate_battery({});
    BatteryModel want = cramer_solve(696.0, 186.38, 32.71);
    CHECK(got.idle_per_hour == doctest::Approx(want.idle_per_hour).epsilon(1e-12));
    CHECK(got.per_sync == doctest::Approx(want.per_sync).epsilon(1e-12));
    CHECK(got.per_query == doctest::Approx(want.per_query).epsilon(1e-12));

    // frozen values from the oracle
    CHECK(got.idle_per_hour == doctest::Approx(1.3954279e-3).epsilon(1e-4));
    CHECK(got.per_sync == doctest::Approx(9.9248869e-4).epsilon(1e-4));
    CHECK(got.per_query == doctest::Approx(1.0502631e-4).epsilon(1e-4));
}

TEST_CASE("calibration rates satisfy the defining balance equations") {
    BatteryModel m = calibrate_battery({});
    CHECK(696.0 * m.idle_per_hour + 29.0 * m.per_sync == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(186.38 * m.idle_per_hour + 745.52 * m.per_sync == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(32.71 * m.idle_per_hour + 7850.4 * m.per_query + 130.84 * m.per_sync ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("doubling all lifetimes halves all rates") {
    BatteryModel m1 = calibrate_battery({696.0, 186.38, 32.71});
    BatteryModel m2 = calibrate_battery({2 * 696.0, 2 * 186.38, 2 * 32.71});
    CHECK(m2.idle_per_hour == doctest::Approx(m1.idle_per_hour / 2).epsilon(1e-9));
    CHECK(m2.per_sync == doctest::Approx(m1.per_sync / 2).epsilon(1e-9));
    CHECK(m2.per_query == doctest::Approx(m1.per_query / 2).epsilon(1e-9));
}

TEST_CASE("degenerate lifetime systems are rejected") {
    // equal lifetimes force a zero sync rate
    CHECK_THROWS_AS(calibrate_battery({100.0, 100.0, 100.0}), Error);
    try {
        calibrate_battery({100.0, 100.0, 100.0});
    } catch (const Error& e) {
        CHECK(e.code() == Err::Singular);
    }
    // a flood lifetime above the 15-minute lifetime needs a negative query cost
    CHECK_THROWS_AS(calibrate_battery({696.0, 186.38, 500.0}), Error);
}

TEST_CASE("ledger: idle drain is exact and monotone") {
    BatteryModel m{0.01, 0.001, 0.0001};  // 1%/hour idle
    BatteryLedger led(m);
    led.reset(m, 0);
    CHECK(led.charge() == 1.0);
    led.advance_idle(10 * kMsPerHour);
    CHECK(led.charge() == doctest::Approx(0.9).epsilon(1e-9));
    led.debit_sync(10 * kMsPerHour);
    CHECK(led.charge() == doctest::Approx(0.899).epsilon(1e-9));
    led.debit_query(10 * kMsPerHour);
    CHECK(led.charge() == doctest::Approx(0.8989).epsilon(1e-9));
    CHECK(led.sync_count() == 1);
    CHECK(led.query_count() == 1);

    // death from pure idle happens at exactly charge/rate
    led.advance_idle(1000 * kMsPerHour);
    CHECK(led.dead());
    double death_h = static_cast<double>(led.death_time()) / kMsPerHour;
    CHECK(death_h == doctest::Approx(10.0 + 0.8989 / 0.01).epsilon(1e-6));

    // monotone: nothing ever recharges
    CHECK(led.charge() == 0.0);
    led.debit_query(2000 * kMsPerHour);
    CHECK(led.charge() == 0.0);
}

TEST_CASE("lifetimes re-simulated through the event loop stay within 1%") {
    BatteryModel m = calibrate_battery({});
    auto daily = simulate_lifetime(m, LifetimeMode::DailyUpload);
    auto quarter = simulate_lifetime(m, LifetimeMode::QuarterHourUpload);
    auto flood = simulate_lifetime(m, LifetimeMode::QueryFlood);

    CHECK(daily.hours == doctest::Approx(696.0).epsilon(0.01));
    CHECK(quarter.hours == doctest::Approx(186.38).epsilon(0.01));
    CHECK(flood.hours == doctest::Approx(32.71).epsilon(0.01));

    CHECK(daily.syncs == 29);
    CHECK(quarter.syncs == doctest::Approx(745).epsilon(0.01));
    CHECK(flood.queries == doctest::Approx(7850).epsilon(0.01));

    // the flood regime kills the battery ~21x faster than daily uploads,
    // ~5.6x faster than quarter-hourly uploads
    CHECK(daily.hours / flood.hours == doctest::Approx(21.28).epsilon(0.02));
    CHECK(quarter.hours / flood.hours == doctest::Approx(5.63).epsilon(0.02));
}

TEST_CASE("a secured tracker outlives the flood: only idle and syncs drain it") {
    BatteryModel m = calibrate_battery({});
    auto flooded = simulate_lifetime(m, LifetimeMode::QueryFlood, 1, DeviceMode::Fitlock);
    auto quiet = simulate_lifetime(m, LifetimeMode::QuarterHourUpload, 1, DeviceMode::Fitlock);
    CHECK(flooded.queries == 0);  // no per-query debits from attacker traffic
    CHECK(flooded.hours == doctest::Approx(quiet.hours).epsilon(0.01));
}
