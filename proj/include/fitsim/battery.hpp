#pragma once

#include <array>
#include <cmath>

#include "fitsim/errors.hpp"
#include "fitsim/simnet.hpp"

// Tracker battery as a charge fraction in [0,1] drained by three processes:
// a continuous idle rate, a fixed cost per sync session, and a fixed cost per
// standalone query answered outside a session. The rates are calibrated from
// three observed lifetimes (one sync per day; one sync per 15 minutes; the
// query-flood regime of 4 queries/minute plus 15-minute syncs).

namespace fitsim {

struct BatteryModel {
    double idle_per_hour = 0;
    double per_sync = 0;
    double per_query = 0;
};

struct ObservedLifetimes {
    double daily_upload_hours = 29.0 * 24.0;
    double quarter_hour_upload_hours = 186.38;
    double query_flood_hours = 32.71;
};

/// Solve for (idle/hour, per-sync, per-query) from the three lifetimes:
///
///   L1*i + (L1/24)*s            = 1        one sync per day
///   L2*i + (4*L2)*s             = 1        one sync per 15 min
///   L3*i + (4*L3)*s + (240*L3)*q = 1       + 4 queries per minute
///
/// Throws SINGULAR when the system degenerates or any rate is not
/// strictly positive.
inline BatteryModel calibrate_battery(const ObservedLifetimes& obs) {
    double a[3][4] = {
        {obs.daily_upload_hours, obs.daily_upload_hours / 24.0, 0.0, 1.0},
        {obs.quarter_hour_upload_hours, 4.0 * obs.quarter_hour_upload_hours, 0.0, 1.0},
        {obs.query_flood_hours, 4.0 * obs.query_flood_hours, 240.0 * obs.query_flood_hours, 1.0},
    };

    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        for (int c = 0; c < 4; ++c) std::swap(a[col][c], a[pivot][c]);
        if (std::fabs(a[col][col]) < 1e-12) throw Error(Err::Singular, "degenerate lifetime system");
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
        }
    }

    BatteryModel m;
    m.idle_per_hour = a[0][3] / a[0][0];
    m.per_sync = a[1][3] / a[1][1];
    m.per_query = a[2][3] / a[2][2];
    for (double v : {m.idle_per_hour, m.per_sync, m.per_query})
        if (!(v > 0.0) || !std::isfinite(v))
            throw Error(Err::Singular, "calibration produced a non-positive rate");
    return m;
}

/// Charge bookkeeping for one tracker. Idle drain is applied lazily so the
/// death instant is exact even between events.
class BatteryLedger {
public:
    explicit BatteryLedger(BatteryModel model = {}) : model_(model) {}

    void reset(BatteryModel model, SimTime now) {
        model_ = model;
        charge_ = 1.0;
        last_update_ = now;
        dead_ = false;
        death_time_ = 0;
        idle_consumed_ = sync_consumed_ = query_consumed_ = 0;
        sync_count_ = query_count_ = 0;
    }

    const BatteryModel& model() const { return model_; }
    double charge() const { return charge_; }
    bool dead() const { return dead_; }
    SimTime death_time() const { return death_time_; }
    double idle_consumed() const { return idle_consumed_; }
    double sync_consumed() const { return sync_consumed_; }
    double query_consumed() const { return query_consumed_; }
    std::uint64_t sync_count() const { return sync_count_; }
    std::uint64_t query_count() const { return query_count_; }

    /// Apply idle drain up to `now`. Returns false once dead.
    bool advance_idle(SimTime now) {
        if (dead_) return false;
        if (now <= last_update_) return true;
        double hours = static_cast<double>(now - last_update_) / kMsPerHour;
        double cost = hours * model_.idle_per_hour;
        if (cost >= charge_) {
            double frac = model_.idle_per_hour > 0 ? charge_ / (hours * model_.idle_per_hour) : 1.0;
            death_time_ = last_update_ + static_cast<SimTime>(std::llround(
                               frac * static_cast<double>(now - last_update_)));
            idle_consumed_ += charge_;
            charge_ = 0;
            dead_ = true;
            last_update_ = now;
            return false;
        }
        idle_consumed_ += cost;
        charge_ -= cost;
        last_update_ = now;
        return true;
    }

    /// Session establishment cost; returns false if it could not be paid.
    bool debit_sync(SimTime now) {
        if (!advance_idle(now)) return false;
        ++sync_count_;
        return pay(model_.per_sync, &sync_consumed_, now);
    }

    /// Standalone query cost (requests answered outside a sync session).
    bool debit_query(SimTime now) {
        if (!advance_idle(now)) return false;
        ++query_count_;
        return pay(model_.per_query, &query_consumed_, now);
    }

private:
    bool pay(double cost, double* bucket, SimTime now) {
        if (cost >= charge_) {
            *bucket += charge_;
            charge_ = 0;
            dead_ = true;
            death_time_ = now;
            return true;  // this event still completes; the battery dies doing it
        }
        *bucket += cost;
        charge_ -= cost;
        return true;
    }

    BatteryModel model_;
    double charge_ = 1.0;
    SimTime last_update_ = 0;
    bool dead_ = false;
    SimTime death_time_ = 0;
    double idle_consumed_ = 0, sync_consumed_ = 0, query_consumed_ = 0;
    std::uint64_t sync_count_ = 0, query_count_ = 0;
};

}  // namespace fitsim
