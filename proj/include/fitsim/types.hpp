#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fitsim/simnet.hpp"

namespace fitsim {

enum class DeviceMode { Baseline, Fitlock };

inline const char* to_string(DeviceMode m) {
    return m == DeviceMode::Baseline ? "BASELINE" : "FITLOCK";
}

/// Per-user conversion constants. Steps become distance through the stride
/// lengths; daily calories are the basal rate prorated over elapsed time plus
/// a fixed cost per step (declared simulator constants, see docs/protocol.md).
struct UserProfile {
    double walk_stride_m = 0.7;
    double run_stride_m = 0.9;
    double bmr_kcal_per_day = 1500.0;
};

inline constexpr double kKcalPerWalkStep = 0.04;
inline constexpr double kKcalPerRunStep = 0.06;

struct GpsPoint {
    SimTime t = 0;
    double x_m = 0;
    double y_m = 0;
};

using GpsTrace = std::vector<GpsPoint>;

/// Total path length in meters.
inline double gps_path_m(const GpsTrace& trace) {
    double total = 0;
    for (std::size_t i = 1; i < trace.size(); ++i)
        total += std::hypot(trace[i].x_m - trace[i - 1].x_m, trace[i].y_m - trace[i - 1].y_m);
    return total;
}

/// Radio frame kinds on the tracker<->base/attacker links.
namespace frame {
inline constexpr std::uint8_t Beacon = 0x01;   // [5-byte serial]
inline constexpr std::uint8_t Cmd = 0x02;      // [7-byte opcode][payload]
inline constexpr std::uint8_t Resp = 0x03;     // [response bytes]
inline constexpr std::uint8_t Secure = 0x04;   // [sealed envelope]
inline constexpr std::uint8_t Connect = 0x05;  // []
inline constexpr std::uint8_t Sleep = 0x06;    // [u32 minutes]
inline constexpr std::uint8_t Bind = 0x07;     // [sealed bind challenge]
}  // namespace frame

inline Bytes make_frame(std::uint8_t kind, ByteSpan payload = {}) {
    Bytes out;
    out.push_back(kind);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

}  // namespace fitsim
