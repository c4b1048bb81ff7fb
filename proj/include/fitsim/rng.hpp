#pragma once

#include <cstdint>
#include <random>

#include "fitsim/bytes.hpp"

namespace fitsim {

/// Single seeded generator per simulation. Every random choice in a run
/// (nonces, keys, jitter) is drawn from one of these so a (scenario, seed)
/// pair replays byte-identically.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform integer in [lo, hi], inclusive.
    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
        std::uniform_int_distribution<std::uint64_t> dist(lo, hi);
        return dist(eng_);
    }

    Bytes bytes(std::size_t n) {
        Bytes out(n);
        for (auto& b : out) b = static_cast<std::uint8_t>(uniform(0, 255));
        return out;
    }

    double real01() {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        return dist(eng_);
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace fitsim
