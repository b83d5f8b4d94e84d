#pragma once

#include "flowcast/flow.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace flowcast {

enum class SynthProfile {
    sinusoid, // periodic load plus Gaussian noise
    bursty,   // sinusoid with sporadic multi-interval bursts on top
};

SynthProfile parse_synth_profile(std::string_view name);

struct SynthConfig {
    SynthProfile profile = SynthProfile::sinusoid;
    std::size_t length = 1000;
    std::uint64_t seed = 0;
    double interval = 300.0;
    double start_time = 1609459200.0;
    /// Period of the load cycle in intervals (288 x 5 min = one day).
    double period = 288.0;
    /// Relative noise level applied to every generated quantity.
    double noise = 0.05;
    /// Per-interval probability of a burst starting (bursty profile only).
    double burst_rate = 0.01;
};

/// Deterministic per seed. Every record satisfies the FlowRecord invariants:
/// min <= avg <= max, 0 <= std <= max - min, total = avg * count.
std::vector<FlowRecord> synthesize(const SynthConfig& cfg);

} // namespace flowcast
