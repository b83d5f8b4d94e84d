#include "flowcast/synth.hpp"

#include "flowcast/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace flowcast {

SynthProfile parse_synth_profile(std::string_view name) {
    if (name == "sinusoid") return SynthProfile::sinusoid;
    if (name == "bursty") return SynthProfile::bursty;
    throw InputError(fmt::format("unknown synth profile '{}' (expected sinusoid or bursty)", name));
}

std::vector<FlowRecord> synthesize(const SynthConfig& cfg) {
    if (cfg.length < 1) throw InputError("synth length must be >= 1");
    if (!(cfg.interval > 0.0)) throw InputError("synth interval must be positive");
    if (!(cfg.period > 0.0)) throw InputError("synth period must be positive");
    if (!(cfg.noise >= 0.0)) throw InputError("synth noise must be >= 0");
    if (!(cfg.burst_rate >= 0.0 && cfg.burst_rate <= 1.0)) throw InputError("burst rate must lie in [0, 1]");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto jitter = [&] { return cfg.noise * gauss(rng); };

    std::vector<FlowRecord> out;
    out.reserve(cfg.length);
    std::size_t burst_left = 0;
    double burst_gain = 1.0;
    for (std::size_t t = 0; t < cfg.length; ++t) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / cfg.period;

        if (cfg.profile == SynthProfile::bursty) {
            if (burst_left == 0 && unit(rng) < cfg.burst_rate) {
                burst_left = 3 + static_cast<std::size_t>(unit(rng) * 10.0);
                burst_gain = 2.0 + 2.0 * unit(rng);
            }
        }
        const double gain = burst_left > 0 ? burst_gain : 1.0;
        if (burst_left > 0) --burst_left;

        const double rate = 400.0 + 300.0 * std::sin(phase);
        const auto count = static_cast<std::uint64_t>(std::max(1.0, std::round(gain * rate * (1.0 + jitter()))));

        FlowRecord r;
        r.interval_start = cfg.start_time + static_cast<double>(t) * cfg.interval;
        r.interval_length = cfg.interval;
        r.packet_count = count;
        r.avg_kb = std::max(0.05, 0.8 + 0.4 * std::sin(phase + 0.6) + 0.4 * jitter());
        const double min_share = std::clamp(0.10 + 0.04 * std::sin(phase) + 0.1 * jitter(), 0.01, 1.0);
        r.min_kb = r.avg_kb * min_share;
        const double max_factor = std::max(1.0, (1.8 + 0.3 * std::sin(phase + 1.0) + jitter()) * std::sqrt(gain));
        r.max_kb = r.avg_kb * max_factor;
        const double spread = r.max_kb - r.min_kb;
        r.std_kb = spread * std::clamp(0.3 + 0.05 * std::sin(phase + 2.0) + 0.3 * jitter(), 0.0, 1.0);
        r.total_mb = r.avg_kb * static_cast<double>(count) / 1000.0;
        out.push_back(r);
    }
    return out;
}

} // namespace flowcast
