#pragma once

#include "flowcast/training.hpp"
#include "flowcast/window_spec.hpp"

#include <cstddef>
#include <filesystem>
#include <string>

namespace flowcast {

/// Everything a training run needs besides the data. Defaults reproduce
/// the reference protocol: 5-minute intervals, 20 h lookback (240 steps),
/// 10 h horizon (120 steps), 100 LSTM cells, 65/35 chronological split.
struct PipelineConfig {
    WindowSpec window;
    std::size_t hidden = 100;
    double train_fraction = 0.65;
    double interval = 300.0;
    /// Write checkpoint_epoch_NNNN.json every this many epochs; 0 disables.
    std::size_t checkpoint_every = 0;
    TrainConfig train;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Throws InputError on any out-of-range value.
void validate(const PipelineConfig& cfg);

/// Flat JSON object. Recognized keys (all optional):
///   lookback, horizon, stride, features, hidden, train_fraction, interval,
///   checkpoint_every, batch_size, epochs, base_lr, lr_decay, beta1, beta2,
///   epsilon, seed, huber_tau, validation_fraction, clip_norm
/// Unknown keys are rejected.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config(); every key is written.
std::string dump_config(const PipelineConfig& cfg);

} // namespace flowcast
