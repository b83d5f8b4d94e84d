#pragma once

#include "flowcast/dataset.hpp"
#include "flowcast/seq2seq.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

namespace flowcast {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 40;
    double base_lr = 1e-3;
    double lr_decay = 0.90;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    double huber_tau = 1.0;
    /// Trailing share of the training split held out for validation loss.
    double validation_fraction = 0.1;
    /// Global gradient-norm clip; 0 disables clipping.
    double clip_norm = 0.0;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Throws InputError on any out-of-range field.
void validate(const TrainConfig& cfg);

/// Uniform [-k, k] weights with k = 1/sqrt(hidden), forget-gate biases 1,
/// every other bias and peephole 0. Deterministic per seed.
Seq2SeqModel init_params(const WindowSpec& spec, std::size_t hidden, std::uint64_t seed);

/// base_lr * lr_decay^epoch, epoch counted from 0.
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

struct AdamState {
    Seq2SeqModel m;
    Seq2SeqModel v;
    std::uint64_t step = 0;

    static AdamState for_model(const Seq2SeqModel& model);
};

/// Bias-corrected Adam update of every parameter. Throws NumericError naming
/// the block if a gradient is non-finite (parameters are left untouched).
void adam_step(Seq2SeqModel& params, const Seq2SeqModel& grads, AdamState& state, double lr, const TrainConfig& cfg);

/// Global L2 norm over every gradient block.
double gradient_norm(const Seq2SeqModel& grads);

struct EpochResult {
    double mean_loss = 0.0; // per-sample summed Huber loss, averaged over the epoch
    std::size_t batches = 0;
};

/// One pass over `train` in an order shuffled by (seed, epoch). Each batch
/// contributes one Adam step on the batch mean of per-sample losses.
EpochResult train_epoch(Seq2SeqModel& model, const WindowedDataset& train, const TrainConfig& cfg, std::size_t epoch,
                        AdamState& adam);

/// Mean per-sample loss without touching the model.
double mean_loss(const Seq2SeqModel& model, const WindowedDataset& data, const HuberConfig& cfg);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss; // NaN when the validation slice is empty
    std::vector<double> lr;

    std::size_t size() const noexcept { return train_loss.size(); }
};

/// Validation slice: the last floor(n * validation_fraction) training samples.
struct TrainValSplit {
    WindowedDataset fit;
    WindowedDataset validation;
};

TrainValSplit validation_split(const WindowedDataset& train, double validation_fraction);

struct FitResult {
    Seq2SeqModel model;
    TrainHistory history;
};

/// Called after every epoch with the 0-based epoch index.
using EpochCallback = std::function<void(std::size_t epoch, const Seq2SeqModel&, const TrainHistory&)>;

FitResult fit(const WindowedDataset& train, std::size_t hidden, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

/// Continues training from `model`, e.g. one produced by init_params().
FitResult fit(Seq2SeqModel model, const WindowedDataset& train, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

/// `epoch,train_loss,val_loss,lr`, epochs numbered from 1.
void write_history_csv(const TrainHistory& history, std::ostream& out);
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);
TrainHistory read_history_csv(const std::filesystem::path& path);

} // namespace flowcast
