#pragma once

#include "flowcast/dataset.hpp"
#include "flowcast/seq2seq.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace flowcast {

inline constexpr int kCheckpointFormatVersion = 1;

/// A trained model plus what is needed to apply it to raw flow records.
struct Checkpoint {
    Seq2SeqModel model;
    ScalerParams scaler;
    double train_fraction = 0.65;
    double interval_seconds = 300.0;
    std::uint64_t seed = 0;
    std::size_t epochs_completed = 0;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// JSON document:
///   {"format": "flowcast-checkpoint", "version": 1, "spec": {...},
///    "hidden": H, "train_fraction": .., "interval_seconds": .., "seed": ..,
///    "epochs_completed": .., "scaler": {...},
///    "parameters": [{"name": .., "size": n, "values": [...]}, ...]}
/// Parameter blocks follow for_each_block() order; matrices are row-major. Doubles are written in
/// shortest round-trip form, so loading reproduces every bit.
void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace flowcast
