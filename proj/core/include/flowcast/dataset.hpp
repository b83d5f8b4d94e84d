#pragma once

#include "flowcast/flow.hpp"
#include "flowcast/tensor.hpp"
#include "flowcast/window_spec.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace flowcast {

struct FeatureRange {
    double min = 0.0;
    double max = 0.0;

    bool degenerate() const noexcept { return max == min; }

    friend bool operator==(const FeatureRange&, const FeatureRange&) = default;
};

/// Per-feature min-max scaling into [-1, 1]. A degenerate (constant)
/// feature normalizes to 0 and denormalizes back to its constant.
struct ScalerParams {
    std::vector<FeatureRange> ranges;
    double target_min = -1.0;
    double target_max = 1.0;

    double normalize(std::size_t feature, double x) const;
    double denormalize(std::size_t feature, double y) const;

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

/// Rows are time steps, columns the model features.
Matrix feature_matrix(std::span<const FlowRecord> records);

/// Number of leading rows a scaler is fitted on: floor(rows * fraction), at least 1.
std::size_t fit_rows(std::size_t rows, double fit_fraction);

/// Fits min/max over the first fit_rows() rows only, so later (test) rows
/// never influence the scaling.
ScalerParams fit_scaler(MatrixView raw, double fit_fraction);
ScalerParams fit_scaler(std::span<const FlowRecord> records, double fit_fraction);

Matrix normalize(const ScalerParams& scaler, MatrixView raw);
Matrix denormalize(const ScalerParams& scaler, MatrixView normalized);

/// Sliding (lookback -> horizon) windows over a normalized series. Windows
/// alias the shared series rather than copying it.
class WindowedDataset {
public:
    WindowedDataset() = default;
    WindowedDataset(std::shared_ptr<const Matrix> series, WindowSpec spec, ScalerParams scaler,
                    std::vector<std::size_t> starts);

    std::size_t size() const noexcept { return starts_.size(); }
    bool empty() const noexcept { return starts_.empty(); }

    /// Input window of sample k: lookback x features.
    MatrixView input(std::size_t k) const;
    /// Target window of sample k: horizon x features, beginning right after input(k).
    MatrixView target(std::size_t k) const;
    /// Row of the series where sample k's input window begins.
    std::size_t start(std::size_t k) const { return starts_.at(k); }

    const WindowSpec& spec() const noexcept { return spec_; }
    const ScalerParams& scaler() const noexcept { return scaler_; }
    const Matrix& series() const { return *series_; }

    /// Samples [first, last) sharing the same series.
    WindowedDataset slice(std::size_t first, std::size_t last) const;

private:
    std::shared_ptr<const Matrix> series_;
    WindowSpec spec_;
    ScalerParams scaler_;
    std::vector<std::size_t> starts_;
};

/// Carves floor((len - lookback - horizon) / stride) + 1 windows in time
/// order. Throws SizingError when the series is shorter than lookback + horizon.
WindowedDataset make_windows(Matrix normalized_series, const WindowSpec& spec, ScalerParams scaler);

/// Chronological split: the first floor(n * train_fraction) samples train.
std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& dataset, double train_fraction);

struct PreparedData {
    WindowedDataset train;
    WindowedDataset test;
};

/// Fits the scaler on the leading train_fraction of records, normalizes the
/// whole series, windows it and splits chronologically.
PreparedData prepare(std::span<const FlowRecord> records, const WindowSpec& spec, double train_fraction);

/// As prepare(), but reuses an existing scaler (e.g. from a checkpoint).
PreparedData prepare(std::span<const FlowRecord> records, const WindowSpec& spec, double train_fraction,
                     const ScalerParams& scaler);

/// Directory layout: scaler.json, windows.meta.json, inputs.f64, targets.f64.
/// Tensors are little-endian float64, sample-major, time-minor, feature-innermost.
void save_dataset(const WindowedDataset& dataset, const std::filesystem::path& dir);

struct LoadedTensors {
    WindowSpec spec;
    ScalerParams scaler;
    std::size_t samples = 0;
    std::vector<double> inputs;
    std::vector<double> targets;
};

LoadedTensors load_dataset(const std::filesystem::path& dir);

} // namespace flowcast
