#pragma once

#include "flowcast/dataset.hpp"
#include "flowcast/seq2seq.hpp"
#include "flowcast/training.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowcast {

/// Root-mean-square error. Throws ShapeError on length mismatch or empty input.
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Coefficient of determination 1 - SS_res / SS_tot. Empty when the truth is
/// constant (SS_tot = 0), where R^2 is undefined. Not clamped: a predictor
/// worse than the mean scores below zero.
std::optional<double> r2(std::span<const double> pred, std::span<const double> truth);

struct FeatureMetrics {
    std::string feature;
    std::string unit;
    double rmse = 0.0;
    std::optional<double> r2;
    std::size_t n = 0;

    friend bool operator==(const FeatureMetrics&, const FeatureMetrics&) = default;
};

struct MetricsReport {
    std::vector<FeatureMetrics> features;
    std::size_t samples = 0;
    std::size_t horizon = 0;
    std::string model_id;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Denormalized (native-unit) truth and prediction per feature, laid out
/// sample by sample, each sample contributing `horizon` consecutive entries.
struct PredictionSeries {
    std::vector<std::string> features;
    std::vector<std::vector<double>> truth;
    std::vector<std::vector<double>> predicted;
};

struct Evaluation {
    MetricsReport report;
    PredictionSeries series;
};

/// Anything that maps a normalized input window to a normalized horizon x
/// features forecast.
using Predictor = std::function<Matrix(MatrixView)>;

/// Forecasts every test sample, maps predictions and targets back through the
/// dataset's scaler and scores each feature over all (sample, step) pairs.
Evaluation evaluate(const Predictor& predict, const WindowedDataset& test, std::string model_id);
Evaluation evaluate(const Seq2SeqModel& model, const WindowedDataset& test, std::string model_id);

enum class ReportFormat { csv, json };

/// Writes metrics.csv (`feature,rmse,r2,unit,n`) or metrics.json, one
/// pred_<feature>.csv (`t_index,truth,predicted`) per feature, and
/// history.csv when a history is given. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const Evaluation& eval, const TrainHistory* history,
                                               const std::filesystem::path& dir, ReportFormat format);

/// An undefined R^2 is written as `undefined` (CSV) or null (JSON).
void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path);

MetricsReport read_metrics_json(const std::filesystem::path& path);
MetricsReport read_metrics_csv(const std::filesystem::path& path);

} // namespace flowcast
