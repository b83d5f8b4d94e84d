#include "flowcast/dataset.hpp"

#include "flowcast/error.hpp"
#include "json_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

namespace flowcast {

void validate(const WindowSpec& s) {
    if (s.lookback < 1 || s.horizon < 1 || s.stride < 1 || s.features < 1) {
        throw InputError(fmt::format("window spec fields must be >= 1 (lookback {}, horizon {}, stride {}, features {})",
                                     s.lookback, s.horizon, s.stride, s.features));
    }
}

double ScalerParams::normalize(std::size_t feature, double x) const {
    const auto& r = ranges.at(feature);
    const double mid = 0.5 * (target_min + target_max);
    if (r.degenerate()) return mid;
    return target_min + (x - r.min) * (target_max - target_min) / (r.max - r.min);
}

double ScalerParams::denormalize(std::size_t feature, double y) const {
    const auto& r = ranges.at(feature);
    if (r.degenerate()) return r.min;
    return r.min + (y - target_min) * (r.max - r.min) / (target_max - target_min);
}

Matrix feature_matrix(std::span<const FlowRecord> records) {
    Matrix m(records.size(), kFeatureCount);
    for (std::size_t t = 0; t < records.size(); ++t) {
        const auto f = features(records[t]);
        std::copy(f.begin(), f.end(), m.row(t).begin());
    }
    return m;
}

std::size_t fit_rows(std::size_t rows, double fit_fraction) {
    if (!(fit_fraction > 0.0 && fit_fraction <= 1.0)) {
        throw InputError(fmt::format("fit fraction {} outside (0, 1]", fit_fraction));
    }
    const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(rows) * fit_fraction));
    return std::clamp<std::size_t>(n, 1, rows);
}

ScalerParams fit_scaler(MatrixView raw, double fit_fraction) {
    if (raw.rows == 0) throw SizingError("cannot fit a scaler on an empty series");
    const auto n = fit_rows(raw.rows, fit_fraction);
    ScalerParams s;
    s.ranges.resize(raw.cols);
    for (std::size_t c = 0; c < raw.cols; ++c) {
        double lo = raw(0, c);
        double hi = raw(0, c);
        for (std::size_t t = 1; t < n; ++t) {
            lo = std::min(lo, raw(t, c));
            hi = std::max(hi, raw(t, c));
        }
        s.ranges[c] = {lo, hi};
    }
    return s;
}

ScalerParams fit_scaler(std::span<const FlowRecord> records, double fit_fraction) {
    return fit_scaler(feature_matrix(records), fit_fraction);
}

Matrix normalize(const ScalerParams& scaler, MatrixView raw) {
    require_shape(raw.cols == scaler.ranges.size(),
                  fmt::format("normalize: {} columns but scaler has {} features", raw.cols, scaler.ranges.size()));
    Matrix out(raw.rows, raw.cols);
    for (std::size_t t = 0; t < raw.rows; ++t) {
        for (std::size_t c = 0; c < raw.cols; ++c) out(t, c) = scaler.normalize(c, raw(t, c));
    }
    return out;
}

Matrix denormalize(const ScalerParams& scaler, MatrixView normalized) {
    require_shape(normalized.cols == scaler.ranges.size(),
                  fmt::format("denormalize: {} columns but scaler has {} features", normalized.cols,
                              scaler.ranges.size()));
    Matrix out(normalized.rows, normalized.cols);
    for (std::size_t t = 0; t < normalized.rows; ++t) {
        for (std::size_t c = 0; c < normalized.cols; ++c) out(t, c) = scaler.denormalize(c, normalized(t, c));
    }
    return out;
}

WindowedDataset::WindowedDataset(std::shared_ptr<const Matrix> series, WindowSpec spec, ScalerParams scaler,
                                 std::vector<std::size_t> starts)
    : series_(std::move(series)), spec_(spec), scaler_(std::move(scaler)), starts_(std::move(starts)) {
    require_shape(series_ != nullptr, "dataset needs a series");
    require_shape(series_->cols() == spec_.features,
                  fmt::format("series has {} features, window spec says {}", series_->cols(), spec_.features));
    require_shape(scaler_.ranges.size() == spec_.features,
                  fmt::format("scaler has {} features, window spec says {}", scaler_.ranges.size(), spec_.features));
    for (auto s : starts_) {
        require_shape(s + spec_.lookback + spec_.horizon <= series_->rows(), "window runs past the series end");
    }
}

MatrixView WindowedDataset::input(std::size_t k) const {
    return series_->view().row_range(starts_.at(k), spec_.lookback);
}

MatrixView WindowedDataset::target(std::size_t k) const {
    return series_->view().row_range(starts_.at(k) + spec_.lookback, spec_.horizon);
}

WindowedDataset WindowedDataset::slice(std::size_t first, std::size_t last) const {
    require_shape(first <= last && last <= starts_.size(),
                  fmt::format("slice [{}, {}) out of range for {} samples", first, last, starts_.size()));
    std::vector<std::size_t> s(starts_.begin() + static_cast<std::ptrdiff_t>(first),
                               starts_.begin() + static_cast<std::ptrdiff_t>(last));
    return WindowedDataset(series_, spec_, scaler_, std::move(s));
}

WindowedDataset make_windows(Matrix normalized_series, const WindowSpec& spec, ScalerParams scaler) {
    validate(spec);
    const auto len = normalized_series.rows();
    const auto need = spec.lookback + spec.horizon;
    if (len < need) {
        throw SizingError(fmt::format("series has {} steps but lookback + horizon needs at least {}", len, need));
    }
    const auto count = (len - need) / spec.stride + 1;
    std::vector<std::size_t> starts(count);
    for (std::size_t k = 0; k < count; ++k) starts[k] = k * spec.stride;
    return WindowedDataset(std::make_shared<const Matrix>(std::move(normalized_series)), spec, std::move(scaler),
                           std::move(starts));
}

std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& dataset, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InputError(fmt::format("train fraction {} outside (0, 1)", train_fraction));
    }
    const auto n = dataset.size();
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    if (n_train == 0 || n_train == n) {
        throw SizingError(fmt::format("splitting {} samples at {} leaves an empty {} set", n, train_fraction,
                                      n_train == 0 ? "training" : "test"));
    }
    return {dataset.slice(0, n_train), dataset.slice(n_train, n)};
}

PreparedData prepare(std::span<const FlowRecord> records, const WindowSpec& spec, double train_fraction,
                     const ScalerParams& scaler) {
    auto raw = feature_matrix(records);
    require_shape(spec.features == raw.cols(),
                  fmt::format("window spec has {} features but flow records carry {}", spec.features, raw.cols()));
    auto windows = make_windows(normalize(scaler, raw), spec, scaler);
    auto [train, test] = split(windows, train_fraction);
    return {std::move(train), std::move(test)};
}

PreparedData prepare(std::span<const FlowRecord> records, const WindowSpec& spec, double train_fraction) {
    if (records.empty()) throw SizingError("no flow records");
    return prepare(records, spec, train_fraction, fit_scaler(records, train_fraction));
}

namespace {

void write_tensor(const std::filesystem::path& path, const WindowedDataset& d, bool inputs) {
    static_assert(std::endian::native == std::endian::little, "tensor dumps assume a little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    for (std::size_t k = 0; k < d.size(); ++k) {
        const auto v = inputs ? d.input(k) : d.target(k);
        out.write(reinterpret_cast<const char*>(v.data.data()),
                  static_cast<std::streamsize>(v.rows * v.cols * sizeof(double)));
    }
    out.close();
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

std::vector<double> read_tensor(const std::filesystem::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("input not found or unreadable: {}", path.string()));
    std::vector<double> v(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)) || in.peek() != EOF) {
        throw InputError(fmt::format("{}: expected exactly {} float64 values", path.string(), count));
    }
    return v;
}

} // namespace

void save_dataset(const WindowedDataset& dataset, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

    nlohmann::ordered_json scaler = dataset.scaler();
    detail::write_text(dir / "scaler.json", scaler.dump(2) + "\n");

    nlohmann::ordered_json meta;
    meta["spec"] = dataset.spec();
    meta["samples"] = dataset.size();
    meta["dtype"] = "float64-le";
    meta["layout"] = "sample-major, time-minor, feature-innermost";
    meta["inputs"] = {{"file", "inputs.f64"},
                      {"shape", {dataset.size(), dataset.spec().lookback, dataset.spec().features}}};
    meta["targets"] = {{"file", "targets.f64"},
                       {"shape", {dataset.size(), dataset.spec().horizon, dataset.spec().features}}};
    detail::write_text(dir / "windows.meta.json", meta.dump(2) + "\n");

    write_tensor(dir / "inputs.f64", dataset, true);
    write_tensor(dir / "targets.f64", dataset, false);
}

LoadedTensors load_dataset(const std::filesystem::path& dir) {
    LoadedTensors out;
    try {
        out.scaler = detail::read_json(dir / "scaler.json").get<ScalerParams>();
        const auto meta = detail::read_json(dir / "windows.meta.json");
        out.spec = meta.at("spec").get<WindowSpec>();
        out.samples = meta.at("samples").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("{}: malformed dataset metadata: {}", dir.string(), e.what()));
    }
    out.inputs = read_tensor(dir / "inputs.f64", out.samples * out.spec.lookback * out.spec.features);
    out.targets = read_tensor(dir / "targets.f64", out.samples * out.spec.horizon * out.spec.features);
    return out;
}

} // namespace flowcast
