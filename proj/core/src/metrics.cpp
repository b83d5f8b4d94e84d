#include "flowcast/metrics.hpp"

#include "flowcast/error.hpp"
#include "json_io.hpp"
#include "text.hpp"

#include <fmt/format.h>

#include <cmath>
#include <sstream>

namespace flowcast {

namespace {

void require_pair(std::span<const double> pred, std::span<const double> truth, std::string_view who) {
    require_shape(pred.size() == truth.size(),
                  fmt::format("{}: prediction has {} values, truth has {}", who, pred.size(), truth.size()));
    require_shape(!truth.empty(), fmt::format("{}: empty input", who));
}

} // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
    require_pair(pred, truth, "rmse");
    double sq = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double e = pred[k] - truth[k];
        sq += e * e;
    }
    return std::sqrt(sq / static_cast<double>(pred.size()));
}

std::optional<double> r2(std::span<const double> pred, std::span<const double> truth) {
    require_pair(pred, truth, "r2");
    double mean = 0.0;
    for (double y : truth) mean += y;
    mean /= static_cast<double>(truth.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const double e = truth[k] - pred[k];
        const double d = truth[k] - mean;
        ss_res += e * e;
        ss_tot += d * d;
    }
    if (ss_tot == 0.0) return std::nullopt;
    return 1.0 - ss_res / ss_tot;
}

Evaluation evaluate(const Predictor& predict, const WindowedDataset& test, std::string model_id) {
    if (test.empty()) throw SizingError("test set is empty");
    const auto& spec = test.spec();
    const auto& scaler = test.scaler();
    Evaluation out;
    auto& series = out.series;
    series.truth.assign(spec.features, {});
    series.predicted.assign(spec.features, {});
    for (std::size_t c = 0; c < spec.features; ++c) {
        series.features.push_back(c < kFeatureCount ? std::string(kFeatureNames[c]) : fmt::format("f{}", c));
        series.truth[c].reserve(test.size() * spec.horizon);
        series.predicted[c].reserve(test.size() * spec.horizon);
    }
    for (std::size_t k = 0; k < test.size(); ++k) {
        const Matrix pred = predict(test.input(k));
        require_shape(pred.rows() == spec.horizon && pred.cols() == spec.features,
                      fmt::format("predictor returned {}x{}, expected {}x{}", pred.rows(), pred.cols(), spec.horizon,
                                  spec.features));
        const auto truth = test.target(k);
        for (std::size_t t = 0; t < spec.horizon; ++t) {
            for (std::size_t c = 0; c < spec.features; ++c) {
                series.truth[c].push_back(scaler.denormalize(c, truth(t, c)));
                series.predicted[c].push_back(scaler.denormalize(c, pred(t, c)));
            }
        }
    }

    auto& report = out.report;
    report.samples = test.size();
    report.horizon = spec.horizon;
    report.model_id = std::move(model_id);
    for (std::size_t c = 0; c < spec.features; ++c) {
        FeatureMetrics fm;
        fm.feature = series.features[c];
        fm.unit = c < kFeatureCount ? std::string(kFeatureUnits[c]) : "";
        fm.rmse = rmse(series.predicted[c], series.truth[c]);
        fm.r2 = r2(series.predicted[c], series.truth[c]);
        fm.n = series.truth[c].size();
        report.features.push_back(std::move(fm));
    }
    return out;
}

Evaluation evaluate(const Seq2SeqModel& model, const WindowedDataset& test, std::string model_id) {
    model.check();
    require_shape(model.spec == test.spec(),
                  fmt::format("model windows (lookback {}, horizon {}, features {}) differ from dataset (lookback "
                              "{}, horizon {}, features {})",
                              model.spec.lookback, model.spec.horizon, model.spec.features, test.spec().lookback,
                              test.spec().horizon, test.spec().features));
    return evaluate([&model](MatrixView x) { return forward(x, model); }, test, std::move(model_id));
}

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path) {
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "feature,rmse,r2,unit,n\n");
    for (const auto& f : report.features) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{},{}\n", f.feature, f.rmse,
                       f.r2 ? fmt::format("{}", *f.r2) : std::string("undefined"), f.unit, f.n);
    }
    detail::write_text(path, fmt::to_string(buf));
}

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["model_id"] = report.model_id;
    j["samples"] = report.samples;
    j["horizon"] = report.horizon;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& f : report.features) {
        nlohmann::ordered_json row;
        row["feature"] = f.feature;
        row["rmse"] = f.rmse;
        row["r2"] = f.r2 ? nlohmann::ordered_json(*f.r2) : nlohmann::ordered_json(nullptr);
        row["unit"] = f.unit;
        row["n"] = f.n;
        rows.push_back(std::move(row));
    }
    j["features"] = std::move(rows);
    detail::write_text(path, j.dump(2) + "\n");
}

MetricsReport read_metrics_json(const std::filesystem::path& path) {
    const auto j = detail::read_json(path);
    MetricsReport r;
    try {
        r.model_id = j.at("model_id").get<std::string>();
        r.samples = j.at("samples").get<std::size_t>();
        r.horizon = j.at("horizon").get<std::size_t>();
        for (const auto& row : j.at("features")) {
            FeatureMetrics f;
            f.feature = row.at("feature").get<std::string>();
            f.rmse = row.at("rmse").get<double>();
            if (!row.at("r2").is_null()) f.r2 = row.at("r2").get<double>();
            f.unit = row.at("unit").get<std::string>();
            f.n = row.at("n").get<std::size_t>();
            r.features.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("{}: malformed metrics: {}", path.string(), e.what()));
    }
    return r;
}

MetricsReport read_metrics_csv(const std::filesystem::path& path) {
    std::istringstream in(detail::read_text(path));
    MetricsReport r;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "feature,rmse,r2,unit,n") throw ParseError(line_no, "unexpected metrics header");
            continue;
        }
        const auto f = detail::split(line, ',');
        if (f.size() != 5) throw ParseError(line_no, "expected 5 fields");
        try {
            FeatureMetrics m;
            m.feature = std::string(f[0]);
            m.rmse = detail::to_double(f[1], "rmse");
            if (detail::trim(f[2]) != "undefined") m.r2 = detail::to_double(f[2], "r2");
            m.unit = std::string(f[3]);
            m.n = detail::to_uint(f[4], "n");
            r.features.push_back(std::move(m));
        } catch (const InputError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return r;
}

std::vector<std::filesystem::path> emit_report(const Evaluation& eval, const TrainHistory* history,
                                               const std::filesystem::path& dir, ReportFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

    std::vector<std::filesystem::path> written;
    if (format == ReportFormat::csv) {
        written.push_back(dir / "metrics.csv");
        write_metrics_csv(eval.report, written.back());
    } else {
        written.push_back(dir / "metrics.json");
        write_metrics_json(eval.report, written.back());
    }
    if (history != nullptr) {
        written.push_back(dir / "history.csv");
        write_history_csv(*history, written.back());
    }
    const auto& s = eval.series;
    for (std::size_t c = 0; c < s.features.size(); ++c) {
        fmt::memory_buffer buf;
        fmt::format_to(std::back_inserter(buf), "t_index,truth,predicted\n");
        for (std::size_t t = 0; t < s.truth[c].size(); ++t) {
            fmt::format_to(std::back_inserter(buf), "{},{},{}\n", t, s.truth[c][t], s.predicted[c][t]);
        }
        written.push_back(dir / fmt::format("pred_{}.csv", s.features[c]));
        detail::write_text(written.back(), fmt::to_string(buf));
    }
    return written;
}

} // namespace flowcast
