#include "commands.hpp"

#include "flowcast/checkpoint.hpp"
#include "flowcast/config.hpp"
#include "flowcast/dataset.hpp"
#include "flowcast/digest.hpp"
#include "flowcast/error.hpp"
#include "flowcast/flow.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/synth.hpp"
#include "flowcast/training.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace flowcast::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
    std::string config;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    std::string out = ".";
    bool strict = false;
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    f << text;
    f.close();
    if (!f) throw IoError(fmt::format("failed writing {}", path.string()));
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

/// Reproducibility envelope written next to each command's outputs.
class Manifest {
public:
    Manifest(std::string command, fs::path dir) : command_(std::move(command)), dir_(std::move(dir)), started_(utc_now()) {}

    void input(const fs::path& p) { inputs_.push_back(p); }
    void output(const fs::path& p) { outputs_.push_back(p); }
    void config(ojson c) { config_ = std::move(c); }
    void seed(std::uint64_t s) { seed_ = s; }

    fs::path write() const {
        ojson j;
        j["tool"] = "flowcast";
        j["version"] = kVersion;
        j["command"] = command_;
        j["config"] = config_;
        if (seed_) j["seed"] = *seed_;
        auto files = [](const std::vector<fs::path>& paths) {
            auto arr = ojson::array();
            for (const auto& p : paths) arr.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
            return arr;
        };
        j["inputs"] = files(inputs_);
        j["outputs"] = files(outputs_);
        j["started_at"] = started_;
        j["finished_at"] = utc_now();
        const auto path = dir_ / (command_ + ".manifest.json");
        write_file(path, j.dump(2) + "\n");
        return path;
    }

private:
    std::string command_;
    fs::path dir_;
    std::string started_;
    ojson config_ = ojson::object();
    std::optional<std::uint64_t> seed_;
    std::vector<fs::path> inputs_;
    std::vector<fs::path> outputs_;
};

PipelineConfig base_config(const Globals& g) {
    PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
    if (g.seed_opt != nullptr && g.seed_opt->count() > 0) cfg.train.seed = g.seed;
    return cfg;
}

std::vector<FlowRecord> read_validated_flows(const fs::path& path) {
    auto records = read_flow_records(path);
    for (const auto& r : records) validate(r);
    return records;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::string input;
    std::string format = "auto";
    std::string output_format = "csv";
    double interval = 300.0;
    double start = 0.0;
    double end = 0.0;
    CLI::Option* interval_opt = nullptr;
    CLI::Option* start_opt = nullptr;
    CLI::Option* end_opt = nullptr;
};

int cmd_ingest(const Globals& g, const IngestArgs& a, std::ostream& out, std::ostream& err) {
    const auto cfg = base_config(g);
    const double interval = a.interval_opt->count() > 0 ? a.interval : cfg.interval;
    const auto in_format = a.format == "auto" ? format_from_path(a.input) : parse_log_format(a.format);
    const auto out_format = parse_log_format(a.output_format);
    if (a.start_opt->count() != a.end_opt->count()) throw InputError("--start and --end must be given together");

    const auto log = parse_packet_log(fs::path(a.input), in_format, g.strict ? ParseMode::strict : ParseMode::lenient);
    for (const auto& issue : log.issues) fmt::print(err, "warning: line {}: {}\n", issue.line, issue.message);
    if (log.skipped > 0) fmt::print(err, "warning: skipped {} malformed line(s)\n", log.skipped);

    const TimeSpan span = a.start_opt->count() > 0 ? TimeSpan{a.start, a.end} : covering_span(log.events, interval);
    const auto binned = bin_packets(log.events, interval, span);
    if (binned.out_of_span > 0) fmt::print(err, "warning: {} event(s) fell outside the span and were not binned\n",
                                           binned.out_of_span);

    const fs::path dir = g.out;
    ensure_dir(dir);
    const auto flows = dir / (out_format == LogFormat::csv ? "flows.csv" : "flows.jsonl");
    export_flow_records(binned.records, out_format, flows);

    Manifest m("ingest", dir);
    m.input(a.input);
    m.output(flows);
    m.config({{"interval", interval},
              {"span", {span.start, span.end}},
              {"format", a.format},
              {"strict", g.strict},
              {"events", log.events.size()},
              {"skipped", log.skipped},
              {"out_of_span", binned.out_of_span}});
    m.write();
    fmt::print(out, "wrote {} flow records ({} events) to {}\n", binned.records.size(), log.events.size(),
               flows.string());
    return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string profile = "sinusoid";
    std::size_t length = 1000;
    double period = 288.0;
    double noise = 0.05;
    double burst_rate = 0.01;
    double interval = 300.0;
    double start = 1609459200.0;
    CLI::Option* interval_opt = nullptr;
};

int cmd_synth(const Globals& g, const SynthArgs& a, std::ostream& out) {
    const auto cfg = base_config(g);
    SynthConfig sc;
    sc.profile = parse_synth_profile(a.profile);
    sc.length = a.length;
    sc.seed = cfg.train.seed;
    sc.interval = a.interval_opt->count() > 0 ? a.interval : cfg.interval;
    sc.start_time = a.start;
    sc.period = a.period;
    sc.noise = a.noise;
    sc.burst_rate = a.burst_rate;
    const auto records = synthesize(sc);
    for (const auto& r : records) validate(r);

    const fs::path dir = g.out;
    ensure_dir(dir);
    const auto flows = dir / "flows.csv";
    export_flow_records(records, LogFormat::csv, flows);

    Manifest m("synth", dir);
    m.seed(sc.seed);
    m.output(flows);
    m.config({{"profile", a.profile},
              {"length", sc.length},
              {"period", sc.period},
              {"noise", sc.noise},
              {"burst_rate", sc.burst_rate},
              {"interval", sc.interval},
              {"start", sc.start_time}});
    m.write();
    fmt::print(out, "wrote {} synthetic flow records to {}\n", records.size(), flows.string());
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string flows;
    // Initialized to the built-in defaults so --help shows them; a flag only
    // overrides the config file when it is actually given.
    PipelineConfig defaults;
    std::size_t lookback = defaults.window.lookback, horizon = defaults.window.horizon, hidden = defaults.hidden,
                epochs = defaults.train.epochs, batch_size = defaults.train.batch_size,
                checkpoint_every = defaults.checkpoint_every;
    double lr = defaults.train.base_lr, train_fraction = defaults.train_fraction;
    bool save_dataset = false;
    bool quiet = false;
    CLI::Option *lookback_opt = nullptr, *horizon_opt = nullptr, *hidden_opt = nullptr, *epochs_opt = nullptr,
                *batch_opt = nullptr, *lr_opt = nullptr, *fraction_opt = nullptr, *every_opt = nullptr;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
    auto cfg = base_config(g);
    auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };
    if (given(a.lookback_opt)) cfg.window.lookback = a.lookback;
    if (given(a.horizon_opt)) cfg.window.horizon = a.horizon;
    if (given(a.hidden_opt)) cfg.hidden = a.hidden;
    if (given(a.epochs_opt)) cfg.train.epochs = a.epochs;
    if (given(a.batch_opt)) cfg.train.batch_size = a.batch_size;
    if (given(a.lr_opt)) cfg.train.base_lr = a.lr;
    if (given(a.fraction_opt)) cfg.train_fraction = a.train_fraction;
    if (given(a.every_opt)) cfg.checkpoint_every = a.checkpoint_every;
    validate(cfg);

    const auto records = read_validated_flows(a.flows);
    if (records.size() < cfg.window.lookback + cfg.window.horizon) {
        throw SizingError(fmt::format("flow file has {} records; lookback {} + horizon {} needs at least {}",
                                      records.size(), cfg.window.lookback, cfg.window.horizon,
                                      cfg.window.lookback + cfg.window.horizon));
    }
    const auto data = prepare(records, cfg.window, cfg.train_fraction);

    const fs::path dir = g.out;
    ensure_dir(dir);
    Manifest m("train", dir);
    m.input(a.flows);
    m.seed(cfg.train.seed);
    m.config(ojson::parse(dump_config(cfg)));

    auto make_ckpt = [&](const Seq2SeqModel& model, std::size_t epochs) {
        Checkpoint c;
        c.model = model;
        c.scaler = data.train.scaler();
        c.train_fraction = cfg.train_fraction;
        c.interval_seconds = cfg.interval;
        c.seed = cfg.train.seed;
        c.epochs_completed = epochs;
        return c;
    };

    fmt::print(out, "training on {} samples ({} held out for test), {} parameters\n", data.train.size(),
               data.test.size(), parameter_count(init_params(cfg.window, cfg.hidden, cfg.train.seed)));
    auto on_epoch = [&](std::size_t epoch, const Seq2SeqModel& model, const TrainHistory& h) {
        if (!a.quiet) {
            fmt::print(out, "epoch {}/{} train_loss={:.6g} val_loss={:.6g} lr={:.6g}\n", epoch + 1, cfg.train.epochs,
                       h.train_loss.back(), h.val_loss.back(), h.lr.back());
        }
        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
            ensure_dir(dir / "checkpoints");
            const auto p = dir / "checkpoints" / fmt::format("checkpoint_epoch_{:04d}.json", epoch + 1);
            save_checkpoint(make_ckpt(model, epoch + 1), p);
            m.output(p);
        }
    };
    const auto result = fit(data.train, cfg.hidden, cfg.train, on_epoch);

    const auto ckpt_path = dir / "checkpoint.json";
    save_checkpoint(make_ckpt(result.model, result.history.size()), ckpt_path);
    m.output(ckpt_path);
    const auto history_path = dir / "history.csv";
    write_history_csv(result.history, history_path);
    m.output(history_path);
    if (a.save_dataset) {
        save_dataset(data.train, dir / "dataset" / "train");
        save_dataset(data.test, dir / "dataset" / "test");
        for (const char* part : {"train", "test"}) {
            for (const char* f : {"scaler.json", "windows.meta.json", "inputs.f64", "targets.f64"}) {
                m.output(dir / "dataset" / part / f);
            }
        }
    }
    m.write();
    fmt::print(out, "wrote {}\n", ckpt_path.string());
    return kOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
    std::string checkpoint;
    std::string flows;
};

void check_compatible(const Checkpoint& ckpt, std::size_t records) {
    const auto& s = ckpt.model.spec;
    if (s.features != kFeatureCount || records < s.lookback) {
        throw ShapeError(fmt::format(
            "dimension mismatch: checkpoint expects lookback {} x {} features (horizon {}); flow data provides {} "
            "records x {} features",
            s.lookback, s.features, s.horizon, records, kFeatureCount));
    }
}

int cmd_predict(const Globals& g, const PredictArgs& a, std::ostream& out) {
    const auto ckpt = load_checkpoint(fs::path(a.checkpoint));
    const auto records = read_validated_flows(a.flows);
    check_compatible(ckpt, records.size());

    const auto& spec = ckpt.model.spec;
    const auto tail = std::span(records).last(spec.lookback);
    const auto x = normalize(ckpt.scaler, feature_matrix(tail));
    const auto y = denormalize(ckpt.scaler, forward(x, ckpt.model));

    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "step,interval_start");
    for (auto name : kFeatureNames) fmt::format_to(std::back_inserter(buf), ",{}", name);
    buf.push_back('\n');
    const auto& last = records.back();
    for (std::size_t t = 0; t < y.rows(); ++t) {
        fmt::format_to(std::back_inserter(buf), "{},{}", t + 1,
                       last.interval_start + static_cast<double>(t + 1) * ckpt.interval_seconds);
        for (std::size_t c = 0; c < y.cols(); ++c) fmt::format_to(std::back_inserter(buf), ",{}", y(t, c));
        buf.push_back('\n');
    }

    const fs::path dir = g.out;
    ensure_dir(dir);
    const auto path = dir / "forecast.csv";
    write_file(path, fmt::to_string(buf));
    Manifest m("predict", dir);
    m.input(a.checkpoint);
    m.input(a.flows);
    m.output(path);
    m.write();
    fmt::print(out, "wrote {}-step forecast to {}\n", y.rows(), path.string());
    return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string checkpoint;
    std::string flows;
    std::string history;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a, std::ostream& out) {
    const auto ckpt = load_checkpoint(fs::path(a.checkpoint));
    const auto records = read_validated_flows(a.flows);
    check_compatible(ckpt, records.size());

    const auto data = prepare(records, ckpt.model.spec, ckpt.train_fraction, ckpt.scaler);
    const auto model_id = "sha256:" + sha256_file(a.checkpoint);
    const auto eval = evaluate(ckpt.model, data.test, model_id);

    std::optional<TrainHistory> history;
    if (!a.history.empty()) history = read_history_csv(a.history);

    const fs::path dir = g.out;
    Manifest m("evaluate", dir);
    m.input(a.checkpoint);
    m.input(a.flows);
    if (history) m.input(a.history);
    for (const auto& p : emit_report(eval, history ? &*history : nullptr, dir, ReportFormat::csv)) m.output(p);
    write_metrics_json(eval.report, dir / "metrics.json");
    m.output(dir / "metrics.json");
    m.write();

    fmt::print(out, "{:<8} {:>14} {:>10} {:>5} {:>8}\n", "feature", "rmse", "r2", "unit", "n");
    for (const auto& f : eval.report.features) {
        fmt::print(out, "{:<8} {:>14.6g} {:>10} {:>5} {:>8}\n", f.feature, f.rmse,
                   f.r2 ? fmt::format("{:.4f}", *f.r2) : std::string("undefined"), f.unit, f.n);
    }
    fmt::print(out, "{} test samples x {} steps; report in {}\n", eval.report.samples, eval.report.horizon,
               dir.string());
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"flowcast: edge traffic flow summarization and LSTM encoder-decoder forecasting", "flowcast"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);

    Globals g;
    app.add_option("--config", g.config, "JSON config file; keys mirror the training and window settings")
        ->check(CLI::ExistingFile);
    g.seed_opt = app.add_option("--seed", g.seed, "Random seed; overrides the config file");
    app.add_option("--out", g.out, "Output directory");
    app.add_flag("--strict", g.strict, "Abort on the first malformed input line instead of skipping it");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Summarize a packet log into fixed-interval flow records");
    ingest_cmd->add_option("--input,-i", ingest.input, "Packet log (CSV timestamp,size,interface or JSONL)")
        ->required();
    ingest_cmd->add_option("--format", ingest.format, "Packet log format")
        ->check(CLI::IsMember({"auto", "csv", "jsonl"}));
    ingest.interval_opt = ingest_cmd->add_option("--interval", ingest.interval, "Aggregation interval in seconds");
    ingest.start_opt = ingest_cmd->add_option("--start", ingest.start, "Span start (epoch seconds)")
                          ->default_str("first event, aligned down");
    ingest.end_opt = ingest_cmd->add_option("--end", ingest.end, "Span end, exclusive (epoch seconds)")
                        ->default_str("last event, aligned up");
    ingest_cmd->add_option("--output-format", ingest.output_format, "Flow record output format")
        ->check(CLI::IsMember({"csv", "jsonl"}));

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic flow-record series");
    synth_cmd->add_option("--profile", synth.profile, "Traffic profile")
        ->check(CLI::IsMember({"sinusoid", "bursty"}));
    synth_cmd->add_option("--length", synth.length, "Number of records")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--period", synth.period, "Load cycle period in intervals")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--noise", synth.noise, "Relative noise level")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--burst-rate", synth.burst_rate, "Per-interval burst probability (bursty profile)")
        ->check(CLI::Range(0.0, 1.0));
    synth.interval_opt = synth_cmd->add_option("--interval", synth.interval, "Interval length in seconds");
    synth_cmd->add_option("--start", synth.start, "Timestamp of the first interval")->default_str("1609459200");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train the encoder-decoder forecaster on a flow-record file");
    train_cmd->add_option("--flows,-f", train.flows, "Flow-record file (CSV or JSONL)")->required();
    train.lookback_opt = train_cmd->add_option("--lookback", train.lookback, "Lookback steps");
    train.horizon_opt = train_cmd->add_option("--horizon", train.horizon, "Horizon steps");
    train.hidden_opt = train_cmd->add_option("--hidden", train.hidden, "LSTM cells per layer");
    train.epochs_opt = train_cmd->add_option("--epochs", train.epochs, "Training epochs");
    train.batch_opt = train_cmd->add_option("--batch-size", train.batch_size, "Mini-batch size");
    train.lr_opt = train_cmd->add_option("--lr", train.lr, "Base learning rate, decayed by 0.9 per epoch");
    train.fraction_opt =
        train_cmd->add_option("--train-fraction", train.train_fraction, "Chronological train share");
    train.every_opt = train_cmd->add_option("--checkpoint-every", train.checkpoint_every,
                                            "Write a checkpoint every N epochs (0 = off)");
    train_cmd->add_flag("--save-dataset", train.save_dataset, "Also dump the windowed train/test tensors");
    train_cmd->add_flag("--quiet,-q", train.quiet, "Suppress per-epoch progress lines");

    PredictArgs predict;
    auto* predict_cmd = app.add_subcommand("predict", "Forecast the next horizon from the latest lookback window");
    predict_cmd->add_option("--checkpoint,-c", predict.checkpoint, "Model checkpoint")->required();
    predict_cmd->add_option("--flows,-f", predict.flows, "Flow-record file")->required();

    EvaluateArgs evaluate_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on the chronological test split");
    eval_cmd->add_option("--checkpoint,-c", evaluate_args.checkpoint, "Model checkpoint")->required();
    eval_cmd->add_option("--flows,-f", evaluate_args.flows, "Flow-record file")->required();
    eval_cmd->add_option("--history", evaluate_args.history, "history.csv from training, copied into the report");

    std::vector<std::string> argv_store{"flowcast"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store) argv.push_back(s.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (ingest_cmd->parsed()) return cmd_ingest(g, ingest, out, err);
        if (synth_cmd->parsed()) return cmd_synth(g, synth, out);
        if (train_cmd->parsed()) return cmd_train(g, train, out);
        if (predict_cmd->parsed()) return cmd_predict(g, predict, out);
        if (eval_cmd->parsed()) return cmd_evaluate(g, evaluate_args, out);
    } catch (const NumericError& e) {
        fmt::print(err, "error: numeric: {}\n", e.what());
        return kNumeric;
    } catch (const IoError& e) {
        fmt::print(err, "error: io: {}\n", e.what());
        return kIo;
    } catch (const Error& e) {
        fmt::print(err, "error: input: {}\n", e.what());
        return kInput;
    } catch (const std::exception& e) {
        fmt::print(err, "error: internal: {}\n", e.what());
        return kInternal;
    }
    return kUsage;
}

} // namespace flowcast::cli
