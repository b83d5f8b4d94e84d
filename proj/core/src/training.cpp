#include "flowcast/training.hpp"

#include "flowcast/error.hpp"
#include "json_io.hpp"
#include "text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace flowcast {

void validate(const TrainConfig& c) {
    auto bad = [](std::string_view what) { throw InputError(std::string(what)); };
    if (c.batch_size < 1) bad("batch_size must be >= 1");
    if (!(c.base_lr > 0.0)) bad("base_lr must be positive");
    if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0)) bad("lr_decay must lie in (0, 1]");
    if (!(c.beta1 > 0.0 && c.beta1 < 1.0)) bad("beta1 must lie in (0, 1)");
    if (!(c.beta2 > 0.0 && c.beta2 < 1.0)) bad("beta2 must lie in (0, 1)");
    if (!(c.epsilon > 0.0)) bad("epsilon must be positive");
    if (!(c.huber_tau > 0.0)) bad("huber_tau must be positive");
    if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) bad("validation_fraction must lie in [0, 1)");
    if (!(c.clip_norm >= 0.0)) bad("clip_norm must be >= 0");
}

namespace {

// [0, 1) from the top 53 bits, independent of the standard library's
// distribution implementations.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void fill_uniform(std::span<double> v, double k, std::mt19937_64& rng) {
    for (auto& x : v) x = -k + 2.0 * k * unit_uniform(rng);
}

void init_lstm(LstmParams& p, double k, std::mt19937_64& rng) {
    for (auto& w : p.w_x) fill_uniform(w.data(), k, rng);
    for (auto& w : p.w_h) fill_uniform(w.data(), k, rng);
    std::fill(p.bias(Gate::forget).begin(), p.bias(Gate::forget).end(), 1.0);
}

} // namespace

Seq2SeqModel init_params(const WindowSpec& spec, std::size_t hidden, std::uint64_t seed) {
    if (hidden < 1) throw InputError("hidden size must be >= 1");
    auto m = Seq2SeqModel::zeros(spec, hidden);
    std::mt19937_64 rng(seed);
    const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
    init_lstm(m.encoder, k, rng);
    init_lstm(m.decoder, k, rng);
    fill_uniform(m.proj_w.data(), k, rng);
    return m;
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
    return cfg.base_lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));
}

AdamState AdamState::for_model(const Seq2SeqModel& model) {
    return {zeros_like(model), zeros_like(model), 0};
}

double gradient_norm(const Seq2SeqModel& grads) {
    double sq = 0.0;
    for_each_block(grads, [&](const std::string&, std::span<const double> g) {
        for (double x : g) sq += x * x;
    });
    return std::sqrt(sq);
}

void adam_step(Seq2SeqModel& params, const Seq2SeqModel& grads, AdamState& state, double lr, const TrainConfig& cfg) {
    // Collect spans in lockstep; every model shares one block layout.
    std::vector<std::pair<std::string, std::span<double>>> p_blocks, m_blocks, v_blocks;
    std::vector<std::span<const double>> g_blocks;
    auto collect = [](auto& out) {
        return [&out](const std::string& name, std::span<double> s) { out.emplace_back(name, s); };
    };
    for_each_block(params, collect(p_blocks));
    for_each_block(state.m, collect(m_blocks));
    for_each_block(state.v, collect(v_blocks));
    for_each_block(grads, [&](const std::string&, std::span<const double> s) { g_blocks.push_back(s); });

    require_shape(p_blocks.size() == g_blocks.size() && p_blocks.size() == m_blocks.size() &&
                      p_blocks.size() == v_blocks.size(),
                  "adam: gradient/moment layout differs from parameters");
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
        const auto& g = g_blocks[b];
        require_shape(g.size() == p_blocks[b].second.size() && m_blocks[b].second.size() == g.size() &&
                          v_blocks[b].second.size() == g.size(),
                      fmt::format("adam: block {} size mismatch", p_blocks[b].first));
        for (double x : g) {
            if (!std::isfinite(x)) throw NumericError(fmt::format("non-finite gradient in block {}", p_blocks[b].first));
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
        auto p = p_blocks[b].second;
        auto m = m_blocks[b].second;
        auto v = v_blocks[b].second;
        const auto g = g_blocks[b];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            p[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

namespace {

void scale_gradients(Seq2SeqModel& grads, double factor) {
    for_each_block(grads, [&](const std::string&, std::span<double> g) {
        for (auto& x : g) x *= factor;
    });
}

void zero_gradients(Seq2SeqModel& grads) { scale_gradients(grads, 0.0); }

} // namespace

EpochResult train_epoch(Seq2SeqModel& model, const WindowedDataset& train, const TrainConfig& cfg, std::size_t epoch,
                        AdamState& adam) {
    if (train.empty()) throw SizingError("training set is empty");
    require_shape(train.spec() == model.spec, "training windows do not match the model's window spec");

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    const HuberConfig huber_cfg{cfg.huber_tau};
    const double lr = lr_schedule(epoch, cfg);
    auto grads = zeros_like(model);
    EpochResult result;
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
        const auto last = std::min(order.size(), first + cfg.batch_size);
        const double weight = 1.0 / static_cast<double>(last - first);
        zero_gradients(grads);
        double batch_loss = 0.0;
        for (std::size_t k = first; k < last; ++k) {
            const auto s = order[k];
            batch_loss += backward_accumulate(train.input(s), train.target(s), model, huber_cfg, grads, weight);
        }
        if (!std::isfinite(batch_loss)) {
            throw NumericError(fmt::format("non-finite loss at epoch {} batch {}", epoch + 1, result.batches + 1));
        }
        if (cfg.clip_norm > 0.0) {
            const double norm = gradient_norm(grads);
            if (norm > cfg.clip_norm) scale_gradients(grads, cfg.clip_norm / norm);
        }
        adam_step(model, grads, adam, lr, cfg);
        loss_sum += batch_loss;
        ++result.batches;
    }
    result.mean_loss = loss_sum / static_cast<double>(train.size());
    return result;
}

double mean_loss(const Seq2SeqModel& model, const WindowedDataset& data, const HuberConfig& cfg) {
    if (data.empty()) return std::nan("");
    double sum = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) sum += huber(forward(data.input(k), model), data.target(k), cfg).loss;
    return sum / static_cast<double>(data.size());
}

TrainValSplit validation_split(const WindowedDataset& train, double validation_fraction) {
    const auto n = train.size();
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * validation_fraction));
    if (n_val >= n) throw SizingError(fmt::format("validation slice leaves no training samples out of {}", n));
    return {train.slice(0, n - n_val), train.slice(n - n_val, n)};
}

FitResult fit(Seq2SeqModel model, const WindowedDataset& train, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    validate(cfg);
    model.check();
    FitResult out;
    if (cfg.epochs == 0) {
        out.model = std::move(model);
        return out;
    }
    const auto parts = validation_split(train, cfg.validation_fraction);
    auto adam = AdamState::for_model(model);
    const HuberConfig huber_cfg{cfg.huber_tau};
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto r = train_epoch(model, parts.fit, cfg, epoch, adam);
        out.history.train_loss.push_back(r.mean_loss);
        out.history.val_loss.push_back(mean_loss(model, parts.validation, huber_cfg));
        out.history.lr.push_back(lr_schedule(epoch, cfg));
        if (on_epoch) on_epoch(epoch, model, out.history);
    }
    out.model = std::move(model);
    return out;
}

FitResult fit(const WindowedDataset& train, std::size_t hidden, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    return fit(init_params(train.spec(), hidden, cfg.seed), train, cfg, on_epoch);
}

void write_history_csv(const TrainHistory& h, std::ostream& out) {
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "epoch,train_loss,val_loss,lr\n");
    for (std::size_t e = 0; e < h.size(); ++e) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", e + 1, h.train_loss[e], h.val_loss[e], h.lr[e]);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing training history");
}

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
    std::ostringstream ss;
    write_history_csv(h, ss);
    detail::write_text(path, ss.str());
}

TrainHistory read_history_csv(const std::filesystem::path& path) {
    std::istringstream in(detail::read_text(path));
    TrainHistory h;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "epoch,train_loss,val_loss,lr") throw ParseError(line_no, "unexpected history header");
            continue;
        }
        const auto f = detail::split(line, ',');
        if (f.size() != 4) throw ParseError(line_no, "expected 4 fields");
        auto number = [&](std::string_view field, std::string_view name) {
            field = detail::trim(field);
            if (field == "nan") return std::nan("");
            try {
                return detail::to_double(field, name);
            } catch (const InputError& e) {
                throw ParseError(line_no, e.what());
            }
        };
        h.train_loss.push_back(number(f[1], "train_loss"));
        h.val_loss.push_back(number(f[2], "val_loss"));
        h.lr.push_back(number(f[3], "lr"));
    }
    return h;
}

} // namespace flowcast
