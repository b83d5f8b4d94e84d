#include "flowcast/config.hpp"

#include "flowcast/error.hpp"
#include "json_io.hpp"

#include <fmt/format.h>

namespace flowcast {

using ojson = nlohmann::ordered_json;

void validate(const PipelineConfig& c) {
    validate(c.window);
    validate(c.train);
    if (c.hidden < 1) throw InputError("hidden must be >= 1");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw InputError("train_fraction must lie in (0, 1)");
    if (!(c.interval > 0.0)) throw InputError("interval must be positive");
}

namespace {

ojson to_object(const PipelineConfig& c) {
    ojson j;
    j["lookback"] = c.window.lookback;
    j["horizon"] = c.window.horizon;
    j["stride"] = c.window.stride;
    j["features"] = c.window.features;
    j["hidden"] = c.hidden;
    j["train_fraction"] = c.train_fraction;
    j["interval"] = c.interval;
    j["checkpoint_every"] = c.checkpoint_every;
    j["batch_size"] = c.train.batch_size;
    j["epochs"] = c.train.epochs;
    j["base_lr"] = c.train.base_lr;
    j["lr_decay"] = c.train.lr_decay;
    j["beta1"] = c.train.beta1;
    j["beta2"] = c.train.beta2;
    j["epsilon"] = c.train.epsilon;
    j["seed"] = c.train.seed;
    j["huber_tau"] = c.train.huber_tau;
    j["validation_fraction"] = c.train.validation_fraction;
    j["clip_norm"] = c.train.clip_norm;
    return j;
}

template <class T>
void read_key(const ojson& j, const std::string& key, T& field) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_unsigned()) throw InputError(fmt::format("config key '{}' must be a non-negative integer", key));
    } else {
        if (!v.is_number()) throw InputError(fmt::format("config key '{}' must be a number", key));
    }
    field = v.get<T>();
}

} // namespace

PipelineConfig parse_config(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) throw InputError("config must be a JSON object");

    PipelineConfig c;
    const auto known = to_object(c);
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw InputError(fmt::format("unknown config key '{}'", key));
    }
    read_key(j, "lookback", c.window.lookback);
    read_key(j, "horizon", c.window.horizon);
    read_key(j, "stride", c.window.stride);
    read_key(j, "features", c.window.features);
    read_key(j, "hidden", c.hidden);
    read_key(j, "train_fraction", c.train_fraction);
    read_key(j, "interval", c.interval);
    read_key(j, "checkpoint_every", c.checkpoint_every);
    read_key(j, "batch_size", c.train.batch_size);
    read_key(j, "epochs", c.train.epochs);
    read_key(j, "base_lr", c.train.base_lr);
    read_key(j, "lr_decay", c.train.lr_decay);
    read_key(j, "beta1", c.train.beta1);
    read_key(j, "beta2", c.train.beta2);
    read_key(j, "epsilon", c.train.epsilon);
    read_key(j, "seed", c.train.seed);
    read_key(j, "huber_tau", c.train.huber_tau);
    read_key(j, "validation_fraction", c.train.validation_fraction);
    read_key(j, "clip_norm", c.train.clip_norm);
    validate(c);
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(detail::read_text(path)); }

std::string dump_config(const PipelineConfig& c) { return to_object(c).dump(2) + "\n"; }

} // namespace flowcast
