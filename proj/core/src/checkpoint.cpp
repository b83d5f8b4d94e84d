#include "flowcast/checkpoint.hpp"

#include "flowcast/error.hpp"
#include "json_io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace flowcast {

using ojson = nlohmann::ordered_json;

namespace {
constexpr const char* kFormatTag = "flowcast-checkpoint";
}

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
    ckpt.model.check();
    ojson j;
    j["format"] = kFormatTag;
    j["version"] = kCheckpointFormatVersion;
    j["spec"] = ckpt.model.spec;
    j["hidden"] = ckpt.model.hidden;
    j["train_fraction"] = ckpt.train_fraction;
    j["interval_seconds"] = ckpt.interval_seconds;
    j["seed"] = ckpt.seed;
    j["epochs_completed"] = ckpt.epochs_completed;
    j["scaler"] = ckpt.scaler;
    auto params = ojson::array();
    for_each_block(ckpt.model, [&](const std::string& name, std::span<const double> values) {
        ojson block;
        block["name"] = name;
        block["size"] = values.size();
        block["values"] = std::vector<double>(values.begin(), values.end());
        params.push_back(std::move(block));
    });
    j["parameters"] = std::move(params);
    out << j.dump(1) << '\n';
    if (!out) throw IoError("failed writing checkpoint");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ostringstream ss;
    save_checkpoint(ckpt, ss);
    detail::write_text(path, ss.str());
}

Checkpoint load_checkpoint(std::istream& in) {
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("checkpoint is not valid JSON: {}", e.what()));
    }
    Checkpoint ckpt;
    try {
        if (j.at("format").get<std::string>() != kFormatTag) throw InputError("not a flowcast checkpoint");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointFormatVersion) {
            throw InputError(fmt::format("unsupported checkpoint version {} (expected {})", version,
                                         kCheckpointFormatVersion));
        }
        const auto spec = j.at("spec").get<WindowSpec>();
        validate(spec);
        const auto hidden = j.at("hidden").get<std::size_t>();
        ckpt.model = Seq2SeqModel::zeros(spec, hidden);
        ckpt.train_fraction = j.at("train_fraction").get<double>();
        ckpt.interval_seconds = j.at("interval_seconds").get<double>();
        ckpt.seed = j.at("seed").get<std::uint64_t>();
        ckpt.epochs_completed = j.at("epochs_completed").get<std::size_t>();
        ckpt.scaler = j.at("scaler").get<ScalerParams>();

        const auto& params = j.at("parameters");
        std::size_t index = 0;
        for_each_block(ckpt.model, [&](const std::string& name, std::span<double> values) {
            if (index >= params.size()) throw InputError(fmt::format("checkpoint is missing block {}", name));
            const auto& block = params.at(index++);
            const auto got = block.at("name").get<std::string>();
            if (got != name) throw InputError(fmt::format("checkpoint block {} found where {} expected", got, name));
            const auto& v = block.at("values");
            if (v.size() != values.size()) {
                throw ShapeError(fmt::format("checkpoint block {} has {} values, model needs {}", name, v.size(),
                                             values.size()));
            }
            for (std::size_t k = 0; k < values.size(); ++k) {
                values[k] = v[k].get<double>();
                if (!std::isfinite(values[k])) throw NumericError(fmt::format("non-finite value in block {}", name));
            }
        });
        if (index != params.size()) throw InputError("checkpoint has unexpected extra parameter blocks");
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("malformed checkpoint: {}", e.what()));
    }
    if (ckpt.scaler.ranges.size() != ckpt.model.spec.features) {
        throw ShapeError(fmt::format("checkpoint scaler has {} features, model has {}", ckpt.scaler.ranges.size(),
                                     ckpt.model.spec.features));
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("input not found or unreadable: {}", path.string()));
    return load_checkpoint(in);
}

} // namespace flowcast
