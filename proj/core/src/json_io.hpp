#pragma once

#include "flowcast/dataset.hpp"
#include "flowcast/error.hpp"
#include "flowcast/window_spec.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace flowcast {

inline void to_json(nlohmann::ordered_json& j, const WindowSpec& s) {
    j = {{"lookback", s.lookback}, {"horizon", s.horizon}, {"stride", s.stride}, {"features", s.features}};
}

inline void from_json(const nlohmann::ordered_json& j, WindowSpec& s) {
    j.at("lookback").get_to(s.lookback);
    j.at("horizon").get_to(s.horizon);
    j.at("stride").get_to(s.stride);
    j.at("features").get_to(s.features);
}

inline void to_json(nlohmann::ordered_json& j, const ScalerParams& s) {
    j = nlohmann::ordered_json::object();
    j["target_range"] = {s.target_min, s.target_max};
    auto features = nlohmann::ordered_json::array();
    for (const auto& r : s.ranges) {
        features.push_back({{"min", r.min}, {"max", r.max}, {"degenerate", r.degenerate()}});
    }
    j["features"] = std::move(features);
}

inline void from_json(const nlohmann::ordered_json& j, ScalerParams& s) {
    const auto& range = j.at("target_range");
    s.target_min = range.at(0).get<double>();
    s.target_max = range.at(1).get<double>();
    s.ranges.clear();
    for (const auto& f : j.at("features")) s.ranges.push_back({f.at("min").get<double>(), f.at("max").get<double>()});
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    out << text;
    out.close();
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("input not found or unreadable: {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::ordered_json read_json(const std::filesystem::path& path) {
    try {
        return nlohmann::ordered_json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

} // namespace detail

} // namespace flowcast
