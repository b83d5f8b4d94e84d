#include "flowcast/flow.hpp"

#include "flowcast/error.hpp"
#include "text.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace flowcast {

using nlohmann::json;

namespace {
__extension__ using u128 = unsigned __int128;
}

std::array<double, kFeatureCount> features(const FlowRecord& r) {
    return {r.avg_kb, r.min_kb, r.max_kb, r.std_kb, r.total_mb};
}

void validate(const FlowRecord& r) {
    auto fail = [&](std::string_view what) {
        throw InputError(fmt::format("flow record at {}: {}", r.interval_start, what));
    };
    for (double v : features(r)) {
        if (!std::isfinite(v)) fail("non-finite feature");
    }
    if (!(r.interval_length > 0.0)) fail("interval_length must be positive");
    if (r.std_kb < 0.0) fail("std_kb is negative");
    if (r.packet_count == 0) {
        for (double v : features(r)) {
            if (v != 0.0) fail("empty interval must have all-zero features");
        }
        return;
    }
    if (r.min_kb > r.avg_kb || r.avg_kb > r.max_kb) fail("expected min <= avg <= max");
    const double total_kb = r.total_mb * 1000.0;
    const double expected = r.avg_kb * static_cast<double>(r.packet_count);
    if (std::abs(total_kb - expected) > 1e-9 * std::max(std::abs(expected), 1e-300)) {
        fail("total_mb disagrees with avg_kb * packet_count");
    }
}

LogFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return (ext == ".jsonl" || ext == ".json") ? LogFormat::jsonl : LogFormat::csv;
}

LogFormat parse_log_format(std::string_view name) {
    if (name == "csv") return LogFormat::csv;
    if (name == "jsonl") return LogFormat::jsonl;
    throw InputError(fmt::format("unknown format '{}' (expected csv or jsonl)", name));
}

namespace {

PacketEvent packet_from_csv(std::string_view line) {
    const auto fields = detail::split(line, ',');
    if (fields.size() < 2 || fields.size() > 3) {
        throw InputError(fmt::format("expected 2 or 3 fields, got {}", fields.size()));
    }
    PacketEvent ev;
    ev.timestamp = detail::to_double(fields[0], "timestamp");
    ev.size = detail::to_uint(fields[1], "size");
    if (fields.size() == 3) ev.interface_id = std::string(detail::trim(fields[2]));
    return ev;
}

PacketEvent packet_from_json(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw InputError(fmt::format("invalid JSON: {}", e.what()));
    }
    if (!j.is_object() || !j.contains("ts") || !j.contains("size")) {
        throw InputError("record needs 'ts' and 'size'");
    }
    PacketEvent ev;
    const auto& ts = j["ts"];
    const auto& size = j["size"];
    if (!ts.is_number() || !std::isfinite(ts.get<double>())) throw InputError("'ts' must be a finite number");
    if (!size.is_number_unsigned()) throw InputError("'size' must be a non-negative integer");
    ev.timestamp = ts.get<double>();
    ev.size = size.get<std::uint64_t>();
    if (j.contains("iface")) {
        if (!j["iface"].is_string()) throw InputError("'iface' must be a string");
        ev.interface_id = j["iface"].get<std::string>();
    }
    return ev;
}

} // namespace

PacketLog parse_packet_log(std::istream& in, LogFormat format, ParseMode mode) {
    PacketLog log;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty()) continue;
        if (format == LogFormat::csv && line_no == 1 && line.starts_with("timestamp")) continue;
        try {
            log.events.push_back(format == LogFormat::csv ? packet_from_csv(line) : packet_from_json(line));
        } catch (const InputError& e) {
            if (mode == ParseMode::strict) throw ParseError(line_no, e.what());
            ++log.skipped;
            log.issues.push_back({line_no, e.what()});
        }
    }
    if (in.bad()) throw IoError("read failure in packet log");
    return log;
}

PacketLog parse_packet_log(const std::filesystem::path& path, LogFormat format, ParseMode mode) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("input not found or unreadable: {}", path.string()));
    return parse_packet_log(in, format, mode);
}

FlowSummary summarize_bin(std::span<const std::uint64_t> sizes) {
    if (sizes.empty()) return {};
    u128 sum = 0;
    u128 sum_sq = 0;
    std::uint64_t lo = sizes.front();
    std::uint64_t hi = sizes.front();
    for (std::uint64_t s : sizes) {
        sum += s;
        sum_sq += static_cast<u128>(s) * s;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    const auto n = static_cast<u128>(sizes.size());
    // n^2 * variance, exact; non-negative by Cauchy-Schwarz.
    const u128 scaled_var = n * sum_sq - sum * sum;
    const double dn = static_cast<double>(sizes.size());
    const double total = static_cast<double>(sum);

    FlowSummary out;
    out.avg_kb = total / dn / 1000.0;
    out.min_kb = static_cast<double>(lo) / 1000.0;
    out.max_kb = static_cast<double>(hi) / 1000.0;
    out.std_kb = std::sqrt(static_cast<double>(scaled_var)) / dn / 1000.0;
    out.total_mb = total / 1e6;
    // Rounding can nudge avg a hair outside [min, max] when all sizes agree.
    out.avg_kb = std::clamp(out.avg_kb, out.min_kb, out.max_kb);
    return out;
}

TimeSpan covering_span(std::span<const PacketEvent> events, double interval) {
    if (!(interval > 0.0)) throw InputError("interval must be positive");
    if (events.empty()) return {};
    auto [lo, hi] = std::minmax_element(events.begin(), events.end(),
                                        [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    const double start = std::floor(lo->timestamp / interval) * interval;
    const double end = (std::floor(hi->timestamp / interval) + 1.0) * interval;
    return {start, end};
}

BinnedFlows bin_packets(std::span<const PacketEvent> events, double interval, TimeSpan span) {
    if (!(interval > 0.0)) throw InputError("interval must be positive");
    if (!(span.end >= span.start)) throw InputError("span end precedes span start");
    const double ratio = (span.end - span.start) / interval;
    const double bins_f = std::round(ratio);
    if (std::abs(ratio - bins_f) > 1e-9 * std::max(1.0, bins_f)) {
        throw InputError(fmt::format("span length {} is not a multiple of interval {}", span.end - span.start,
                                     interval));
    }
    const auto bins = static_cast<std::size_t>(bins_f);

    std::vector<const PacketEvent*> sorted;
    sorted.reserve(events.size());
    for (const auto& ev : events) sorted.push_back(&ev);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto* a, const auto* b) { return a->timestamp < b->timestamp; });

    BinnedFlows out;
    std::vector<std::vector<std::uint64_t>> sizes(bins);
    for (const auto* ev : sorted) {
        const double ts = ev->timestamp;
        if (!(ts >= span.start && ts < span.end)) {
            ++out.out_of_span;
            continue;
        }
        auto idx = static_cast<std::size_t>(std::floor((ts - span.start) / interval));
        // Guard against the quotient rounding across a bin edge.
        if (idx >= bins) idx = bins - 1;
        while (idx > 0 && ts < span.start + static_cast<double>(idx) * interval) --idx;
        while (idx + 1 < bins && ts >= span.start + static_cast<double>(idx + 1) * interval) ++idx;
        sizes[idx].push_back(ev->size);
    }

    out.records.reserve(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const auto s = summarize_bin(sizes[b]);
        FlowRecord r;
        r.interval_start = span.start + static_cast<double>(b) * interval;
        r.interval_length = interval;
        r.avg_kb = s.avg_kb;
        r.min_kb = s.min_kb;
        r.max_kb = s.max_kb;
        r.std_kb = s.std_kb;
        r.total_mb = s.total_mb;
        r.packet_count = sizes[b].size();
        out.records.push_back(r);
    }
    return out;
}

std::size_t export_flow_records(std::span<const FlowRecord> records, LogFormat format, std::ostream& out) {
    fmt::memory_buffer buf;
    if (format == LogFormat::csv) {
        fmt::format_to(std::back_inserter(buf), "{}\n", kFlowCsvHeader);
        for (const auto& r : records) {
            fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{},{},{}\n", r.interval_start,
                           r.interval_length, r.avg_kb, r.min_kb, r.max_kb, r.std_kb, r.total_mb, r.packet_count);
        }
    } else {
        for (const auto& r : records) {
            fmt::format_to(std::back_inserter(buf),
                           "{{\"interval_start\":{},\"interval_length\":{},\"avg_kb\":{},\"min_kb\":{},"
                           "\"max_kb\":{},\"std_kb\":{},\"total_mb\":{},\"packet_count\":{}}}\n",
                           r.interval_start, r.interval_length, r.avg_kb, r.min_kb, r.max_kb, r.std_kb,
                           r.total_mb, r.packet_count);
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing flow records");
    return buf.size();
}

std::size_t export_flow_records(std::span<const FlowRecord> records, LogFormat format,
                                const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    const auto n = export_flow_records(records, format, out);
    out.close();
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
    return n;
}

std::vector<FlowRecord> read_flow_records(std::istream& in, LogFormat format) {
    std::vector<FlowRecord> records;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty()) continue;
        try {
            FlowRecord r;
            if (format == LogFormat::csv) {
                if (line_no == 1) {
                    if (line != kFlowCsvHeader) throw InputError("unexpected flow CSV header");
                    continue;
                }
                const auto f = detail::split(line, ',');
                if (f.size() != 8) throw InputError(fmt::format("expected 8 fields, got {}", f.size()));
                r.interval_start = detail::to_double(f[0], "interval_start");
                r.interval_length = detail::to_double(f[1], "interval_length");
                r.avg_kb = detail::to_double(f[2], "avg_kb");
                r.min_kb = detail::to_double(f[3], "min_kb");
                r.max_kb = detail::to_double(f[4], "max_kb");
                r.std_kb = detail::to_double(f[5], "std_kb");
                r.total_mb = detail::to_double(f[6], "total_mb");
                r.packet_count = detail::to_uint(f[7], "packet_count");
            } else {
                const auto j = json::parse(line);
                r.interval_start = j.at("interval_start").get<double>();
                r.interval_length = j.at("interval_length").get<double>();
                r.avg_kb = j.at("avg_kb").get<double>();
                r.min_kb = j.at("min_kb").get<double>();
                r.max_kb = j.at("max_kb").get<double>();
                r.std_kb = j.at("std_kb").get<double>();
                r.total_mb = j.at("total_mb").get<double>();
                r.packet_count = j.at("packet_count").get<std::uint64_t>();
            }
            records.push_back(r);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    if (in.bad()) throw IoError("read failure in flow records");
    return records;
}

std::vector<FlowRecord> read_flow_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("input not found or unreadable: {}", path.string()));
    return read_flow_records(in, format_from_path(path));
}

} // namespace flowcast
