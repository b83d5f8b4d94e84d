#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowcast {

/// One captured packet. Timestamps are seconds since the epoch.
struct PacketEvent {
    double timestamp = 0.0;
    std::uint64_t size = 0;
    std::string interface_id;

    friend bool operator==(const PacketEvent&, const PacketEvent&) = default;
};

/// Statistical summary of all packets whose timestamp falls in
/// [interval_start, interval_start + interval_length).
///
/// avg/min/max/std are in kilobytes, total in megabytes (decimal units,
/// 1 KB = 1000 bytes). An empty interval has every feature at zero.
struct FlowRecord {
    double interval_start = 0.0;
    double interval_length = 300.0;
    double avg_kb = 0.0;
    double min_kb = 0.0;
    double max_kb = 0.0;
    double std_kb = 0.0;
    double total_mb = 0.0;
    std::uint64_t packet_count = 0;

    friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

inline constexpr std::size_t kFeatureCount = 5;

/// Model-facing feature order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{"avg", "min", "max", "std",
                                                                           "total"};
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureUnits{"KB", "KB", "KB", "KB", "MB"};

std::array<double, kFeatureCount> features(const FlowRecord& record);

/// Throws InputError naming the first violated invariant.
void validate(const FlowRecord& record);

enum class LogFormat { csv, jsonl };

/// Picks jsonl for *.jsonl / *.json paths, csv otherwise.
LogFormat format_from_path(const std::filesystem::path& path);
LogFormat parse_log_format(std::string_view name);

enum class ParseMode { strict, lenient };

struct ParseIssue {
    std::size_t line = 0;
    std::string message;
};

struct PacketLog {
    std::vector<PacketEvent> events;
    std::size_t skipped = 0;
    std::vector<ParseIssue> issues;
};

/// Reads a packet log. CSV is `timestamp,size,interface` with an optional
/// header row; JSONL holds one `{"ts":..,"size":..,"iface":..}` per line.
/// Blank lines are ignored. In strict mode the first malformed record throws
/// ParseError; in lenient mode it is skipped and recorded in `issues`.
PacketLog parse_packet_log(std::istream& in, LogFormat format, ParseMode mode);
PacketLog parse_packet_log(const std::filesystem::path& path, LogFormat format, ParseMode mode);

struct FlowSummary {
    double avg_kb = 0.0;
    double min_kb = 0.0;
    double max_kb = 0.0;
    double std_kb = 0.0;
    double total_mb = 0.0;
};

/// Population statistics over packet sizes in bytes. Sums are accumulated in
/// exact integer arithmetic, so the result does not depend on packet order.
FlowSummary summarize_bin(std::span<const std::uint64_t> sizes);

struct TimeSpan {
    double start = 0.0;
    double end = 0.0;
};

/// Smallest interval-aligned span covering every event; empty events give
/// an empty span at zero.
TimeSpan covering_span(std::span<const PacketEvent> events, double interval);

struct BinnedFlows {
    std::vector<FlowRecord> records;
    std::size_t out_of_span = 0;
};

/// Buckets events into (span.end - span.start) / interval contiguous
/// half-open bins. Events outside the span are counted, not binned.
BinnedFlows bin_packets(std::span<const PacketEvent> events, double interval, TimeSpan span);

inline constexpr std::string_view kFlowCsvHeader =
    "interval_start,interval_length,avg_kb,min_kb,max_kb,std_kb,total_mb,packet_count";

/// Writes records losslessly (shortest round-trip doubles). Returns the
/// number of bytes written.
std::size_t export_flow_records(std::span<const FlowRecord> records, LogFormat format, std::ostream& out);
std::size_t export_flow_records(std::span<const FlowRecord> records, LogFormat format,
                                const std::filesystem::path& path);

std::vector<FlowRecord> read_flow_records(std::istream& in, LogFormat format);
std::vector<FlowRecord> read_flow_records(const std::filesystem::path& path);

} // namespace flowcast
