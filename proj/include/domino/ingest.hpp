#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "domino/trace_model.hpp"

namespace domino {

enum class ClockStream : std::uint8_t { RAN, PACKETS, APP_LOCAL, APP_REMOTE };

/// Additive per-stream clock corrections in microseconds.
struct ClockOffset {
    ClockStream stream = ClockStream::RAN;
    std::int64_t offset_us = 0;
};

class ClockOffsets {
public:
    ClockOffsets() = default;
    ClockOffsets(std::initializer_list<ClockOffset> offsets);

    void set(ClockStream stream, std::int64_t offset_us);
    std::int64_t get(ClockStream stream) const { return values_[static_cast<int>(stream)]; }

private:
    std::int64_t values_[4] = {0, 0, 0, 0};
};

struct StreamReport {
    StreamReport() = default;
    explicit StreamReport(std::string n) : name(std::move(n)) {}

    std::string name;
    std::size_t read = 0;       // data lines seen (header excluded)
    std::size_t kept = 0;
    std::size_t dropped = 0;    // malformed + invalid
    std::size_t malformed = 0;  // unparseable lines
    std::optional<Timestamp> first;
    std::optional<Timestamp> last;
};

struct IngestReport {
    StreamReport ran{"ran"};
    StreamReport packets{"packets"};
    StreamReport app{"app"};
    double overlap_s = 0;         // span shared by every non-empty stream
    double overlap_fraction = 1;  // overlap / union of spans
    std::vector<std::string> warnings;
};

/// Fatal ingest failure. Carries the report accumulated so far.
class IngestError : public std::runtime_error {
public:
    IngestError(const std::string& what, IngestReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const IngestReport& report() const { return report_; }

private:
    IngestReport report_;
};

// Loaders. Malformed lines are dropped and counted; more than 10% malformed
// lines is fatal. Records violating a field invariant are dropped with a
// warning. Output is stably sorted by (offset-corrected) primary timestamp.
std::vector<RanRecord> load_ran(const std::filesystem::path& path, const ClockOffsets& offsets,
                                IngestReport& report);
std::vector<PacketRecord> load_packets(const std::filesystem::path& path, const ClockOffsets& offsets,
                                       IngestReport& report);
std::vector<AppRecord> load_app(const std::filesystem::path& path, const ClockOffsets& offsets,
                                IngestReport& report);

// Same as above over in-memory text.
std::vector<RanRecord> parse_ran(std::string_view text, const ClockOffsets& offsets, IngestReport& report);
std::vector<PacketRecord> parse_packets(std::string_view text, const ClockOffsets& offsets,
                                        IngestReport& report);
std::vector<AppRecord> parse_app(std::string_view text, const ClockOffsets& offsets, IngestReport& report);

struct AssembleResult {
    Trace trace;
    IngestReport report;
};

/// Merges the loaded streams. Throws IngestError when two non-empty streams
/// do not overlap at all.
AssembleResult assemble(std::vector<RanRecord> ran, std::vector<PacketRecord> packets,
                        std::vector<AppRecord> app, TraceMeta meta, IngestReport report = {});

// Canonical writers (header line + one record per line).
void write_ran(std::ostream& out, std::span<const RanRecord> records);
void write_packets(std::ostream& out, std::span<const PacketRecord> records);
void write_app(std::ostream& out, std::span<const AppRecord> records);
void write_meta(std::ostream& out, const TraceMeta& meta);
TraceMeta load_meta(const std::filesystem::path& path);

/// File names used when a trace is written to or read from a directory.
struct TraceFiles {
    static constexpr const char* ran = "ran.csv";
    static constexpr const char* packets = "packets.csv";
    static constexpr const char* app = "app.csv";
    static constexpr const char* meta = "meta.txt";
};

void write_trace(const std::filesystem::path& dir, const Trace& trace);
AssembleResult load_trace(const std::filesystem::path& dir, const ClockOffsets& offsets = {});

}  // namespace domino
