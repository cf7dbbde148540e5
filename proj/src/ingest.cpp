#include "domino/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "domino/kv_config.hpp"

namespace domino {

ClockOffsets::ClockOffsets(std::initializer_list<ClockOffset> offsets) {
    for (const auto& o : offsets) set(o.stream, o.offset_us);
}

void ClockOffsets::set(ClockStream stream, std::int64_t offset_us) {
    values_[static_cast<int>(stream)] = offset_us;
}

namespace {

constexpr std::size_t kMaxLineWarnings = 20;
constexpr double kMaxMalformedFraction = 0.10;

enum class LineStatus { Ok, Malformed, Invalid };

struct LineResult {
    LineStatus status = LineStatus::Ok;
    std::string reason;
};

LineResult malformed(std::string reason) { return {LineStatus::Malformed, std::move(reason)}; }
LineResult invalid(std::string reason) { return {LineStatus::Invalid, std::move(reason)}; }

bool to_int(std::string_view s, std::int64_t& out) {
    s = trim(s);
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && p == end && !s.empty();
}

bool to_double(std::string_view s, double& out) {
    s = trim(s);
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && p == end && !s.empty();
}

bool to_flag(std::string_view s, bool& out) {
    s = trim(s);
    if (s == "0") { out = false; return true; }
    if (s == "1") { out = true; return true; }
    return false;
}

bool to_dir(std::string_view s, Direction& out) {
    s = trim(s);
    if (s == "ul") { out = Direction::UL; return true; }
    if (s == "dl") { out = Direction::DL; return true; }
    return false;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

// A header line is recognised by a non-numeric first token.
bool is_header(std::string_view line) {
    auto first = trim(split(line, ',').front());
    if (first.empty()) return false;
    const char c = first.front();
    return !(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.');
}

LineResult parse_ran_line(std::string_view line, RanRecord& r) {
    const auto f = split(line, ',');
    if (f.size() < 8 || f.size() > 10) return malformed(fmt::format("expected 8-10 fields, got {}", f.size()));
    std::int64_t ts = 0, rnti = 0, prb = 0, mcs = 0, tbs = 0;
    if (!to_int(f[0], ts) || !to_dir(f[1], r.dir) || !to_int(f[2], rnti) || !to_int(f[3], prb) ||
        !to_int(f[4], mcs) || !to_int(f[5], tbs) || !to_flag(f[6], r.is_own_ue) || !to_flag(f[7], r.harq_retx))
        return malformed("unparseable field");
    r.rlc_retx = false;
    r.proactive_grant = false;
    if (f.size() > 8 && !to_flag(f[8], r.rlc_retx)) return malformed("unparseable rlc_retx");
    if (f.size() > 9 && !to_flag(f[9], r.proactive_grant)) return malformed("unparseable proactive");
    r.ts = Timestamp{ts};
    r.rnti = rnti;
    r.prb = static_cast<std::int32_t>(prb);
    r.mcs = static_cast<std::int32_t>(mcs);
    r.tbs_bits = tbs;
    if (mcs < 0 || mcs > 28) return invalid(fmt::format("mcs {} outside [0, 28]", mcs));
    if (prb < 0) return invalid("negative prb");
    if (tbs < 0) return invalid("negative tbs_bits");
    return {};
}

LineResult parse_packet_line(std::string_view line, PacketRecord& p) {
    const auto f = split(line, ',');
    if (f.size() != 5) return malformed(fmt::format("expected 5 fields, got {}", f.size()));
    std::int64_t send = 0, recv = 0, size = 0;
    if (!to_int(f[0], send) || !to_int(f[1], recv) || !to_dir(f[2], p.dir) || !to_int(f[3], size))
        return malformed("unparseable field");
    const auto kind = trim(f[4]);
    if (kind == "media") p.kind = PacketKind::MEDIA;
    else if (kind == "rtcp") p.kind = PacketKind::RTCP;
    else return malformed(fmt::format("unknown packet kind '{}'", kind));
    p.send_ts = Timestamp{send};
    p.recv_ts = Timestamp{recv};
    p.size_bytes = static_cast<std::int32_t>(size);
    if (size <= 0) return invalid("non-positive size_bytes");
    if (recv < send) return invalid("recv_ts before send_ts");
    return {};
}

LineResult parse_app_line(std::string_view line, AppRecord& a) {
    const auto f = split(line, ',');
    if (f.size() != 12) return malformed(fmt::format("expected 12 fields, got {}", f.size()));
    std::int64_t ts = 0, res = 0, outstanding = 0, cwnd = 0;
    const auto side = trim(f[1]);
    if (side == "local") a.side = Side::LOCAL;
    else if (side == "remote") a.side = Side::REMOTE;
    else return malformed(fmt::format("unknown side '{}'", side));
    if (!to_int(f[0], ts) || !to_double(f[2], a.in_fps) || !to_double(f[3], a.out_fps) || !to_int(f[4], res) ||
        !to_double(f[5], a.jitter_buffer_ms) || !to_double(f[6], a.target_bitrate_bps) ||
        !to_double(f[7], a.pushback_rate_bps) || !to_int(f[9], outstanding) || !to_int(f[10], cwnd) ||
        !to_double(f[11], a.app_send_rate_bps))
        return malformed("unparseable field");
    a.ts = Timestamp{ts};
    a.out_res_height = static_cast<std::int32_t>(res);
    a.outstanding_bytes = outstanding;
    a.cwnd_bytes = cwnd;
    const auto state = trim(f[8]);
    if (iequals(state, "normal")) a.gcc_state = GccState::NORMAL;
    else if (iequals(state, "overuse")) a.gcc_state = GccState::OVERUSE;
    else if (iequals(state, "underuse")) a.gcc_state = GccState::UNDERUSE;
    else return invalid(fmt::format("unknown gcc_state '{}'", state));
    for (double v : {a.in_fps, a.out_fps, a.jitter_buffer_ms, a.target_bitrate_bps, a.pushback_rate_bps,
                     a.app_send_rate_bps})
        if (!std::isfinite(v)) return invalid("non-finite value");
    if (a.in_fps < 0 || a.out_fps < 0) return invalid("negative frame rate");
    if (a.jitter_buffer_ms < 0) return invalid("negative jitter_buffer_ms");
    if (a.target_bitrate_bps < 0 || a.pushback_rate_bps < 0 || a.app_send_rate_bps < 0)
        return invalid("negative bitrate");
    if (res < 0) return invalid("negative resolution");
    if (outstanding < 0) return invalid("negative outstanding_bytes");
    if (cwnd <= 0) return invalid("non-positive cwnd_bytes");
    return {};
}

template <typename Record, typename ParseLine, typename Shift, typename Key>
std::vector<Record> parse_stream(std::string_view text, StreamReport& stream, IngestReport& report,
                                 ParseLine parse_line, Shift shift, Key key) {
    std::vector<Record> out;
    std::size_t warned = 0;
    std::size_t suppressed = 0;
    std::size_t line_no = 0;
    bool first_content = true;
    auto warn = [&](std::string msg) {
        if (warned < kMaxLineWarnings) {
            report.warnings.push_back(std::move(msg));
            ++warned;
        } else {
            ++suppressed;
        }
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        if (first_content) {
            first_content = false;
            if (is_header(line)) continue;
        }
        ++stream.read;
        Record r{};
        auto res = parse_line(line, r);
        if (res.status == LineStatus::Ok && !shift(r))
            res = invalid("negative timestamp after clock offset");
        if (res.status == LineStatus::Ok) {
            out.push_back(r);
            continue;
        }
        ++stream.dropped;
        if (res.status == LineStatus::Malformed) ++stream.malformed;
        warn(fmt::format("{}:{}: dropped ({})", stream.name, line_no, res.reason));
    }
    if (suppressed > 0)
        report.warnings.push_back(fmt::format("{}: {} further dropped lines not listed", stream.name, suppressed));

    if (stream.read > 0 &&
        static_cast<double>(stream.malformed) > kMaxMalformedFraction * static_cast<double>(stream.read)) {
        throw IngestError(fmt::format("{}: {} of {} lines malformed (more than 10%)", stream.name,
                                      stream.malformed, stream.read),
                          report);
    }

    std::stable_sort(out.begin(), out.end(), [&](const Record& a, const Record& b) { return key(a) < key(b); });
    stream.kept = out.size();
    if (!out.empty()) {
        stream.first = key(out.front());
        stream.last = key(out.back());
    }
    return out;
}

std::string read_file(const std::filesystem::path& path, const IngestReport& report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError(fmt::format("cannot read input file '{}'", path.string()), report);
    std::string data;
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    if (size > 0) {
        data.resize(static_cast<std::size_t>(size));
        in.read(data.data(), size);
    }
    return data;
}

}  // namespace

std::vector<RanRecord> parse_ran(std::string_view text, const ClockOffsets& offsets, IngestReport& report) {
    const auto off = offsets.get(ClockStream::RAN);
    return parse_stream<RanRecord>(
        text, report.ran, report, parse_ran_line,
        [off](RanRecord& r) {
            r.ts.micros += off;
            return r.ts.micros >= 0;
        },
        [](const RanRecord& r) { return r.ts; });
}

std::vector<PacketRecord> parse_packets(std::string_view text, const ClockOffsets& offsets,
                                        IngestReport& report) {
    const auto off = offsets.get(ClockStream::PACKETS);
    return parse_stream<PacketRecord>(
        text, report.packets, report, parse_packet_line,
        [off](PacketRecord& p) {
            p.send_ts.micros += off;
            p.recv_ts.micros += off;
            return p.send_ts.micros >= 0;
        },
        [](const PacketRecord& p) { return p.send_ts; });
}

std::vector<AppRecord> parse_app(std::string_view text, const ClockOffsets& offsets, IngestReport& report) {
    const auto local = offsets.get(ClockStream::APP_LOCAL);
    const auto remote = offsets.get(ClockStream::APP_REMOTE);
    return parse_stream<AppRecord>(
        text, report.app, report, parse_app_line,
        [local, remote](AppRecord& a) {
            a.ts.micros += a.side == Side::LOCAL ? local : remote;
            return a.ts.micros >= 0;
        },
        [](const AppRecord& a) { return a.ts; });
}

std::vector<RanRecord> load_ran(const std::filesystem::path& path, const ClockOffsets& offsets,
                                IngestReport& report) {
    return parse_ran(read_file(path, report), offsets, report);
}

std::vector<PacketRecord> load_packets(const std::filesystem::path& path, const ClockOffsets& offsets,
                                       IngestReport& report) {
    return parse_packets(read_file(path, report), offsets, report);
}

std::vector<AppRecord> load_app(const std::filesystem::path& path, const ClockOffsets& offsets,
                                IngestReport& report) {
    return parse_app(read_file(path, report), offsets, report);
}

AssembleResult assemble(std::vector<RanRecord> ran, std::vector<PacketRecord> packets,
                        std::vector<AppRecord> app, TraceMeta meta, IngestReport report) {
    struct Span {
        const char* name;
        std::int64_t lo, hi;
    };
    std::vector<Span> spans;
    if (!ran.empty()) spans.push_back({"ran", ran.front().ts.micros, ran.back().ts.micros});
    else report.warnings.push_back("ran stream is empty");
    if (!packets.empty()) spans.push_back({"packets", packets.front().send_ts.micros, packets.back().send_ts.micros});
    else report.warnings.push_back("packet stream is empty");
    if (!app.empty()) spans.push_back({"app", app.front().ts.micros, app.back().ts.micros});
    else report.warnings.push_back("app stream is empty");

    for (std::size_t i = 0; i < spans.size(); ++i)
        for (std::size_t j = i + 1; j < spans.size(); ++j)
            if (spans[i].hi < spans[j].lo || spans[j].hi < spans[i].lo)
                throw IngestError(fmt::format("streams '{}' and '{}' do not overlap in time", spans[i].name,
                                              spans[j].name),
                                  report);

    if (!spans.empty()) {
        std::int64_t lo_all = spans[0].lo, hi_all = spans[0].hi;
        std::int64_t lo_shared = spans[0].lo, hi_shared = spans[0].hi;
        for (const auto& s : spans) {
            lo_all = std::min(lo_all, s.lo);
            hi_all = std::max(hi_all, s.hi);
            lo_shared = std::max(lo_shared, s.lo);
            hi_shared = std::min(hi_shared, s.hi);
        }
        const auto shared = std::max<std::int64_t>(0, hi_shared - lo_shared);
        const auto total = hi_all - lo_all;
        report.overlap_s = static_cast<double>(shared) * 1e-6;
        report.overlap_fraction = total > 0 ? static_cast<double>(shared) / static_cast<double>(total) : 1.0;
        if (report.overlap_fraction < 0.5)
            report.warnings.push_back(fmt::format("streams overlap for only {:.1f}% of the covered span",
                                                  report.overlap_fraction * 100.0));
    }

    AssembleResult out;
    out.trace.ran = std::move(ran);
    out.trace.packets = std::move(packets);
    out.trace.app = std::move(app);
    out.trace.meta = std::move(meta);
    out.report = std::move(report);
    return out;
}

void write_ran(std::ostream& out, std::span<const RanRecord> records) {
    out << "ts_us,dir,rnti,prb,mcs,tbs_bits,own,harq_retx,rlc_retx,proactive\n";
    fmt::memory_buffer buf;
    for (const auto& r : records) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{},{:d},{:d},{:d},{:d}\n", r.ts.micros,
                       to_string(r.dir), r.rnti, r.prb, r.mcs, r.tbs_bits, r.is_own_ue, r.harq_retx, r.rlc_retx,
                       r.proactive_grant);
        if (buf.size() > (1 << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_packets(std::ostream& out, std::span<const PacketRecord> records) {
    out << "send_ts_us,recv_ts_us,dir,size_bytes,kind\n";
    fmt::memory_buffer buf;
    for (const auto& p : records) {
        fmt::format_to(std::back_inserter(buf), "{},{},{},{},{}\n", p.send_ts.micros, p.recv_ts.micros,
                       to_string(p.dir), p.size_bytes, to_string(p.kind));
        if (buf.size() > (1 << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_app(std::ostream& out, std::span<const AppRecord> records) {
    out << "ts_us,side,in_fps,out_fps,out_res_height,jitter_buffer_ms,target_bitrate_bps,pushback_rate_bps,"
           "gcc_state,outstanding_bytes,cwnd_bytes,app_send_rate_bps\n";
    for (const auto& a : records) {
        out << a.ts.micros << ',' << to_string(a.side) << ',' << format_double(a.in_fps) << ','
            << format_double(a.out_fps) << ',' << a.out_res_height << ',' << format_double(a.jitter_buffer_ms)
            << ',' << format_double(a.target_bitrate_bps) << ',' << format_double(a.pushback_rate_bps) << ','
            << to_string(a.gcc_state) << ',' << a.outstanding_bytes << ',' << a.cwnd_bytes << ','
            << format_double(a.app_send_rate_bps) << '\n';
    }
}

void write_meta(std::ostream& out, const TraceMeta& meta) {
    out << "cell_name = " << meta.cell_name << '\n'
        << "duplexing = " << meta.duplexing << '\n'
        << "bandwidth_mhz = " << format_double(meta.bandwidth_mhz) << '\n';
}

TraceMeta load_meta(const std::filesystem::path& path) {
    const auto kv = KvConfig::load(path);
    TraceMeta meta;
    if (auto v = kv.get("cell_name")) meta.cell_name = *v;
    if (auto v = kv.get("duplexing")) meta.duplexing = *v;
    if (auto v = kv.get("bandwidth_mhz")) meta.bandwidth_mhz = parse_double(*v, "bandwidth_mhz");
    return meta;
}

void write_trace(const std::filesystem::path& dir, const Trace& trace) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", (dir / name).string()));
        return out;
    };
    {
        auto out = open(TraceFiles::ran);
        write_ran(out, trace.ran);
    }
    {
        auto out = open(TraceFiles::packets);
        write_packets(out, trace.packets);
    }
    {
        auto out = open(TraceFiles::app);
        write_app(out, trace.app);
    }
    {
        auto out = open(TraceFiles::meta);
        write_meta(out, trace.meta);
    }
}

AssembleResult load_trace(const std::filesystem::path& dir, const ClockOffsets& offsets) {
    IngestReport report;
    auto ran = load_ran(dir / TraceFiles::ran, offsets, report);
    auto packets = load_packets(dir / TraceFiles::packets, offsets, report);
    auto app = load_app(dir / TraceFiles::app, offsets, report);
    TraceMeta meta;
    if (std::filesystem::exists(dir / TraceFiles::meta)) meta = load_meta(dir / TraceFiles::meta);
    return assemble(std::move(ran), std::move(packets), std::move(app), std::move(meta), std::move(report));
}

}  // namespace domino
