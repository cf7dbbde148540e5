#include "domino/trace_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace domino {

const char* to_string(Direction d) { return d == Direction::UL ? "ul" : "dl"; }
const char* to_string(Side s) { return s == Side::LOCAL ? "local" : "remote"; }
const char* to_string(PacketKind k) { return k == PacketKind::MEDIA ? "media" : "rtcp"; }

const char* to_string(GccState s) {
    switch (s) {
        case GccState::NORMAL: return "normal";
        case GccState::OVERUSE: return "overuse";
        case GccState::UNDERUSE: return "underuse";
    }
    return "normal";
}

std::pair<Timestamp, Timestamp> Trace::span() const {
    bool any = false;
    Timestamp lo, hi;
    auto extend = [&](Timestamp first, Timestamp last) {
        if (!any) {
            lo = first;
            hi = last;
            any = true;
            return;
        }
        lo = std::min(lo, first);
        hi = std::max(hi, last);
    };
    if (!ran.empty()) extend(ran.front().ts, ran.back().ts);
    if (!packets.empty()) extend(packets.front().send_ts, packets.back().send_ts);
    if (!app.empty()) extend(app.front().ts, app.back().ts);
    return {lo, hi};
}

Window::Window(Timestamp s, double len) : start(s), length_s(len) {
    if (!(len > 0)) throw std::invalid_argument("window length must be positive");
}

namespace {

template <typename Record, typename Key>
std::span<const Record> range_of(const std::vector<Record>& records, Timestamp lo, Timestamp hi, Key key) {
    auto first = std::partition_point(records.begin(), records.end(),
                                      [&](const Record& r) { return key(r) < lo; });
    auto last = std::partition_point(first, records.end(),
                                     [&](const Record& r) { return key(r) < hi; });
    return {first, last};
}

}  // namespace

WindowView slice(const Trace& trace, const Window& window) {
    const Timestamp lo = window.start;
    const Timestamp hi = window.end();
    WindowView view;
    view.window = window;
    view.ran = range_of(trace.ran, lo, hi, [](const RanRecord& r) { return r.ts; });
    view.packets = range_of(trace.packets, lo, hi, [](const PacketRecord& p) { return p.send_ts; });
    view.app = range_of(trace.app, lo, hi, [](const AppRecord& a) { return a.ts; });
    return view;
}

Window advance(const Window& window, double step_s) {
    if (!(step_s > 0)) throw std::invalid_argument("step must be positive");
    Window next = window;
    next.start = Timestamp{window.start.micros + seconds_to_micros(step_s)};
    return next;
}

std::vector<double> bucket_mean(std::span<const double> values, std::size_t count) {
    if (count == 0) throw std::invalid_argument("bucket count must be positive");
    std::vector<double> out;
    const std::size_t groups = values.size() / count;
    out.reserve(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        double sum = 0;
        for (std::size_t i = g * count; i < (g + 1) * count; ++i) sum += values[i];
        out.push_back(sum / static_cast<double>(count));
    }
    return out;
}

std::vector<double> bucket_mean(std::span<const std::pair<Timestamp, double>> series,
                                Timestamp origin, std::int64_t bin_us) {
    if (bin_us <= 0) throw std::invalid_argument("bucket duration must be positive");
    std::vector<double> out;
    std::size_t i = 0;
    while (i < series.size()) {
        const std::int64_t offset = series[i].first.micros - origin.micros;
        const std::int64_t bin = offset >= 0 ? offset / bin_us : -((-offset + bin_us - 1) / bin_us);
        const std::int64_t bin_end = origin.micros + (bin + 1) * bin_us;
        double sum = 0;
        std::size_t n = 0;
        while (i < series.size() && series[i].first.micros < bin_end) {
            sum += series[i].second;
            ++n;
            ++i;
        }
        out.push_back(sum / static_cast<double>(n));
    }
    return out;
}

}  // namespace domino
