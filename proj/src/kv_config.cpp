#include "domino/kv_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace domino {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

KvConfig KvConfig::parse(std::string_view text) {
    KvConfig cfg;
    int line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        auto line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(fmt::format("line {}: expected key = value", line_no), line_no);
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no), line_no);
        cfg.entries_.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
    }
    return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()), 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<std::string> KvConfig::get(std::string_view key) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
        if (it->key == key) return it->value;
    return std::nullopt;
}

std::vector<const KvEntry*> KvConfig::all(std::string_view key) const {
    std::vector<const KvEntry*> out;
    for (const auto& e : entries_)
        if (e.key == key) out.push_back(&e);
    return out;
}

double parse_double(std::string_view text, std::string_view what, int line) {
    text = trim(text);
    double v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
        throw ConfigError(fmt::format("line {}: invalid number for {}: '{}'", line, what, text), line);
    return v;
}

long long parse_int(std::string_view text, std::string_view what, int line) {
    text = trim(text);
    long long v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError(fmt::format("line {}: invalid integer for {}: '{}'", line, what, text), line);
    return v;
}

bool parse_bool(std::string_view text, std::string_view what, int line) {
    text = trim(text);
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw ConfigError(fmt::format("line {}: invalid boolean for {}: '{}'", line, what, text), line);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return fmt::format("{}", v);
    return std::string(buf, ptr);
}

}  // namespace domino
