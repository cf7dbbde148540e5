#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace domino {

/// Raised for malformed key=value input; carries the 1-based line number.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

struct KvEntry {
    std::string key;
    std::string value;
    int line = 0;
};

/// Ordered `key = value` entries. `#` starts a comment; blank lines are
/// ignored; repeated keys are kept in order.
class KvConfig {
public:
    static KvConfig parse(std::string_view text);
    static KvConfig load(const std::filesystem::path& path);

    const std::vector<KvEntry>& entries() const { return entries_; }
    std::optional<std::string> get(std::string_view key) const;
    std::vector<const KvEntry*> all(std::string_view key) const;

private:
    std::vector<KvEntry> entries_;
};

double parse_double(std::string_view text, std::string_view what, int line = 0);
long long parse_int(std::string_view text, std::string_view what, int line = 0);
bool parse_bool(std::string_view text, std::string_view what, int line = 0);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace domino
