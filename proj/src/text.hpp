#pragma once

// Internal helpers for the plain-text file formats.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hboa::text {

inline std::vector<std::string_view> split(std::string_view line, char sep = 0) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (sep == 0) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
            if (i == line.size()) break;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
            out.push_back(line.substr(i, j - i));
            i = j;
        } else {
            std::size_t j = line.find(sep, i);
            if (j == std::string_view::npos) j = line.size();
            std::string_view field = line.substr(i, j - i);
            while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.remove_suffix(1);
            while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
            out.push_back(field);
            if (j == line.size()) break;
            i = j + 1;
            if (i == line.size()) out.emplace_back();
        }
    }
    return out;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
    Int value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

/// Accepts decimal and C99 hex-float ("-0x1.8p+1") notation.
inline std::optional<double> parse_double(std::string_view s) {
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    auto fmt = std::chars_format::general;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        s.remove_prefix(2);
        fmt = std::chars_format::hex;
    }
    if (s.empty() || s.front() == '-' || s.front() == '+') return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, fmt);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return negative ? -value : value;
}

/// Exact hex-float rendering with a 0x prefix, e.g. 0x1.8p+0.
inline std::string format_hex(double value) {
    char buf[64];
    char* p = buf;
    if (std::signbit(value)) {
        *p++ = '-';
        value = -value;
    }
    *p++ = '0';
    *p++ = 'x';
    auto [end, ec] = std::to_chars(p, buf + sizeof buf, value, std::chars_format::hex);
    return std::string(buf, end);
}

/// Shortest decimal that round-trips.
inline std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

}  // namespace hboa::text
