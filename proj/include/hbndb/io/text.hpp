#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/errors.hpp"

namespace hbndb::io {

struct Token {
    std::string_view text;
    std::size_t column;  // 1-based
};

/// One physical line with its 1-based number.
struct Line {
    std::string_view text;
    std::size_t number;
};

inline std::vector<Line> split_lines(std::string_view content) {
    std::vector<Line> lines;
    std::size_t start = 0, n = 1;
    while (start <= content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        auto line = content.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (end == content.size() && line.empty()) break;
        lines.push_back({line, n++});
        start = end + 1;
    }
    return lines;
}

/// Whitespace tokens with column positions. Text after `comment` (if non-zero) is dropped.
inline std::vector<Token> tokenize(std::string_view line, char comment = '#') {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (comment && line[i] == comment) break;
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && !(comment && line[i] == comment))
            ++i;
        out.push_back({line.substr(start, i - start), start + 1});
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Strict numeric parsing: the whole token must be consumed.
inline double parse_double(const std::string& source, std::size_t line, const Token& t) {
    std::string_view s = t.text;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(source, line, t.column, "expected a number, got '" + std::string(t.text) + "'");
    return v;
}

inline long parse_int(const std::string& source, std::size_t line, const Token& t) {
    std::string_view s = t.text;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(source, line, t.column, "expected an integer, got '" + std::string(t.text) + "'");
    return v;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'", "path");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline bool is_blank(std::string_view s, char comment = '#') {
    for (char c : s) {
        if (c == comment) return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

}  // namespace hbndb::io
