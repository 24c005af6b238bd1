#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/errors.hpp"
#include "hbndb/io/text.hpp"

namespace hbndb::io {

/// "key = value" text with '#' comments and optional "[section]" headers.
/// Keys before the first header belong to the unnamed section.
class KeyedText {
public:
    struct Entry {
        std::string value;
        std::size_t line;
        std::size_t column;  // of the value
    };

    struct Section {
        std::string name;
        std::size_t line = 0;
        std::map<std::string, Entry> entries;

        bool has(const std::string& key) const { return entries.count(key) != 0; }
    };

    static KeyedText parse(std::string_view content, std::string source) {
        KeyedText kt;
        kt.source_ = std::move(source);
        kt.sections_.push_back({"", 0, {}});
        for (const auto& l : split_lines(content)) {
            std::string_view text = l.text;
            // '#' after whitespace (or at the start) begins a comment.
            for (std::size_t i = 0; i < text.size(); ++i)
                if (text[i] == '#' && (i == 0 || text[i - 1] == ' ' || text[i - 1] == '\t')) {
                    text = text.substr(0, i);
                    break;
                }
            auto t = trim(text);
            if (t.empty()) continue;
            std::size_t lead = static_cast<std::size_t>(t.data() - l.text.data());
            if (t.front() == '[') {
                if (t.back() != ']') throw ParseError(kt.source_, l.number, lead + t.size(), "expected ']'");
                kt.sections_.push_back({std::string(trim(t.substr(1, t.size() - 2))), l.number, {}});
                continue;
            }
            auto eq = t.find('=');
            if (eq == std::string_view::npos) throw ParseError(kt.source_, l.number, lead + 1, "expected 'key = value'");
            auto key = trim(t.substr(0, eq));
            if (key.empty()) throw ParseError(kt.source_, l.number, lead + 1, "empty key");
            auto raw = t.substr(eq + 1);
            auto value = trim(raw);
            std::size_t vcol = lead + eq + 2 + static_cast<std::size_t>(value.data() - raw.data());
            auto& sec = kt.sections_.back();
            if (sec.has(std::string(key)))
                throw ParseError(kt.source_, l.number, lead + 1, "duplicate key '" + std::string(key) + "'");
            sec.entries[std::string(key)] = {std::string(value), l.number, vcol};
        }
        return kt;
    }

    static KeyedText read(const std::filesystem::path& path) { return parse(read_text_file(path), path.string()); }

    const std::string& source() const noexcept { return source_; }
    const Section& root() const noexcept { return sections_.front(); }
    std::vector<const Section*> sections(std::string_view prefix = "") const {
        std::vector<const Section*> out;
        for (std::size_t i = 1; i < sections_.size(); ++i)
            if (sections_[i].name.rfind(prefix, 0) == 0) out.push_back(&sections_[i]);
        return out;
    }

    // Typed accessors over a section; errors carry line/column.
    std::optional<std::string> text(const Section& s, const std::string& key) const {
        auto it = s.entries.find(key);
        if (it == s.entries.end()) return std::nullopt;
        return it->second.value;
    }

    std::string require_text(const Section& s, const std::string& key) const {
        auto v = text(s, key);
        if (!v) throw ParseError(source_, s.line ? s.line : 1, 1, "missing key '" + key + "'");
        return *v;
    }

    std::optional<double> number(const Section& s, const std::string& key) const {
        auto it = s.entries.find(key);
        if (it == s.entries.end()) return std::nullopt;
        return parse_double(source_, it->second.line, Token{it->second.value, it->second.column});
    }

    double require_number(const Section& s, const std::string& key) const {
        auto v = number(s, key);
        if (!v) throw ParseError(source_, s.line ? s.line : 1, 1, "missing key '" + key + "'");
        return *v;
    }

    std::optional<long> integer(const Section& s, const std::string& key) const {
        auto it = s.entries.find(key);
        if (it == s.entries.end()) return std::nullopt;
        return parse_int(source_, it->second.line, Token{it->second.value, it->second.column});
    }

    /// Whitespace-separated numbers.
    std::vector<double> numbers(const Section& s, const std::string& key) const {
        auto it = s.entries.find(key);
        if (it == s.entries.end()) throw ParseError(source_, s.line ? s.line : 1, 1, "missing key '" + key + "'");
        std::vector<double> out;
        for (auto t : tokenize(it->second.value, 0)) {
            t.column += it->second.column - 1;
            out.push_back(parse_double(source_, it->second.line, t));
        }
        return out;
    }

    [[noreturn]] void fail(const Section& s, const std::string& key, const std::string& what) const {
        auto it = s.entries.find(key);
        if (it == s.entries.end()) throw ParseError(source_, s.line ? s.line : 1, 1, what);
        throw ParseError(source_, it->second.line, it->second.column, what);
    }

private:
    std::string source_;
    std::vector<Section> sections_;
};

}  // namespace hbndb::io
