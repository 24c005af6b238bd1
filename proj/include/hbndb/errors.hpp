#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hbndb {

enum class ErrorKind {
    validation,
    structural,
    ambiguous_mapping,
    coverage,
    convergence,
    degenerate_transition,
    undefined_angle,
    undefined_visibility,
    inverted_state,
    input,
    conflict,
    not_found,
    ambiguous_range,
    parse,
    io,
};

inline std::string_view to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::validation: return "validation";
        case ErrorKind::structural: return "structural";
        case ErrorKind::ambiguous_mapping: return "ambiguous_mapping";
        case ErrorKind::coverage: return "coverage";
        case ErrorKind::convergence: return "convergence";
        case ErrorKind::degenerate_transition: return "degenerate_transition";
        case ErrorKind::undefined_angle: return "undefined_angle";
        case ErrorKind::undefined_visibility: return "undefined_visibility";
        case ErrorKind::inverted_state: return "inverted_state";
        case ErrorKind::input: return "input";
        case ErrorKind::conflict: return "conflict";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::ambiguous_range: return "ambiguous_range";
        case ErrorKind::parse: return "parse";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

/// Base exception for everything the library throws. `field()` names the
/// offending input when there is one (record column, filter name, ...).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string field = {})
        : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

/// Parse failure with a 1-based source position.
class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t line, std::size_t column, const std::string& what)
        : Error(ErrorKind::parse, format(source, line, column, what)),
          source_(std::move(source)), line_(line), column_(column) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& src, std::size_t line, std::size_t col,
                              const std::string& what) {
        return src + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what;
    }

    std::string source_;
    std::size_t line_;
    std::size_t column_;
};

}  // namespace hbndb
