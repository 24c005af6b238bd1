#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/db/query.hpp"
#include "hbndb/errors.hpp"
#include "hbndb/io/text.hpp"
#include "hbndb/spectrum.hpp"

namespace hbndb::io {

/// Two-column text (energy in eV, intensity), one sample per line. Metadata goes into leading
/// "# key = value" comment lines; readers that ignore '#' lines see plain columns.
inline std::string write_two_column(const Spectrum& s, bool with_header = true) {
    std::string out;
    if (with_header) {
        out += "# kind = " + std::string(to_string(s.kind())) + "\n";
        out += "# columns = energy_eV intensity_" + s.units() + "\n";
        for (const auto& [k, v] : s.metadata()) out += "# " + k + " = " + v + "\n";
    }
    for (std::size_t i = 0; i < s.size(); ++i)
        out += db::format_double(s.grid()[i]) + " " + db::format_double(s.values()[i]) + "\n";
    return out;
}

/// Plot-ready CSV with a header row.
inline std::string write_csv(const Spectrum& s) {
    std::string out = "energy_eV,intensity\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        out += db::format_double(s.grid()[i]) + "," + db::format_double(s.values()[i]) + "\n";
    return out;
}

/// Reads two-column text. "# key = value" header lines become metadata.
inline Spectrum parse_two_column(std::string_view content, SpectrumKind kind, const std::string& source = "spectrum") {
    std::vector<double> grid, values;
    std::map<std::string, std::string> meta;
    for (const auto& l : split_lines(content)) {
        auto t = trim(l.text);
        if (t.empty()) continue;
        if (t[0] == '#') {
            auto body = trim(t.substr(1));
            if (auto eq = body.find('='); eq != std::string_view::npos)
                meta[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
            continue;
        }
        auto toks = tokenize(l.text);
        if (toks.size() < 2) throw ParseError(source, l.number, 1, "expected two columns");
        if (toks.size() > 2) throw ParseError(source, l.number, toks[2].column, "unexpected third column");
        grid.push_back(parse_double(source, l.number, toks[0]));
        values.push_back(parse_double(source, l.number, toks[1]));
    }
    meta.erase("kind");
    meta.erase("columns");
    Spectrum s(std::move(grid), std::move(values), kind, "arb. units");
    s.metadata() = std::move(meta);
    return s;
}

/// Linear resampling onto `grid`, rescaled so the maximum is one.
inline Spectrum resample_max_to_one(const Spectrum& s, std::vector<double> grid) {
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = s.at(grid[i]);
    double mx = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    if (mx > 0.0)
        for (double& v : values) v /= mx;
    Spectrum out(std::move(grid), std::move(values), s.kind(), s.units());
    out.metadata() = s.metadata();
    return out;
}

}  // namespace hbndb::io
