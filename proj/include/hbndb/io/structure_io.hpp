#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/constants.hpp"
#include "hbndb/db/query.hpp"
#include "hbndb/elements.hpp"
#include "hbndb/errors.hpp"
#include "hbndb/geometry.hpp"
#include "hbndb/io/text.hpp"

namespace hbndb::io {

// POSCAR -----------------------------------------------------------------------

/// VASP 5 POSCAR/CONTCAR. The species line is required; "Selective dynamics" flags are ignored.
/// A negative scale factor is read as the target cell volume.
inline Structure parse_poscar(std::string_view content, const std::string& source = "POSCAR") {
    auto all = split_lines(content);
    std::size_t li = 0;
    auto next = [&](const char* what) -> const Line& {
        if (li >= all.size())
            throw ParseError(source, all.empty() ? 1 : all.back().number + 1, 1, std::string("missing ") + what);
        return all[li++];
    };
    auto numbers = [&](const Line& l, std::size_t count, const char* what) {
        auto toks = tokenize(l.text, '!');
        if (toks.size() < count)
            throw ParseError(source, l.number, l.text.size() + 1,
                             std::string("expected ") + std::to_string(count) + " values for " + what);
        std::vector<double> v;
        for (std::size_t i = 0; i < count; ++i) v.push_back(parse_double(source, l.number, toks[i]));
        return v;
    };

    Structure s;
    s.comment = std::string(trim(next("comment line").text));
    const Line& scale_line = next("scale factor");
    double scale = numbers(scale_line, 1, "scale factor")[0];
    if (scale == 0.0) throw ParseError(source, scale_line.number, 1, "scale factor must be non-zero");
    for (int r = 0; r < 3; ++r) {
        auto v = numbers(next("lattice vector"), 3, "lattice vector");
        s.lattice[static_cast<std::size_t>(r)] = {v[0], v[1], v[2]};
    }
    if (scale < 0.0) {
        double det = determinant(s.lattice);
        if (!(det > 0.0)) throw ParseError(source, scale_line.number, 1, "volume scaling needs a right-handed cell");
        scale = std::cbrt(-scale / det);
    }
    for (auto& row : s.lattice)
        for (double& x : row) x *= scale;

    const Line& species_line = next("species line");
    auto species_toks = tokenize(species_line.text, '!');
    if (species_toks.empty() || std::isdigit(static_cast<unsigned char>(species_toks[0].text[0])))
        throw ParseError(source, species_line.number, 1, "species line required (VASP 5 format)");
    std::vector<std::string> symbols;
    for (const auto& t : species_toks) {
        std::string sym(t.text);
        if (auto slash = sym.find_first_of("/_"); slash != std::string::npos) sym.resize(slash);  // POTCAR tags, e.g. "B_s"
        if (!is_element(sym)) throw ParseError(source, species_line.number, t.column, "unknown element '" + sym + "'");
        symbols.push_back(sym);
    }
    const Line& count_line = next("atom counts");
    auto count_toks = tokenize(count_line.text, '!');
    if (count_toks.size() != symbols.size())
        throw ParseError(source, count_line.number, 1,
                         "expected " + std::to_string(symbols.size()) + " atom counts, got " +
                             std::to_string(count_toks.size()));
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        long n = parse_int(source, count_line.number, count_toks[i]);
        if (n <= 0) throw ParseError(source, count_line.number, count_toks[i].column, "atom count must be positive");
        for (long k = 0; k < n; ++k) s.species.push_back(symbols[i]);
    }

    const Line* mode = &next("coordinate mode");
    auto first = [](const Line& l) {
        auto t = trim(l.text);
        return t.empty() ? '\0' : static_cast<char>(std::tolower(static_cast<unsigned char>(t[0])));
    };
    if (first(*mode) == 's') mode = &next("coordinate mode");
    char m = first(*mode);
    bool cartesian = m == 'c' || m == 'k';
    if (!cartesian && m != 'd')
        throw ParseError(source, mode->number, 1, "expected 'Direct' or 'Cartesian'");

    for (std::size_t i = 0; i < s.species.size(); ++i) {
        auto v = numbers(next("atomic position"), 3, "atomic position");
        Vec3 p{v[0], v[1], v[2]};
        if (cartesian) p = {p[0] * scale, p[1] * scale, p[2] * scale};
        else p = mul(p, s.lattice);
        s.positions.push_back(p);
    }
    return s;
}

inline std::string write_poscar(const Structure& s) {
    std::string out = (s.comment.empty() ? std::string("structure") : s.comment) + "\n1.0\n";
    char buf[128];
    for (const auto& row : s.lattice) {
        std::snprintf(buf, sizeof buf, "  %.12f  %.12f  %.12f\n", row[0], row[1], row[2]);
        out += buf;
    }
    std::vector<std::pair<std::string, int>> groups;
    for (const auto& sp : s.species) {
        if (groups.empty() || groups.back().first != sp) groups.emplace_back(sp, 0);
        ++groups.back().second;
    }
    for (const auto& g : groups) out += "  " + g.first;
    out += "\n";
    for (const auto& g : groups) out += "  " + std::to_string(g.second);
    out += "\nCartesian\n";
    for (const auto& p : s.positions) {
        std::snprintf(buf, sizeof buf, "  %.12f  %.12f  %.12f\n", p[0], p[1], p[2]);
        out += buf;
    }
    return out;
}

// CIF --------------------------------------------------------------------------

namespace detail {

/// CIF value tokens: bare words, 'single' or "double" quoted strings.
inline std::vector<Token> cif_tokens(std::string_view line, const std::string& source, std::size_t number) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '#') break;
        if (c == '\'' || c == '"') {
            std::size_t start = i + 1, j = start;
            while (j < line.size() && !(line[j] == c && (j + 1 == line.size() || std::isspace(static_cast<unsigned char>(line[j + 1])))))
                ++j;
            if (j >= line.size()) throw ParseError(source, number, i + 1, "unterminated quoted value");
            out.push_back({line.substr(start, j - start), i + 1});
            i = j + 1;
            continue;
        }
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        out.push_back({line.substr(start, i - start), start + 1});
    }
    return out;
}

/// Drops a trailing standard uncertainty such as "4.3(2)".
inline Token strip_uncertainty(Token t) {
    if (auto p = t.text.find('('); p != std::string_view::npos && t.text.back() == ')') t.text = t.text.substr(0, p);
    return t;
}

inline std::string symbol_from_label(std::string_view label) {
    std::string sym;
    for (char c : label) {
        if (!std::isalpha(static_cast<unsigned char>(c))) break;
        sym += c;
    }
    if (sym.size() > 2) sym.resize(2);
    if (sym.size() == 2 && !is_element(sym)) sym.resize(1);
    return sym;
}

}  // namespace detail

/// Lattice from cell parameters, a along x and b in the xy plane.
inline Lattice lattice_from_parameters(double a, double b, double c, double alpha, double beta, double gamma) {
    const double d = constants::pi / 180.0;
    double ca = std::cos(alpha * d), cb = std::cos(beta * d), cg = std::cos(gamma * d), sg = std::sin(gamma * d);
    double cx = c * cb;
    double cy = c * (ca - cb * cg) / sg;
    double cz2 = c * c - cx * cx - cy * cy;
    if (!(cz2 > 0.0)) throw Error(ErrorKind::validation, "cell angles do not form a valid cell", "lattice");
    return Lattice{{{a, 0.0, 0.0}, {b * cg, b * sg, 0.0}, {cx, cy, std::sqrt(cz2)}}};
}

/// Reads the first data block of a P1 CIF: cell parameters plus an _atom_site_ loop with
/// fractional (or Cartesian) coordinates. Symmetry expansion is not performed; files listing
/// more than the identity operation are rejected.
inline Structure parse_cif(std::string_view content, const std::string& source = "structure.cif") {
    auto lines = split_lines(content);
    std::map<std::string, std::pair<Token, std::size_t>> scalars;
    struct Loop {
        std::vector<std::string> tags;
        std::vector<std::pair<Token, std::size_t>> values;
        std::size_t line;
    };
    std::vector<Loop> loops;
    std::string data_name;

    std::size_t i = 0;
    auto lower = [](std::string_view s) {
        std::string r(s);
        for (char& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return r;
    };
    while (i < lines.size()) {
        const auto& l = lines[i];
        auto t = trim(l.text);
        if (t.empty() || t[0] == '#') {
            ++i;
            continue;
        }
        if (t[0] == ';') throw ParseError(source, l.number, 1, "multi-line text fields are not supported here");
        if (lower(t.substr(0, 5)) == "data_") {
            if (!data_name.empty()) break;  // only the first block
            data_name = std::string(t.substr(5));
            ++i;
            continue;
        }
        if (lower(t) == "loop_") {
            Loop loop{{}, {}, l.number};
            ++i;
            while (i < lines.size()) {
                auto tt = trim(lines[i].text);
                if (tt.empty() || tt[0] != '_') break;
                auto toks = detail::cif_tokens(lines[i].text, source, lines[i].number);
                loop.tags.push_back(lower(toks[0].text));
                ++i;
            }
            while (i < lines.size()) {
                auto tt = trim(lines[i].text);
                if (tt.empty() || tt[0] == '#') {
                    ++i;
                    continue;
                }
                if (tt[0] == '_' || lower(tt) == "loop_" || lower(tt.substr(0, 5)) == "data_") break;
                for (auto& tok : detail::cif_tokens(lines[i].text, source, lines[i].number))
                    loop.values.emplace_back(tok, lines[i].number);
                ++i;
            }
            if (loop.tags.empty()) throw ParseError(source, loop.line, 1, "loop_ without tags");
            if (loop.values.size() % loop.tags.size() != 0)
                throw ParseError(source, loop.line, 1,
                                 "loop has " + std::to_string(loop.values.size()) + " values, not a multiple of " +
                                     std::to_string(loop.tags.size()) + " tags");
            loops.push_back(std::move(loop));
            continue;
        }
        if (t[0] == '_') {
            auto toks = detail::cif_tokens(l.text, source, l.number);
            if (toks.size() < 2) throw ParseError(source, l.number, toks[0].column + toks[0].text.size(), "tag without value");
            scalars[lower(toks[0].text)] = {toks[1], l.number};
            ++i;
            continue;
        }
        throw ParseError(source, l.number, 1, "unexpected content '" + std::string(t) + "'");
    }
    if (data_name.empty() && scalars.empty()) throw ParseError(source, 1, 1, "no data_ block");

    auto cell = [&](const char* tag) {
        auto it = scalars.find(tag);
        if (it == scalars.end()) throw ParseError(source, lines.empty() ? 1 : lines.back().number, 1, std::string("missing ") + tag);
        return parse_double(source, it->second.second, detail::strip_uncertainty(it->second.first));
    };
    Structure s;
    s.comment = data_name;
    s.lattice = lattice_from_parameters(cell("_cell_length_a"), cell("_cell_length_b"), cell("_cell_length_c"),
                                        cell("_cell_angle_alpha"), cell("_cell_angle_beta"), cell("_cell_angle_gamma"));

    const Loop* atoms = nullptr;
    for (const auto& loop : loops) {
        for (const auto& tag : loop.tags) {
            if (tag == "_symmetry_equiv_pos_as_xyz" || tag == "_space_group_symop_operation_xyz") {
                if (loop.values.size() / loop.tags.size() > 1)
                    throw ParseError(source, loop.line, 1, "symmetry expansion not supported; provide a P1 cell");
            }
        }
        if (std::find(loop.tags.begin(), loop.tags.end(), "_atom_site_fract_x") != loop.tags.end() ||
            std::find(loop.tags.begin(), loop.tags.end(), "_atom_site_cartn_x") != loop.tags.end())
            atoms = &loop;
    }
    if (!atoms) throw ParseError(source, lines.empty() ? 1 : lines.back().number, 1, "no _atom_site_ coordinate loop");
    auto col = [&](const char* tag) -> std::optional<std::size_t> {
        auto it = std::find(atoms->tags.begin(), atoms->tags.end(), tag);
        if (it == atoms->tags.end()) return std::nullopt;
        return static_cast<std::size_t>(it - atoms->tags.begin());
    };
    auto type = col("_atom_site_type_symbol");
    auto label = col("_atom_site_label");
    bool fractional = col("_atom_site_fract_x").has_value();
    auto cx = fractional ? col("_atom_site_fract_x") : col("_atom_site_cartn_x");
    auto cy = fractional ? col("_atom_site_fract_y") : col("_atom_site_cartn_y");
    auto cz = fractional ? col("_atom_site_fract_z") : col("_atom_site_cartn_z");
    if (!cy || !cz) throw ParseError(source, atoms->line, 1, "atom site loop lacks y or z coordinates");
    if (!type && !label) throw ParseError(source, atoms->line, 1, "atom site loop lacks type symbol and label");

    const std::size_t width = atoms->tags.size();
    for (std::size_t r = 0; r < atoms->values.size() / width; ++r) {
        auto cellv = [&](std::size_t c) { return atoms->values[r * width + c]; };
        auto [tok, ln] = cellv(type ? *type : *label);
        std::string sym = type ? std::string(tok.text) : detail::symbol_from_label(tok.text);
        if (type) {
            // Oxidation-state decorations such as "B3+" or "N3-".
            auto end = std::find_if(sym.begin(), sym.end(), [](char c) { return !std::isalpha(static_cast<unsigned char>(c)); });
            sym.erase(end, sym.end());
        }
        if (!is_element(sym)) throw ParseError(source, ln, tok.column, "unknown element '" + std::string(tok.text) + "'");
        Vec3 p{};
        std::size_t idx[3] = {*cx, *cy, *cz};
        for (int k = 0; k < 3; ++k) {
            auto [vt, vl] = cellv(idx[k]);
            p[static_cast<std::size_t>(k)] = parse_double(source, vl, detail::strip_uncertainty(vt));
        }
        s.species.push_back(sym);
        s.positions.push_back(fractional ? mul(p, s.lattice) : p);
    }
    if (s.species.empty()) throw ParseError(source, atoms->line, 1, "atom site loop is empty");
    return s;
}

/// P1 CIF with fractional coordinates. Doubles use shortest round-trip formatting.
inline std::string write_cif(const Structure& s, std::string_view name = "") {
    const auto& m = s.lattice;
    double a = norm(m[0]), b = norm(m[1]), c = norm(m[2]);
    const double r = 180.0 / constants::pi;
    double alpha = std::acos(dot(m[1], m[2]) / (b * c)) * r;
    double beta = std::acos(dot(m[0], m[2]) / (a * c)) * r;
    double gamma = std::acos(dot(m[0], m[1]) / (a * b)) * r;
    auto f = db::format_double;
    std::string block(name.empty() ? (s.comment.empty() ? "structure" : s.comment) : std::string(name));
    for (char& ch : block)
        if (std::isspace(static_cast<unsigned char>(ch))) ch = '_';
    std::string out = "data_" + block + "\n";
    out += "_symmetry_space_group_name_H-M   'P 1'\n";
    out += "_cell_length_a   " + f(a) + "\n_cell_length_b   " + f(b) + "\n_cell_length_c   " + f(c) + "\n";
    out += "_cell_angle_alpha   " + f(alpha) + "\n_cell_angle_beta   " + f(beta) + "\n_cell_angle_gamma   " + f(gamma) + "\n";
    out += "loop_\n _symmetry_equiv_pos_as_xyz\n  'x, y, z'\n";
    out += "loop_\n _atom_site_label\n _atom_site_type_symbol\n _atom_site_fract_x\n _atom_site_fract_y\n _atom_site_fract_z\n";
    std::map<std::string, int> counter;
    for (std::size_t i = 0; i < s.atom_count(); ++i) {
        auto fr = s.fractional(i);
        out += "  " + s.species[i] + std::to_string(++counter[s.species[i]]) + "  " + s.species[i] + "  " + f(fr[0]) +
               "  " + f(fr[1]) + "  " + f(fr[2]) + "\n";
    }
    return out;
}

enum class StructureFormat { poscar, cif };

inline StructureFormat detect_structure_format(const std::filesystem::path& path, std::string_view content) {
    auto ext = path.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".cif") return StructureFormat::cif;
    if (ext == ".vasp" || ext == ".poscar") return StructureFormat::poscar;
    auto name = path.filename().string();
    if (name.find("POSCAR") != std::string::npos || name.find("CONTCAR") != std::string::npos) return StructureFormat::poscar;
    for (const auto& l : split_lines(content)) {
        auto t = trim(l.text);
        if (t.empty() || t[0] == '#') continue;
        return t.substr(0, 5) == "data_" ? StructureFormat::cif : StructureFormat::poscar;
    }
    return StructureFormat::poscar;
}

inline Structure parse_structure(std::string_view content, StructureFormat format, const std::string& source) {
    return format == StructureFormat::cif ? parse_cif(content, source) : parse_poscar(content, source);
}

inline Structure read_structure(const std::filesystem::path& path) {
    auto content = read_text_file(path);
    return parse_structure(content, detect_structure_format(path, content), path.string());
}

}  // namespace hbndb::io
