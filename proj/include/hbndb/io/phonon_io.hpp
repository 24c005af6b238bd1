#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/db/query.hpp"
#include "hbndb/errors.hpp"
#include "hbndb/io/text.hpp"
#include "hbndb/phonon.hpp"

namespace hbndb::io {

/// Phonon table: one mode per line, "index  ħω[meV]  e_1x e_1y e_1z ... e_Nz".
/// '#' starts a comment. Indices must run 1, 2, 3, ... The atom count is taken from the first row
/// unless given.
inline PhononModeSet parse_phonons(std::string_view content, const std::string& source = "phonons",
                                   std::optional<std::size_t> atom_count = std::nullopt,
                                   PhononSource kind = PhononSource::ground) {
    std::vector<double> energies;
    std::vector<std::vector<double>> vectors;
    std::size_t width = atom_count ? 3 * *atom_count : 0;
    for (const auto& l : split_lines(content)) {
        auto toks = tokenize(l.text);
        if (toks.empty()) continue;
        if (toks.size() < 5) throw ParseError(source, l.number, 1, "expected index, energy and eigenvector components");
        if (width == 0) {
            if ((toks.size() - 2) % 3 != 0)
                throw ParseError(source, l.number, toks.back().column,
                                 "eigenvector component count " + std::to_string(toks.size() - 2) +
                                     " is not a multiple of 3");
            width = toks.size() - 2;
        }
        if (toks.size() != width + 2)
            throw ParseError(source, l.number, toks[std::min(toks.size(), width + 2) - 1].column,
                             "expected " + std::to_string(width) + " eigenvector components, got " +
                                 std::to_string(toks.size() - 2));
        long index = parse_int(source, l.number, toks[0]);
        if (index != static_cast<long>(energies.size()) + 1)
            throw ParseError(source, l.number, toks[0].column,
                             "mode index " + std::to_string(index) + " out of sequence (expected " +
                                 std::to_string(energies.size() + 1) + ")");
        double e = parse_double(source, l.number, toks[1]);
        if (e < 0.0) throw ParseError(source, l.number, toks[1].column, "negative (imaginary) phonon frequency");
        std::vector<double> v(width);
        for (std::size_t i = 0; i < width; ++i) v[i] = parse_double(source, l.number, toks[i + 2]);
        energies.push_back(e);
        vectors.push_back(std::move(v));
    }
    if (energies.empty()) throw ParseError(source, 1, 1, "no phonon modes");
    return PhononModeSet(width / 3, std::move(energies), std::move(vectors), kind);
}

inline std::string write_phonons(const PhononModeSet& modes) {
    std::string out = "# index  energy_meV  eigenvector (3N components, atom-major)\n";
    for (std::size_t k = 0; k < modes.mode_count(); ++k) {
        out += std::to_string(k + 1) + " " + db::format_double(modes.energies_mev()[k]);
        for (double c : modes.eigenvector(k)) out += " " + db::format_double(c);
        out += "\n";
    }
    return out;
}

}  // namespace hbndb::io
