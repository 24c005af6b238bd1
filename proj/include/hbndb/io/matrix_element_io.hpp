#pragma once

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/db/query.hpp"
#include "hbndb/emission.hpp"
#include "hbndb/io/keyed_text.hpp"

namespace hbndb::io {

/// Momentum matrix elements as keyed text, one section per transition:
///
///   [emission]
///   defect = O_N V_B
///   px = 0.012 -0.004      # real imaginary, atomic units
///   py = 0.0 0.0
///   pz = 0.0 0.0
///   E_i = 3.10             # eV
///   E_f = 1.02
///
/// Section names must be "excitation" or "emission". `defect` falls back to `default_defect`.
inline std::vector<MomentumMatrixElement> parse_matrix_elements(std::string_view content, const std::string& source,
                                                                const std::string& default_defect = "") {
    auto kt = KeyedText::parse(content, source);
    if (!kt.root().entries.empty()) {
        const auto& first = kt.root().entries.begin()->second;
        throw ParseError(source, first.line, 1, "keys must appear inside an [excitation] or [emission] section");
    }
    std::vector<MomentumMatrixElement> out;
    for (const auto* sec : kt.sections()) {
        MomentumMatrixElement m;
        if (sec->name == "excitation") m.kind = TransitionKind::excitation;
        else if (sec->name == "emission") m.kind = TransitionKind::emission;
        else throw ParseError(source, sec->line, 2, "unknown section '" + sec->name + "'");
        m.defect_id = kt.text(*sec, "defect").value_or(default_defect);
        const char* axes[3] = {"px", "py", "pz"};
        for (std::size_t a = 0; a < 3; ++a) {
            auto v = kt.numbers(*sec, axes[a]);
            if (v.size() != 2) kt.fail(*sec, axes[a], std::string(axes[a]) + " needs a real and an imaginary part");
            m.p[a] = {v[0], v[1]};
        }
        m.e_initial_ev = kt.require_number(*sec, "E_i");
        m.e_final_ev = kt.require_number(*sec, "E_f");
        for (const auto& [key, entry] : sec->entries)
            if (key != "defect" && key != "px" && key != "py" && key != "pz" && key != "E_i" && key != "E_f")
                throw ParseError(source, entry.line, 1, "unknown key '" + key + "'");
        out.push_back(std::move(m));
    }
    return out;
}

inline std::string write_matrix_elements(const std::vector<MomentumMatrixElement>& elems) {
    std::string out;
    const char* axes[3] = {"px", "py", "pz"};
    for (const auto& m : elems) {
        if (!out.empty()) out += "\n";
        out += "[" + std::string(to_string(m.kind)) + "]\n";
        if (!m.defect_id.empty()) out += "defect = " + m.defect_id + "\n";
        for (std::size_t a = 0; a < 3; ++a)
            out += std::string(axes[a]) + " = " + db::format_double(m.p[a].real()) + " " +
                   db::format_double(m.p[a].imag()) + "\n";
        out += "E_i = " + db::format_double(m.e_initial_ev) + "\nE_f = " + db::format_double(m.e_final_ev) + "\n";
    }
    return out;
}

}  // namespace hbndb::io
