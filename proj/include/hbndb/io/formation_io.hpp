#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hbndb/constants.hpp"
#include "hbndb/io/keyed_text.hpp"
#include "hbndb/thermo.hpp"

namespace hbndb::io {

struct FormationFile {
    std::vector<FormationInputs> states;
    double fermi_lo = 0.0;
    double fermi_hi = constants::hbn_band_gap_ev;
};

/// Total energies and chemical potentials for one defect:
///
///   host_energy = -2880.0
///   eps_vbm = 0.0
///   band_gap = 6.09        # optional, upper end of the Fermi window
///   mu_O = -4.0            # one mu_<species> per species in the stoichiometry
///   n_O = 1                # atoms added (+) or removed (-)
///   n_N = -1
///   [charge 0]
///   energy = -2875.3
///   [charge +1]
///   energy = -2878.1
///   correction = 0.12
///
/// n_<species> keys inside a charge section override the top-level ones.
inline FormationFile parse_formation(std::string_view content, const std::string& source) {
    auto kt = KeyedText::parse(content, source);
    const auto& root = kt.root();
    FormationFile f;
    std::map<std::string, double> mu;
    std::map<std::string, int> base_n;
    double host = kt.require_number(root, "host_energy");
    double vbm = kt.number(root, "eps_vbm").value_or(0.0);
    f.fermi_lo = kt.number(root, "fermi_min").value_or(0.0);
    f.fermi_hi = kt.number(root, "band_gap").value_or(constants::hbn_band_gap_ev);
    auto collect_n = [&](const KeyedText::Section& s, std::map<std::string, int>& n) {
        for (const auto& [key, entry] : s.entries)
            if (key.rfind("n_", 0) == 0) n[key.substr(2)] = static_cast<int>(*kt.integer(s, key));
    };
    for (const auto& [key, entry] : root.entries)
        if (key.rfind("mu_", 0) == 0) mu[key.substr(3)] = *kt.number(root, key);
    collect_n(root, base_n);

    for (const auto* sec : kt.sections()) {
        auto toks = tokenize(sec->name);
        if (toks.size() != 2 || toks[0].text != "charge")
            throw ParseError(source, sec->line, 2, "expected section [charge <q>], got [" + sec->name + "]");
        FormationInputs in;
        in.charge = static_cast<int>(parse_int(source, sec->line, Token{toks[1].text, toks[1].column + 1}));
        in.defect_energy = kt.require_number(*sec, "energy");
        in.correction = kt.number(*sec, "correction").value_or(0.0);
        in.host_energy = host;
        in.eps_vbm = vbm;
        in.chemical_potentials = mu;
        in.stoichiometry = base_n;
        collect_n(*sec, in.stoichiometry);
        try {
            in.validate();
        } catch (const Error& e) {
            throw ParseError(source, sec->line, 1, e.what());
        }
        f.states.push_back(std::move(in));
    }
    if (f.states.empty()) throw ParseError(source, 1, 1, "no [charge q] sections");
    return f;
}

inline nlohmann::json to_json(const ChargeStateProfile& p) {
    nlohmann::json j;
    j["fermi_window"] = {p.fermi_lo, p.fermi_hi};
    j["formation_lines"] = nlohmann::json::array();
    for (const auto& l : p.lines) j["formation_lines"].push_back({{"charge", l.charge}, {"intercept", l.intercept}, {"slope", l.charge}});
    j["stable_segments"] = nlohmann::json::array();
    for (const auto& s : p.segments) j["stable_segments"].push_back({{"lo", s.lo}, {"hi", s.hi}, {"charge", s.charge}});
    j["transition_levels"] = p.transition_levels;
    return j;
}

}  // namespace hbndb::io
