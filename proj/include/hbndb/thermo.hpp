#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/constants.hpp"
#include "hbndb/errors.hpp"

namespace hbndb {

/// Inputs to the formation energy of one defect in one charge state (all energies eV).
struct FormationInputs {
    int charge = 0;
    double defect_energy = 0.0;
    double host_energy = 0.0;
    std::map<std::string, int> stoichiometry;             // atoms added (+) / removed (−)
    std::map<std::string, double> chemical_potentials;    // μ_i
    double eps_vbm = 0.0;
    double correction = 0.0;                              // E_corr(q), supplied externally

    void validate() const {
        if (charge < -2 || charge > 2)
            throw Error(ErrorKind::validation, "charge state " + std::to_string(charge) + " outside [-2, 2]", "charge");
        if (charge == 0 && correction != 0.0)
            throw Error(ErrorKind::validation, "E_corr must vanish for the neutral state", "E_corr");
    }

    /// a_q = E_tot[X^q] − E_tot[host] − Σ n_i μ_i + q ε_vbm + E_corr(q).
    double intercept() const {
        validate();
        double sum = 0.0;
        for (const auto& [species, n] : stoichiometry) {
            auto it = chemical_potentials.find(species);
            if (it == chemical_potentials.end())
                throw Error(ErrorKind::input, "missing chemical potential for species '" + species + "'",
                            "chem_potentials");
            sum += static_cast<double>(n) * it->second;
        }
        return defect_energy - host_energy - sum + charge * eps_vbm + correction;
    }
};

/// E^f[X^q](ε_F) = E_tot[X^q] − E_tot[host] − Σ n_i μ_i + q(ε_vbm + ε_F) + E_corr(q).
inline double formation_energy(const FormationInputs& in, double eps_fermi,
                               double band_gap = constants::hbn_band_gap_ev) {
    if (eps_fermi < 0.0 || eps_fermi > band_gap)
        throw Error(ErrorKind::validation, "Fermi level outside [0, band gap]", "eps_fermi");
    return in.intercept() + in.charge * eps_fermi;
}

struct FormationLine {
    int charge;
    double intercept;
    double value(double eps_fermi) const { return intercept + charge * eps_fermi; }
};

struct StableSegment {
    double lo;
    double hi;
    int charge;
};

/// Lower envelope of the formation lines over the Fermi window.
struct ChargeStateProfile {
    std::vector<FormationLine> lines;
    double fermi_lo = 0.0;
    double fermi_hi = constants::hbn_band_gap_ev;
    std::vector<StableSegment> segments;
    std::vector<double> transition_levels;

    /// Most stable charge at ε_F. At an exact crossing the smaller |q| wins, then the more negative q.
    int stable_charge(double eps_fermi) const {
        const FormationLine* best = nullptr;
        for (const auto& l : lines) {
            if (!best) {
                best = &l;
                continue;
            }
            double a = l.value(eps_fermi), b = best->value(eps_fermi);
            if (a < b || (a == b && prefer(l.charge, best->charge))) best = &l;
        }
        return best->charge;
    }

    double min_formation_energy(double eps_fermi) const {
        double m = lines.front().value(eps_fermi);
        for (const auto& l : lines) m = std::min(m, l.value(eps_fermi));
        return m;
    }

    static bool prefer(int a, int b) {
        if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
        return a < b;
    }
};

/// Walks the envelope left to right using exact line intersections.
inline ChargeStateProfile stable_charge_state(const std::vector<FormationInputs>& states, double fermi_lo = 0.0,
                                              double fermi_hi = constants::hbn_band_gap_ev) {
    if (states.empty()) throw Error(ErrorKind::input, "no charge states supplied", "profiles");
    if (!(fermi_hi > fermi_lo)) throw Error(ErrorKind::validation, "empty Fermi window", "fermi_window");
    ChargeStateProfile p;
    p.fermi_lo = fermi_lo;
    p.fermi_hi = fermi_hi;
    for (const auto& s : states) {
        for (const auto& l : p.lines)
            if (l.charge == s.charge)
                throw Error(ErrorKind::input, "charge state " + std::to_string(s.charge) + " supplied twice",
                            "profiles");
        p.lines.push_back({s.charge, s.intercept()});
    }
    std::sort(p.lines.begin(), p.lines.end(), [](const auto& a, const auto& b) { return a.charge > b.charge; });

    // Line on the envelope just right of x: minimal value, then minimal slope.
    auto pick_at = [&](double x) {
        const FormationLine* best = nullptr;
        for (const auto& l : p.lines) {
            if (!best) {
                best = &l;
                continue;
            }
            double a = l.value(x), b = best->value(x);
            double tol = 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
            if (a < b - tol || (std::abs(a - b) <= tol && l.charge < best->charge)) best = &l;
        }
        return best;
    };

    double x = fermi_lo;
    const FormationLine* cur = pick_at(x);
    while (true) {
        double next_x = fermi_hi;
        const FormationLine* next = nullptr;
        for (const auto& l : p.lines) {
            if (l.charge >= cur->charge) continue;
            double xc = (l.intercept - cur->intercept) / static_cast<double>(cur->charge - l.charge);
            if (xc <= x + 1e-12) continue;
            bool tie = next && std::abs(xc - next_x) <= 1e-12;
            if ((xc < next_x && !tie) || (tie && l.charge < next->charge)) {
                next_x = xc;
                next = &l;
            }
        }
        if (!next || next_x >= fermi_hi) {
            p.segments.push_back({x, fermi_hi, cur->charge});
            break;
        }
        p.segments.push_back({x, next_x, cur->charge});
        p.transition_levels.push_back(next_x);
        x = next_x;
        cur = next;
    }
    return p;
}

enum class SpinMultiplicity { singlet = 1, doublet = 2, triplet = 3 };

inline std::string_view to_string(SpinMultiplicity m) {
    switch (m) {
        case SpinMultiplicity::singlet: return "singlet";
        case SpinMultiplicity::doublet: return "doublet";
        case SpinMultiplicity::triplet: return "triplet";
    }
    return "unknown";
}

inline std::optional<SpinMultiplicity> parse_multiplicity(std::string_view s) {
    if (s == "singlet") return SpinMultiplicity::singlet;
    if (s == "doublet") return SpinMultiplicity::doublet;
    if (s == "triplet") return SpinMultiplicity::triplet;
    return std::nullopt;
}

struct SpinCandidateSet {
    std::map<SpinMultiplicity, double> total_energies;
    std::optional<int> electron_count;
};

struct SpinSelection {
    SpinMultiplicity multiplicity;
    double energy;
    bool near_degenerate;
};

inline constexpr double spin_degeneracy_threshold_ev = 1e-3;

/// Lowest-energy multiplicity; exact ties go to the lower multiplicity and any rival within
/// 1 meV sets `near_degenerate`.
inline SpinSelection spin_ground_state(const SpinCandidateSet& cands) {
    if (cands.total_energies.empty()) throw Error(ErrorKind::input, "no spin candidates", "spin");
    if (cands.electron_count) {
        bool odd = (*cands.electron_count % 2) != 0;
        for (const auto& [m, e] : cands.total_energies) {
            bool doublet = m == SpinMultiplicity::doublet;
            if (doublet != odd)
                throw Error(ErrorKind::validation,
                            std::string(to_string(m)) + " is inconsistent with " +
                                (odd ? "an odd" : "an even") + " electron count",
                            "spin");
        }
    }
    auto best = cands.total_energies.begin();
    for (auto it = cands.total_energies.begin(); it != cands.total_energies.end(); ++it)
        if (it->second < best->second) best = it;  // map order makes ties keep the lower multiplicity
    SpinSelection sel{best->first, best->second, false};
    for (const auto& [m, e] : cands.total_energies)
        if (m != best->first && std::abs(e - best->second) < spin_degeneracy_threshold_ev) sel.near_degenerate = true;
    return sel;
}

struct Zpl {
    double ev;
    double nm;
};

inline double ev_to_nm(double ev) { return constants::hc_ev_nm / ev; }
inline double nm_to_ev(double nm) { return constants::hc_ev_nm / nm; }

/// ZPL = E_total,excited − E_total,ground.
inline Zpl zpl(double excited_total_ev, double ground_total_ev) {
    double d = excited_total_ev - ground_total_ev;
    if (!(d > 0.0))
        throw Error(ErrorKind::inverted_state,
                    "excited-state total energy is not above the ground state (difference " + std::to_string(d) +
                        " eV)",
                    "E_excited");
    return {d, ev_to_nm(d)};
}

}  // namespace hbndb
