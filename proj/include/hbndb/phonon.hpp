#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/constants.hpp"
#include "hbndb/errors.hpp"
#include "hbndb/geometry.hpp"
#include "hbndb/spectrum.hpp"

namespace hbndb {

enum class PhononSource { ground, excited };

inline std::string_view to_string(PhononSource s) { return s == PhononSource::ground ? "ground" : "excited"; }

/// Phonon energies (meV) and unit-norm eigenvectors, 3N components each,
/// laid out atom-major (x0 y0 z0 x1 ...).
class PhononModeSet {
public:
    /// Eigenvectors within 1e-4 of unit norm are renormalized; anything further off is rejected.
    PhononModeSet(std::size_t atom_count, std::vector<double> energies_mev, std::vector<std::vector<double>> eigenvectors,
                  PhononSource source = PhononSource::ground)
        : atom_count_(atom_count), energies_(std::move(energies_mev)), vectors_(std::move(eigenvectors)),
          source_(source) {
        if (atom_count_ == 0) throw Error(ErrorKind::validation, "phonon set needs a positive atom count", "atom_count");
        if (energies_.empty()) throw Error(ErrorKind::validation, "phonon set has no modes", "frequencies");
        if (energies_.size() != vectors_.size())
            throw Error(ErrorKind::validation, "frequency and eigenvector counts differ", "eigenvectors");
        if (energies_.size() > 3 * atom_count_)
            throw Error(ErrorKind::validation, "more modes than 3N degrees of freedom", "frequencies");
        for (std::size_t k = 0; k < energies_.size(); ++k) {
            if (!std::isfinite(energies_[k]) || energies_[k] < 0.0)
                throw Error(ErrorKind::validation,
                            "mode " + std::to_string(k + 1) + " has negative (imaginary) or non-finite frequency",
                            "frequencies");
            auto& v = vectors_[k];
            if (v.size() != 3 * atom_count_)
                throw Error(ErrorKind::validation,
                            "mode " + std::to_string(k + 1) + " eigenvector has " + std::to_string(v.size()) +
                                " components, expected " + std::to_string(3 * atom_count_),
                            "eigenvectors");
            double n2 = 0.0;
            for (double c : v) n2 += c * c;
            double n = std::sqrt(n2);
            if (std::abs(n - 1.0) > 1e-4)
                throw Error(ErrorKind::validation, "mode " + std::to_string(k + 1) + " eigenvector is not normalized",
                            "eigenvectors");
            for (double& c : v) c /= n;
        }
    }

    std::size_t atom_count() const noexcept { return atom_count_; }
    std::size_t mode_count() const noexcept { return energies_.size(); }
    const std::vector<double>& energies_mev() const noexcept { return energies_; }
    std::span<const double> eigenvector(std::size_t k) const { return vectors_[k]; }
    PhononSource source() const noexcept { return source_; }

private:
    std::size_t atom_count_;
    std::vector<double> energies_;
    std::vector<std::vector<double>> vectors_;
    PhononSource source_;
};

struct ConfigurationCoordinates {
    std::vector<double> q;  // per mode, amu^½·Å
    double total_q = 0.0;   // direct mass-weighted norm
};

struct HrDecomposition {
    std::vector<double> partial_hr;  // s_k
    std::vector<double> q;           // q_k, amu^½·Å
    std::vector<bool> included;      // false for modes under the frequency floor
    double total_hr = 0.0;           // S
    double total_q = 0.0;            // Q from the mass-weighted displacement
    double q_mode_sum = 0.0;         // sqrt(Σ q_k²)
    double dw_factor = 1.0;
    PhononSource phonon_source = PhononSource::ground;
};

/// Mass-weighted displacements (Å·amu^½), per atom, after minimum-image wrapping in the pair's cell.
inline std::vector<Vec3> mass_weighted_displacements(const GeometryPair& geom) {
    const Lattice& lat = geom.lattice();
    Lattice inv = inverse(lat);
    double shortest = std::min({norm(lat[0]), norm(lat[1]), norm(lat[2])});
    std::vector<Vec3> out(geom.atom_count());
    for (std::size_t a = 0; a < geom.atom_count(); ++a) {
        Vec3 d{};
        for (int i = 0; i < 3; ++i) d[i] = geom.excited()[a][i] - geom.ground()[a][i];
        Vec3 f = mul(d, inv);
        for (double& c : f) c -= std::round(c);
        d = mul(f, lat);
        for (int i = 0; i < 3; ++i)
            if (std::abs(d[i]) > 0.5 * shortest)
                throw Error(ErrorKind::ambiguous_mapping,
                            "atom " + std::to_string(a + 1) + " displacement exceeds half the shortest lattice vector",
                            "positions");
        double w = std::sqrt(geom.masses()[a]);
        for (double& c : d) c *= w;
        out[a] = d;
    }
    return out;
}

/// q_k = Σ_{α,i} √m_α (R_e − R_g)_{αi} Δr_{k,αi}; Q = sqrt(Σ m_α |R_e − R_g|²).
inline ConfigurationCoordinates configuration_coordinates(const GeometryPair& geom, const PhononModeSet& modes) {
    if (modes.atom_count() != geom.atom_count())
        throw Error(ErrorKind::structural,
                    "phonon set is for " + std::to_string(modes.atom_count()) + " atoms, geometry has " +
                        std::to_string(geom.atom_count()),
                    "eigenvectors");
    auto disp = mass_weighted_displacements(geom);
    ConfigurationCoordinates cc;
    double q2 = 0.0;
    for (const auto& d : disp) q2 += dot(d, d);
    cc.total_q = std::sqrt(q2);
    cc.q.resize(modes.mode_count());
    for (std::size_t k = 0; k < modes.mode_count(); ++k) {
        auto ev = modes.eigenvector(k);
        double s = 0.0;
        for (std::size_t a = 0; a < disp.size(); ++a)
            for (int i = 0; i < 3; ++i) s += disp[a][i] * ev[3 * a + i];
        cc.q[k] = s;
    }
    return cc;
}

/// s_k = ω_k q_k² / 2ħ with ħω in meV and q in amu^½·Å.
inline double partial_hr(double hbar_omega_mev, double q) {
    if (!(hbar_omega_mev >= 0.0))
        throw Error(ErrorKind::validation, "phonon energy must be non-negative", "hbar_omega_k");
    return constants::hr_unit * hbar_omega_mev * q * q;
}

inline double dw_factor(double total_hr) {
    if (!(total_hr >= 0.0)) throw Error(ErrorKind::validation, "HR factor must be non-negative", "S");
    return std::exp(-total_hr);
}

inline constexpr double default_mode_floor_mev = 0.5;
inline constexpr double default_smearing_mev = 6.0;

inline HrDecomposition hr_decomposition(const GeometryPair& geom, const PhononModeSet& modes,
                                        double mode_floor_mev = default_mode_floor_mev) {
    auto cc = configuration_coordinates(geom, modes);
    HrDecomposition d;
    d.q = cc.q;
    d.total_q = cc.total_q;
    d.phonon_source = modes.source();
    d.partial_hr.assign(modes.mode_count(), 0.0);
    d.included.assign(modes.mode_count(), false);
    double qsum = 0.0;
    for (std::size_t k = 0; k < modes.mode_count(); ++k) {
        qsum += cc.q[k] * cc.q[k];
        double e = modes.energies_mev()[k];
        if (e < mode_floor_mev) continue;
        d.included[k] = true;
        d.partial_hr[k] = partial_hr(e, cc.q[k]);
        d.total_hr += d.partial_hr[k];
    }
    d.q_mode_sum = std::sqrt(qsum);
    d.dw_factor = dw_factor(d.total_hr);
    return d;
}

/// Grid for a spectral density: spacing min(σ/8, 0.1 meV), from min(0, ω_min − 6σ) to ω_max + 6σ (eV).
inline std::vector<double> default_density_grid(std::span<const double> energies_mev, double sigma_mev) {
    if (!(sigma_mev > 0.0)) throw Error(ErrorKind::validation, "smearing sigma must be positive", "smearing_sigma");
    double lo = 0.0, hi = 0.0;
    if (!energies_mev.empty()) {
        lo = std::min(0.0, *std::min_element(energies_mev.begin(), energies_mev.end()) - 6.0 * sigma_mev);
        hi = *std::max_element(energies_mev.begin(), energies_mev.end()) + 6.0 * sigma_mev;
    }
    hi = std::max(hi, 6.0 * sigma_mev);
    // 0.1 meV keeps the S(t) quadrature alias beyond 40 ps.
    double h = std::min(sigma_mev / 8.0, 0.1);
    auto n = static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1;
    return linspace(lo * 1e-3, (lo + h * static_cast<double>(n - 1)) * 1e-3, n);
}

/// S(ħω) = Σ_k s_k g_σ(ħω − ħω_k) with unit-area Gaussians; values in 1/eV on an eV grid.
inline Spectrum spectral_density(std::span<const double> energies_mev, std::span<const double> weights,
                                 double sigma_mev, std::vector<double> grid_ev) {
    if (energies_mev.size() != weights.size())
        throw Error(ErrorKind::validation, "mode energies and weights differ in length", "partial_hr");
    if (!(sigma_mev > 0.0)) throw Error(ErrorKind::validation, "smearing sigma must be positive", "smearing_sigma");
    if (grid_ev.size() < 2) throw Error(ErrorKind::validation, "density grid needs at least two points", "grid");
    const double sigma = sigma_mev * 1e-3;
    double max_step = 0.0;
    for (std::size_t i = 1; i < grid_ev.size(); ++i) max_step = std::max(max_step, grid_ev[i] - grid_ev[i - 1]);
    if (max_step > 0.5 * sigma)
        throw Error(ErrorKind::coverage, "density grid spacing is coarser than half the smearing width", "grid");

    const double lo = grid_ev.front(), hi = grid_ev.back();
    double total = 0.0, inside = 0.0, emax = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] < 0.0) throw Error(ErrorKind::validation, "partial HR factors must be non-negative", "partial_hr");
        double w = energies_mev[k] * 1e-3;
        if (weights[k] > 0.0) emax = std::max(emax, w);
        total += weights[k];
        inside += weights[k] * 0.5 *
                  (std::erf((hi - w) / (sigma * std::sqrt(2.0))) - std::erf((lo - w) / (sigma * std::sqrt(2.0))));
    }
    if (hi < emax + 5.0 * sigma * (1.0 - 1e-9) || (total > 0.0 && (total - inside) > 1e-3 * total))
        throw Error(ErrorKind::coverage, "density grid truncates more than 0.1% of the spectral weight", "grid");

    std::vector<double> values(grid_ev.size(), 0.0);
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * constants::pi));
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] == 0.0) continue;
        double w = energies_mev[k] * 1e-3;
        for (std::size_t i = 0; i < grid_ev.size(); ++i) {
            double x = (grid_ev[i] - w) / sigma;
            if (std::abs(x) > 12.0) continue;
            values[i] += weights[k] * norm * std::exp(-0.5 * x * x);
        }
    }
    Spectrum s(std::move(grid_ev), std::move(values), SpectrumKind::spectral_density, "1/eV");
    s.metadata()["smearing_sigma_meV"] = std::to_string(sigma_mev);
    s.metadata()["total_hr"] = std::to_string(total);
    return s;
}

inline Spectrum spectral_density(const HrDecomposition& decomp, const PhononModeSet& modes,
                                 double sigma_mev, std::vector<double> grid_ev) {
    if (decomp.partial_hr.size() != modes.mode_count())
        throw Error(ErrorKind::validation, "decomposition and phonon set disagree on mode count", "partial_hr");
    auto s = spectral_density(modes.energies_mev(), decomp.partial_hr, sigma_mev, std::move(grid_ev));
    s.metadata()["phonon_source"] = std::string(to_string(decomp.phonon_source));
    return s;
}

inline Spectrum spectral_density(const HrDecomposition& decomp, const PhononModeSet& modes,
                                 double sigma_mev = default_smearing_mev) {
    std::vector<double> used;
    for (std::size_t k = 0; k < modes.mode_count(); ++k)
        if (decomp.included[k]) used.push_back(modes.energies_mev()[k]);
    return spectral_density(decomp, modes, sigma_mev, default_density_grid(used, sigma_mev));
}

}  // namespace hbndb
