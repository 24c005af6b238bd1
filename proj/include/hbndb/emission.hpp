#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "hbndb/constants.hpp"
#include "hbndb/errors.hpp"

namespace hbndb {

enum class TransitionKind { excitation, emission };

inline std::string_view to_string(TransitionKind k) { return k == TransitionKind::excitation ? "excitation" : "emission"; }

/// ⟨ψ_f|p|ψ_i⟩ in atomic units of momentum (ħ/a0), with Kohn–Sham eigenvalues in eV.
struct MomentumMatrixElement {
    std::string defect_id;
    TransitionKind kind = TransitionKind::emission;
    std::array<std::complex<double>, 3> p{};
    double e_initial_ev = 0.0;
    double e_final_ev = 0.0;
};

/// Transition dipole in Debye. `abs_components` are the stored |μ_i|; `signed_components`
/// is the real direction (global phase removed) kept for the polarization angle.
struct DipoleMoment {
    std::array<double, 3> abs_components{};
    std::array<double, 3> signed_components{};
    double magnitude = 0.0;
    TransitionKind kind = TransitionKind::emission;

    double magnitude_sq() const noexcept { return magnitude * magnitude; }

    /// Builds a dipole from a real (signed) Debye vector.
    static DipoleMoment from_vector(double x, double y, double z, TransitionKind kind = TransitionKind::emission) {
        DipoleMoment d;
        d.signed_components = {x, y, z};
        d.abs_components = {std::abs(x), std::abs(y), std::abs(z)};
        d.magnitude = std::sqrt(x * x + y * y + z * z);
        d.kind = kind;
        return d;
    }
};

inline constexpr double degenerate_transition_threshold_ev = 1e-6;

/// μ = iħ p_fi / ((E_f − E_i) m). In atomic units this is i·p/ΔE (e·bohr), then converted to Debye.
inline DipoleMoment transition_dipole(const MomentumMatrixElement& elem) {
    const double de_ev = elem.e_final_ev - elem.e_initial_ev;
    if (!std::isfinite(de_ev) || std::abs(de_ev) < degenerate_transition_threshold_ev)
        throw Error(ErrorKind::degenerate_transition,
                    "|E_f - E_i| = " + std::to_string(std::abs(de_ev)) + " eV is below 1e-6 eV", "E_f");
    for (const auto& c : elem.p)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw Error(ErrorKind::validation, "momentum matrix element is not finite", "p_fi");
    const double de_ha = de_ev / constants::hartree_ev;
    const std::complex<double> i{0.0, 1.0};
    std::array<std::complex<double>, 3> mu{};
    for (int k = 0; k < 3; ++k) mu[k] = i * elem.p[k] / de_ha * constants::e_bohr_in_debye;

    DipoleMoment d;
    d.kind = elem.kind;
    double m2 = 0.0;
    std::complex<double> sq{0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
        d.abs_components[k] = std::abs(mu[k]);
        m2 += std::norm(mu[k]);
        sq += mu[k] * mu[k];
    }
    d.magnitude = std::sqrt(m2);
    // Rotate out the global phase that makes the vector as real as possible.
    const double phase = 0.5 * std::arg(sq);
    const auto rot = std::polar(1.0, -phase);
    for (int k = 0; k < 3; ++k) d.signed_components[k] = (rot * mu[k]).real();
    return d;
}

/// Wraps degrees into [0, 60).
inline double wrap_mod60(double deg) {
    double r = std::fmod(deg, 60.0);
    if (r < 0.0) r += 60.0;
    if (r >= 60.0) r -= 60.0;
    return r;
}

/// (atan2(μ_y, μ_x) + 90°) mod 60°, on the signed in-plane components.
inline double polarization_angle(double mu_x, double mu_y) {
    if (mu_x == 0.0 && mu_y == 0.0)
        throw Error(ErrorKind::undefined_angle, "dipole has no in-plane component", "mu");
    return wrap_mod60(std::atan2(mu_y, mu_x) * 180.0 / constants::pi + 90.0);
}

inline double polarization_angle(const DipoleMoment& mu) {
    double ip = std::hypot(mu.signed_components[0], mu.signed_components[1]);
    if (ip == 0.0 || ip <= 1e-12 * mu.magnitude)
        throw Error(ErrorKind::undefined_angle, "dipole has no in-plane component", "mu");
    return polarization_angle(mu.signed_components[0], mu.signed_components[1]);
}

/// In-plane power fraction (μ_x² + μ_y²)/|μ|².
inline double inplane_visibility(const DipoleMoment& mu) {
    if (!(mu.magnitude > 0.0)) throw Error(ErrorKind::undefined_visibility, "zero dipole has no visibility", "mu");
    const auto& a = mu.abs_components;
    return (a[0] * a[0] + a[1] * a[1]) / (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

inline double out_of_plane_fraction(const DipoleMoment& mu) {
    if (!(mu.magnitude > 0.0)) throw Error(ErrorKind::undefined_visibility, "zero dipole has no visibility", "mu");
    const auto& a = mu.abs_components;
    return a[2] * a[2] / (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

struct PolarizationSummary {
    std::optional<double> angle_deg;
    std::optional<double> visibility;
    std::string reason;  // why a field is missing
};

inline PolarizationSummary summarize_polarization(const DipoleMoment& mu) {
    PolarizationSummary s;
    try {
        s.visibility = inplane_visibility(mu);
        s.angle_deg = polarization_angle(mu);
    } catch (const Error& e) {
        s.reason = std::string(to_string(e.kind()));
    }
    return s;
}

struct Misalignment {
    std::optional<double> degrees;
    std::string reason;
};

/// Minimal distance between two mod-60 angles, in [0, 30].
inline Misalignment misalignment(const PolarizationSummary& excitation, const PolarizationSummary& emission) {
    if (!excitation.angle_deg)
        return {std::nullopt, "excitation_angle_undefined" + (excitation.reason.empty() ? "" : ":" + excitation.reason)};
    if (!emission.angle_deg)
        return {std::nullopt, "emission_angle_undefined" + (emission.reason.empty() ? "" : ":" + emission.reason)};
    double d = wrap_mod60(*excitation.angle_deg - *emission.angle_deg);
    return {std::min(d, 60.0 - d), {}};
}

/// True when a stored misalignment cannot be the mod-60 distance of the computed angles
/// (e.g. published values above 30° that reflect out-of-plane character).
inline bool misalignment_discrepancy(double stored_deg, std::optional<double> computed_deg, double tol_deg = 0.5) {
    if (stored_deg > 30.0 + tol_deg) return true;
    return computed_deg && std::abs(stored_deg - *computed_deg) > tol_deg;
}

struct RadiativeResult {
    double rate_per_s = 0.0;
    double lifetime_ns = std::numeric_limits<double>::infinity();
    double refractive_index = constants::default_refractive_index;
    double zpl_ev = 0.0;
    double dipole_sq_debye2 = 0.0;

    /// μ = 0: the transition is dark and τ is infinite.
    bool infinite_lifetime() const noexcept { return rate_per_s == 0.0; }
};

/// Γ_R = n_D E0³ μ² / (3π ε0 ħ⁴ c³) with μ in C·m (the e² of the textbook form is folded into
/// μ as a charge × length); τ_R = 1/Γ_R.
inline RadiativeResult radiative_rate(double zpl_ev, double dipole_sq_debye2,
                                     double refractive_index = constants::default_refractive_index) {
    using namespace constants::si;
    if (!(zpl_ev > 0.0)) throw Error(ErrorKind::validation, "E0 must be positive", "E_0");
    if (!(dipole_sq_debye2 >= 0.0)) throw Error(ErrorKind::validation, "mu^2 must be non-negative", "mu_sq");
    if (!(refractive_index >= 1.0)) throw Error(ErrorKind::validation, "refractive index must be >= 1", "n_D");
    RadiativeResult r;
    r.refractive_index = refractive_index;
    r.zpl_ev = zpl_ev;
    r.dipole_sq_debye2 = dipole_sq_debye2;
    const double e_j = zpl_ev * elementary_charge;
    const double mu2 = dipole_sq_debye2 * debye * debye;
    r.rate_per_s = refractive_index * e_j * e_j * e_j * mu2 /
                   (3.0 * constants::pi * vacuum_permittivity * hbar * hbar * hbar * hbar * speed_of_light *
                    speed_of_light * speed_of_light);
    r.lifetime_ns = r.rate_per_s > 0.0 ? 1e9 / r.rate_per_s : std::numeric_limits<double>::infinity();
    return r;
}

/// τ' = τ·n_D/n_D'. Backs the interactive refractive-index feature.
inline RadiativeResult rescale_lifetime(const RadiativeResult& base, double new_refractive_index) {
    if (!(new_refractive_index >= 1.0)) throw Error(ErrorKind::validation, "refractive index must be >= 1", "n_D_new");
    RadiativeResult r = base;
    if (new_refractive_index == base.refractive_index) return r;
    r.refractive_index = new_refractive_index;
    if (base.infinite_lifetime()) return r;
    r.lifetime_ns = base.lifetime_ns * (base.refractive_index / new_refractive_index);
    r.rate_per_s = 1e9 / r.lifetime_ns;
    return r;
}

}  // namespace hbndb
