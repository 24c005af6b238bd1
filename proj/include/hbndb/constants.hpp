#pragma once

// Internal unit system: eV, Å, amu, fs. SI values are CODATA 2018.

namespace hbndb::constants {

inline constexpr double pi = 3.141592653589793238462643383279502884;

namespace si {
inline constexpr double elementary_charge = 1.602176634e-19;    // C
inline constexpr double hbar = 1.054571817e-34;                 // J s
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
inline constexpr double speed_of_light = 299792458.0;           // m/s
inline constexpr double electron_mass = 9.1093837015e-31;       // kg
inline constexpr double amu = 1.66053906660e-27;                // kg
inline constexpr double angstrom = 1e-10;                       // m
inline constexpr double bohr = 5.29177210903e-11;               // m
inline constexpr double debye = 1e-21 / speed_of_light;         // C m
}  // namespace si

/// ħ in eV·fs.
inline constexpr double hbar_ev_fs = si::hbar / si::elementary_charge * 1e15;

/// hc in eV·nm, the value used for every ZPL eV <-> nm conversion.
inline constexpr double hc_ev_nm = 1239.841984;

/// s_k = hr_unit * (ħω_k / meV) * (q_k / amu^½Å)^2.
/// Equals (1e-3 e)(amu 1e-20 m²)/(2ħ²) = 0.11961266699 (SI derivation checked in tests).
inline constexpr double hr_unit = 0.11961266699401600;

/// One e·bohr expressed in Debye.
inline constexpr double e_bohr_in_debye = si::elementary_charge * si::bohr / si::debye;

/// Hartree energy in eV.
inline constexpr double hartree_ev = 27.211386245988;

/// Default refractive index of bulk hBN in the visible.
inline constexpr double default_refractive_index = 1.85;

/// Computed HSE band gap of hBN, the default Fermi window.
inline constexpr double hbn_band_gap_ev = 6.09;

}  // namespace hbndb::constants
