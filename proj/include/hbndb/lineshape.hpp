#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hbndb/constants.hpp"
#include "hbndb/errors.hpp"
#include "hbndb/spectrum.hpp"

namespace hbndb {

/// Broadening, ZPL and time discretization for the generating-function lineshape.
struct LineshapeParams {
    double gamma_ev = 1e-3;
    double zpl_ev = 0.0;
    double time_step_fs = 0.2;
    /// Unset means max(2000 fs, ħ ln(1e6) / γ): long enough for the damped tail to fall below 1e-6.
    std::optional<double> time_span_fs;
    /// Unset means "max-to-one".
    std::optional<double> normalization;

    double effective_time_span_fs() const {
        if (time_span_fs) return *time_span_fs;
        return std::max(2000.0, constants::hbar_ev_fs * std::log(1e6) / gamma_ev);
    }

    std::size_t time_samples() const {
        return static_cast<std::size_t>(std::ceil(effective_time_span_fs() / time_step_fs - 1e-9)) + 1;
    }

    void validate() const {
        if (!(gamma_ev > 0.0)) throw Error(ErrorKind::validation, "gamma must be positive", "gamma");
        if (!(zpl_ev > 0.0)) throw Error(ErrorKind::validation, "ZPL energy must be positive", "zpl_energy");
        if (!(time_step_fs > 0.0)) throw Error(ErrorKind::validation, "time step must be positive", "time_step");
        if (!(effective_time_span_fs() >= 100.0 * time_step_fs))
            throw Error(ErrorKind::validation, "time span must cover at least 100 time steps", "time_span");
        if (normalization && !(*normalization > 0.0))
            throw Error(ErrorKind::validation, "normalization constant must be positive", "normalization");
    }
};

namespace detail {

// Trapezoid weights for a possibly non-uniform grid.
inline std::vector<double> trapezoid_weights(std::span<const double> grid) {
    std::vector<double> w(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        double h = 0.5 * (grid[i] - grid[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    return w;
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

struct FftwPlanDestroy {
    void operator()(fftw_plan p) const noexcept {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanDestroy>;

// out_k = Σ_n in_n exp(+2πi kn/M), in place.
inline void inverse_dft_inplace(std::vector<std::complex<double>>& data) {
    const int m = static_cast<int>(data.size());
    FftwBuffer buf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * data.size())));
    if (!buf) throw std::bad_alloc();
    FftwPlan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan.reset(fftw_plan_dft_1d(m, buf.get(), buf.get(), FFTW_BACKWARD, FFTW_ESTIMATE));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        buf[i][0] = data[i].real();
        buf[i][1] = data[i].imag();
    }
    fftw_execute(plan.get());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = {buf[i][0], buf[i][1]};
}

inline void require_kind(const Spectrum& s, SpectrumKind k, const char* field) {
    if (s.kind() != k)
        throw Error(ErrorKind::validation,
                    std::string("expected a ") + std::string(to_string(k)) + " spectrum, got " +
                        std::string(to_string(s.kind())),
                    field);
}

}  // namespace detail

/// S(t) = ∫ S(ħω) exp(−iωt) d(ħω) by trapezoidal quadrature on the density grid,
/// sampled at t_n = n·dt for n < samples.
inline TimeSeries time_spectral_function(const Spectrum& density, double dt_fs, std::size_t samples) {
    detail::require_kind(density, SpectrumKind::spectral_density, "density");
    if (!(dt_fs > 0.0) || samples < 2) throw Error(ErrorKind::validation, "invalid time grid", "time_grid");
    auto grid = density.grid();
    auto vals = density.values();
    double peak = 0.0;
    for (double v : vals) peak = std::max(peak, std::abs(v));
    if (peak > 0.0 && (std::abs(vals.front()) > 1e-6 * peak || std::abs(vals.back()) > 1e-6 * peak))
        throw Error(ErrorKind::coverage, "spectral density is truncated at the grid edges", "density");

    double max_step = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) max_step = std::max(max_step, grid[i] - grid[i - 1]);
    const double span = dt_fs * static_cast<double>(samples - 1);
    const double alias_period = 2.0 * constants::pi * constants::hbar_ev_fs / max_step;
    if (alias_period < 1.5 * span)
        throw Error(ErrorKind::coverage,
                    "density grid spacing too coarse for the time span (quadrature alias at " +
                        std::to_string(alias_period) + " fs)",
                    "density");

    auto w = detail::trapezoid_weights(grid);
    TimeSeries out;
    out.dt_fs = dt_fs;
    out.values.assign(samples, {0.0, 0.0});
    constexpr std::size_t resync = 512;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double amp = w[j] * vals[j];
        if (amp == 0.0 || std::abs(vals[j]) < 1e-14 * peak) continue;
        const double phase_step = -grid[j] * dt_fs / constants::hbar_ev_fs;
        const std::complex<double> step = std::polar(1.0, phase_step);
        std::complex<double> p{1.0, 0.0};
        for (std::size_t n = 0; n < samples; ++n) {
            if (n % resync == 0) p = std::polar(1.0, phase_step * static_cast<double>(n));
            out.values[n] += amp * p;
            p *= step;
        }
    }
    return out;
}

inline TimeSeries time_spectral_function(const Spectrum& density, const LineshapeParams& params) {
    params.validate();
    return time_spectral_function(density, params.time_step_fs, params.time_samples());
}

/// G(t) = exp(S(t) − S(0)).
inline TimeSeries generating_function(const TimeSeries& s_t) {
    if (s_t.values.empty()) throw Error(ErrorKind::validation, "S(t) must be defined at t = 0", "S_t");
    TimeSeries g;
    g.dt_fs = s_t.dt_fs;
    g.values.resize(s_t.size());
    const auto s0 = s_t.values.front();
    for (std::size_t n = 0; n < s_t.size(); ++n) g.values[n] = std::exp(s_t.values[n] - s0);
    g.values.front() = {1.0, 0.0};
    return g;
}

struct EnergyWindow {
    double lo_ev;
    double hi_ev;
};

/// Window spanning all sidebands: [E_ZPL − E_max(S + 5√S + 5), E_ZPL] padded by 200γ on both sides.
inline EnergyWindow default_output_window(const Spectrum& density, const LineshapeParams& params) {
    detail::require_kind(density, SpectrumKind::spectral_density, "density");
    double s = std::max(0.0, density.integral());
    double peak = 0.0;
    for (double v : density.values()) peak = std::max(peak, v);
    double emax = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i)
        if (density.values()[i] > 1e-6 * peak) emax = std::max(emax, density.grid()[i]);
    double depth = emax * (s + 5.0 * std::sqrt(s) + 5.0);
    return {params.zpl_ev - depth - 200.0 * params.gamma_ev, params.zpl_ev + 200.0 * params.gamma_ev};
}

namespace detail {

// Damped, trapezoid-weighted samples f_n = w_n G(t_n) exp(−γ t_n/ħ) dt; sets tail diagnostics.
inline std::vector<std::complex<double>> damped_samples(const TimeSeries& g, const LineshapeParams& params,
                                                        double& tail) {
    params.validate();
    if (g.size() < 2) throw Error(ErrorKind::validation, "G(t) needs at least two samples", "G");
    const double rate = params.gamma_ev / constants::hbar_ev_fs;
    const double t_end = g.time(g.size() - 1);
    tail = std::abs(g.values.back()) * std::exp(-rate * t_end);
    if (tail > 1e-2)
        throw Error(ErrorKind::convergence,
                    "time span " + std::to_string(t_end) + " fs too short for gamma " +
                        std::to_string(params.gamma_ev) + " eV (damped tail " + std::to_string(tail) + ")",
                    "time_span");
    std::vector<std::complex<double>> f(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
        double wt = (n == 0 || n + 1 == g.size()) ? 0.5 : 1.0;
        f[n] = g.values[n] * (wt * g.dt_fs * std::exp(-rate * g.time(n)));
    }
    return f;
}

inline void annotate(Spectrum& a, const LineshapeParams& params, double tail) {
    a.metadata()["gamma_meV"] = std::to_string(params.gamma_ev * 1e3);
    a.metadata()["zpl_eV"] = std::to_string(params.zpl_ev);
    a.metadata()["tail"] = std::to_string(tail);
    a.metadata()["converged"] = tail <= 1e-6 * (1.0 + 1e-9) ? "true" : "false";
}

}  // namespace detail

/// A(E_ZPL − ħω) = (1/2π) ∫ G(t) exp(iωt − γ|t|) dt, per eV, via FFT on the half-line
/// (G(−t) = conj G(t)). Returns the native FFT energy samples that fall inside `window`.
inline Spectrum optical_spectral_function(const TimeSeries& g, const LineshapeParams& params, EnergyWindow window) {
    double tail = 0.0;
    auto f = detail::damped_samples(g, params, tail);
    const double dt = g.dt_fs;
    const double two_pi_hbar = 2.0 * constants::pi * constants::hbar_ev_fs;
    std::size_t m = detail::next_pow2(std::max<std::size_t>(
        2 * f.size(), static_cast<std::size_t>(std::ceil(two_pi_hbar / (dt * params.gamma_ev / 8.0)))));
    m = std::min<std::size_t>(m, std::size_t{1} << 23);
    m = std::max(m, detail::next_pow2(2 * f.size()));
    f.resize(m, {0.0, 0.0});
    detail::inverse_dft_inplace(f);

    const double de = two_pi_hbar / (static_cast<double>(m) * dt);
    const double scale = 1.0 / (constants::pi * constants::hbar_ev_fs);
    std::vector<double> grid, values;
    // E = E_ZPL − x_k; walk x from high to low so E ascends.
    const auto half = static_cast<long long>(m / 2);
    for (long long k = half - 1; k >= -half; --k) {
        double e = params.zpl_ev - de * static_cast<double>(k);
        if (e < window.lo_ev || e > window.hi_ev) continue;
        std::size_t idx = static_cast<std::size_t>(k >= 0 ? k : k + static_cast<long long>(m));
        grid.push_back(e);
        values.push_back(scale * f[idx].real());
    }
    Spectrum a(std::move(grid), std::move(values), SpectrumKind::optical_spectral_function, "1/eV");
    detail::annotate(a, params, tail);
    return a;
}

/// Same transform evaluated on an arbitrary output grid by linear interpolation of the FFT samples.
inline Spectrum optical_spectral_function(const TimeSeries& g, const LineshapeParams& params,
                                          const std::vector<double>& output_grid) {
    if (output_grid.size() < 2) throw Error(ErrorKind::validation, "output grid needs two points", "grid");
    auto native = optical_spectral_function(g, params, EnergyWindow{output_grid.front() - 1e-3, output_grid.back() + 1e-3});
    std::vector<double> values(output_grid.size());
    for (std::size_t i = 0; i < output_grid.size(); ++i) values[i] = native.at(output_grid[i]);
    Spectrum a(output_grid, std::move(values), SpectrumKind::optical_spectral_function, "1/eV");
    a.metadata() = native.metadata();
    return a;
}

/// Direct O(N_t · N_E) quadrature of the same integral. Slow; used to cross-check the FFT path.
inline Spectrum optical_spectral_function_direct(const TimeSeries& g, const LineshapeParams& params,
                                                 const std::vector<double>& output_grid) {
    double tail = 0.0;
    auto f = detail::damped_samples(g, params, tail);
    std::vector<double> values(output_grid.size());
    const double scale = 1.0 / (constants::pi * constants::hbar_ev_fs);
    for (std::size_t i = 0; i < output_grid.size(); ++i) {
        double x = params.zpl_ev - output_grid[i];
        double phase_step = x * g.dt_fs / constants::hbar_ev_fs;
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t n = 0; n < f.size(); ++n) acc += f[n] * std::polar(1.0, phase_step * static_cast<double>(n));
        values[i] = scale * acc.real();
    }
    Spectrum a(output_grid, std::move(values), SpectrumKind::optical_spectral_function, "1/eV");
    detail::annotate(a, params, tail);
    return a;
}

/// L(ħω) = C ω³ A(ħω); C = 1/max for "max-to-one". Non-positive energies map to zero.
inline Spectrum pl_lineshape(const Spectrum& a, const LineshapeParams& params) {
    detail::require_kind(a, SpectrumKind::optical_spectral_function, "A");
    std::vector<double> grid(a.grid().begin(), a.grid().end());
    std::vector<double> values(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double e = grid[i];
        values[i] = e > 0.0 ? e * e * e * a.values()[i] : 0.0;
    }
    double c = params.normalization.value_or(0.0);
    if (!params.normalization) {
        double mx = *std::max_element(values.begin(), values.end());
        c = mx > 0.0 ? 1.0 / mx : 1.0;
    }
    for (double& v : values) v *= c;
    Spectrum l(std::move(grid), std::move(values), SpectrumKind::pl_lineshape, "arb. units");
    l.metadata() = a.metadata();
    l.metadata()["normalization"] = params.normalization ? std::to_string(*params.normalization) : "max-to-one";
    return l;
}

/// Reflects A about E_ZPL: A_abs(E_ZPL + x) = A(E_ZPL − x).
inline Spectrum mirror_about_zpl(const Spectrum& a, double zpl_ev) {
    detail::require_kind(a, SpectrumKind::optical_spectral_function, "A");
    std::vector<double> grid(a.size()), values(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::size_t j = a.size() - 1 - i;
        grid[i] = 2.0 * zpl_ev - a.grid()[j];
        values[i] = a.values()[j];
    }
    Spectrum m(std::move(grid), std::move(values), SpectrumKind::optical_spectral_function, a.units());
    m.metadata() = a.metadata();
    m.metadata()["mirrored"] = "true";
    return m;
}

/// Everything the generating-function pipeline produces for one defect.
struct LineshapeResult {
    TimeSeries spectral_function_t;
    TimeSeries generating_function_t;
    Spectrum optical;
    Spectrum pl;
    Spectrum absorption;
};

namespace detail {

inline Spectrum absorption_from_optical(const Spectrum& a, const LineshapeParams& params) {
    auto mirrored = mirror_about_zpl(a, params.zpl_ev);
    std::vector<double> grid(mirrored.grid().begin(), mirrored.grid().end());
    std::vector<double> values(mirrored.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] = grid[i] > 0.0 ? grid[i] * mirrored.values()[i] : 0.0;
    double c = params.normalization.value_or(0.0);
    if (!params.normalization) {
        double mx = *std::max_element(values.begin(), values.end());
        c = mx > 0.0 ? 1.0 / mx : 1.0;
    }
    for (double& v : values) v *= c;
    Spectrum out(std::move(grid), std::move(values), SpectrumKind::absorption_lineshape, "arb. units");
    out.metadata() = a.metadata();
    out.metadata()["approximation"] = "mirror-image";
    out.metadata()["normalization"] = params.normalization ? std::to_string(*params.normalization) : "max-to-one";
    return out;
}

}  // namespace detail

/// Mirror-image absorption: sidebands reflected above E_ZPL and weighted by ω instead of ω³.
inline Spectrum absorption_lineshape(const Spectrum& density, const LineshapeParams& params) {
    params.validate();
    auto g = generating_function(time_spectral_function(density, params));
    auto a = optical_spectral_function(g, params, default_output_window(density, params));
    return detail::absorption_from_optical(a, params);
}

inline LineshapeResult compute_lineshapes(const Spectrum& density, const LineshapeParams& params) {
    params.validate();
    auto s_t = time_spectral_function(density, params);
    auto g = generating_function(s_t);
    auto a = optical_spectral_function(g, params, default_output_window(density, params));
    auto pl = pl_lineshape(a, params);
    auto abs = detail::absorption_from_optical(a, params);
    return {std::move(s_t), std::move(g), std::move(a), std::move(pl), std::move(abs)};
}

}  // namespace hbndb
