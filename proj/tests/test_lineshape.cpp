#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hbndb/lineshape.hpp"
#include "hbndb/phonon.hpp"
#include "measure.hpp"

using namespace hbndb;

namespace {

Spectrum single_mode(double s, double mode_mev = 100.0, double sigma_mev = 6.0) {
    std::vector<double> e{mode_mev}, w{s};
    return spectral_density(e, w, sigma_mev, default_density_grid(e, sigma_mev));
}

LineshapeParams params(double zpl = 2.0, double gamma = 1e-3) {
    LineshapeParams p;
    p.zpl_ev = zpl;
    p.gamma_ev = gamma;
    return p;
}

}  // namespace

TEST(TimeSpectralFunction, ClosedFormForGaussianDensity) {
    // S(t) of one Gaussian line: s·exp(−iω0 t − σ²t²/2ħ²).
    const double s = 1.3, w0 = 0.1, sigma = 0.006;
    auto density = single_mode(s, 100.0, 6.0);
    auto st = time_spectral_function(density, 0.5, 400);
    const double hbar = 0.6582119569;
    for (std::size_t n = 0; n < st.size(); n += 37) {
        double t = st.time(n);
        auto ref = s * std::exp(std::complex<double>(-0.5 * sigma * sigma * t * t / (hbar * hbar), -w0 * t / hbar));
        EXPECT_NEAR(std::abs(st.values[n] - ref), 0.0, 2e-5) << "t = " << t;
    }
}

TEST(TimeSpectralFunction, CoverageChecks) {
    std::vector<double> grid = linspace(0.0, 0.1, 2001), vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = std::exp(-std::pow((grid[i] - 0.1) / 0.006, 2));
    Spectrum truncated(grid, vals, SpectrumKind::spectral_density, "1/eV");
    EXPECT_THROW(time_spectral_function(truncated, 0.2, 100), Error);
    // Coarse grid relative to the requested span aliases.
    auto coarse_grid = linspace(0.0, 0.2, 201);
    std::vector<double> cv(coarse_grid.size());
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = std::exp(-std::pow((coarse_grid[i] - 0.1) / 0.01, 2));
    Spectrum coarse(coarse_grid, cv, SpectrumKind::spectral_density, "1/eV");
    try {
        time_spectral_function(coarse, 1.0, 10000);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::coverage);
    }
    Spectrum wrong(grid, vals, SpectrumKind::pl_lineshape, "a.u.");
    EXPECT_THROW(time_spectral_function(wrong, 0.2, 100), Error);
}

TEST(GeneratingFunction, UnitAtOriginAndDecaysToDw) {
    auto density = single_mode(2.0, 100.0, 2.0);
    auto g = generating_function(time_spectral_function(density, params()));
    EXPECT_EQ(g.values.front(), std::complex<double>(1.0, 0.0));
    EXPECT_NEAR(std::abs(g.values.back()), std::exp(-2.0), 1e-6);
    for (const auto& v : g.values) EXPECT_LE(std::abs(v), 1.0 + 1e-12);
}

TEST(OpticalSpectralFunction, PureLorentzianWithoutPhonons) {
    std::vector<double> e{100.0}, w{0.0};
    auto density = spectral_density(e, w, 6.0, default_density_grid(e, 6.0));
    auto p = params(2.0, 2e-3);
    auto g = generating_function(time_spectral_function(density, p));
    auto a = optical_spectral_function(g, p, EnergyWindow{1.95, 2.05});
    double peak = p.gamma_ev / measure::pi / (p.gamma_ev * p.gamma_ev);
    for (std::size_t i = 0; i < a.size(); i += 7) {
        double x = a.grid()[i] - 2.0;
        double ref = p.gamma_ev / measure::pi / (x * x + p.gamma_ev * p.gamma_ev);
        EXPECT_NEAR(a.values()[i], ref, 1e-4 * peak) << "E = " << a.grid()[i];
    }
    EXPECT_EQ(a.metadata().at("converged"), "true");
}

TEST(OpticalSpectralFunction, UnitAreaAndSidebandsBelowZpl) {
    auto density = single_mode(1.5);
    auto p = params();
    auto g = generating_function(time_spectral_function(density, p));
    auto a = optical_spectral_function(g, p, default_output_window(density, p));
    EXPECT_NEAR(a.integral(), 1.0, 2e-3);
    EXPECT_LT(a.centroid(), p.zpl_ev - 0.1);
    EXPECT_NEAR(a.centroid(), p.zpl_ev - 1.5 * 0.1, 5e-3);
    EXPECT_LT(a.integral(p.zpl_ev + 0.05, 10.0), 0.01);
}

TEST(OpticalSpectralFunction, FftMatchesDirectQuadrature) {
    auto density = single_mode(1.0, 80.0, 4.0);
    auto p = params(2.0, 3e-3);
    auto g = generating_function(time_spectral_function(density, p));
    auto grid = linspace(1.6, 2.05, 61);
    auto fast = optical_spectral_function(g, p, grid);
    auto slow = optical_spectral_function_direct(g, p, grid);
    double peak = slow.max_value();
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(fast.values()[i], slow.values()[i], 2e-3 * peak);
}

TEST(OpticalSpectralFunction, PoissonSidebandWeights) {
    for (double s : {0.5, 1.0, 2.0, 4.0}) {
        auto c = measure::poisson_case(s);
        for (std::size_t n = 0; n < c.areas.size(); ++n)
            EXPECT_NEAR(c.areas[n] / c.expected[n], 1.0, 0.01) << "s = " << s << ", n = " << n;
        EXPECT_LT(c.seconds, 5.0);
    }
}

TEST(OpticalSpectralFunction, ZplWeightIsDebyeWaller) {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 10; ++i) {
        auto c = measure::random_dw_case(rng);
        EXPECT_LT(c.rel_error(), 0.02) << "S = " << c.total_hr;
    }
}

TEST(OpticalSpectralFunction, ShortTimeSpanIsConvergenceError) {
    auto density = single_mode(1.0);
    auto p = params();
    p.time_span_fs = 200.0;
    auto g = generating_function(time_spectral_function(density, p));
    try {
        optical_spectral_function(g, p, EnergyWindow{1.5, 2.1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::convergence);
    }
}

TEST(LineshapeParams, Validation) {
    auto p = params();
    p.gamma_ev = 0.0;
    EXPECT_THROW(p.validate(), Error);
    p = params(0.0);
    EXPECT_THROW(p.validate(), Error);
    p = params();
    p.time_span_fs = 10.0;
    EXPECT_THROW(p.validate(), Error);
    p = params();
    p.normalization = -1.0;
    EXPECT_THROW(p.validate(), Error);
    p = params(2.0, 1e-3);
    EXPECT_NEAR(p.effective_time_span_fs(), 0.6582119569 * std::log(1e6) / 1e-3, 1e-3);
    p.gamma_ev = 0.1;
    EXPECT_EQ(p.effective_time_span_fs(), 2000.0);
}

TEST(PlLineshape, MaxToOneAndCubicWeighting) {
    auto density = single_mode(1.5);
    auto r = compute_lineshapes(density, params());
    EXPECT_NEAR(r.pl.max_value(), 1.0, 1e-12);
    for (std::size_t i = 0; i < r.optical.size(); i += 101) {
        double e = r.optical.grid()[i];
        if (e <= 0.0) continue;
        double ratio_pl = r.pl.values()[i];
        double ref = e * e * e * r.optical.values()[i];
        if (ref <= 1e-6) continue;
        EXPECT_NEAR(ratio_pl / ref, r.pl.values()[r.pl.argmax()] /
                                                        (std::pow(r.pl.grid()[r.pl.argmax()], 3) *
                                                         r.optical.values()[r.pl.argmax()]),
                                    1e-9);
    }
    EXPECT_EQ(r.pl.metadata().at("normalization"), "max-to-one");
    auto p = params();
    p.normalization = 2.0;
    auto fixed = pl_lineshape(r.optical, p);
    EXPECT_NEAR(fixed.values()[10], 2.0 * std::pow(fixed.grid()[10], 3) * r.optical.values()[10], 1e-15);
}

TEST(Absorption, MirrorImageAboveZpl) {
    auto density = single_mode(1.5);
    auto p = params();
    auto r = compute_lineshapes(density, p);
    EXPECT_GT(r.absorption.centroid(), p.zpl_ev);
    EXPECT_LT(r.pl.centroid(), p.zpl_ev);
    EXPECT_NEAR(r.absorption.max_value(), 1.0, 1e-12);
    auto m = mirror_about_zpl(r.optical, p.zpl_ev);
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::size_t j = m.size() - 1 - i;
        EXPECT_NEAR(m.grid()[i], 2.0 * p.zpl_ev - r.optical.grid()[j], 1e-12);
        EXPECT_EQ(m.values()[i], r.optical.values()[j]);
    }
    auto again = mirror_about_zpl(m, p.zpl_ev);
    for (std::size_t i = 0; i < again.size(); ++i) EXPECT_NEAR(again.values()[i], r.optical.values()[i], 0.0);
}

TEST(OutputWindow, CoversSidebands) {
    auto density = single_mode(4.0);
    auto p = params();
    auto w = default_output_window(density, p);
    EXPECT_NEAR(w.hi_ev, p.zpl_ev + 0.2, 1e-12);
    EXPECT_LT(w.lo_ev, p.zpl_ev - 0.1 * (4.0 + 10.0 + 5.0));
}
