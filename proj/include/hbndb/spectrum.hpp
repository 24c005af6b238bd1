#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbndb/errors.hpp"

namespace hbndb {

enum class SpectrumKind { spectral_density, pl_lineshape, absorption_lineshape, optical_spectral_function };

inline std::string_view to_string(SpectrumKind k) {
    switch (k) {
        case SpectrumKind::spectral_density: return "spectral_density";
        case SpectrumKind::pl_lineshape: return "pl_lineshape";
        case SpectrumKind::absorption_lineshape: return "absorption_lineshape";
        case SpectrumKind::optical_spectral_function: return "optical_spectral_function";
    }
    return "unknown";
}

/// A real function sampled on a strictly increasing energy grid (eV).
class Spectrum {
public:
    Spectrum(std::vector<double> grid, std::vector<double> values, SpectrumKind kind, std::string units)
        : grid_(std::move(grid)), values_(std::move(values)), kind_(kind), units_(std::move(units)) {
        if (grid_.size() != values_.size())
            throw Error(ErrorKind::validation, "spectrum grid and values differ in length", "values");
        if (grid_.size() < 2) throw Error(ErrorKind::validation, "spectrum needs at least two samples", "grid");
        for (std::size_t i = 1; i < grid_.size(); ++i)
            if (!(grid_[i] > grid_[i - 1]))
                throw Error(ErrorKind::validation, "spectrum grid must be strictly increasing", "grid");
        for (double v : values_)
            if (!std::isfinite(v)) throw Error(ErrorKind::validation, "spectrum values must be finite", "values");
    }

    std::span<const double> grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    SpectrumKind kind() const noexcept { return kind_; }
    const std::string& units() const noexcept { return units_; }
    std::size_t size() const noexcept { return grid_.size(); }

    std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
    const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

    /// Trapezoidal integral over the whole grid.
    double integral() const { return integral(grid_.front(), grid_.back()); }

    /// Trapezoidal integral restricted to [lo, hi], with linear interpolation at the cut points.
    double integral(double lo, double hi) const {
        lo = std::max(lo, grid_.front());
        hi = std::min(hi, grid_.back());
        if (!(hi > lo)) return 0.0;
        double sum = 0.0;
        for (std::size_t i = 1; i < grid_.size(); ++i) {
            double a = grid_[i - 1], b = grid_[i];
            if (b <= lo || a >= hi) continue;
            double x0 = std::max(a, lo), x1 = std::min(b, hi);
            sum += 0.5 * (at(x0) + at(x1)) * (x1 - x0);
        }
        return sum;
    }

    /// Linear interpolation; zero outside the grid.
    double at(double e) const {
        if (e < grid_.front() || e > grid_.back()) return 0.0;
        auto it = std::upper_bound(grid_.begin(), grid_.end(), e);
        if (it == grid_.end()) return values_.back();
        std::size_t i = static_cast<std::size_t>(it - grid_.begin());
        if (i == 0) return values_.front();
        double t = (e - grid_[i - 1]) / (grid_[i] - grid_[i - 1]);
        return values_[i - 1] + t * (values_[i] - values_[i - 1]);
    }

    std::size_t argmax() const {
        return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) - values_.begin());
    }

    double max_value() const { return values_[argmax()]; }

    /// First moment ∫E f dE / ∫f dE.
    double centroid() const {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 1; i < grid_.size(); ++i) {
            double h = grid_[i] - grid_[i - 1];
            num += 0.5 * h * (grid_[i] * values_[i] + grid_[i - 1] * values_[i - 1]);
            den += 0.5 * h * (values_[i] + values_[i - 1]);
        }
        return num / den;
    }

private:
    std::vector<double> grid_;
    std::vector<double> values_;
    SpectrumKind kind_;
    std::string units_;
    std::map<std::string, std::string> metadata_;
};

/// Complex samples on the half-line t_n = n·dt (fs), n = 0..N-1.
struct TimeSeries {
    double dt_fs = 0.0;
    std::vector<std::complex<double>> values;

    std::size_t size() const noexcept { return values.size(); }
    double time(std::size_t n) const noexcept { return dt_fs * static_cast<double>(n); }
};

/// Uniform grid helper: `count` points from lo to hi inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    if (count < 2) throw Error(ErrorKind::validation, "linspace needs at least two points");
    std::vector<double> g(count);
    double h = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) g[i] = lo + h * static_cast<double>(i);
    g.back() = hi;
    return g;
}

}  // namespace hbndb
