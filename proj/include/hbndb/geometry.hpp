#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hbndb/elements.hpp"
#include "hbndb/errors.hpp"

namespace hbndb {

using Vec3 = std::array<double, 3>;

/// Cell matrix with lattice vectors as rows (Å).
using Lattice = std::array<Vec3, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline double determinant(const Lattice& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline Lattice inverse(const Lattice& m) {
    double det = determinant(m);
    if (det == 0.0) throw Error(ErrorKind::validation, "singular lattice", "lattice");
    Lattice r{};
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return r;
}

/// Row vector times matrix: v · M.
inline Vec3 mul(const Vec3& v, const Lattice& m) {
    return {v[0] * m[0][0] + v[1] * m[1][0] + v[2] * m[2][0],
            v[0] * m[0][1] + v[1] * m[1][1] + v[2] * m[2][1],
            v[0] * m[0][2] + v[1] * m[1][2] + v[2] * m[2][2]};
}

/// One periodic structure: species and Cartesian positions (Å).
struct Structure {
    Lattice lattice{};
    std::vector<std::string> species;
    std::vector<Vec3> positions;
    std::string comment;

    std::size_t atom_count() const noexcept { return species.size(); }

    Vec3 fractional(std::size_t i) const { return mul(positions[i], inverse(lattice)); }
};

/// Matched ground/excited structures sharing species order and cell.
class GeometryPair {
public:
    GeometryPair(Lattice lattice, std::vector<std::string> species, std::vector<double> masses,
                 std::vector<Vec3> ground, std::vector<Vec3> excited)
        : lattice_(lattice), species_(std::move(species)), masses_(std::move(masses)),
          ground_(std::move(ground)), excited_(std::move(excited)) {
        if (species_.empty()) throw Error(ErrorKind::structural, "geometry has no atoms", "species");
        if (masses_.size() != species_.size())
            throw Error(ErrorKind::structural, "mass list length differs from atom count", "masses");
        if (ground_.size() != species_.size() || excited_.size() != species_.size())
            throw Error(ErrorKind::structural, "ground and excited atom counts differ", "positions");
        for (std::size_t i = 0; i < masses_.size(); ++i)
            if (!(masses_[i] > 0.0))
                throw Error(ErrorKind::validation, "atom " + std::to_string(i + 1) + " has non-positive mass",
                            "masses");
        if (!(determinant(lattice_) > 0.0))
            throw Error(ErrorKind::validation, "lattice determinant must be positive", "lattice");
    }

    /// Builds the pair from two parsed structures, looking up masses by species.
    /// The ground-state cell is used for minimum-image wrapping.
    static GeometryPair from_structures(const Structure& ground, const Structure& excited) {
        if (ground.atom_count() != excited.atom_count())
            throw Error(ErrorKind::structural,
                        "atom count mismatch: ground " + std::to_string(ground.atom_count()) + ", excited " +
                            std::to_string(excited.atom_count()),
                        "species");
        std::vector<double> masses;
        masses.reserve(ground.atom_count());
        for (std::size_t i = 0; i < ground.atom_count(); ++i) {
            if (ground.species[i] != excited.species[i])
                throw Error(ErrorKind::structural,
                            "atom ordering mismatch at atom " + std::to_string(i + 1) + ": " + ground.species[i] +
                                " vs " + excited.species[i],
                            "species");
            auto m = atomic_mass(ground.species[i]);
            if (!m) throw Error(ErrorKind::validation, "unknown element '" + ground.species[i] + "'", "species");
            masses.push_back(*m);
        }
        return GeometryPair(ground.lattice, ground.species, std::move(masses), ground.positions, excited.positions);
    }

    std::size_t atom_count() const noexcept { return species_.size(); }
    const Lattice& lattice() const noexcept { return lattice_; }
    const std::vector<std::string>& species() const noexcept { return species_; }
    const std::vector<double>& masses() const noexcept { return masses_; }
    const std::vector<Vec3>& ground() const noexcept { return ground_; }
    const std::vector<Vec3>& excited() const noexcept { return excited_; }

private:
    Lattice lattice_;
    std::vector<std::string> species_;
    std::vector<double> masses_;
    std::vector<Vec3> ground_;
    std::vector<Vec3> excited_;
};

}  // namespace hbndb
