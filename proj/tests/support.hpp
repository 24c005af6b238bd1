#pragma once

#include <algorithm>
#include <charconv>
#include <map>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <sqlite3.h>

#include "hbndb/db/query.hpp"
#include "hbndb/db/record.hpp"
#include "hbndb/db/sqlite_io.hpp"
#include "hbndb/db/store.hpp"
#include "hbndb/geometry.hpp"
#include "hbndb/phonon.hpp"

namespace testing_support {

using namespace hbndb;

/// Random orthonormal basis of R^n (modified Gram–Schmidt on Gaussian vectors).
inline std::vector<std::vector<double>> random_orthonormal(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> basis;
    while (basis.size() < n) {
        std::vector<double> v(n);
        for (double& x : v) x = g(rng);
        for (const auto& b : basis) {
            double d = 0;
            for (std::size_t i = 0; i < n; ++i) d += v[i] * b[i];
            for (std::size_t i = 0; i < n; ++i) v[i] -= d * b[i];
        }
        double nn = 0;
        for (double x : v) nn += x * x;
        nn = std::sqrt(nn);
        if (nn < 1e-8) continue;
        for (double& x : v) x /= nn;
        basis.push_back(std::move(v));
    }
    return basis;
}

/// Orthorhombic box with `n` atoms of the given species cycling B, N, C, O.
inline GeometryPair random_pair(std::size_t n, double max_disp, std::mt19937_64& rng, double box = 10.0) {
    static const char* species_cycle[] = {"B", "N", "C", "O"};
    std::uniform_real_distribution<double> pos(0.0, box), d(-max_disp, max_disp);
    Lattice lat{{{box, 0, 0}, {0, box * 1.1, 0}, {0, 0, box * 1.2}}};
    std::vector<std::string> sp;
    std::vector<double> masses;
    std::vector<Vec3> g, e;
    for (std::size_t i = 0; i < n; ++i) {
        sp.emplace_back(species_cycle[i % 4]);
        masses.push_back(*atomic_mass(sp.back()));
        Vec3 p{pos(rng), pos(rng), pos(rng)};
        g.push_back(p);
        e.push_back({p[0] + d(rng), p[1] + d(rng), p[2] + d(rng)});
    }
    return GeometryPair(lat, sp, masses, g, e);
}

/// Complete mode set with random energies in [lo, hi] meV.
inline PhononModeSet random_modes(std::size_t atoms, std::mt19937_64& rng, double lo = 5.0, double hi = 200.0) {
    auto basis = random_orthonormal(3 * atoms, rng);
    std::uniform_real_distribution<double> e(lo, hi);
    std::vector<double> energies(3 * atoms);
    for (double& x : energies) x = e(rng);
    return PhononModeSet(atoms, energies, basis);
}

inline db::DefectRecord make_record(const std::string& defect, int charge, const std::string& host = "monolayer",
                                    const std::string& spin = "singlet", const std::string& transition = "up") {
    db::DefectRecord r;
    r.host = host;
    r.defect = defect;
    r.defect_name = defect;
    r.charge_state = charge;
    r.spin_multiplicity = spin;
    r.optical_spin_transition = transition;
    return r;
}

/// `n` distinct random records with every numeric column plausibly filled (some left NULL)
/// and small blobs. Invariants (DW = e^-HR, ZPL·nm = hc) hold.
inline std::vector<db::DefectRecord> synthetic_records(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    static const char* elements[] = {"C", "O", "Si", "S", "Ga", "Al", "P", "Mg"};
    static const char* hosts[] = {"monolayer", "bulk"};
    static const char* spins[] = {"singlet", "doublet", "triplet"};
    static const char* transitions[] = {"up", "down"};
    std::vector<db::DefectRecord> out;
    std::set<std::string> seen;
    auto pick = [&](std::size_t k) { return static_cast<std::size_t>(u(rng) * static_cast<double>(k)) % k; };
    while (out.size() < n) {
        std::string a = elements[pick(8)], b = elements[pick(8)];
        std::string defect;
        switch (pick(4)) {
            case 0: defect = a + "_N"; break;
            case 1: defect = a + "_B " + b + "_N"; break;
            case 2: defect = a + "_N V_B"; break;
            default: defect = "V_N V_B " + a + "_i"; break;
        }
        auto r = make_record(defect, static_cast<int>(pick(5)) - 2, hosts[pick(2)], spins[pick(3)], transitions[pick(2)]);
        auto key = r.host + "|" + r.defect + "|" + std::to_string(r.charge_state) + "|" + r.spin_multiplicity + "|" +
                   r.optical_spin_transition;
        if (!seen.insert(key).second) continue;
        r.defect_name = "D" + std::to_string(out.size());
        for (std::size_t c = 0; c < db::real_column_count; ++c)
            if (u(rng) > 0.1) r.reals[c] = u(rng) * 10.0;
        double hr = u(rng) * 8.0;
        r.real("HR") = hr;
        r.real("DW") = std::exp(-hr);
        double zpl = 0.2 + u(rng) * 5.8;
        r.real("ZPL") = zpl;
        r.real("ZPL_nm") = 1239.841984 / zpl;
        if (u(rng) > 0.5) r.blob("structure_ground") = db::Blob{"data_x\n" + r.defect_name};
        if (u(rng) > 0.5) r.blob("PL") = db::Blob{std::string("1.0 0.5\n2.0 1.0\n\0raw", 20)};
        out.push_back(std::move(r));
    }
    return out;
}

inline std::shared_ptr<const db::Snapshot> snapshot_of(const std::vector<db::DefectRecord>& recs) {
    db::RecordStore store;
    for (const auto& r : recs) store.ingest(r);
    return store.seal();
}

/// Random valid filter set. value_range is only attached when exactly one numeric option is chosen.
inline db::QueryFilters random_filters(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    db::QueryFilters f;
    std::vector<std::string> keys;
    for (const auto& c : db::columns)
        if (!c.identity) keys.emplace_back(c.key);
    double roll = u(rng);
    if (roll < 0.05) {
        f.option.push_back("all");
    } else if (roll < 0.55) {
        f.option.push_back(keys[rng() % 22]);  // a single numeric key
    } else {
        std::size_t n = rng() % 4;
        for (std::size_t i = 0; i < n; ++i) f.option.push_back(keys[rng() % keys.size()]);
    }
    auto subset = [&](const std::vector<std::string>& all) {
        std::vector<std::string> out;
        for (const auto& v : all)
            if (u(rng) < 0.5) out.push_back(v);
        return out;
    };
    if (u(rng) < 0.5) f.host = subset({"monolayer", "bulk"});
    if (u(rng) < 0.5) f.spin_multiplicity = subset({"singlet", "doublet", "triplet"});
    if (u(rng) < 0.5) f.optical_spin_transition = subset({"up", "down"});
    if (u(rng) < 0.5) {
        f.charge_state.emplace();
        for (int q = -2; q <= 2; ++q)
            if (u(rng) < 0.5) f.charge_state->push_back(q);
    }
    std::size_t numeric = 0;
    bool all = false;
    std::set<std::string> distinct(f.option.begin(), f.option.end());
    for (const auto& k : distinct) {
        if (k == "all") all = true;
        else if (db::columns[*db::column_by_key(k)].type == db::ColumnType::real) ++numeric;
    }
    if (!all && numeric == 1 && u(rng) < 0.7) {
        double a = u(rng) * 10.0, b = u(rng) * 10.0;
        f.value_range = std::make_pair(std::min(a, b), std::max(a, b));
    }
    return f;
}

struct BruteRow {
    std::int64_t id;
    std::vector<db::Value> values;
};

/// Straight scan over the ingested records (id = position + 1), sorted by identity afterwards.
inline std::vector<BruteRow> brute_force_query(const std::vector<db::DefectRecord>& recs, const db::QueryFilters& f) {
    std::vector<std::size_t> cols;
    bool all = std::find(f.option.begin(), f.option.end(), "all") != f.option.end();
    std::optional<std::size_t> range_col;
    for (std::size_t c = 0; c < db::columns.size(); ++c) {
        bool want = c < 6 || all ||
                    std::find(f.option.begin(), f.option.end(), std::string(db::columns[c].key)) != f.option.end();
        if (!want) continue;
        cols.push_back(c);
        if (db::columns[c].type == db::ColumnType::real) range_col = c;
    }
    auto in = [](const auto& filter, const auto& v) {
        if (!filter) return true;
        for (const auto& x : *filter)
            if (x == v) return true;
        return false;
    };
    std::vector<std::pair<const db::DefectRecord*, BruteRow>> hits;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        if (!in(f.host, r.host) || !in(f.spin_multiplicity, r.spin_multiplicity) ||
            !in(f.optical_spin_transition, r.optical_spin_transition) || !in(f.charge_state, r.charge_state))
            continue;
        if (f.value_range) {
            auto v = r.get(*range_col);
            if (db::is_null(v)) continue;
            double x = std::get<double>(v);
            if (x < f.value_range->first || x > f.value_range->second) continue;
        }
        BruteRow row{static_cast<std::int64_t>(i + 1), {}};
        for (auto c : cols) row.values.push_back(r.get(c));
        hits.emplace_back(&r, std::move(row));
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        const auto& x = *a.first;
        const auto& y = *b.first;
        if (x.host != y.host) return x.host < y.host;
        if (x.defect != y.defect) return x.defect < y.defect;
        if (x.charge_state != y.charge_state) return x.charge_state < y.charge_state;
        if (x.spin_multiplicity != y.spin_multiplicity) return x.spin_multiplicity < y.spin_multiplicity;
        return x.optical_spin_transition < y.optical_spin_transition;
    });
    std::vector<BruteRow> out;
    for (auto& h : hits) out.push_back(std::move(h.second));
    return out;
}

/// True when a library result matches the brute-force rows exactly.
inline bool same_rows(const db::QueryResult& r, const std::vector<BruteRow>& brute) {
    if (r.rows.size() != brute.size()) return false;
    for (std::size_t i = 0; i < brute.size(); ++i)
        if (r.rows[i].id != brute[i].id || r.rows[i].values != brute[i].values) return false;
    return true;
}

/// Query-string form of a filter set, as the web client would send it.
inline std::multimap<std::string, std::string> to_params(const db::QueryFilters& f) {
    std::multimap<std::string, std::string> p;
    auto join = [](const auto& items) {
        std::string out;
        for (const auto& x : items) {
            if (!out.empty()) out += ',';
            if constexpr (std::is_same_v<std::decay_t<decltype(x)>, int>) out += std::to_string(x);
            else out += x;
        }
        return out;
    };
    auto num = [](double v) {
        char buf[32];
        auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    };
    if (!f.option.empty()) p.emplace("option", join(f.option));
    if (f.host) p.emplace("host", join(*f.host));
    if (f.spin_multiplicity) p.emplace("spin_multiplicity", join(*f.spin_multiplicity));
    if (f.charge_state) p.emplace("charge_state", join(*f.charge_state));
    if (f.optical_spin_transition) p.emplace("optical_spin_transition", join(*f.optical_spin_transition));
    if (f.value_range) p.emplace("value_range", num(f.value_range->first) + "," + num(f.value_range->second));
    return p;
}

/// Brute-force rows in the library's JSON layout.
inline nlohmann::json brute_json(const std::vector<db::DefectRecord>& recs, const db::QueryFilters& f) {
    db::QueryResult r;
    bool all = std::find(f.option.begin(), f.option.end(), "all") != f.option.end();
    for (std::size_t c = 0; c < db::columns.size(); ++c)
        if (c < 6 || all ||
            std::find(f.option.begin(), f.option.end(), std::string(db::columns[c].key)) != f.option.end())
            r.columns.push_back(c);
    for (auto& row : brute_force_query(recs, f)) r.rows.push_back({row.id, std::move(row.values)});
    return db::to_json(r);
}

/// Column names of the published table, in order.
inline const std::vector<std::string> kTableI = {
    "Host",
    "Defect",
    "Defect name",
    "Charge state",
    "Spin multiplicity",
    "Optical spin transition",
    "Excitation properties: dipole_x (Debye)",
    "Excitation properties: dipole_y (Debye)",
    "Excitation properties: dipole_z (Debye)",
    "Excitation properties: linear In-plane Polarization Visibility",
    "Excitation properties: Intensity (Debye)",
    "Excitation properties: Characteristic time (ns)",
    "Excitation properties: Angle of excitation wrt the crystal axis",
    "Emission properties: dipole_x (Debye)",
    "Emission properties: dipole_y (Debye)",
    "Emission properties: dipole_z (Debye)",
    "Emission properties: linear In-plane Polarization Visibility",
    "Emission properties: Intensity (Debye)",
    "Emission properties: ZPL (eV)",
    "Emission properties: ZPL (nm)",
    "Emission properties: lifetime (ns)",
    "Emission properties: Angle of emission wrt the crystal axis",
    "Emission properties: Polarization misalignment (degree)",
    "Emission properties: Configuration coordinate (amu^(1/2)/Å)",
    "Emission properties: HR factor",
    "Emission properties: DW factor",
    "Emission properties: Ground-state total energy (eV)",
    "Emission properties: Excited-state total energy (eV)",
    "Ground-state structure",
    "Excited-state structure",
    "Ground-state electronic structure",
    "Excited-state electronic structure",
    "PL lineshape",
    "Raman spectrum",
};

// O(n²) mid-ranks and a long-double Pearson; pairs with a NaN are dropped first.
inline std::optional<double> brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isnan(x[i]) && !std::isnan(y[i])) a.push_back(x[i]), b.push_back(y[i]);
    auto rank = [](const std::vector<double>& v) {
        std::vector<long double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            long double less = 0, equal = 0;
            for (double w : v) less += w < v[i], equal += w == v[i];
            r[i] = less + (equal + 1) / 2;
        }
        return r;
    };
    if (a.size() < 2) return std::nullopt;
    auto ra = rank(a), rb = rank(b);
    long double n = static_cast<long double>(a.size()), ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) ma += ra[i], mb += rb[i];
    ma /= n;
    mb /= n;
    long double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0 || sbb == 0) return std::nullopt;
    return static_cast<double>(sab / std::sqrt(saa * sbb));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("hbndb_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

struct ColumnInfo {
    std::string name;
    std::string type;
};

/// Column names and declared types of an exported table, read back through sqlite3.
inline std::vector<ColumnInfo> table_info(const std::string& bytes) {
    TempDir dir("tableinfo");
    auto path = dir.path() / "t.db";
    db::write_file(path, bytes);
    sqlite3* db = nullptr;
    if (sqlite3_open_v2(path.string().c_str(), &db, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK)
        throw std::runtime_error("cannot open exported database");
    sqlite3_stmt* st = nullptr;
    sqlite3_prepare_v2(db, "PRAGMA table_info(updated_data)", -1, &st, nullptr);
    std::vector<ColumnInfo> out;
    while (sqlite3_step(st) == SQLITE_ROW)
        out.push_back({reinterpret_cast<const char*>(sqlite3_column_text(st, 1)),
                       reinterpret_cast<const char*>(sqlite3_column_text(st, 2))});
    sqlite3_finalize(st);
    sqlite3_close(db);
    return out;
}

}  // namespace testing_support
