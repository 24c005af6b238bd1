#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hbndb/db/record.hpp"
#include "hbndb/db/sqlite_io.hpp"
#include "hbndb/db/store.hpp"
#include "hbndb/emission.hpp"
#include "hbndb/errors.hpp"
#include "hbndb/io/keyed_text.hpp"
#include "hbndb/io/matrix_element_io.hpp"
#include "hbndb/io/phonon_io.hpp"
#include "hbndb/io/spectrum_io.hpp"
#include "hbndb/io/structure_io.hpp"
#include "hbndb/lineshape.hpp"
#include "hbndb/phonon.hpp"
#include "hbndb/thermo.hpp"

namespace hbndb::pipeline {

namespace fs = std::filesystem;

struct PipelineConfig {
    double smearing_sigma_mev = default_smearing_mev;
    double mode_floor_mev = default_mode_floor_mev;
    LineshapeParams lineshape;             // zpl_ev is filled per defect
    double pl_export_step_ev = 0.5e-3;     // sample spacing of the stored PL blob
    double refractive_index = constants::default_refractive_index;
    unsigned jobs = 1;
    bool keep_spectra = false;             // retain density and lineshapes in ComputedDefect

    void validate() const {
        if (!(smearing_sigma_mev > 0.0)) throw Error(ErrorKind::validation, "smearing sigma must be positive", "sigma");
        if (!(mode_floor_mev >= 0.0)) throw Error(ErrorKind::validation, "mode floor must be non-negative", "mode_floor");
        if (!(lineshape.gamma_ev > 0.0)) throw Error(ErrorKind::validation, "gamma must be positive", "gamma");
        if (!(lineshape.time_step_fs > 0.0)) throw Error(ErrorKind::validation, "time step must be positive", "time_step");
        if (lineshape.time_span_fs && !(*lineshape.time_span_fs >= 100.0 * lineshape.time_step_fs))
            throw Error(ErrorKind::validation, "time span must cover at least 100 time steps", "time_span");
        if (!(pl_export_step_ev > 0.0)) throw Error(ErrorKind::validation, "PL export step must be positive", "pl_step");
        if (!(refractive_index >= 1.0)) throw Error(ErrorKind::validation, "refractive index must be >= 1", "n_D");
        if (jobs == 0) throw Error(ErrorKind::validation, "jobs must be >= 1", "jobs");
    }
};

/// One computed defect plus notes that do not fit the table (flags, provenance of choices).
struct ComputedDefect {
    std::string name;  // input directory name
    db::DefectRecord record;
    std::map<std::string, std::string> notes;
    std::optional<Spectrum> density;
    std::optional<LineshapeResult> lineshapes;
};

struct Failure {
    std::string name;
    ErrorKind kind;
    std::string message;
};

struct BatchResult {
    std::vector<ComputedDefect> defects;
    std::vector<Failure> failures;
};

namespace detail {

inline std::string read_bytes(const fs::path& p) { return db::read_file(p); }

inline fs::path resolve(const fs::path& dir, const std::string& rel) {
    fs::path p(rel);
    return p.is_absolute() ? p : dir / p;
}

inline db::Blob structure_blob(const fs::path& path, const Structure& s) {
    auto content = read_bytes(path);
    if (io::detect_structure_format(path, content) == io::StructureFormat::cif) return {content};
    return {io::write_cif(s, path.stem().string())};
}

inline void fill_dipole(db::DefectRecord& r, const DipoleMoment& mu, const char* prefix,
                        std::map<std::string, std::string>& notes) {
    std::string p(prefix);
    r.real(p + "_dipole_x") = mu.abs_components[0];
    r.real(p + "_dipole_y") = mu.abs_components[1];
    r.real(p + "_dipole_z") = mu.abs_components[2];
    r.real(p + "_tdm") = mu.magnitude;
    auto pol = summarize_polarization(mu);
    if (pol.angle_deg) r.real(p + "_angle") = *pol.angle_deg;
    else notes[p + "_angle"] = pol.reason;
    if (pol.visibility) r.real(p + "_visibility") = *pol.visibility;
    else notes[p + "_visibility"] = pol.reason;
}

}  // namespace detail

/// Runs the whole chain for one defect directory holding `defect.txt`:
///
///   host = monolayer
///   defect = O_N V_B
///   defect_name = ON_VB
///   charge_state = -1
///   spin_multiplicity = triplet        # or give a [spin] section instead
///   optical_spin_transition = up
///   E_ground = -2880.12                # total energies, eV
///   E_excited = -2878.05
///   ground_structure = ground.cif      # CIF or POSCAR
///   excited_structure = excited.vasp
///   phonons = phonons.dat
///   phonon_source = ground             # optional: ground | excited
///   matrix_elements = dipoles.txt      # optional
///   misalignment = 51                  # optional published value, stored verbatim
///   band_ground = band_g.txt           # optional opaque blobs: band_ground, band_excited, raman
///   [spin]
///   singlet = -2880.01
///   triplet = -2880.12
///   electrons = 240
inline ComputedDefect compute_defect(const fs::path& dir, const PipelineConfig& cfg) {
    cfg.validate();
    auto kt = io::KeyedText::read(dir / "defect.txt");
    const auto& root = kt.root();
    ComputedDefect out;
    out.name = dir.filename().string();
    auto& r = out.record;
    auto& notes = out.notes;

    r.host = kt.require_text(root, "host");
    r.defect = kt.require_text(root, "defect");
    r.defect_name = kt.text(root, "defect_name").value_or(r.defect);
    r.charge_state = static_cast<int>(kt.integer(root, "charge_state").value_or(0));
    r.optical_spin_transition = kt.require_text(root, "optical_spin_transition");

    auto spin_secs = kt.sections("spin");
    if (!spin_secs.empty()) {
        SpinCandidateSet cands;
        for (const auto& [key, entry] : spin_secs.front()->entries) {
            if (key == "electrons") {
                cands.electron_count = static_cast<int>(*kt.integer(*spin_secs.front(), key));
                continue;
            }
            auto m = parse_multiplicity(key);
            if (!m) kt.fail(*spin_secs.front(), key, "unknown multiplicity '" + key + "'");
            cands.total_energies[*m] = *kt.number(*spin_secs.front(), key);
        }
        auto sel = spin_ground_state(cands);
        r.spin_multiplicity = std::string(to_string(sel.multiplicity));
        if (sel.near_degenerate) notes["spin"] = "near-degenerate";
        if (auto given = kt.text(root, "spin_multiplicity"); given && *given != r.spin_multiplicity)
            kt.fail(root, "spin_multiplicity",
                    "spin_multiplicity " + *given + " contradicts the lowest-energy state " + r.spin_multiplicity);
    } else {
        r.spin_multiplicity = kt.require_text(root, "spin_multiplicity");
    }

    double e_ground = kt.require_number(root, "E_ground");
    double e_excited = kt.require_number(root, "E_excited");
    r.real("E_ground") = e_ground;
    r.real("E_excited") = e_excited;
    auto z = zpl(e_excited, e_ground);
    r.real("ZPL") = z.ev;
    r.real("ZPL_nm") = z.nm;

    auto gpath = detail::resolve(dir, kt.require_text(root, "ground_structure"));
    auto epath = detail::resolve(dir, kt.require_text(root, "excited_structure"));
    auto ground = io::read_structure(gpath);
    auto excited = io::read_structure(epath);
    auto geom = GeometryPair::from_structures(ground, excited);
    r.blob("structure_ground") = detail::structure_blob(gpath, ground);
    r.blob("structure_excited") = detail::structure_blob(epath, excited);

    auto source = PhononSource::ground;
    if (auto s = kt.text(root, "phonon_source")) {
        if (*s == "excited") source = PhononSource::excited;
        else if (*s != "ground") kt.fail(root, "phonon_source", "phonon_source must be ground or excited");
    }
    auto ppath = detail::resolve(dir, kt.require_text(root, "phonons"));
    auto modes = io::parse_phonons(io::read_text_file(ppath), ppath.string(), geom.atom_count(), source);

    auto decomp = hr_decomposition(geom, modes, cfg.mode_floor_mev);
    r.real("Q") = decomp.total_q;
    r.real("HR") = decomp.total_hr;
    r.real("DW") = decomp.dw_factor;
    notes["phonon_source"] = std::string(to_string(source));
    notes["Q_mode_sum"] = db::format_double(decomp.q_mode_sum);

    // PL lineshape blob
    if (decomp.total_hr > 0.0) {
        auto density = spectral_density(decomp, modes, cfg.smearing_sigma_mev);
        auto params = cfg.lineshape;
        params.zpl_ev = z.ev;
        auto shapes = compute_lineshapes(density, params);
        auto window = default_output_window(density, params);
        double lo = std::max(window.lo_ev + 180.0 * params.gamma_ev, cfg.pl_export_step_ev);
        double hi = params.zpl_ev + 20.0 * params.gamma_ev;
        auto count = static_cast<std::size_t>(std::floor((hi - lo) / cfg.pl_export_step_ev)) + 1;
        std::vector<double> grid(count);
        for (std::size_t i = 0; i < count; ++i) grid[i] = lo + cfg.pl_export_step_ev * static_cast<double>(i);
        if (grid.size() >= 2) {
            auto pl = io::resample_max_to_one(shapes.pl, std::move(grid));
            r.blob("PL") = db::Blob{io::write_two_column(pl)};
        }
        notes["lineshape_converged"] = shapes.optical.metadata().at("converged");
        if (cfg.keep_spectra) {
            out.density = std::move(density);
            out.lineshapes = std::move(shapes);
        }
    }

    // dipoles, polarization, lifetimes
    std::optional<PolarizationSummary> abs_pol, ems_pol;
    if (auto me = kt.text(root, "matrix_elements")) {
        auto mpath = detail::resolve(dir, *me);
        auto elems = io::parse_matrix_elements(io::read_text_file(mpath), mpath.string(), r.defect);
        for (const auto& m : elems) {
            auto mu = transition_dipole(m);
            if (m.kind == TransitionKind::excitation) {
                if (abs_pol) throw Error(ErrorKind::input, "more than one excitation matrix element", "matrix_elements");
                detail::fill_dipole(r, mu, "abs", notes);
                abs_pol = summarize_polarization(mu);
                auto rad = radiative_rate(std::abs(m.e_final_ev - m.e_initial_ev), mu.magnitude_sq(), cfg.refractive_index);
                if (!rad.infinite_lifetime()) r.real("abs_lifetime") = rad.lifetime_ns;
                else notes["abs_lifetime"] = "infinite (dark transition)";
            } else {
                if (ems_pol) throw Error(ErrorKind::input, "more than one emission matrix element", "matrix_elements");
                detail::fill_dipole(r, mu, "ems", notes);
                ems_pol = summarize_polarization(mu);
                auto rad = radiative_rate(z.ev, mu.magnitude_sq(), cfg.refractive_index);
                if (!rad.infinite_lifetime()) r.real("lifetime") = rad.lifetime_ns;
                else notes["lifetime"] = "infinite (dark transition)";
            }
        }
    }
    std::optional<double> computed_mis;
    if (abs_pol && ems_pol) {
        auto mis = misalignment(*abs_pol, *ems_pol);
        computed_mis = mis.degrees;
        if (!mis.degrees) notes["misalignment"] = mis.reason;
    }
    if (auto published = kt.number(root, "misalignment")) {
        r.real("misalignment") = *published;
        if (misalignment_discrepancy(*published, computed_mis))
            notes["misalignment_discrepancy"] =
                "published " + db::format_double(*published) + ", computed " +
                (computed_mis ? db::format_double(*computed_mis) : std::string("undefined"));
    } else if (computed_mis) {
        r.real("misalignment") = *computed_mis;
    }

    for (const char* key : {"band_ground", "band_excited", "raman"})
        if (auto f = kt.text(root, key)) r.blob(key) = db::Blob{detail::read_bytes(detail::resolve(dir, *f))};

    db::validate(r);
    return out;
}

/// Reads a stored-record directory holding `record.txt`: identity keys plus any option keys.
/// Numeric options take numbers; blob options take "@file" (bytes read verbatim) or inline text.
inline db::DefectRecord read_record(const fs::path& dir) {
    auto kt = io::KeyedText::read(dir / "record.txt");
    const auto& root = kt.root();
    db::DefectRecord r;
    for (const auto& [key, entry] : root.entries) {
        auto col = db::column_by_key(key);
        if (!col) kt.fail(root, key, "unknown column key '" + key + "'");
        const auto& spec = db::columns[*col];
        switch (spec.type) {
            case db::ColumnType::real: r.set(*col, *kt.number(root, key)); break;
            case db::ColumnType::integer: r.set(*col, static_cast<std::int64_t>(*kt.integer(root, key))); break;
            case db::ColumnType::text: r.set(*col, entry.value); break;
            case db::ColumnType::blob:
                if (!entry.value.empty() && entry.value[0] == '@')
                    r.set(*col, db::Blob{detail::read_bytes(detail::resolve(dir, entry.value.substr(1)))});
                else
                    r.set(*col, db::Blob{entry.value});
                break;
        }
    }
    for (std::size_t i = 0; i < db::identity_column_count; ++i)
        if (!root.has(std::string(db::columns[i].key)) && db::columns[i].key != "defect_name")
            throw ParseError(kt.source(), 1, 1, "missing identity key '" + std::string(db::columns[i].key) + "'");
    if (r.defect_name.empty()) r.defect_name = r.defect;
    db::validate(r);
    return r;
}

/// Defect directories named by a manifest: either a directory whose subdirectories each hold
/// defect.txt or record.txt, or a text file listing such directories one per line.
inline std::vector<fs::path> manifest_entries(const fs::path& manifest) {
    std::vector<fs::path> dirs;
    if (!fs::exists(manifest)) throw Error(ErrorKind::io, "manifest '" + manifest.string() + "' does not exist", "manifest");
    if (fs::is_directory(manifest)) {
        for (const auto& e : fs::directory_iterator(manifest))
            if (e.is_directory() && (fs::exists(e.path() / "defect.txt") || fs::exists(e.path() / "record.txt")))
                dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        return dirs;
    }
    auto base = manifest.parent_path();
    auto content = io::read_text_file(manifest);
    for (const auto& l : io::split_lines(content)) {
        auto t = io::trim(l.text);
        if (t.empty() || t[0] == '#') continue;
        dirs.push_back(detail::resolve(base, std::string(t)));
    }
    return dirs;
}

/// Computes (defect.txt) or reads (record.txt) every manifest entry. Failures are collected per
/// entry and never abort the batch. Output order follows the manifest.
inline BatchResult run_batch(const fs::path& manifest, const PipelineConfig& cfg) {
    cfg.validate();
    auto dirs = manifest_entries(manifest);
    std::vector<std::optional<ComputedDefect>> done(dirs.size());
    std::vector<std::optional<Failure>> failed(dirs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < dirs.size();) {
            const auto& d = dirs[i];
            try {
                if (fs::exists(d / "defect.txt")) {
                    done[i] = compute_defect(d, cfg);
                } else if (fs::exists(d / "record.txt")) {
                    ComputedDefect cd;
                    cd.name = d.filename().string();
                    cd.record = read_record(d);
                    done[i] = std::move(cd);
                } else {
                    throw Error(ErrorKind::io, "no defect.txt or record.txt in '" + d.string() + "'", "manifest");
                }
            } catch (const Error& e) {
                failed[i] = Failure{d.filename().string(), e.kind(), e.what()};
            } catch (const std::exception& e) {
                failed[i] = Failure{d.filename().string(), ErrorKind::io, e.what()};
            }
        }
    };
    unsigned n = std::min<unsigned>(cfg.jobs, static_cast<unsigned>(std::max<std::size_t>(dirs.size(), 1)));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    BatchResult out;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        if (done[i]) out.defects.push_back(std::move(*done[i]));
        if (failed[i]) out.failures.push_back(std::move(*failed[i]));
    }
    return out;
}

/// Ingests batch results into a store; identity conflicts become failures.
inline std::shared_ptr<const db::Snapshot> build_snapshot(BatchResult& batch) {
    db::RecordStore store;
    for (const auto& d : batch.defects) {
        try {
            store.ingest(d.record);
        } catch (const Error& e) {
            batch.failures.push_back({d.name, e.kind(), e.what()});
        }
    }
    return store.seal();
}

}  // namespace hbndb::pipeline
