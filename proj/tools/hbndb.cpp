// hbndb: compute defect properties, build the SQLite database, query it, run the dataset
// analyses and serve the HTTP API.
//
// Exit codes: 0 success, 1 usage, 2 invalid input, 3 some defects in a batch failed, 4 I/O.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hbndb/analysis.hpp"
#include "hbndb/db/query.hpp"
#include "hbndb/db/sqlite_io.hpp"
#include "hbndb/io/formation_io.hpp"
#include "hbndb/io/spectrum_io.hpp"
#include "hbndb/pipeline.hpp"
#include "hbndb/service.hpp"

using namespace hbndb;

namespace {

enum Exit { ok = 0, usage = 1, invalid = 2, partial = 3, io_failure = 4 };

int exit_code(const Error& e) { return e.kind() == ErrorKind::io ? io_failure : invalid; }

void write_output(const std::optional<std::string>& path, const std::string& bytes) {
    if (!path || *path == "-") {
        std::fwrite(bytes.data(), 1, bytes.size(), stdout);
        return;
    }
    db::write_file(*path, bytes);
}

struct ComputeOptions {
    std::string manifest;
    std::optional<std::string> out;
    std::optional<std::string> report;
    pipeline::PipelineConfig cfg;
    double gamma_mev = 1.0;
    std::optional<double> time_span;
};

void add_compute_options(CLI::App* cmd, ComputeOptions& o) {
    cmd->add_option("manifest", o.manifest, "Directory of defect folders, or a file listing them")->required();
    cmd->add_option("--sigma", o.cfg.smearing_sigma_mev, "Gaussian smearing of the spectral density (meV)")
        ->capture_default_str();
    cmd->add_option("--mode-floor", o.cfg.mode_floor_mev, "Modes below this energy are ignored (meV)")
        ->capture_default_str();
    cmd->add_option("--gamma", o.gamma_mev, "Lineshape broadening (meV)")->capture_default_str();
    cmd->add_option("--time-step", o.cfg.lineshape.time_step_fs, "Time step (fs)")->capture_default_str();
    cmd->add_option("--time-span", o.time_span, "Time span (fs); default chosen from gamma");
    cmd->add_option("--pl-step", o.cfg.pl_export_step_ev, "Energy spacing of stored PL lineshapes (eV)")
        ->capture_default_str();
    cmd->add_option("--refractive-index", o.cfg.refractive_index, "n_D used for lifetimes")->capture_default_str();
    cmd->add_option("-j,--jobs", o.cfg.jobs, "Defects computed in parallel")->capture_default_str();
    cmd->add_option("--report", o.report, "Write per-defect notes and failures as JSON");
}

nlohmann::json batch_report(const pipeline::BatchResult& b) {
    nlohmann::json j;
    j["defects"] = nlohmann::json::array();
    for (const auto& d : b.defects) j["defects"].push_back({{"name", d.name}, {"notes", d.notes}});
    j["failures"] = nlohmann::json::array();
    for (const auto& f : b.failures)
        j["failures"].push_back({{"name", f.name}, {"kind", std::string(to_string(f.kind))}, {"message", f.message}});
    return j;
}

int run_compute(ComputeOptions& o, bool require_out) {
    o.cfg.lineshape.gamma_ev = o.gamma_mev * 1e-3;
    o.cfg.lineshape.time_span_fs = o.time_span;
    auto batch = pipeline::run_batch(o.manifest, o.cfg);
    auto snap = pipeline::build_snapshot(batch);
    if (o.out) db::export_sqlite(*snap, *o.out);
    else if (require_out) throw Error(ErrorKind::validation, "--out is required", "out");
    if (o.report) db::write_file(*o.report, batch_report(batch).dump(2) + "\n");
    for (const auto& f : batch.failures)
        std::cerr << "hbndb: " << f.name << ": " << to_string(f.kind) << ": " << f.message << "\n";
    std::cerr << "hbndb: " << snap->size() << " record(s), " << batch.failures.size() << " failure(s)\n";
    if (!o.out) {
        db::QueryFilters numeric;
        for (std::size_t c = db::first_real_column; c < db::first_blob_column; ++c)
            numeric.option.emplace_back(db::columns[c].key);
        std::cout << db::to_csv(db::query(*snap, numeric));
    }
    return batch.failures.empty() ? ok : partial;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hBN defect photophysics: compute, store, query, analyze, serve"};
    app.set_config("--config", "", "TOML/INI file with option defaults");
    app.require_subcommand(1);

    // compute
    ComputeOptions compute_opts;
    auto* compute = app.add_subcommand("compute", "Compute records from raw inputs (prints a table or writes --out)");
    add_compute_options(compute, compute_opts);
    compute->add_option("-o,--out", compute_opts.out, "Write the records as a SQLite database");

    // build-db
    ComputeOptions build_opts;
    auto* build = app.add_subcommand("build-db", "Build the SQLite database from a manifest");
    add_compute_options(build, build_opts);
    build->add_option("-o,--out", build_opts.out, "Output database file")
        ->default_str(std::string(db::default_db_filename));

    // query
    std::string db_path = std::string(db::default_db_filename);
    std::vector<std::string> option, host, spin, transition;
    std::vector<int> charge;
    std::vector<double> value_range;
    std::string format = "json";
    bool download_db = false;
    std::optional<std::string> query_out;
    auto* query = app.add_subcommand("query", "Filter the database (get_database semantics)");
    query->add_option("--db", db_path, "Database file")->envname("HBNDB_DB_PATH")->capture_default_str();
    query->add_option("--option", option, "Option keys (or 'all')")->delimiter(',');
    query->add_option("--host", host, "monolayer, bulk")->delimiter(',');
    query->add_option("--spin-multiplicity", spin, "singlet, doublet, triplet")->delimiter(',');
    query->add_option("--charge-state", charge, "-2..2")->delimiter(',');
    query->add_option("--optical-spin-transition", transition, "up, down")->delimiter(',');
    query->add_option("--value-range", value_range, "lo hi, applied to the single numeric option")->expected(2);
    query->add_option("--format", format, "json, csv or sqlite")->check(CLI::IsMember({"json", "csv", "sqlite"}))
        ->capture_default_str();
    query->add_flag("--download-db", download_db, "Write hbn_defects_<options>.db");
    query->add_option("-o,--out", query_out, "Output file (default stdout)");

    // analyze
    std::string analyze_db = std::string(db::default_db_filename);
    bool matrix = false;
    std::vector<std::string> properties;
    std::optional<std::string> hist_property;
    std::size_t bins = 20;
    std::vector<double> hist_range;
    std::string analyze_format = "csv";
    std::optional<std::string> analyze_out;
    auto* analyze = app.add_subcommand("analyze", "Spearman matrix and histograms by vacancy class");
    analyze->add_option("--db", analyze_db, "Database file")->envname("HBNDB_DB_PATH")->capture_default_str();
    analyze->add_flag("--matrix", matrix, "Spearman correlation matrix");
    analyze->add_option("--properties", properties, "Numeric option keys for the matrix (default all)")->delimiter(',');
    analyze->add_option("--histogram", hist_property, "Numeric option key to bin");
    analyze->add_option("--bins", bins, "Histogram bins")->capture_default_str();
    analyze->add_option("--range", hist_range, "Histogram range lo hi")->expected(2);
    analyze->add_option("--format", analyze_format, "csv or json")->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    analyze->add_option("-o,--out", analyze_out, "Output file (default stdout)");
    std::optional<std::string> classify_formula;
    analyze->add_option("--classify", classify_formula, "Print the vacancy class of a defect formula");

    // serve
    service::ServiceConfig serve_cfg;
    std::string serve_db = std::string(db::default_db_filename);
    std::vector<std::string> cors;
    auto* serve = app.add_subcommand("serve", "Serve /db and /api/v1 over HTTP");
    serve->add_option("--db", serve_db, "Database file")->envname("HBNDB_DB_PATH")->capture_default_str();
    serve->add_option("--host", serve_cfg.host, "Bind address")->envname("HBNDB_HOST")->capture_default_str();
    serve->add_option("--port", serve_cfg.port, "Port")->envname("HBNDB_PORT")->capture_default_str();
    serve->add_option("--cors", cors, "Allowed origins (comma-separated, '*' for any)")
        ->envname("HBNDB_CORS")
        ->delimiter(',');
    serve->add_option("--stored-refractive-index", serve_cfg.stored_refractive_index,
                      "n_D the stored lifetimes were computed with")
        ->capture_default_str();

    // formation
    std::string formation_file;
    std::optional<std::string> formation_out;
    auto* formation = app.add_subcommand("formation", "Charge-state profile from total energies (JSON)");
    formation->add_option("input", formation_file, "Keyed text with total energies and chemical potentials")
        ->required();
    formation->add_option("-o,--out", formation_out, "Output file (default stdout)");

    // lineshape
    std::string lineshape_dir;
    std::string lineshape_prefix = "lineshape";
    ComputeOptions ls_opts;
    auto* lineshape = app.add_subcommand("lineshape", "Export spectral density, PL and absorption for one defect");
    lineshape->add_option("defect_dir", lineshape_dir, "Folder with defect.txt")->required();
    lineshape->add_option("--prefix", lineshape_prefix, "Output file prefix")->capture_default_str();
    lineshape->add_option("--sigma", ls_opts.cfg.smearing_sigma_mev, "Smearing (meV)")->capture_default_str();
    lineshape->add_option("--gamma", ls_opts.gamma_mev, "Broadening (meV)")->capture_default_str();
    lineshape->add_option("--time-step", ls_opts.cfg.lineshape.time_step_fs, "Time step (fs)")->capture_default_str();
    lineshape->add_option("--time-span", ls_opts.time_span, "Time span (fs)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }

    try {
        if (*compute) return run_compute(compute_opts, false);
        if (*build) {
            if (!build_opts.out) build_opts.out = std::string(db::default_db_filename);
            return run_compute(build_opts, true);
        }
        if (*query) {
            service::Params params;
            auto join = [](const auto& v) {
                std::string s;
                for (const auto& x : v) {
                    if (!s.empty()) s += ",";
                    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, std::string>) s += x;
                    else s += std::to_string(x);
                }
                return s;
            };
            if (!option.empty()) params.emplace("option", join(option));
            if (query->count("--host")) params.emplace("host", join(host));
            if (query->count("--spin-multiplicity")) params.emplace("spin_multiplicity", join(spin));
            if (query->count("--charge-state")) params.emplace("charge_state", join(charge));
            if (query->count("--optical-spin-transition")) params.emplace("optical_spin_transition", join(transition));
            if (!value_range.empty())
                params.emplace("value_range", db::format_double(value_range[0]) + "," + db::format_double(value_range[1]));
            params.emplace("format", download_db ? "sqlite" : format);
            auto req = service::parse_defects_request(params);
            auto snap = db::import_sqlite(db_path);
            auto resp = service::render(db::query(snap, req.filters), req);
            if (download_db && !query_out) query_out = db::download_filename(req.filters);
            write_output(query_out, resp.body);
            if (download_db) std::cerr << "hbndb: wrote " << *query_out << "\n";
            return ok;
        }
        if (*analyze) {
            if (classify_formula) {
                std::cout << analysis::to_string(analysis::classify_vacancy(*classify_formula)) << "\n";
                if (!matrix && !hist_property) return ok;
            }
            if (!matrix && !hist_property)
                throw Error(ErrorKind::validation, "choose --matrix, --histogram or --classify", "analyze");
            auto snap = db::import_sqlite(analyze_db);
            std::string out;
            if (matrix) {
                auto m = properties.empty() ? analysis::correlation_matrix(snap)
                                            : analysis::correlation_matrix(snap, properties);
                out += analyze_format == "json" ? analysis::to_json(m).dump(2) + "\n" : analysis::to_csv(m);
            }
            if (hist_property) {
                std::optional<std::pair<double, double>> range;
                if (!hist_range.empty()) range = std::pair{hist_range[0], hist_range[1]};
                auto h = analysis::histogram(snap, *hist_property, bins, range);
                out += analyze_format == "json" ? analysis::to_json(h).dump(2) + "\n" : analysis::to_csv(h);
            }
            write_output(analyze_out, out);
            return ok;
        }
        if (*serve) {
            serve_cfg.db_path = serve_db;
            serve_cfg.cors_origins = cors;
            service::Service svc(serve_cfg);
            svc.load();
            httplib::Server server;
            std::cerr << "hbndb: serving " << serve_db << " on " << serve_cfg.host << ":" << serve_cfg.port << "\n";
            if (!svc.listen(server)) throw Error(ErrorKind::io, "cannot listen on port " + std::to_string(serve_cfg.port));
            return ok;
        }
        if (*formation) {
            auto f = io::parse_formation(io::read_text_file(formation_file), formation_file);
            auto profile = stable_charge_state(f.states, f.fermi_lo, f.fermi_hi);
            write_output(formation_out, io::to_json(profile).dump(2) + "\n");
            return ok;
        }
        if (*lineshape) {
            ls_opts.cfg.lineshape.gamma_ev = ls_opts.gamma_mev * 1e-3;
            ls_opts.cfg.lineshape.time_span_fs = ls_opts.time_span;
            ls_opts.cfg.validate();
            ls_opts.cfg.keep_spectra = true;
            auto d = pipeline::compute_defect(lineshape_dir, ls_opts.cfg);
            auto pl = d.record.blob("PL");
            if (!pl || !d.lineshapes) throw Error(ErrorKind::validation, "defect has no phonon coupling; no lineshape", "HR");
            const auto& shapes = *d.lineshapes;
            const auto& density = *d.density;
            db::write_file(lineshape_prefix + "_pl.txt", pl->bytes);
            db::write_file(lineshape_prefix + "_pl.csv", io::write_csv(shapes.pl));
            db::write_file(lineshape_prefix + "_absorption.csv", io::write_csv(shapes.absorption));
            db::write_file(lineshape_prefix + "_density.csv", io::write_csv(density));
            std::cerr << "hbndb: wrote " << lineshape_prefix << "_{pl.txt,pl.csv,absorption.csv,density.csv}\n";
            return ok;
        }
    } catch (const Error& e) {
        std::cerr << "hbndb: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "hbndb: " << e.what() << "\n";
        return io_failure;
    }
    return usage;
}
