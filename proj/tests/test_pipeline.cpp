#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "hbndb/analysis.hpp"
#include "hbndb/elements.hpp"
#include "hbndb/io/spectrum_io.hpp"
#include "hbndb/pipeline.hpp"
#include "support.hpp"

using namespace hbndb;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures = HBNDB_FIXTURES;

pipeline::PipelineConfig config() {
    pipeline::PipelineConfig cfg;
    cfg.lineshape.gamma_ev = 1e-3;
    return cfg;
}

struct Run {
    int rc;
    std::string out, err;
};

Run cli(const std::string& args, const TempDir& dir) {
    auto out = dir.path() / "stdout", err = dir.path() / "stderr";
    std::string cmd = "cd '" + dir.path().string() + "' && '" HBNDB_CLI "' " + args + " > '" + out.string() +
                      "' 2> '" + err.string() + "'";
    int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, db::read_file(out), db::read_file(err)};
}

}  // namespace

TEST(ComputeDefect, MatchesSiOracle) {
    auto d = pipeline::compute_defect(fixtures / "batch" / "c_n", config());
    const auto& r = d.record;
    EXPECT_EQ(r.defect, "C_N");
    EXPECT_EQ(r.defect_name, "CN");
    EXPECT_EQ(r.spin_multiplicity, "doublet");  // lowest of the [spin] candidates
    EXPECT_NEAR(*r.real("ZPL"), 2.1, 1e-12);
    EXPECT_NEAR(*r.real("ZPL") * *r.real("ZPL_nm"), 1239.841984, 1e-9);

    // Unit-vector modes: only N along x (mode 7, 115 meV) and C along z (mode 12, 190 meV) couple.
    const double amu = 1.66053906660e-27, hbar = 1.054571817e-34, ev = 1.602176634e-19;
    double dx_n = (0.3356 - 0.3333) * 4.337, dz_c = 0.0025 * 20.0;
    double m_n = *atomic_mass("N"), m_c = *atomic_mass("C");
    auto s = [&](double e_mev, double m, double d_angstrom) {
        double q2 = m * amu * d_angstrom * d_angstrom * 1e-20;
        return e_mev * 1e-3 * ev * q2 / (2.0 * hbar * hbar);
    };
    double hr = s(115.0, m_n, dx_n) + s(190.0, m_c, dz_c);
    EXPECT_NEAR(*r.real("HR") / hr, 1.0, 1e-9);
    EXPECT_NEAR(*r.real("Q"), std::sqrt(m_n * dx_n * dx_n + m_c * dz_c * dz_c), 1e-12);
    EXPECT_EQ(*r.real("DW"), std::exp(-*r.real("HR")));

    double angle = *r.real("abs_angle");
    EXPECT_GE(angle, 0.0);
    EXPECT_LT(angle, 60.0);
    EXPECT_GT(*r.real("lifetime"), 0.0);
    EXPECT_GT(*r.real("abs_lifetime"), 0.0);
    EXPECT_LE(*r.real("misalignment"), 30.0);
    EXPECT_EQ(r.blob("raman")->bytes, "100.0 0.2\n200.0 1.0\n");
    EXPECT_EQ(r.blob("structure_excited")->bytes, db::read_file(fixtures / "batch" / "c_n" / "excited.cif"));
    EXPECT_EQ(r.blob("structure_ground")->bytes.substr(0, 5), "data_");
    EXPECT_EQ(d.notes.at("lineshape_converged"), "true");
}

TEST(ComputeDefect, PlBlobIsMaxToOneBelowZpl) {
    auto d = pipeline::compute_defect(fixtures / "batch" / "c_n", config());
    auto pl = io::parse_two_column(d.record.blob("PL")->bytes, SpectrumKind::pl_lineshape, "PL");
    EXPECT_NEAR(pl.max_value(), 1.0, 1e-12);
    EXPECT_NEAR(pl.grid()[1] - pl.grid()[0], 0.5e-3, 1e-12);
    EXPECT_LT(pl.grid().back(), *d.record.real("ZPL") + 0.021);
    EXPECT_LT(pl.centroid(), *d.record.real("ZPL"));
}

TEST(ReadRecord, PaperValuesVerbatim) {
    auto o_n = pipeline::read_record(fixtures / "batch" / "o_n");
    EXPECT_EQ(*o_n.real("ZPL"), 0.24);
    auto ga_b = pipeline::read_record(fixtures / "batch" / "ga_b");
    EXPECT_EQ(*ga_b.real("ZPL"), 5.82);
    auto onvb = pipeline::read_record(fixtures / "batch" / "o_n_v_b");
    EXPECT_EQ(*onvb.real("misalignment"), 51.0);
    EXPECT_EQ(onvb.charge_state, -1);
    EXPECT_EQ(onvb.blob("structure_ground")->bytes, db::read_file(fixtures / "batch" / "o_n_v_b" / "structure.cif"));
    EXPECT_EQ(analysis::classify_vacancy(onvb.defect), analysis::VacancyClass::one_vacancy);
}

TEST(RunBatch, DeterministicAcrossJobCounts) {
    auto cfg = config();
    auto a = pipeline::run_batch(fixtures / "batch", cfg);
    cfg.jobs = 3;
    auto b = pipeline::run_batch(fixtures / "batch", cfg);
    ASSERT_EQ(a.defects.size(), 4u);
    EXPECT_TRUE(a.failures.empty());
    auto sa = pipeline::build_snapshot(a), sb = pipeline::build_snapshot(b);
    EXPECT_EQ(db::export_sqlite_bytes(*sa), db::export_sqlite_bytes(*sb));
}

TEST(RunBatch, FailuresAreCollected) {
    auto batch = pipeline::run_batch(fixtures / "with_failure.txt", config());
    ASSERT_EQ(batch.defects.size(), 1u);
    ASSERT_EQ(batch.failures.size(), 1u);
    EXPECT_EQ(batch.failures[0].name, "no_host");
    EXPECT_NE(batch.failures[0].message.find("host"), std::string::npos);
    EXPECT_THROW(pipeline::run_batch(fixtures / "nowhere", config()), Error);
}

TEST(RunBatch, DuplicateIdentityBecomesFailure) {
    TempDir dir("dup");
    std::ofstream(dir.path() / "list.txt") << fixtures.string() << "/batch/o_n\n" << fixtures.string() << "/batch/o_n\n";
    auto batch = pipeline::run_batch(dir.path() / "list.txt", config());
    auto snap = pipeline::build_snapshot(batch);
    EXPECT_EQ(snap->size(), 1u);
    ASSERT_EQ(batch.failures.size(), 1u);
    EXPECT_EQ(batch.failures[0].kind, ErrorKind::conflict);
}

TEST(Cli, BuildQueryAnalyze) {
    TempDir dir("cli");
    auto batch = (fixtures / "batch").string();
    auto build = cli("build-db '" + batch + "' -o paper.db", dir);
    ASSERT_EQ(build.rc, 0) << build.err;
    EXPECT_NE(build.err.find("4 record(s), 0 failure(s)"), std::string::npos);

    auto q = cli("query --db paper.db --option ZPL --value-range 0 1", dir);
    ASSERT_EQ(q.rc, 0) << q.err;
    auto j = nlohmann::json::parse(q.out);
    ASSERT_EQ(j["rows"].size(), 1u);
    EXPECT_EQ(j["rows"][0][1], "O_N");
    EXPECT_EQ(j["rows"][0][6].get<double>(), 0.24);

    auto ga = cli("query --db paper.db --option ZPL --value-range 5 6 --format csv", dir);
    EXPECT_NE(ga.out.find("Ga_B,Ga_B,0,singlet,up,5.82\r\n"), std::string::npos);

    auto mis = cli("query --db paper.db --option misalignment --charge-state -1", dir);
    auto mj = nlohmann::json::parse(mis.out);
    ASSERT_EQ(mj["rows"].size(), 1u);
    EXPECT_EQ(mj["rows"][0][6].get<double>(), 51.0);

    auto dl = cli("query --db paper.db --option ZPL --download-db", dir);
    ASSERT_EQ(dl.rc, 0) << dl.err;
    EXPECT_TRUE(fs::exists(dir.path() / "hbn_defects_ZPL.db"));

    // Rebuilding gives the same file.
    ASSERT_EQ(cli("build-db '" + batch + "' -o again.db -j 2", dir).rc, 0);
    EXPECT_EQ(db::read_file(dir.path() / "paper.db"), db::read_file(dir.path() / "again.db"));

    auto cls = cli("analyze --classify 'O_N V_B'", dir);
    EXPECT_EQ(cls.out, "one-vacancy\n");
    auto hist = cli("analyze --db paper.db --histogram ZPL --bins 2", dir);
    ASSERT_EQ(hist.rc, 0) << hist.err;
    EXPECT_EQ(hist.out.substr(0, 7), "bin_lo,");
}

TEST(Cli, ExitCodes) {
    TempDir dir("codes");
    EXPECT_EQ(cli("", dir).rc, 1);
    EXPECT_EQ(cli("query --bogus", dir).rc, 1);
    EXPECT_EQ(cli("query --db missing.db", dir).rc, 4);
    EXPECT_EQ(cli("analyze --classify 'c_N'", dir).rc, 2);
    auto partial = cli("build-db '" + (fixtures / "with_failure.txt").string() + "' -o part.db --report r.json", dir);
    EXPECT_EQ(partial.rc, 3);
    auto report = nlohmann::json::parse(db::read_file(dir.path() / "r.json"));
    EXPECT_EQ(report["failures"][0]["name"], "no_host");
    EXPECT_EQ(cli("query --db part.db --option NOPE", dir).rc, 2);
}

TEST(Cli, FormationAndLineshape) {
    TempDir dir("fl");
    auto f = cli("formation '" + (fixtures / "formation.txt").string() + "'", dir);
    ASSERT_EQ(f.rc, 0) << f.err;
    auto j = nlohmann::json::parse(f.out);
    EXPECT_EQ(j["transition_levels"], nlohmann::json({1.0}));

    auto l = cli("lineshape '" + (fixtures / "batch" / "c_n").string() + "' --prefix cn", dir);
    ASSERT_EQ(l.rc, 0) << l.err;
    for (const char* suffix : {"_pl.txt", "_pl.csv", "_absorption.csv", "_density.csv"})
        EXPECT_TRUE(fs::exists(dir.path() / (std::string("cn") + suffix))) << suffix;
}
