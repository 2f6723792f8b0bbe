#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "hcspmm/hcspmm.hpp"

using namespace hcspmm;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
    nlohmann::json report() const { return nlohmann::json::parse(out); }
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "hcspmm");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("hcspmm_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }

    // Scrambled block-community graph written as a Matrix Market pattern file.
    std::string community_graph(index_t blocks = 12) const {
        Rng rng(5);
        const auto g = block_community_graph(blocks, 16, 0.6, 0.01, rng);
        const auto scrambled = relabel(g, random_permutation(g.num_vertices, rng));
        write_matrix_market_file(path("bc.mtx"), scrambled.adjacency, MmField::Pattern);
        return path("bc.mtx");
    }

    fs::path dir;
};

TEST_F(CliTest, ConvertSingleUndirectedEdge) {
    spit(dir / "e.txt", "0 1\n");
    const auto r = cli({"convert", "--in", path("e.txt"), "--out", path("a.mtx")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = r.report();
    EXPECT_EQ(j["command"], "convert");
    EXPECT_EQ(j["metrics"]["nnz"], 2);
    EXPECT_EQ(j["metrics"]["num_vertices"], 2);
    EXPECT_EQ(j["metrics"]["index_base"], 0);
    EXPECT_EQ(slurp(dir / "a.mtx"), "%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n2 1\n");
}

TEST_F(CliTest, ConvertIsIdempotent) {
    spit(dir / "s.mtx",
         "%%MatrixMarket matrix coordinate real symmetric\n% comment\n4 4 3\n2 1 0.5\n4 3 -2\n3 3 1e-3\n");
    ASSERT_EQ(cli({"convert", "--in", path("s.mtx"), "--out", path("once.mtx")}).code, 0);
    ASSERT_EQ(cli({"convert", "--in", path("once.mtx"), "--out", path("twice.mtx")}).code, 0);
    EXPECT_EQ(slurp(dir / "once.mtx"), slurp(dir / "twice.mtx"));
    EXPECT_EQ(load_matrix_market(path("once.mtx")).nnz(), 5);

    spit(dir / "e.txt", "3 1\n1 2\n2 3\n");
    ASSERT_EQ(cli({"convert", "--in", path("e.txt"), "--out", path("e1.mtx")}).code, 0);
    ASSERT_EQ(cli({"convert", "--in", path("e1.mtx"), "--out", path("e2.mtx")}).code, 0);
    EXPECT_EQ(slurp(dir / "e1.mtx"), slurp(dir / "e2.mtx"));
}

TEST_F(CliTest, ConvertKeepsOneBasedMatrixMarketEntries) {
    spit(dir / "p.mtx", "%%MatrixMarket matrix coordinate pattern general\n3 3 2\n1 1\n3 2\n");
    ASSERT_EQ(cli({"convert", "--in", path("p.mtx"), "--out", path("q.mtx")}).code, 0);
    EXPECT_EQ(slurp(dir / "q.mtx"), "%%MatrixMarket matrix coordinate pattern general\n3 3 2\n1 1\n3 2\n");
}

TEST_F(CliTest, ConvertRecordsOneBasedEdgeList) {
    spit(dir / "e.txt", "1 2\n");
    const auto r = cli({"convert", "--in", path("e.txt"), "--directed"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.report()["metrics"]["index_base"], 1);
    EXPECT_EQ(r.report()["metrics"]["nnz"], 1);
    EXPECT_EQ(r.report()["metrics"]["num_vertices"], 2);
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"no-such-command"}).code, 1);
    EXPECT_EQ(cli({"convert"}).code, 1);  // --in is required
    EXPECT_EQ(cli({"--precision", "f16", "sweep"}).code, 1);
    EXPECT_EQ(cli({"--help"}).code, 0);

    const auto missing = cli({"convert", "--in", path("absent.txt")});
    EXPECT_EQ(missing.code, 2);
    EXPECT_TRUE(missing.out.empty());
    EXPECT_NE(missing.err.find("absent.txt"), std::string::npos);

    spit(dir / "bad.txt", "0 x\n");
    EXPECT_EQ(cli({"convert", "--in", path("bad.txt")}).code, 2);
    spit(dir / "params.json", "{\"alpha_scalar\": 1}");
    EXPECT_EQ(cli({"sweep", "--params", path("params.json")}).code, 2);
    spit(dir / "broken.json", "{not json");
    EXPECT_EQ(cli({"sweep", "--params", path("broken.json")}).code, 2);
}

TEST_F(CliTest, ReportFileReplacesStdout) {
    const auto r = cli({"--report-file", path("r.json"), "sweep"});
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(r.out.empty());
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "r.json"))["command"], "sweep");
}

TEST_F(CliTest, PipelineOnIdentitySumsTheDenseInput) {
    write_matrix_market_file(path("id.mtx"), identity_csr<double>(37), MmField::Pattern);
    Rng rng(11);
    const auto x = random_dense<double>(37, 4, rng);
    double expected = 0;
    for (double v : x.data) expected += v;

    for (const char* loa : {"", "--loa"}) {
        std::vector<std::string> args{"--quiet", "--seed", "11", "pipeline", "--graph", path("id.mtx"), "--dim", "4"};
        if (*loa) args.push_back(loa);
        const auto r = cli(args);
        ASSERT_EQ(r.code, 0) << r.err;
        const auto m = r.report()["metrics"];
        EXPECT_NEAR(m["spmm_checksum"].get<double>(), expected, 1e-12);
        EXPECT_EQ(m["windows_total"], 3);
        EXPECT_EQ(m["loa_applied"], *loa ? 1 : 0);
    }
}

TEST_F(CliTest, PipelineOutputMatchesOracleInOriginalIds) {
    const auto g = community_graph();
    const auto r = cli({"--quiet", "pipeline", "--graph", g, "--loa", "--dim", "8", "--out", path("z.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    Rng rng(42);
    const auto a = load_matrix_market(g);
    const auto x = random_dense<double>(a.num_rows, 8, rng);
    std::ifstream in(path("z.csv"));
    const auto z = read_dense_csv<double>(in);
    EXPECT_LE(max_relative_error(z, spmm_dense_oracle(a, x)), 1e-12);
}

TEST_F(CliTest, PipelineIsDeterministic) {
    const auto g = community_graph();
    const std::vector<std::string> args{"--quiet", "--threads", "1", "pipeline", "--graph", g, "--loa"};
    const auto first = cli(args), second = cli(args);
    ASSERT_EQ(first.code, 0) << first.err;
    EXPECT_EQ(first.out, second.out);

    auto threaded = args;
    threaded[2] = "3";
    const auto r3 = cli(threaded);
    ASSERT_EQ(r3.code, 0);
    EXPECT_EQ(r3.report()["metrics"], first.report()["metrics"]);
}

TEST_F(CliTest, PipelineReportsStageOnFailure) {
    const auto r = cli({"pipeline", "--graph", path("nothing.mtx")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("stage load"), std::string::npos) << r.err;

    write_matrix_market_file(path("id.mtx"), identity_csr<double>(5), MmField::Pattern);
    spit(dir / "x.csv", "1,2\n3,4\n");
    const auto bad_dense = cli({"--quiet", "pipeline", "--graph", path("id.mtx"), "--dense", path("x.csv")});
    EXPECT_EQ(bad_dense.code, 2);
    EXPECT_NE(bad_dense.err.find("stage dense"), std::string::npos) << bad_dense.err;
}

TEST_F(CliTest, SpmmModesAgreeWithOracle) {
    Rng rng(8);
    const auto a = random_csr<double>(70, 70, 0.08, rng);
    write_matrix_market_file(path("a.mtx"), a);
    const auto x = random_dense<double>(70, 5, rng);
    {
        std::ofstream out(path("x.csv"));
        write_dense_csv(out, x);
    }
    const auto ref = spmm_dense_oracle(a, x);
    for (const char* mode : {"scalar", "tile", "hybrid"}) {
        const auto r = cli({"--quiet", "spmm", "--matrix", path("a.mtx"), "--dense", path("x.csv"),
                            "--mode", mode, "--out", path("z.csv"), "--stats", path("s.json")});
        ASSERT_EQ(r.code, 0) << mode << ": " << r.err;
        std::ifstream in(path("z.csv"));
        EXPECT_LE(max_relative_error(read_dense_csv<double>(in), ref), 1e-12) << mode;
    }
    const auto f32 = cli({"--quiet", "--precision", "f32", "spmm", "--matrix", path("a.mtx"),
                          "--dense", path("x.csv"), "--out", path("z32.csv")});
    ASSERT_EQ(f32.code, 0);
    std::ifstream in(path("z32.csv"));
    EXPECT_LE(max_relative_error(read_dense_csv<double>(in), ref), 1e-5);
}

TEST_F(CliTest, SpmmRandomDenseSpec) {
    write_matrix_market_file(path("id.mtx"), identity_csr<double>(20), MmField::Pattern);
    const auto r = cli({"--quiet", "spmm", "--matrix", path("id.mtx"), "--dense", "random:dim=3,seed=7", "--mode", "tile"});
    ASSERT_EQ(r.code, 0) << r.err;
    Rng rng(7);
    double expected = 0;
    for (double v : random_dense<double>(20, 3, rng).data) expected += v;
    EXPECT_NEAR(r.report()["metrics"]["checksum"].get<double>(), expected, 1e-12);
    EXPECT_EQ(r.report()["metrics"]["dim"], 3);
    EXPECT_EQ(cli({"spmm", "--matrix", path("id.mtx"), "--dense", "random:dims=3"}).code, 2);
}

TEST_F(CliTest, PartitionReportCsv) {
    const auto g = community_graph(2);
    const auto r = cli({"partition-report", "--matrix", g, "--out", path("w.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto text = slurp(dir / "w.csv");
    EXPECT_EQ(text.substr(0, text.find('\n')), "window_id,nnz,ncols,density,computing_intensity");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    EXPECT_EQ(r.report()["metrics"]["windows_total"], 2);
    EXPECT_EQ(r.report()["metrics"]["nnz"], load_matrix_market(g).nnz());
}

TEST_F(CliTest, TrainThenClassify) {
    const auto t = cli({"train-selector", "--out", path("m.json")});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_EQ(t.report()["metrics"]["samples"], 480);
    EXPECT_EQ(load_model(path("m.json")), default_model());

    const auto g = community_graph(3);
    const auto c = cli({"classify", "--model", path("m.json"), "--matrix", g, "--out", path("a.csv")});
    ASSERT_EQ(c.code, 0) << c.err;
    const auto text = slurp(dir / "a.csv");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    EXPECT_EQ(c.report()["metrics"]["windows_total"], 3);
}

TEST_F(CliTest, SweepAndCalibrateOnTheCostModel) {
    const auto s = cli({"sweep", "--out", path("s.csv")});
    ASSERT_EQ(s.code, 0);
    EXPECT_DOUBLE_EQ(s.report()["metrics"]["crossover_density"].get<double>(),
                     *crossover_density(32, 32, CostParams::defaults()));
    EXPECT_EQ(s.report()["metrics"]["points"], 15);

    const auto c = cli({"--quiet", "calibrate", "--provider", "cost-model", "--out", path("p.json")});
    ASSERT_EQ(c.code, 0) << c.err;
    const auto p = load_cost_params(path("p.json"));
    EXPECT_EQ(p.provenance.provider, "cost-model");
    const auto d = CostParams::defaults();
    EXPECT_NEAR(p.params.beta_scalar, d.beta_scalar, 1e-9 * d.beta_scalar);
    EXPECT_NEAR(p.params.gamma_tile, d.gamma_tile, 1e-9 * d.gamma_tile);

    const auto again = cli({"sweep", "--params", path("p.json")});
    EXPECT_EQ(again.report()["version"]["params_file"], 1);
}

TEST_F(CliTest, LoaWritesConsistentArtifacts) {
    const auto g = community_graph(8);
    const auto r = cli({"--quiet", "loa", "--graph", g, "--vw", "64", "--out", path("re.mtx"),
                        "--perm", path("perm.csv"), "--report", path("loa.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto original = load_matrix_market(g);

    std::ifstream in(path("perm.csv"));
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "old_id,new_id");
    std::vector<index_t> perm;
    while (std::getline(in, line)) perm.push_back(std::stoll(line.substr(line.find(',') + 1)));
    ASSERT_TRUE(is_permutation(perm, original.num_rows));
    EXPECT_EQ(load_matrix_market(path("re.mtx")), permute_symmetric(original, perm));

    const auto m = r.report()["metrics"];
    EXPECT_GT(m["mean_ci_after"].get<double>(), m["mean_ci_before"].get<double>());
    const auto lr = nlohmann::json::parse(slurp(dir / "loa.json"));
    EXPECT_EQ(lr["before"].size(), 8u);
    EXPECT_EQ(lr["after"].size(), 8u);
}

TEST_F(CliTest, GnnBenchTraffic) {
    const auto g = community_graph(4);
    const auto r = cli({"--quiet", "gnn-bench", "--graph", g, "--din", "8", "--dout", "5",
                        "--repeats", "1", "--out", path("bench.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = r.report()["metrics"];
    EXPECT_EQ(m["fused_forward_intermediate_writes"], 0);
    EXPECT_EQ(m["unfused_forward_intermediate_writes"], 64 * 8);
    EXPECT_EQ(m["fused_forward_pass_launches"], 1);
    EXPECT_EQ(m["unfused_forward_pass_launches"], 2);
    EXPECT_LE(m["max_rel_diff"].get<double>(), 1e-12);
    const auto bench = nlohmann::json::parse(slurp(dir / "bench.json"));
    EXPECT_EQ(bench["modes"].size(), 2u);
    EXPECT_EQ(cli({"gnn-bench", "--graph", g}).code, 1);  // --out is required
}

}  // namespace
