#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "server.hpp"
#include "support.hpp"

using namespace fusedpath;
namespace fs = std::filesystem;

namespace {

const std::string kData = std::string(FUSEDPATH_EXAMPLE_DIR) + "/data/toy_beef.csv";
const std::string kSchema = std::string(FUSEDPATH_EXAMPLE_DIR) + "/data/toy_beef.schema";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("fusedpath_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Run {
    int code = -1;
    std::string err;
};

// Runs the CLI binary; stderr is captured.
Run run_cli(const std::string& args, const fs::path& dir) {
    const auto err = dir / "stderr.txt";
    const std::string cmd = std::string(FUSEDPATH_CLI) + " " + args + " 2> \"" + err.string() + "\" > /dev/null";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

std::string toy_args(const fs::path& out) {
    return "--data \"" + kData + "\" --schema \"" + kSchema + "\" --out \"" + out.string() + "\"";
}

void expect_same_files(const fs::path& a, const fs::path& b, const std::vector<std::string>& names) {
    for (const auto& n : names) {
        ASSERT_TRUE(fs::exists(a / n)) << n;
        EXPECT_EQ(slurp(a / n), slurp(b / n)) << n;
    }
}

cli::RunConfig toy_config(const fs::path& out) {
    cli::RunConfig cfg;
    cfg.data = kData;
    cfg.schema = kSchema;
    cfg.out = out.string();
    cfg.fit.grid_size = 20;
    return cfg;
}

} // namespace

TEST(Cli, SummarizeWritesThreeDeterministicFiles) {
    auto dir = scratch("summarize");
    ASSERT_EQ(run_cli("summarize " + toy_args(dir / "a"), dir).code, 0);
    ASSERT_EQ(run_cli("summarize " + toy_args(dir / "b"), dir).code, 0);
    expect_same_files(dir / "a", dir / "b", {"summary_stats.csv", "class_sizes.csv", "missingness.csv"});
    EXPECT_EQ(std::distance(fs::directory_iterator(dir / "a"), fs::directory_iterator{}), 3);
    const auto sizes = slurp(dir / "a" / "class_sizes.csv");
    EXPECT_EQ(sizes.substr(0, sizes.find('\n')), "class,n");
}

TEST(Cli, MissingInputNamesPath) {
    auto dir = scratch("missing");
    auto r = run_cli("summarize --data /nonexistent/where.csv --out \"" + dir.string() + "\"", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("/nonexistent/where.csv"), std::string::npos);
}

TEST(Cli, EmptyClassWarnsAndSucceeds) {
    auto dir = scratch("empty_class");
    std::ofstream(dir / "in.csv") << "class,response,x\nA,10,1\nA,20,2\nA,25,3\nB,,4\n";
    auto r = run_cli("summarize --data \"" + (dir / "in.csv").string() + "\" --out \"" + (dir / "out").string() + "\"", dir);
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning: class 'B'"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    auto dir = scratch("exit_codes");
    EXPECT_EQ(run_cli("path --bogus-flag", dir).code, 1);
    EXPECT_EQ(run_cli("", dir).code, 1);
    EXPECT_EQ(run_cli("path " + toy_args(dir) + " --grid-size 0", dir).code, 1);
    EXPECT_EQ(run_cli("evaluate " + toy_args(dir) + " --thresholds 80,60,40", dir).code, 1);
    std::ofstream(dir / "bad.csv") << "class,response,x\nA,10,abc\n";
    EXPECT_EQ(run_cli("path --data \"" + (dir / "bad.csv").string() + "\" --out \"" + dir.string() + "\"", dir).code, 2);
    auto r = run_cli("path " + toy_args(dir) + " --max-iter 1", dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("did not converge"), std::string::npos);
}

TEST(Cli, PathGridRowsAndLambdaMax) {
    auto dir = scratch("path");
    ASSERT_EQ(run_cli("path " + toy_args(dir / "a") + " --grid-size 5", dir).code, 0);
    std::istringstream csv(slurp(dir / "a" / "path.csv"));
    auto table = read_csv(csv);
    std::map<std::pair<std::string, std::string>, int> rows;
    for (const auto& r : table.rows) ++rows[{r[1], r[2]}];
    ASSERT_FALSE(rows.empty());
    for (const auto& [key, count] : rows) EXPECT_EQ(count, 6) << key.first << " " << key.second;

    auto grid = Json::parse(slurp(dir / "a" / "lambda_grid.json"));
    auto prep = cli::prepare(toy_config(dir), std::cerr);
    EXPECT_EQ(grid["lambda_max"].get<double>(), lambda_max(prep.problem));
    EXPECT_EQ(grid["grid"].size(), 6u);
    EXPECT_EQ(grid["schema"], kSchemaVersion);
}

TEST(Cli, PathAndCvAreByteIdenticalOnRerun) {
    auto dir = scratch("determinism");
    for (const char* sub : {"a", "b"}) {
        ASSERT_EQ(run_cli("path " + toy_args(dir / sub) + " --grid-size 30", dir).code, 0);
        ASSERT_EQ(run_cli("cv " + toy_args(dir / sub) + " --grid-size 30 --seed 7", dir).code, 0);
    }
    expect_same_files(dir / "a", dir / "b",
                      {"path.csv", "lambda_grid.json", "cv_folds.csv", "cv_curve.csv", "aic.csv", "selection.json",
                       "model_cv_selected.json", "model_aic_selected.json"});
}

TEST(Cli, CvSelectionIsOnTheGridAndSeedFixesFolds) {
    auto dir = scratch("cv");
    ASSERT_EQ(run_cli("cv " + toy_args(dir / "a") + " --grid-size 15", dir).code, 0);
    ASSERT_EQ(run_cli("cv " + toy_args(dir / "b") + " --grid-size 15 --seed 2", dir).code, 0);
    auto sel = Json::parse(slurp(dir / "a" / "selection.json"));
    EXPECT_EQ(sel["k"], 5);
    const auto grid = sel["grid"].get<std::vector<double>>();
    const double lambda = sel["cv_selected"]["lambda"].get<double>();
    EXPECT_NE(std::find(grid.begin(), grid.end(), lambda), grid.end());
    const double aic_lambda = sel["aic_selected"]["lambda"].get<double>();
    EXPECT_NE(std::find(grid.begin(), grid.end(), aic_lambda), grid.end());
    EXPECT_NE(slurp(dir / "a" / "cv_folds.csv"), slurp(dir / "b" / "cv_folds.csv"));
    auto model = Json::parse(slurp(dir / "a" / "model_cv_selected.json"));
    EXPECT_EQ(model["lambda"].get<double>(), lambda);
}

TEST(Cli, EvaluateFourMethodsAndThresholdEcho) {
    auto dir = scratch("evaluate");
    ASSERT_EQ(run_cli("evaluate " + toy_args(dir) + " --grid-size 15 --thresholds 40,60,80", dir).code, 0);
    const auto table = slurp(dir / "evaluation.csv");
    EXPECT_EQ(table.substr(0, table.find('\n')), "class,n,CV selected,new pooled,classic pooled,separate");
    auto j = Json::parse(slurp(dir / "evaluation.json"));
    EXPECT_EQ(j["thresholds"]["t3"], 40.0);
    EXPECT_EQ(j["thresholds"]["t4"], 60.0);
    EXPECT_EQ(j["thresholds"]["t5"], 80.0);
    EXPECT_EQ(j["methods"].size(), 4u);
}

TEST(Cli, EvaluatePerfectFitGivesZeroMae) {
    auto dir = scratch("perfect");
    std::ofstream csv(dir / "in.csv");
    csv << "class,response,x\n";
    for (const char* c : {"A", "B", "C"})
        for (int i = 0; i < 12; ++i) csv << c << "," << 10 + 2 * i << "," << i << "\n";
    csv.close();
    cli::RunConfig cfg;
    cfg.data = (dir / "in.csv").string();
    cfg.out = (dir / "out").string();
    cfg.fit.grid_size = 10;
    cfg.thresholds = StarThresholds{21, 25, 29};
    std::ostringstream log;
    ASSERT_EQ(cli::cmd_evaluate(cfg, log), 0);
    auto j = Json::parse(slurp(dir / "out" / "evaluation.json"));
    for (const auto& m : j["methods"]) {
        EXPECT_NEAR(m["macro_mae"].get<double>(), 0.0, 1e-9) << m["method"];
        EXPECT_EQ(m["accuracy"].get<double>(), 1.0) << m["method"];
    }
}

// ---------------------------------------------------------------------------
// HTTP service

class ServiceTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fs::path(scratch("serve"));
        auto cfg = toy_config(*dir_);
        std::ostringstream log;
        auto prep = cli::prepare(cfg, log);
        auto fitted = cli::fit_all(prep, cfg, log);
        // file-based exports for round-trip comparisons
        ASSERT_EQ(cli::cmd_cv(cfg, log), 0);
        state_ = new cli::ServiceState(std::move(prep), std::move(fitted), *dir_);
        server_ = new httplib::Server;
        cli::install_routes(*server_, *state_);
        port_ = server_->bind_to_any_port("127.0.0.1");
        thread_ = new std::thread([] { server_->listen_after_bind(); });
        server_->wait_until_ready();
    }

    static void TearDownTestSuite() {
        server_->stop();
        thread_->join();
        delete thread_;
        delete server_;
        delete state_;
        delete dir_;
    }

    static httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

    static inline fs::path* dir_ = nullptr;
    static inline cli::ServiceState* state_ = nullptr;
    static inline httplib::Server* server_ = nullptr;
    static inline std::thread* thread_ = nullptr;
    static inline int port_ = 0;
};

TEST_F(ServiceTest, MetaPathCvCarrySchema) {
    auto c = client();
    for (const char* ep : {"/api/meta", "/api/path", "/api/cv"}) {
        auto res = c.Get(ep);
        ASSERT_TRUE(res) << ep;
        EXPECT_EQ(res->status, 200);
        EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
        EXPECT_EQ(Json::parse(res->body)["schema"], kSchemaVersion) << ep;
    }
    auto meta = Json::parse(c.Get("/api/meta")->body);
    EXPECT_EQ(meta["classes"].size(), 4u);
    // the slow-cook class has no feed column at all
    bool masked_feed = false;
    for (const auto& cls : meta["classes"])
        for (const auto& m : cls["masked"]) masked_feed = masked_feed || m == "feed=grain";
    EXPECT_TRUE(masked_feed);
    auto cv = Json::parse(c.Get("/api/cv")->body);
    EXPECT_EQ(cv, Json::parse(slurp(*dir_ / "selection.json")));
}

TEST_F(ServiceTest, ModelAtZeroIsSeparateOls) {
    auto res = client().Get("/api/model?lambda=0");
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    auto j = Json::parse(res->body);
    EXPECT_EQ(j["lambda"], 0.0);
    auto prep = cli::prepare(toy_config(*dir_), std::cerr);
    const auto sep = fit_separate(prep.problem);
    const auto& layout = prep.problem.layout();
    for (std::size_t m = 0; m < layout.num_classes(); ++m) {
        const auto& c = j["coefficients"][m];
        EXPECT_NEAR(c["intercept"].get<double>(), sep.intercepts(static_cast<Eigen::Index>(m)), 1e-6);
        for (auto p : layout.predictors(m))
            EXPECT_NEAR(c["slopes"][prep.standardized.predictors[p].name]["standardized"].get<double>(),
                        sep.slopes(layout.column(m, p)), 1e-6);
    }
}

TEST_F(ServiceTest, ModelAtLambdaMaxIsFullyFused) {
    const double lmax = state_->lambda_max();
    auto res = client().Get(("/api/model?lambda=" + format_double(lmax)).c_str());
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    auto j = Json::parse(res->body);
    for (const auto& [name, groups] : j["partition"].items()) EXPECT_EQ(groups.size(), 1u) << name;
}

TEST_F(ServiceTest, OutOfRangeAndMalformedLambdaAre400) {
    auto c = client();
    for (const std::string& q : std::vector<std::string>{"lambda=-1", "lambda=" + format_double(state_->lambda_max() * 2), "lambda=abc", "x=1"}) {
        auto res = c.Get(("/api/model?" + q).c_str());
        ASSERT_TRUE(res) << q;
        EXPECT_EQ(res->status, 400) << q;
        auto j = Json::parse(res->body);
        EXPECT_EQ(j["schema"], kSchemaVersion);
        EXPECT_EQ(j["bounds"][1].get<double>(), state_->lambda_max()) << q;
    }
    auto res = c.Post("/api/select", "not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, SelectRoundTripsCvSelectedExport) {
    auto c = client();
    auto cv = Json::parse(c.Get("/api/cv")->body);
    const double lambda = cv["cv_selected"]["lambda"].get<double>();
    Json body{{"lambda", lambda}};
    auto first = c.Post("/api/select", body.dump(), "application/json");
    auto second = c.Post("/api/select", body.dump(), "application/json");
    ASSERT_TRUE(first);
    ASSERT_TRUE(second);
    ASSERT_EQ(first->status, 200);
    const auto f1 = Json::parse(first->body)["file"].get<std::string>();
    const auto f2 = Json::parse(second->body)["file"].get<std::string>();
    EXPECT_NE(f1, f2);
    const auto expected = slurp(*dir_ / "model_cv_selected.json");
    EXPECT_EQ(slurp(f1), expected);
    EXPECT_EQ(slurp(f2), expected);
    // the GET body is the same document
    auto model = c.Get(("/api/model?lambda=" + format_double(lambda)).c_str());
    EXPECT_EQ(model->body, expected);
}

TEST_F(ServiceTest, PortBusyIsReported) {
    auto cfg = toy_config(scratch("busy"));
    cfg.port = port_;
    cfg.fit.grid_size = 5;
    std::ostringstream log;
    EXPECT_THROW(cli::cmd_serve(cfg, log), UsageError);
}
