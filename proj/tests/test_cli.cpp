#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dencgp/cli.hpp"
#include "dencgp/data.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dencgp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("train.csv", ts::kColorCsv);
    write("schema.json", dencgp::schema_to_json(ts::color_schema()).dump());
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static int run(std::vector<std::string> args) {
    args.insert(args.begin(), "dencgp");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return dencgp::run_cli(static_cast<int>(argv.size()), argv.data());
  }

  int fit(const std::string& plan) {
    return run({"fit", "--train", path("train.csv"), "--schema", path("schema.json"), "--plan", plan, "--starts", "2",
                "--out", path("model")});
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, FitWritesModelAndEchoesConfig) {
  ASSERT_EQ(fit("U1=w2"), 0);
  const auto model = nlohmann::json::parse(read("model/model.json"));
  EXPECT_EQ(model["format"], "dencgp-model/1");
  const auto summary = nlohmann::json::parse(read("model/fit_summary.json"));
  EXPECT_TRUE(summary.dump().find("U1=w2") != std::string::npos);
}

TEST_F(CliTest, BadSchemaIsAConfigError) {
  write("bad.json", R"([{"name":"X1","kind":"sideways"}])");
  EXPECT_EQ(run({"fit", "--train", path("train.csv"), "--schema", path("bad.json"), "--out", path("m")}), 2);
  EXPECT_EQ(run({"fit", "--train", path("missing.csv"), "--schema", path("schema.json"), "--out", path("m")}), 2);
  EXPECT_EQ(run({"fit", "--no-such-flag"}), 2);
}

TEST_F(CliTest, BestLooSelection) {
  EXPECT_EQ(run({"fit", "--train", path("train.csv"), "--schema", path("schema.json"), "--plan", "bestloo",
                 "--candidates", "mean,w2", "--starts", "2", "--out", path("model")}),
            0);
  const auto summary = nlohmann::json::parse(read("model/fit_summary.json"));
  EXPECT_TRUE(summary.dump().find("loo") != std::string::npos);
}

TEST_F(CliTest, PredictInterpolatesTrainingRows) {
  ASSERT_EQ(fit("U1=w2"), 0);
  ASSERT_EQ(run({"predict", "--model", path("model/model.json"), "--test", path("train.csv"), "--out", path("pred")}),
            0);
  std::istringstream in(read("pred/predictions.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "row,mean,variance");
  const auto ds = ts::color_rows();
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    ASSERT_TRUE(std::getline(in, line));
    double mean = 0;
    std::sscanf(line.c_str(), "%*d,%lf", &mean);
    EXPECT_NEAR(mean, ds.y()(i, 0), 1e-3);
  }
  EXPECT_TRUE(fs::exists(path("pred/predict_config.json")));
}

TEST_F(CliTest, PredictUnseenLevel) {
  ASSERT_EQ(fit("U1=w2"), 0);
  write("test.csv", "X1,X2,U1\n0.5,0.1,purple\n");
  EXPECT_EQ(run({"predict", "--model", path("model/model.json"), "--test", path("test.csv"), "--out", path("p1")}), 3);
  write("aux.csv",
        "X1,X2,U1,Y\n0,0,red,-2\n0,0,red,-3\n0,0,green,0.5\n0,0,green,0.7\n0,0,blue,2\n0,0,blue,3\n"
        "0,0,purple,1\n0,0,purple,1.5\n");
  EXPECT_EQ(run({"predict", "--model", path("model/model.json"), "--test", path("test.csv"), "--aux", path("aux.csv"),
                 "--aux-mode", "replace", "--aux-inputs", "U1", "--aux-output", "Y", "--out", path("p2")}),
            0);
  EXPECT_NE(read("p2/predictions.csv").find("\n0,"), std::string::npos);
}

TEST_F(CliTest, SobolJsonWithPlan) {
  ASSERT_EQ(run({"sobol", "--data", path("train.csv"), "--schema", path("schema.json"), "--format", "json", "--out",
                 path("s")}),
            0);
  const auto j = nlohmann::json::parse(read("s/sobol.json"));
  EXPECT_TRUE(j.contains("interaction_plan"));
  EXPECT_EQ(run({"sobol", "--data", path("train.csv"), "--schema", path("schema.json"), "--format", "xml"}), 2);
}

TEST_F(CliTest, EncodeExportNormalized) {
  ASSERT_EQ(run({"encode-export", "--data", path("train.csv"), "--schema", path("schema.json"), "--input", "U1",
                 "--method", "w2", "--normalize", "--out", path("e")}),
            0);
  EXPECT_EQ(read("e/distances.csv").substr(0, 21), "level,red,green,blue\n");
  const auto j = nlohmann::json::parse(read("e/distances.json"));
  double largest = 0;
  for (const auto& row : j["normalized"])
    for (double v : row) largest = std::max(largest, v);
  EXPECT_DOUBLE_EQ(largest, 1.0);
  EXPECT_EQ(run({"encode-export", "--data", path("train.csv"), "--schema", path("schema.json"), "--input", "U1",
                 "--method", "mean", "--distance", "w2", "--out", path("e2")}),
            2);
}

TEST_F(CliTest, BenchmarkOutputsAndConfigFile) {
  write("bench.json", R"({"function":"beam","methods":"mean,w2","replications":1,"n_test":100,"starts":1,
                          "seed":3})");
  ASSERT_EQ(run({"benchmark", "--config", path("bench.json"), "--out", path("b")}), 0);
  const auto csv = read("b/records.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "replication,seed,method,output,rrmse,status");
  const auto report = nlohmann::json::parse(read("b/report.json"));
  EXPECT_EQ(report["config"]["seed"], 3);
  // An explicit flag overrides the config file.
  ASSERT_EQ(run({"benchmark", "--config", path("bench.json"), "--seed", "4", "--out", path("b2")}), 0);
  EXPECT_EQ(nlohmann::json::parse(read("b2/report.json"))["config"]["seed"], 4);
  EXPECT_EQ(run({"benchmark", "--function", "beam", "--methods", "replace", "--out", path("b3")}), 2);
}
