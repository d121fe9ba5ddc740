#include <gtest/gtest.h>

#include <json.hpp>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#ifndef KNOBSYNC_CLI_PATH
#error "KNOBSYNC_CLI_PATH must point at the built command-line binary"
#endif

namespace {

using nlohmann::json;

struct CliResult {
  int exit_code = -1;
  json doc;
  std::string stderr_text;
};

std::filesystem::path temp_file(const std::string& stem, const std::string& ext) {
  static int counter = 0;
  return std::filesystem::temp_directory_path() /
         ("knobsync_cli_" + stem + "_" + std::to_string(counter++) + ext);
}

CliResult run_cli(const std::string& args, bool parse_output = true) {
  auto out_path = temp_file("out", ".json");
  auto err_path = temp_file("err", ".txt");
  std::string cmd = std::string(KNOBSYNC_CLI_PATH) + " " + args + " --output " +
                    out_path.string() + " 2>" + err_path.string();
  int status = std::system(cmd.c_str());

  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (parse_output) {
    std::ifstream in(out_path);
    if (in) in >> r.doc;
  }
  std::ifstream err(err_path);
  std::stringstream ss;
  ss << err.rdbuf();
  r.stderr_text = ss.str();
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return r;
}

// Two well-separated Gaussian blobs with a string truth column.
std::string write_blob_csv(bool with_truth, std::size_t per_cluster = 40,
                           double separation = 10.0, std::uint64_t seed = 5) {
  auto blobs = testsupport::two_blobs(per_cluster, 0.6, separation, seed);
  auto path = temp_file("blobs", ".csv");
  std::ofstream out(path);
  out.precision(17);
  if (with_truth)
    out << "x,y,class\n";
  else
    out << "x,y\n";
  for (std::size_t i = 0; i < blobs.data.n; ++i) {
    out << blobs.data(i, 0) << "," << blobs.data(i, 1);
    if (with_truth) out << "," << (blobs.truth[i] == 0 ? "a" : "b");
    out << "\n";
  }
  return path.string();
}

constexpr const char* kFastFlags = " --kmax 6 --start-cap 10 --seed 3";

}  // namespace

TEST(Cli, SuccessReportHasFullSchema) {
  auto csv = write_blob_csv(true);
  auto r = run_cli("--input " + csv + " --truth-col class" + kFastFlags);
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;

  EXPECT_EQ(r.doc.at("schema").get<int>(), 1);
  const auto& input = r.doc.at("input");
  EXPECT_EQ(input.at("n").get<int>(), 80);
  EXPECT_EQ(input.at("p").get<int>(), 2);
  EXPECT_EQ(input.at("missing_cells").get<int>(), 0);
  EXPECT_EQ(input.at("scale").get<std::string>(), "none");
  EXPECT_EQ(input.at("seed").get<int>(), 3);

  const auto& kmeans = r.doc.at("kmeans");
  EXPECT_GE(kmeans.at("k_hat").get<int>(), 1);
  EXPECT_EQ(kmeans.at("curve").size(), 6u);
  EXPECT_EQ(kmeans.at("selector").get<std::string>(), "jump");
  EXPECT_DOUBLE_EQ(kmeans.at("jump_y").get<double>(), 1.0);

  EXPECT_GT(r.doc.at("cdf").at("bandwidth").get<double>(), 0.0);
  EXPECT_TRUE(r.doc.at("overlap").contains("initial_omega_gen"));

  const auto& traces = r.doc.at("traces");
  ASSERT_EQ(traces.size(), 6u);
  EXPECT_DOUBLE_EQ(traces[0].at("kappa").get<double>(), 1.0);
  EXPECT_EQ(traces[5].at("kappa").get<std::string>(), "inf");
  for (const auto& t : traces) {
    EXPECT_TRUE(t.contains("reason"));
    EXPECT_TRUE(t.contains("iterations"));
  }

  const auto& result = r.doc.at("result");
  EXPECT_EQ(result.at("labels").size(), 80u);
  EXPECT_EQ(result.at("n_clusters").get<int>(), 2);
  int total = 0;
  for (const auto& s : result.at("cluster_sizes")) total += s.get<int>();
  EXPECT_EQ(total, 80);

  const auto& eval = r.doc.at("evaluation");
  EXPECT_DOUBLE_EQ(eval.at("ari").get<double>(), 1.0);
  EXPECT_EQ(eval.at("confusion").at("true_labels").size(), 2u);
}

TEST(Cli, TerminalOverlapRoundTripsFromFinalMatrix) {
  auto csv = write_blob_csv(true);
  auto r = run_cli("--input " + csv + " --truth-col class" + kFastFlags);
  ASSERT_EQ(r.exit_code, 0);

  const auto& result = r.doc.at("result");
  const auto& matrix = result.at("final_overlap_matrix");
  std::size_t K = matrix.size();
  ASSERT_GE(K, 1u);
  double reported = result.at("terminal_omega_gen").get<double>();
  if (K == 1) {
    EXPECT_DOUBLE_EQ(reported, 0.0);
    return;
  }
  std::vector<double> a;
  for (const auto& row : matrix) {
    ASSERT_EQ(row.size(), K);
    for (const auto& v : row) a.push_back(v.get<double>());
  }
  double lambda = testsupport::jacobi_eigenvalues(a, K).front();
  double omega = std::max(0.0, (lambda - 1.0) / static_cast<double>(K - 1));
  EXPECT_NEAR(reported, omega, 1e-9);
}

TEST(Cli, NoTruthMeansNoEvaluation) {
  auto csv = write_blob_csv(false);
  auto r = run_cli("--input " + csv + kFastFlags);
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_FALSE(r.doc.contains("evaluation"));
}

TEST(Cli, TruthColumnByIndex) {
  auto csv = write_blob_csv(true);
  auto r = run_cli("--input " + csv + " --truth-col 2" + kFastFlags);
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_TRUE(r.doc.contains("evaluation"));
  EXPECT_EQ(r.doc.at("input").at("p").get<int>(), 2);
}

TEST(Cli, UnknownTruthColumnFails) {
  auto csv = write_blob_csv(true);
  auto r = run_cli("--input " + csv + " --truth-col nonsense" + kFastFlags);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.doc.at("error").at("code").get<std::string>(), "bad_argument");
}

TEST(Cli, ParseErrorIsReportedAsJson) {
  auto path = temp_file("bad", ".csv");
  {
    std::ofstream out(path);
    out << "1,x\n2,3\n";
  }
  auto r = run_cli("--input " + path.string());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.doc.at("schema").get<int>(), 1);
  EXPECT_EQ(r.doc.at("error").at("code").get<std::string>(), "parse_error");
  EXPECT_FALSE(r.doc.at("error").at("message").get<std::string>().empty());
  std::remove(path.c_str());
}

TEST(Cli, MissingFileIsIoError) {
  auto r = run_cli("--input /nonexistent/nowhere.csv");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.doc.at("error").at("code").get<std::string>(), "io_error");
}

TEST(Cli, CustomMissingTokenCountsCells) {
  auto path = temp_file("missing", ".csv");
  {
    std::ofstream out(path);
    out << "a,b\n1,?\n2,3\n4,5\n5,6\n7,8\n";
  }
  auto r = run_cli("--input " + path.string() +
                   " --missing-token ? --kmax 2 --start-cap 4 --seed 1");
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  EXPECT_EQ(r.doc.at("input").at("missing_cells").get<int>(), 1);
  std::remove(path.c_str());
}

TEST(Cli, KappaListControlsSweep) {
  auto csv = write_blob_csv(false);
  auto r = run_cli("--input " + csv + " --kappa 2,inf" + kFastFlags);
  ASSERT_EQ(r.exit_code, 0);
  const auto& traces = r.doc.at("traces");
  ASSERT_EQ(traces.size(), 2u);
  EXPECT_DOUBLE_EQ(traces[0].at("kappa").get<double>(), 2.0);
  EXPECT_EQ(traces[1].at("kappa").get<std::string>(), "inf");
  auto kappa = r.doc.at("result").at("kappa");
  EXPECT_TRUE(kappa == json(2.0) || kappa == json("inf"));
}

TEST(Cli, InvalidKappaRejected) {
  auto csv = write_blob_csv(false);
  auto r = run_cli("--input " + csv + " --kappa 0,-2");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.doc.at("error").at("code").get<std::string>(), "bad_argument");
}

TEST(Cli, TransposedTriggerAccepted) {
  auto csv = write_blob_csv(false);
  auto r = run_cli("--input " + csv + " --trigger transposed" + kFastFlags);
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_TRUE(r.doc.at("traces")[0].contains("triggered"));
}

TEST(Cli, ScaleSdIsRecorded) {
  auto csv = write_blob_csv(false);
  auto r = run_cli("--input " + csv + " --scale sd" + kFastFlags);
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.doc.at("input").at("scale").get<std::string>(), "sd");
}

TEST(Cli, PcaProjectionChangesDimension) {
  auto path = temp_file("threed", ".csv");
  {
    testsupport::Rng rng(9);
    std::ofstream out(path);
    out.precision(17);
    out << "f1,f2,f3\n";
    for (int i = 0; i < 50; ++i) {
      double base = (i < 25) ? 0.0 : 8.0;
      out << base + rng.normal() << "," << base + rng.normal() << ","
          << 0.1 * rng.normal() << "\n";
    }
  }
  auto r = run_cli("--input " + path.string() + " --pca 2" + kFastFlags);
  ASSERT_EQ(r.exit_code, 0) << r.stderr_text;
  EXPECT_EQ(r.doc.at("input").at("p").get<int>(), 2);
  EXPECT_EQ(r.doc.at("input").at("pca_components").get<int>(), 2);
  std::remove(path.c_str());
}

TEST(Cli, PlotWritesSvgForTwoDimensionalData) {
  auto csv = write_blob_csv(true);
  auto svg = temp_file("plot", ".svg");
  auto r = run_cli("--input " + csv + " --truth-col class --plot " + svg.string() +
                   kFastFlags);
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.doc.at("plot").get<std::string>(), svg.string());
  std::ifstream in(svg);
  ASSERT_TRUE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string content = ss.str();
  EXPECT_NE(content.find("<svg"), std::string::npos);
  EXPECT_NE(content.find("<circle"), std::string::npos);  // truth class 0
  EXPECT_NE(content.find("<rect"), std::string::npos);    // truth class 1
  std::remove(svg.c_str());
}

TEST(Cli, PlotSkippedForHigherDimensions) {
  auto path = temp_file("threed", ".csv");
  {
    testsupport::Rng rng(12);
    std::ofstream out(path);
    out << "f1,f2,f3\n";
    for (int i = 0; i < 30; ++i)
      out << rng.normal() << "," << rng.normal() << "," << rng.normal() << "\n";
  }
  auto svg = temp_file("noplot", ".svg");
  auto r = run_cli("--input " + path.string() + " --plot " + svg.string() +
                   " --kmax 3 --start-cap 4 --seed 2");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_FALSE(r.doc.contains("plot"));
  EXPECT_FALSE(std::filesystem::exists(svg));
  EXPECT_NE(r.stderr_text.find("skipping SVG"), std::string::npos);
  std::remove(path.c_str());
}

TEST(Cli, UnknownFlagFailsUsage) {
  auto r = run_cli("--definitely-not-a-flag", false);
  EXPECT_NE(r.exit_code, 0);
}
