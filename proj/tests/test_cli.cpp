#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "app.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using compclust::app::RunConfig;
using compclust::app::run_command;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("compclust_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const RunConfig& cfg, std::string* out = nullptr) {
  std::ostringstream log, err;
  const int rc = run_command(cfg, log, err);
  if (out) *out = log.str();
  if (rc != 0) ADD_FAILURE() << err.str();
  return rc;
}

RunConfig simulate_config(const fs::path& dir, int k, std::vector<double> p) {
  RunConfig c;
  c.command = "simulate";
  c.output_dir = dir.string();
  c.k = k;
  c.p = std::move(p);
  c.sigma = 0.4;
  c.lambda = 20;
  c.seed = 5;
  c.window = "0,0,8,8";
  return c;
}

RunConfig fit_config(const fs::path& input, const fs::path& out) {
  RunConfig c;
  c.command = "fit";
  c.input = input.string();
  c.output_dir = out.string();
  c.window = "0,0,8,8";
  c.sweeps = 30;
  c.burn_in = 5;
  c.chains = 2;
  c.n_moves = 10;
  c.sigma_max = 5.0;
  c.k_lambda = 20;
  c.seed = 11;
  c.association_reps = 2;
  return c;
}

}  // namespace

TEST(Cli, SimulateThenFitEmitsAllFiles) {
  const fs::path dir = scratch("fit");
  ASSERT_EQ(run(simulate_config(dir / "sim", 3, {0.3, 0.3, 0.4})), 0);
  for (const char* f : {"pattern.csv", "truth.csv", "report.json"}) EXPECT_TRUE(fs::exists(dir / "sim" / f)) << f;
  auto cfg = fit_config(dir / "sim" / "pattern.csv", dir / "fit");
  cfg.save_partitions = true;
  ASSERT_EQ(run(cfg), 0);
  for (const char* f : {"samples_chain0.csv", "samples_chain1.csv", "partitions_chain0.csv", "summary.csv",
                        "hist_p1.csv", "hist_sigma.csv", "comembership.csv", "association.csv", "cleaning_log.csv",
                        "report.json"})
    EXPECT_TRUE(fs::exists(dir / "fit" / f)) << f;
  const auto report = compclust::app::json::parse(slurp(dir / "fit" / "report.json"));
  EXPECT_EQ(report["config"]["sweeps"], 30);
  EXPECT_TRUE(report.contains("diagnostics"));

  RunConfig d;
  d.command = "diagnose";
  d.input = (dir / "fit").string();
  d.output_dir = "";
  ASSERT_EQ(run(d), 0);
  EXPECT_TRUE(fs::exists(dir / "fit" / "diagnostics.json"));
}

TEST(Cli, FitIsDeterministic) {
  const fs::path dir = scratch("det");
  ASSERT_EQ(run(simulate_config(dir / "sim", 3, {0.3, 0.3, 0.4})), 0);
  ASSERT_EQ(run(fit_config(dir / "sim" / "pattern.csv", dir / "a")), 0);
  ASSERT_EQ(run(fit_config(dir / "sim" / "pattern.csv", dir / "b")), 0);
  for (const char* f : {"summary.csv", "samples_chain0.csv", "samples_chain1.csv", "comembership.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Cli, TwoColourSamplers) {
  const fs::path dir = scratch("fit2");
  ASSERT_EQ(run(simulate_config(dir / "sim", 2, {0.4, 0.6})), 0);
  for (int variant = 0; variant < 3; ++variant) {
    RunConfig c;
    c.command = "fit2";
    c.input = (dir / "sim" / "pattern.csv").string();
    c.output_dir = (dir / ("v" + std::to_string(variant))).string();
    c.window = "0,0,8,8";
    c.sigma = 0.4;
    c.uniform_g = true;
    c.sweeps = 200;
    c.burn_in = 10;
    c.chains = 2;
    c.tempering = variant == 1;
    c.tile_side = variant == 2 ? 2.0 : 0.0;
    c.r_max = variant == 2 ? 1.5 : 0.0;
    ASSERT_EQ(run(c), 0) << variant;
    for (const char* f : {"samples_chain0.csv", "comembership.csv", "report.json"})
      EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / f)) << variant << " " << f;
  }
}

TEST(Cli, ModeOnDenseTable) {
  const fs::path dir = scratch("mode");
  std::ofstream(dir / "w.csv") << "3,1\n1,3\n";
  RunConfig c;
  c.command = "mode";
  c.weights = (dir / "w.csv").string();
  c.output_dir = (dir / "out").string();
  std::string out;
  ASSERT_EQ(run(c, &out), 0);
  EXPECT_EQ(out, "{(1,1),(2,2)}\n");
  EXPECT_TRUE(fs::exists(dir / "out" / "mode.csv"));
}

TEST(Cli, KCross) {
  const fs::path dir = scratch("kcross");
  auto s = simulate_config(dir / "sim", 2, {0.5, 0.5});
  s.lambda = 60;
  ASSERT_EQ(run(s), 0);
  RunConfig c;
  c.command = "kcross";
  c.input = (dir / "sim" / "pattern.csv").string();
  c.output_dir = (dir / "out").string();
  c.window = "0,0,8,8";
  c.m = 19;
  c.m_mean = 19;
  c.k_r_max = 2.0;
  c.r_steps = 32;
  ASSERT_EQ(run(c), 0);
  for (const char* f : {"kcross_curves.csv", "kcross_kij.csv", "report.json"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
}

TEST(Cli, CsriSimulation) {
  const fs::path dir = scratch("csri");
  RunConfig c;
  c.command = "simulate";
  c.output_dir = dir.string();
  c.csri_counts = {5, 7};
  ASSERT_EQ(run(c), 0);
  std::ifstream in(dir / "pattern.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 13);
}

TEST(Cli, ErrorsGiveNonzeroExit) {
  std::ostringstream log, err;
  RunConfig c;
  c.command = "fit";
  c.sweeps = 0;
  EXPECT_EQ(run_command(c, log, err), 2);
  c.sweeps = 10;
  c.proposal = "P7";
  EXPECT_EQ(run_command(c, log, err), 2);
  c.proposal = "P3";
  c.command = "frobnicate";
  EXPECT_EQ(run_command(c, log, err), 2);
  c.command = "fit";
  c.input = "/nonexistent/pattern.csv";
  c.output_dir = scratch("err").string();
  EXPECT_EQ(run_command(c, log, err), 1);
  EXPECT_FALSE(err.str().empty());
}
