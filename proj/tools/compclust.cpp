#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "app.hpp"

namespace {

using compclust::app::RunConfig;

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("-i,--input", cfg.input, "Input pattern CSV (or directory for diagnose)");
  sub->add_option("-o,--output", cfg.output_dir, "Output directory");
  sub->add_option("--seed", cfg.seed, "Base random seed");
  sub->add_option("--window", cfg.window, "Window 'x0,y0,x1,y1' in km or a polygon vertex CSV");
  sub->add_option("--merge-list", cfg.merge_list, "Extra placename variants: 'variant,canonical' per line");
  sub->add_option("--merge-threshold", cfg.merge_threshold, "Merge same-type records closer than this (km)");
  sub->add_option("--buffer", cfg.buffer, "Buffer around the bounding box for the default window (km)");
  sub->add_flag("--reject-unknown", cfg.reject_unknown, "Reject placenames not in the alias table");
}

void add_model(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--sigma", cfg.sigma, "Cluster scale sigma (km), fixed or initial");
  sub->add_option("--p", cfg.p, "Cluster size probabilities p_1..p_k")->delimiter(',');
  sub->add_option("--lambda", cfg.lambda, "Cluster centre intensity (0: number of points)");
  sub->add_option("--bandwidth", cfg.bandwidth, "KDE bandwidth for g in km (0: cross-validation)");
  sub->add_flag("--uniform-g", cfg.uniform_g, "Use a uniform centre density");
  sub->add_option("--crop", cfg.crop_threshold, "Crop g below this fraction of its maximum");
  sub->add_option("--r-max", cfg.r_max, "Truncation distance for pair weights (km, 0: none)");
}

void add_sampler(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--proposal", cfg.proposal, "Proposal P1, P2, P3 or P4");
  sub->add_option("--delta", cfg.delta, "P1 threshold");
  sub->add_option("--sweeps", cfg.sweeps, "Iterations after burn-in");
  sub->add_option("--burn-in", cfg.burn_in, "Burn-in iterations");
  sub->add_option("--thin", cfg.thin, "Thinning interval");
  sub->add_option("--chains", cfg.chains, "Independent chains (one thread each)");
  sub->add_option("--flush-every", cfg.flush_every, "Flush sample files every N records");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complementary clustering of multi-type point patterns"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* fit = app.add_subcommand("fit", "Posterior sampling of the k-type model");
  add_common(fit, cfg);
  add_model(fit, cfg);
  add_sampler(fit, cfg);
  fit->add_option("--n-moves", cfg.n_moves, "Bipartite moves per projection step");
  fit->add_option("--sigma-max", cfg.sigma_max, "Upper bound of the sigma prior (km)");
  fit->add_option("--k-lambda", cfg.k_lambda, "Gamma shape for lambda");
  fit->add_option("--theta-lambda", cfg.theta_lambda, "Gamma scale for lambda");
  fit->add_option("--alpha", cfg.alpha, "Dirichlet parameters for p")->delimiter(',');
  fit->add_flag("--save-partitions", cfg.save_partitions, "Write sampled partitions");
  fit->add_option("--association-reps", cfg.association_reps, "Null resamples for the association measure");

  auto* fit2 = app.add_subcommand("fit2", "Matching sampler for two types with fixed parameters");
  add_common(fit2, cfg);
  add_model(fit2, cfg);
  add_sampler(fit2, cfg);
  fit2->add_flag("--tempering", cfg.tempering, "Parallel tempering over a geometric ladder");
  fit2->add_option("--rungs", cfg.rungs, "Number of temperatures");
  fit2->add_option("--beta-min", cfg.beta_min, "Smallest inverse temperature");
  fit2->add_option("--tile", cfg.tile_side, "Tile side for multiple proposals (km, 0: off)");
  fit2->add_option("--max-tiles", cfg.max_tiles, "Cap on simultaneous tiles (0: all)");

  auto* mode = app.add_subcommand("mode", "Maximum-weight matching");
  add_common(mode, cfg);
  add_model(mode, cfg);
  mode->add_option("--weights", cfg.weights, "Dense weight matrix CSV (rows: red, columns: blue)");

  auto* kc = app.add_subcommand("kcross", "Inhomogeneous cross-K deviation test");
  add_common(kc, cfg);
  kc->add_option("--bandwidth", cfg.bandwidth, "KDE bandwidth (km, 0: cross-validation per type)");
  kc->add_option("--m", cfg.m, "Null simulations for the test");
  kc->add_option("--m-mean", cfg.m_mean, "Null simulations for the mean");
  kc->add_option("--alpha", cfg.test_alpha, "Test level");
  kc->add_option("--r-max", cfg.k_r_max, "Largest distance (km)");
  kc->add_option("--r-steps", cfg.r_steps, "Distance grid size");

  auto* sim = app.add_subcommand("simulate", "Simulate from the model or from CSRI");
  sim->add_option("-o,--output", cfg.output_dir, "Output directory");
  sim->add_option("--seed", cfg.seed, "Random seed");
  sim->add_option("--window", cfg.window, "Window 'x0,y0,x1,y1' or polygon CSV");
  sim->add_option("--k", cfg.k, "Number of types");
  sim->add_option("--sigma", cfg.sigma, "Cluster scale");
  sim->add_option("--p", cfg.p, "Cluster size probabilities")->delimiter(',');
  sim->add_option("--lambda", cfg.lambda, "Cluster centre intensity");
  sim->add_option("--csri", cfg.csri_counts, "Points per type for CSRI")->delimiter(',');
  sim->add_flag("--crop", cfg.crop, "Drop points outside the window");

  auto* diag = app.add_subcommand("diagnose", "Diagnostics from stored samples");
  diag->add_option("-i,--input", cfg.input, "Directory with samples_chain*.csv")->required();
  diag->add_option("-o,--output", cfg.output_dir, "Output directory (default: input)");

  cfg.output_dir = "out";
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (auto* sub : app.get_subcommands()) cfg.command = sub->get_name();
  if (cfg.command == "diagnose" && diag->count("--output") == 0) cfg.output_dir.clear();
  return compclust::app::run_command(cfg, std::cout, std::cerr);
}
