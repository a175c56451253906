#pragma once

// Command implementations behind the compclust executable.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "compclust.hpp"

namespace compclust::app {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string command;
  std::string input;
  std::string output_dir = "out";
  std::string weights;     ///< mode: dense weight matrix CSV
  std::string merge_list;  ///< extra placename variants
  std::string window;      ///< "x0,y0,x1,y1" or a polygon CSV (x,y per line)

  // hyperparameters
  double sigma_max = 50.0;
  double k_lambda = 300.0;
  double theta_lambda = 1.0;
  std::vector<double> alpha;  ///< empty: 1/k each

  // sampler
  std::string proposal = "P3";
  double delta = 1e-3;
  long sweeps = 1000;
  long burn_in = 100;
  long thin = 1;
  int chains = 2;
  std::uint64_t seed = 1;
  int n_moves = 200;
  double r_max = 0.0;  ///< 0: no truncation
  bool tempering = false;
  int rungs = 5;
  double beta_min = 0.2;
  double tile_side = 0.0;  ///< fit2: > 0 enables multiple proposals
  int max_tiles = 0;
  bool save_partitions = false;
  int flush_every = 50;

  // fixed or initial parameters
  double sigma = 1.0;
  std::vector<double> p;
  double lambda = 0.0;  ///< 0: number of points (initial value for fit)

  // intensity
  double bandwidth = 0.0;  ///< 0: least-squares cross-validation
  bool uniform_g = false;
  double crop_threshold = 0.0;

  // cleaning
  double merge_threshold = 3.0;
  double buffer = 3.0;
  bool reject_unknown = false;

  // kcross
  int m = 99;
  int m_mean = 99;
  double test_alpha = 0.05;
  double k_r_max = 15.0;
  int r_steps = 512;

  // simulate
  int k = 2;
  std::vector<int> csri_counts;
  bool crop = false;

  int association_reps = 5;

  void validate() const {
    if (sweeps < 1 || burn_in < 0 || thin < 1) throw ConfigError("sweeps >= 1, burn-in >= 0 and thin >= 1 required");
    if (chains < 1) throw ConfigError("at least one chain required");
    if (n_moves < 1) throw ConfigError("n-moves must be at least 1");
    if (r_max < 0.0 || tile_side < 0.0 || bandwidth < 0.0) throw ConfigError("negative length");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(sigma_max > 0.0) || !(k_lambda > 0.0) || !(theta_lambda > 0.0))
      throw ConfigError("hyperparameters must be positive");
    if (m < 1 || m_mean < 1) throw ConfigError("need at least one null simulation");
    if (!(test_alpha > 0.0 && test_alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (rungs < 1 || !(beta_min > 0.0 && beta_min <= 1.0)) throw ConfigError("invalid tempering ladder");
    if (k < 1) throw ConfigError("k must be at least 1");
    if (flush_every < 1) throw ConfigError("flush interval must be at least 1");
    try {
      parse_proposal_kind(proposal);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  json to_json() const {
    return json{{"command", command},
                {"input", input},
                {"output_dir", output_dir},
                {"weights", weights},
                {"merge_list", merge_list},
                {"window", window},
                {"sigma_max", sigma_max},
                {"k_lambda", k_lambda},
                {"theta_lambda", theta_lambda},
                {"alpha", alpha},
                {"proposal", proposal},
                {"delta", delta},
                {"sweeps", sweeps},
                {"burn_in", burn_in},
                {"thin", thin},
                {"chains", chains},
                {"seed", seed},
                {"n_moves", n_moves},
                {"r_max", r_max},
                {"tempering", tempering},
                {"rungs", rungs},
                {"beta_min", beta_min},
                {"tile_side", tile_side},
                {"max_tiles", max_tiles},
                {"sigma", sigma},
                {"p", p},
                {"lambda", lambda},
                {"bandwidth", bandwidth},
                {"uniform_g", uniform_g},
                {"crop_threshold", crop_threshold},
                {"merge_threshold", merge_threshold},
                {"buffer", buffer},
                {"m", m},
                {"m_mean", m_mean},
                {"test_alpha", test_alpha},
                {"k_r_max", k_r_max},
                {"r_steps", r_steps},
                {"k", k},
                {"csri_counts", csri_counts},
                {"crop", crop}};
  }
};

/// Serialises writes from several chain threads.
class OutputWriter {
 public:
  explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text, bool flush = false) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = files_.find(name);
    if (it == files_.end()) {
      it = files_.emplace(name, std::ofstream(dir_ / name)).first;
      if (!it->second) throw std::runtime_error("cannot write " + (dir_ / name).string());
    }
    it->second << text;
    if (flush) it->second.flush();
  }

  void close_all() {
    std::lock_guard<std::mutex> lock(mu_);
    files_.clear();
  }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::ofstream> files_;
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& f : split_csv_line(s)) {
    const std::string t = trim(f);
    if (t.empty()) continue;
    try {
      out.push_back(std::stod(t));
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + t + "'");
    }
  }
  return out;
}

/// "x0,y0,x1,y1" or a CSV file with one polygon vertex "x,y" per line.
inline std::optional<Window> parse_window(const std::string& spec, double buffer = 0.0) {
  if (spec.empty()) return std::nullopt;
  if (std::filesystem::exists(spec)) {
    std::ifstream in(spec);
    std::vector<Point2> v;
    std::string line;
    while (std::getline(in, line)) {
      const auto t = trim(line);
      if (t.empty() || t[0] == '#' || std::isalpha(static_cast<unsigned char>(t[0]))) continue;
      const auto d = parse_doubles(t);
      if (d.size() != 2) throw ConfigError("window file: expected 'x,y' per line");
      v.push_back({d[0], d[1]});
    }
    return Window(std::move(v), buffer);
  }
  const auto d = parse_doubles(spec);
  if (d.size() != 4) throw ConfigError("window must be 'x0,y0,x1,y1' or a polygon file");
  return Window(Rect{d[0], d[1], d[2], d[3]}, buffer);
}

inline IngestResult load_pattern(const RunConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError("--input is required for " + cfg.command);
  AliasTable aliases = AliasTable::defaults();
  if (!cfg.merge_list.empty()) {
    std::ifstream in(cfg.merge_list);
    if (!in) throw InputError("cannot open merge list " + cfg.merge_list);
    aliases.load(in);
  }
  IngestOptions opt;
  opt.merge_threshold_km = cfg.merge_threshold;
  opt.buffer_km = cfg.buffer;
  opt.window = parse_window(cfg.window);
  opt.reject_unknown = cfg.reject_unknown;
  return read_pattern_file(cfg.input, aliases, opt);
}

inline std::vector<double> bandwidth_grid(const Window& w) {
  const Rect& b = w.bounding_box();
  const double diag = std::hypot(b.width(), b.height());
  std::vector<double> g;
  for (int t = 0; t < 12; ++t) g.push_back(diag / 200.0 * std::pow(40.0, t / 11.0));
  return g;
}

struct CenterEstimate {
  CenterDensity g;
  double bandwidth = 0.0;
  std::string warning;
};

/// g from a uniform density or a kernel estimate of all points.
inline CenterEstimate estimate_center_density(const PointPattern& x, const RunConfig& cfg) {
  CenterEstimate ce;
  if (cfg.uniform_g) {
    ce.g = CenterDensity::uniform(x.window);
    return ce;
  }
  std::vector<Point2> pts;
  for (const auto& p : x.points) pts.push_back(p.x);
  if (pts.empty()) throw InputError("pattern is empty");
  double h = cfg.bandwidth;
  if (!(h > 0.0)) {
    const auto cv = lscv_bandwidth(pts, x.window, bandwidth_grid(x.window));
    h = cv.bandwidth;
    ce.warning = cv.warning;
  }
  ce.bandwidth = h;
  IntensityField f = kde_intensity(pts, x.window, h);
  if (cfg.crop_threshold > 0.0) f = f.cropped(cfg.crop_threshold * f.max_value());
  ce.g = normalize_to_density(f);
  // chains start from all singletons, which needs g > 0 at every point
  int dropped = 0;
  for (auto u : pts) dropped += !(ce.g(u) > 0.0);
  if (dropped > 0)
    throw ConfigError("--crop leaves zero centre density at " + std::to_string(dropped) + " data points");
  return ce;
}

inline Hyperparams make_hyper(const RunConfig& cfg, int k) {
  Hyperparams h = Hyperparams::defaults(k);
  h.sigma_max = cfg.sigma_max;
  h.k_lambda = cfg.k_lambda;
  h.theta_lambda = cfg.theta_lambda;
  if (!cfg.alpha.empty()) h.alpha = cfg.alpha;
  h.validate(k);
  return h;
}

inline ModelParams make_params(const RunConfig& cfg, int k, int n) {
  ModelParams mp;
  mp.sigma = cfg.sigma;
  mp.p = cfg.p.empty() ? std::vector<double>(k, 1.0 / k) : cfg.p;
  if (mp.k() != k) throw ConfigError("--p needs " + std::to_string(k) + " entries");
  if (!(mp.p[0] > 0.0)) throw ConfigError("--p must give singletons positive probability");
  mp.lambda = cfg.lambda > 0.0 ? cfg.lambda : std::max(1.0, static_cast<double>(n));
  mp.validate();
  return mp;
}

template <class Fn>
void run_parallel(int n, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  for (int c = 0; c < n; ++c)
    workers.emplace_back([&, c] {
      try {
        fn(c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline json summary_json(const PosteriorSummary& s) {
  return json{{"mean", s.mean},     {"sd", s.sd},     {"q025", s.q025},          {"q50", s.q50},
              {"q975", s.q975},     {"hpd95", {s.hpd95.lo, s.hpd95.hi}}};
}

inline std::string summary_row(const std::string& name, const PosteriorSummary& s) {
  return name + "," + fmt(s.mean) + "," + fmt(s.sd) + "," + fmt(s.q025) + "," + fmt(s.q50) + "," + fmt(s.q975) + "," +
         fmt(s.hpd95.lo) + "," + fmt(s.hpd95.hi) + "\n";
}

inline void write_histogram(OutputWriter& out, const std::string& name, const std::vector<double>& x, int bins = 50) {
  if (x.empty()) return;
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  const double lo = *mn, hi = *mx > *mn ? *mx : *mn + 1.0;
  std::vector<long> c(bins, 0);
  for (double v : x) c[std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins))]++;
  std::string s = "bin_lo,bin_hi,count\n";
  for (int b = 0; b < bins; ++b)
    s += fmt(lo + (hi - lo) * b / bins) + "," + fmt(lo + (hi - lo) * (b + 1) / bins) + "," + std::to_string(c[b]) + "\n";
  out.write(name, s);
}

/// Per-record scalars of a k-colour chain.
struct Trace {
  std::vector<long> sweep;
  std::vector<double> sigma, lambda, n_clusters, edges;
  std::vector<std::vector<double>> p;
  std::vector<std::vector<int>> y;
  std::vector<std::vector<int>> labels;
  double moves_accepted = 0.0;
  double sigma_accepted = 0.0;
};

/// Summary vector for the multivariate PSRF: sigma, lambda, Y_1.., p_1..,
/// and N when it is not determined by the Y's already included.
inline std::vector<double> psrf_vector(const Trace& t, std::size_t r, int k) {
  std::vector<double> v{t.sigma[r], t.lambda[r]};
  const int ny = std::min(4, k - 1), np = std::min(3, k - 1);
  if (k - 1 > 4) v.push_back(t.n_clusters[r]);
  for (int l = 0; l < ny; ++l) v.push_back(t.y[r][l]);
  for (int l = 0; l < np; ++l) v.push_back(t.p[r][l]);
  return v;
}

inline std::string samples_header(int k) {
  std::string h = "sweep,sigma,lambda,N,edges";
  for (int l = 1; l <= k; ++l) h += ",p" + std::to_string(l);
  for (int l = 1; l <= k; ++l) h += ",Y" + std::to_string(l);
  return h + "\n";
}

inline json fit_diagnostics(const std::vector<Trace>& traces, int k) {
  json d;
  json ess = json::array();
  for (const auto& t : traces) {
    json e;
    if (t.sigma.size() >= 2) {
      e["sigma"] = iat_ess(t.sigma).ess;
      e["lambda"] = iat_ess(t.lambda).ess;
      e["N"] = iat_ess(t.n_clusters).ess;
      e["edges"] = iat_ess(t.edges).ess;
    }
    ess.push_back(e);
  }
  d["ess"] = ess;
  if (traces.size() >= 2 && traces[0].sigma.size() >= 2 && k >= 2) {
    std::vector<std::vector<std::vector<double>>> ch;
    for (const auto& t : traces) {
      std::vector<std::vector<double>> c;
      for (std::size_t r = 0; r < t.sigma.size(); ++r) c.push_back(psrf_vector(t, r, k));
      ch.push_back(std::move(c));
    }
    const auto ps = brooks_gelman_psrf(ch);
    d["psrf"] = ps.psrf;
    if (ps.ridge) d["psrf_warning"] = ps.warning;
  }
  return d;
}

/// k-colour Gibbs run.
inline json run_fit(const RunConfig& cfg, std::ostream& log) {
  const auto data = load_pattern(cfg);
  const PointPattern& x = data.pattern;
  const int k = x.k;
  const int n = static_cast<int>(x.size());
  OutputWriter out(cfg.output_dir);
  const auto ce = estimate_center_density(x, cfg);
  if (!ce.warning.empty()) log << "warning: " << ce.warning << "\n";
  SweepConfig sc;
  sc.hyper = make_hyper(cfg, k);
  sc.projection.n_moves = cfg.n_moves;
  sc.projection.proposal = {parse_proposal_kind(cfg.proposal), cfg.delta};
  if (cfg.r_max > 0.0) sc.projection.r_max = cfg.r_max;
  const ModelParams init = make_params(cfg, k, n);
  if (!(init.sigma < sc.hyper.sigma_max)) throw ConfigError("initial sigma must be below sigma_max");

  std::vector<Trace> traces(cfg.chains);
  run_parallel(cfg.chains, [&](int c) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(c));
    ChainState st(x, Matching(x.size()), init);
    Trace& tr = traces[c];
    const std::string file = "samples_chain" + std::to_string(c) + ".csv";
    const std::string pfile = "partitions_chain" + std::to_string(c) + ".csv";
    out.write(file, samples_header(k), true);
    int pending = 0;
    for (long it = 0; it < cfg.burn_in + cfg.sweeps; ++it) {
      const auto info = gibbs_sweep_k(x, st, sc, ce.g, rng);
      if (it < cfg.burn_in || (it - cfg.burn_in) % cfg.thin != 0) continue;
      tr.moves_accepted += info.moves_accepted;
      tr.sigma_accepted += info.sigma_accepted;
      tr.sweep.push_back(it);
      tr.sigma.push_back(st.params.sigma);
      tr.lambda.push_back(st.params.lambda);
      tr.n_clusters.push_back(st.stats.num_clusters);
      tr.edges.push_back(static_cast<double>(st.rho.num_edges()));
      tr.p.push_back(st.params.p);
      tr.y.push_back(st.stats.counts.points);
      tr.labels.push_back(st.rho.canonical_labels());
      std::string row = std::to_string(it) + "," + fmt(st.params.sigma) + "," + fmt(st.params.lambda) + "," +
                        std::to_string(st.stats.num_clusters) + "," + std::to_string(st.rho.num_edges());
      for (double v : st.params.p) row += "," + fmt(v);
      for (int v : st.stats.counts.points) row += "," + std::to_string(v);
      const bool flush = ++pending >= cfg.flush_every;
      if (flush) pending = 0;
      out.write(file, row + "\n", flush);
      if (cfg.save_partitions) {
        std::string lab;
        for (int l : tr.labels.back()) lab += (lab.empty() ? "" : " ") + std::to_string(l);
        out.write(pfile, lab + "\n", flush);
      }
    }
  });
  out.close_all();

  // pooled posterior summaries
  std::vector<double> sig, lam, p1;
  std::vector<std::vector<int>> ys;
  std::vector<std::vector<double>> ps;
  std::vector<double> sig_all, lam_all;
  for (const auto& t : traces) {
    sig.insert(sig.end(), t.sigma.begin(), t.sigma.end());
    lam.insert(lam.end(), t.lambda.begin(), t.lambda.end());
    ys.insert(ys.end(), t.y.begin(), t.y.end());
    ps.insert(ps.end(), t.p.begin(), t.p.end());
  }
  for (const auto& v : ps) p1.push_back(v[0]);
  const auto post = cluster_size_posterior(ys, ps, sig, lam);
  std::string summary = "parameter,mean,sd,q025,q50,q975,hpd_lo,hpd_hi\n";
  summary += summary_row("sigma", post.sigma);
  summary += summary_row("lambda", post.lambda);
  for (int l = 0; l < k; ++l) summary += summary_row("p" + std::to_string(l + 1), post.p[l]);
  for (int l = 0; l < k; ++l) summary += summary_row("Y" + std::to_string(l + 1), post.y[l]);
  out.write("summary.csv", summary);
  write_histogram(out, "hist_p1.csv", p1);
  write_histogram(out, "hist_sigma.csv", sig);

  // co-membership, pooled and per chain
  std::vector<CoMembership> per_chain;
  CoMembership pooled(n);
  std::vector<Matching> all;
  for (const auto& t : traces) {
    CoMembership cm(n);
    for (const auto& lab : t.labels) {
      Matching m = Matching::from_labels(lab);
      cm.add(m);
      pooled.add(m);
      all.push_back(std::move(m));
    }
    per_chain.push_back(std::move(cm));
  }
  std::string cms = "u,v,x_u,y_u,x_v,y_v,probability\n";
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const double pr = pooled.probability(u, v);
      if (pr < 0.01) continue;
      cms += std::to_string(u + 1) + "," + std::to_string(v + 1) + "," + fmt(x[u].x.x) + "," + fmt(x[u].x.y) + "," +
             fmt(x[v].x.x) + "," + fmt(x[v].x.y) + "," + fmt(pr) + "\n";
    }
  out.write("comembership.csv", cms);

  json report;
  report["config"] = cfg.to_json();
  report["n_points"] = n;
  report["k"] = k;
  report["types"] = x.type_names;
  report["cleaning_merges"] = data.log.size();
  report["bandwidth"] = ce.bandwidth;
  report["posterior"] = {{"sigma", summary_json(post.sigma)}, {"lambda", summary_json(post.lambda)}};
  for (int l = 0; l < k; ++l) {
    report["posterior"]["p" + std::to_string(l + 1)] = summary_json(post.p[l]);
    report["posterior"]["Y" + std::to_string(l + 1)] = summary_json(post.y[l]);
  }
  report["diagnostics"] = fit_diagnostics(traces, k);
  if (per_chain.size() >= 2) report["diagnostics"]["proximity_D"] = proximity_D(per_chain[0], per_chain[1]);
  json seeds = json::array();
  for (int c = 0; c < cfg.chains; ++c) seeds.push_back({{"chain", c}, {"seed", cfg.seed}, {"stream", c}});
  report["seeds"] = seeds;

  std::vector<int> marks;
  for (const auto& p : x.points) marks.push_back(p.mark);
  try {
    Rng arng = make_rng(cfg.seed, 1000003);
    const auto as = association_measure(all, marks, k, arng, cfg.association_reps);
    std::string s = "type_a,type_b,raw,null,relative\n";
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        if (a != b)
          s += x.type_name(a) + "," + x.type_name(b) + "," + fmt(as.raw[a][b]) + "," + fmt(as.null[a][b]) + "," +
               fmt(as.relative[a][b]) + "\n";
    out.write("association.csv", s);
  } catch (const std::exception& e) {
    report["association_error"] = e.what();
  }
  std::string cl = "type,lines,x_km,y_km,reason\n";
  for (const auto& e : data.log) {
    std::string lines;
    for (int l : e.lines) lines += (lines.empty() ? "" : " ") + std::to_string(l);
    cl += e.type + "," + lines + "," + fmt(e.location.x) + "," + fmt(e.location.y) + "," + e.reason + "\n";
  }
  out.write("cleaning_log.csv", cl);
  out.write("report.json", report.dump(2) + "\n");
  out.close_all();
  log << "fit: " << n << " points, " << k << " types, " << cfg.chains << " chains; sigma mean " << post.sigma.mean
      << " km\n";
  return report;
}

/// Two-colour run with fixed sigma, p, lambda.
inline json run_fit2(const RunConfig& cfg, std::ostream& log) {
  const auto data = load_pattern(cfg);
  const PointPattern& x = data.pattern;
  if (x.k != 2) throw ConfigError("fit2 needs exactly two types, found " + std::to_string(x.k));
  OutputWriter out(cfg.output_dir);
  const auto ce = estimate_center_density(x, cfg);
  const ModelParams mp = make_params(cfg, 2, static_cast<int>(x.size()));
  std::optional<double> rmax;
  if (cfg.r_max > 0.0) rmax = cfg.r_max;
  const WeightTable table = build_weight_table(x, mp, ce.g, rmax);
  const BipartiteView view(x);
  const BipartiteMatching mode = hungarian_mode(table);
  const Proposal prop{parse_proposal_kind(cfg.proposal), cfg.delta};
  const long steps = cfg.burn_in + cfg.sweeps;

  struct Run {
    std::vector<double> diff, edges;
    CoMembership cm{0};
    double acceptance = 0.0;
  };
  std::vector<Run> runs(cfg.chains);
  run_parallel(cfg.chains, [&](int c) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(c));
    Run& r = runs[c];
    r.cm = CoMembership(x.size());
    const std::string file = "samples_chain" + std::to_string(c) + ".csv";
    out.write(file, "step,edges,diff_from_mode,log_weight\n", true);
    std::size_t accepted = 0, proposed = 0;
    auto record = [&](long t, const BipartiteMatching& s, double lw) {
      if (t < cfg.burn_in || (t - cfg.burn_in) % cfg.thin != 0) return;
      const Matching m = view.to_matching(s);
      const int d = edge_difference(m, view.to_matching(mode));
      r.diff.push_back(d);
      r.edges.push_back(static_cast<double>(s.num_edges()));
      r.cm.add(m);
      out.write(file, std::to_string(t) + "," + std::to_string(s.num_edges()) + "," + std::to_string(d) + "," + fmt(lw) + "\n",
                r.diff.size() % cfg.flush_every == 0);
    };
    if (cfg.tempering) {
      TemperedSampler ts(table, prop, TemperingLadder::geometric(cfg.rungs, cfg.beta_min));
      for (long t = 0; t < steps; ++t) {
        if (t == cfg.burn_in) ts.set_adapting(false);
        ts.step(rng);
        if (ts.rung() == 0) record(t, ts.state(), ts.log_weight());
      }
      accepted = ts.chain().accepted();
      proposed = ts.chain().steps();
    } else if (cfg.tile_side > 0.0) {
      std::vector<Point2> red, blue;
      for (int p : view.red) red.push_back(x[p].x);
      for (int p : view.blue) blue.push_back(x[p].x);
      ProposalGrid grid;
      grid.tile_side = cfg.tile_side;
      grid.max_active = cfg.max_tiles;
      MultiproposalSampler ms(table, red, blue, prop, grid);
      for (long t = 0; t < steps; ++t) {
        const auto res = ms.step(rng);
        accepted += res.accepted;
        proposed += res.tiles;
        record(t, ms.state(), ms.log_weight());
      }
    } else {
      BipartiteChain ch(table, prop);
      for (long t = 0; t < steps; ++t) {
        ch.step(rng);
        record(t, ch.state(), ch.log_weight());
      }
      accepted = ch.accepted();
      proposed = ch.steps();
    }
    r.acceptance = proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;
  });
  out.close_all();

  json report;
  report["config"] = cfg.to_json();
  report["n_red"] = table.n_red();
  report["n_blue"] = table.n_blue();
  report["table_entries"] = table.nnz();
  report["mode_edges"] = mode.num_edges();
  report["mode_log_weight"] = table.log_matching_weight(mode);
  json chains = json::array();
  for (const auto& r : runs) {
    json c{{"acceptance_rate", r.acceptance}, {"records", r.diff.size()}};
    if (r.diff.size() >= 2) c["ess_diff_from_mode"] = iat_ess(r.diff).ess;
    chains.push_back(c);
  }
  report["chains"] = chains;
  if (runs.size() >= 2) report["proximity_D"] = proximity_D(runs[0].cm, runs[1].cm);
  std::string cms = "u,v,x_u,y_u,x_v,y_v,probability\n";
  for (int i = 0; i < table.n_red(); ++i)
    for (int j = 0; j < table.n_blue(); ++j) {
      const int u = view.red[i], v = view.blue[j];
      double pr = 0.0;
      for (const auto& r : runs) pr += r.cm.probability(u, v) / runs.size();
      if (pr >= 0.01)
        cms += std::to_string(u + 1) + "," + std::to_string(v + 1) + "," + fmt(x[u].x.x) + "," + fmt(x[u].x.y) + "," +
               fmt(x[v].x.x) + "," + fmt(x[v].x.y) + "," + fmt(pr) + "\n";
    }
  out.write("comembership.csv", cms);
  out.write("report.json", report.dump(2) + "\n");
  out.close_all();
  log << "fit2: " << table.n_red() << " + " << table.n_blue() << " points, acceptance " << runs[0].acceptance << "\n";
  return report;
}

/// {(i,j),...} with 1-based indices.
inline std::string format_matching(const BipartiteMatching& m) {
  std::string s = "{";
  for (auto [i, j] : m.edges()) s += (s.size() > 1 ? "," : "") + std::string("(") + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
  return s + "}";
}

inline std::vector<std::vector<double>> read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::vector<double>> w;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    w.push_back(parse_doubles(line));
  }
  return w;
}

inline json run_mode(const RunConfig& cfg, std::ostream& log) {
  WeightTable table;
  std::optional<BipartiteView> view;
  std::optional<PointPattern> pattern;
  if (!cfg.weights.empty()) {
    table = WeightTable::from_dense(read_matrix_csv(cfg.weights));
  } else {
    auto data = load_pattern(cfg);
    if (data.pattern.k != 2) throw ConfigError("mode needs exactly two types");
    pattern = std::move(data.pattern);
    const auto ce = estimate_center_density(*pattern, cfg);
    const ModelParams mp = make_params(cfg, 2, static_cast<int>(pattern->size()));
    std::optional<double> rmax;
    if (cfg.r_max > 0.0) rmax = cfg.r_max;
    table = build_weight_table(*pattern, mp, ce.g, rmax);
    view.emplace(*pattern);
  }
  const auto mode = hungarian_mode(table);
  log << format_matching(mode) << "\n";
  json report{{"config", cfg.to_json()},
              {"matching", format_matching(mode)},
              {"edges", mode.num_edges()},
              {"log_weight", table.log_matching_weight(mode)}};
  if (!cfg.output_dir.empty() && cfg.output_dir != "-") {
    OutputWriter out(cfg.output_dir);
    std::string s = view ? "red,blue,point_red,point_blue,log_weight\n" : "red,blue,log_weight\n";
    for (auto [i, j] : mode.edges()) {
      s += std::to_string(i + 1) + "," + std::to_string(j + 1);
      if (view) s += "," + std::to_string(view->red[i] + 1) + "," + std::to_string(view->blue[j] + 1);
      s += "," + fmt(table.log_weight(i, j)) + "\n";
    }
    out.write("mode.csv", s);
    out.write("report.json", report.dump(2) + "\n");
  }
  return report;
}

inline json run_kcross(const RunConfig& cfg, std::ostream& log) {
  const auto data = load_pattern(cfg);
  const PointPattern& x = data.pattern;
  OutputWriter out(cfg.output_dir);
  std::vector<IntensityField> fields;
  std::vector<double> bws;
  for (int t = 0; t < x.k; ++t) {
    std::vector<Point2> pts;
    for (const auto& p : x.points)
      if (p.mark == t) pts.push_back(p.x);
    if (pts.empty()) throw InputError("type " + x.type_name(t) + " has no points");
    double h = cfg.bandwidth;
    if (!(h > 0.0)) h = lscv_bandwidth(pts, x.window, bandwidth_grid(x.window)).bandwidth;
    bws.push_back(h);
    fields.push_back(kde_intensity(pts, x.window, h));
  }
  DeviationOptions opt;
  opt.m = cfg.m;
  opt.m_mean = cfg.m_mean;
  opt.alpha = cfg.test_alpha;
  opt.r = default_r_grid(cfg.k_r_max, cfg.r_steps);
  opt.bandwidths = bws;
  Rng rng = make_rng(cfg.seed, 0);
  const auto est = deviation_test(x, fields, opt, rng);
  est.write_csv(out.path("kcross_curves.csv").string());
  std::string kij = "r";
  for (int i = 0; i < x.k; ++i)
    for (int j = 0; j < x.k; ++j)
      if (i != j) kij += ",K_" + x.type_name(i) + "_" + x.type_name(j);
  kij += "\n";
  for (std::size_t t = 0; t < est.r.size(); ++t) {
    kij += fmt(est.r[t]);
    for (int i = 0; i < x.k; ++i)
      for (int j = 0; j < x.k; ++j)
        if (i != j) kij += "," + fmt(est.k_obs.K[i][j][t]);
    kij += "\n";
  }
  out.write("kcross_kij.csv", kij);
  json report{{"config", cfg.to_json()}, {"bandwidths", bws},   {"D_obs", est.d_obs},
              {"p_value", est.p_value},  {"reject", est.reject}, {"m", cfg.m}};
  out.write("report.json", report.dump(2) + "\n");
  out.close_all();
  log << "kcross: D = " << est.d_obs << ", p = " << est.p_value << (est.reject ? " (reject)" : "") << "\n";
  return report;
}

inline json run_simulate(const RunConfig& cfg, std::ostream& log) {
  const auto w = parse_window(cfg.window.empty() ? "0,0,10,10" : cfg.window);
  OutputWriter out(cfg.output_dir);
  Rng rng = make_rng(cfg.seed, 0);
  PointPattern x;
  json report{{"config", cfg.to_json()}};
  if (!cfg.csri_counts.empty()) {
    x = simulate_csri(cfg.csri_counts, *w, rng);
  } else {
    ModelParams mp;
    mp.sigma = cfg.sigma;
    mp.p = cfg.p.empty() ? std::vector<double>(cfg.k, 1.0 / cfg.k) : cfg.p;
    mp.lambda = cfg.lambda > 0.0 ? cfg.lambda : 50.0;
    if (mp.k() != cfg.k) throw ConfigError("--p needs k entries");
    SimulateOptions so;
    so.crop_to_window = cfg.crop;
    auto sim = simulate_model(mp, CenterDensity::uniform(*w), *w, rng, so);
    x = std::move(sim.pattern);
    std::string truth = "point,cluster\n";
    const auto lab = sim.truth.canonical_labels();
    for (std::size_t i = 0; i < lab.size(); ++i) truth += std::to_string(i + 1) + "," + std::to_string(lab[i] + 1) + "\n";
    out.write("truth.csv", truth);
    report["clusters"] = sim.centers.size();
  }
  for (int t = 0; t < x.k; ++t) x.type_names.push_back(std::to_string(t + 1));
  std::ostringstream s;
  write_minimal_csv(s, x);
  out.write("pattern.csv", s.str());
  report["n_points"] = x.size();
  out.write("report.json", report.dump(2) + "\n");
  out.close_all();
  log << "simulate: " << x.size() << " points written to " << out.path("pattern.csv").string() << "\n";
  return report;
}

/// Reads samples_chain*.csv files (as written by fit) and recomputes the
/// diagnostics and posterior summaries.
inline json run_diagnose(const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  const fs::path dir = cfg.input.empty() ? fs::path(cfg.output_dir) : fs::path(cfg.input);
  std::vector<fs::path> files;
  for (int c = 0;; ++c) {
    const fs::path f = dir / ("samples_chain" + std::to_string(c) + ".csv");
    if (!fs::exists(f)) break;
    files.push_back(f);
  }
  if (files.empty()) throw InputError("no samples_chain*.csv files in " + dir.string());
  std::vector<Trace> traces;
  int k = 0;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    std::getline(in, line);
    const auto head = split_csv_line(line);
    int kp = 0;
    for (const auto& h : head) kp += trim(h).rfind("p", 0) == 0;
    if (k == 0) k = kp;
    if (kp != k || k < 1) throw InputError(f.string() + ": inconsistent header");
    Trace t;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const auto v = parse_doubles(line);
      if (v.size() != static_cast<std::size_t>(5 + 2 * k)) break;  // partial last line after an interrupt
      t.sweep.push_back(static_cast<long>(v[0]));
      t.sigma.push_back(v[1]);
      t.lambda.push_back(v[2]);
      t.n_clusters.push_back(v[3]);
      t.edges.push_back(v[4]);
      t.p.emplace_back(v.begin() + 5, v.begin() + 5 + k);
      std::vector<int> y;
      for (int l = 0; l < k; ++l) y.push_back(static_cast<int>(v[5 + k + l]));
      t.y.push_back(std::move(y));
    }
    traces.push_back(std::move(t));
  }
  if (!cfg.output_dir.empty() && fs::path(cfg.output_dir) != dir) fs::create_directories(cfg.output_dir);
  const std::size_t len = std::min_element(traces.begin(), traces.end(), [](const Trace& a, const Trace& b) {
                            return a.sigma.size() < b.sigma.size();
                          })->sigma.size();
  for (auto& t : traces) {
    t.sigma.resize(len);
    t.lambda.resize(len);
    t.n_clusters.resize(len);
    t.edges.resize(len);
    t.p.resize(len);
    t.y.resize(len);
  }
  if (len < 2) throw InputError("too few samples to diagnose");
  json report;
  report["chains"] = traces.size();
  report["records_per_chain"] = len;
  report["diagnostics"] = fit_diagnostics(traces, k);
  std::vector<double> sig, lam;
  std::vector<std::vector<int>> ys;
  std::vector<std::vector<double>> ps;
  for (const auto& t : traces) {
    sig.insert(sig.end(), t.sigma.begin(), t.sigma.end());
    lam.insert(lam.end(), t.lambda.begin(), t.lambda.end());
    ys.insert(ys.end(), t.y.begin(), t.y.end());
    ps.insert(ps.end(), t.p.begin(), t.p.end());
  }
  const auto post = cluster_size_posterior(ys, ps, sig, lam);
  report["posterior"] = {{"sigma", summary_json(post.sigma)}, {"lambda", summary_json(post.lambda)}};
  for (int l = 0; l < k; ++l) report["posterior"]["p" + std::to_string(l + 1)] = summary_json(post.p[l]);
  const fs::path outdir = cfg.output_dir.empty() ? dir : fs::path(cfg.output_dir);
  std::ofstream(outdir / "diagnostics.json") << report.dump(2) << "\n";
  log << "diagnose: " << traces.size() << " chains x " << len << " records\n";
  return report;
}

inline int run_command(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate();
    if (cfg.command == "fit") run_fit(cfg, log);
    else if (cfg.command == "fit2") run_fit2(cfg, log);
    else if (cfg.command == "mode") run_mode(cfg, log);
    else if (cfg.command == "kcross") run_kcross(cfg, log);
    else if (cfg.command == "simulate") run_simulate(cfg, log);
    else if (cfg.command == "diagnose") run_diagnose(cfg, log);
    else throw ConfigError("unknown command '" + cfg.command + "'");
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace compclust::app
