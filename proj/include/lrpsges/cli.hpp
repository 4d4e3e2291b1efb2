#ifndef LRPSGES_CLI_HPP
#define LRPSGES_CLI_HPP

// Command implementations behind the `lrpsges` executable: simulate, fit,
// ida, eval, bench. Each command writes its outputs plus a manifest.json
// into an output location and returns a process exit code.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrpsges/errors.hpp"
#include "lrpsges/ges.hpp"
#include "lrpsges/graphs.hpp"
#include "lrpsges/ida.hpp"
#include "lrpsges/io.hpp"
#include "lrpsges/lrps.hpp"
#include "lrpsges/parallel.hpp"
#include "lrpsges/simsem.hpp"
#include "lrpsges/tune_eval.hpp"

namespace lrpsges::cli {

namespace fs = std::filesystem;

inline int jobs_from_env() {
  if (const char* v = std::getenv("CAUSAL_LRPS_JOBS")) {
    try {
      const int j = std::stoi(v);
      if (j >= 1) return j;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

inline std::optional<SelectionMethod> parse_selection(const std::string& s) {
  if (s == "cv5") return SelectionMethod::kCv5;
  if (s == "bic") return SelectionMethod::kBic;
  if (s == "ebic") return SelectionMethod::kEbic;
  return std::nullopt;
}

/// "bic" -> nullopt (ln(n)/2); otherwise a positive number.
inline std::optional<double> parse_lambda(const std::string& s) {
  if (s == "bic") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("--lambda must be a number or 'bic'");
  }
  if (used != s.size() || !(v > 0.0)) throw InvalidArgument("--lambda must be a positive number or 'bic'");
  return v;
}

namespace detail {

inline double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  SimDesign design;
  fs::path out = "sim";
};

/// Writes data.csv, truth.edges (observed DAG), truth.json and manifest.json.
inline void cmd_simulate(const SimulateOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const LinearSem sem = random_sem(o.design);
  const Matrix data = sample(sem, o.design.n, o.design.seed);
  fs::create_directories(o.out);
  write_matrix_csv(o.out / "data.csv", data);
  write_pdag(o.out / "truth.edges", sem.observed_dag().graph());
  write_text_atomic(o.out / "truth.json", truth_to_json(o.design, sem).dump(2) + "\n");
  RunManifest m;
  m.command = "simulate";
  m.seed = o.design.seed;
  m.outputs = {(o.out / "data.csv").string(), (o.out / "truth.edges").string(), (o.out / "truth.json").string()};
  m.config = to_json(o.design);
  m.timings["total_seconds"] = detail::elapsed(t0);
  m.write(o.out / "manifest.json");
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  fs::path data;
  std::string method = "lrps-ges";
  SelectionMethod select = SelectionMethod::kCv5;
  std::optional<double> lambda;
  double ebic_gamma = 0.5;
  int eta_points = 20;
  int pca_k = 1;
  double random_prob = 0.05;
  std::uint64_t seed = 0;
  fs::path out = "fit";
};

/// Writes cpdag.edges and cov.csv (the covariance IDA should use) for every
/// method; lrps-ges adds k_o.csv, l.csv and selection.json.
inline void cmd_fit(const FitOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix data = center_columns(read_matrix_csv(o.data));
  if (data.rows() < 3) throw InsufficientSamples("need at least 3 rows of data");
  const long n = data.rows();
  const double lambda = o.lambda.value_or(bic_lambda(n));
  fs::create_directories(o.out);

  RunManifest m;
  m.command = "fit";
  m.seed = o.seed;
  m.inputs = {o.data.string()};
  m.config = Json{{"method", o.method},
                  {"select", to_string(o.select)},
                  {"lambda", lambda},
                  {"ebic_gamma", o.ebic_gamma},
                  {"eta_points", o.eta_points},
                  {"pca_k", o.pca_k},
                  {"random_prob", o.random_prob}};

  auto run_ges = [&](const CovarianceEstimate& cov) {
    try {
      GesConfig gc;
      gc.lambda = lambda;
      return ges_run(cov, gc).cpdag;
    } catch (const Error& e) {
      throw StageError("ges", e.what());
    }
  };

  Pdag cpdag;
  Matrix cov_used;
  if (o.method == "ges") {
    const CovarianceEstimate cov = sample_covariance(data, false);
    cpdag = run_ges(cov);
    cov_used = cov.mat();
  } else if (o.method == "lrps-ges") {
    PipelineConfig pc;
    pc.selection = o.select;
    pc.lambda = lambda;
    pc.ebic_gamma = o.ebic_gamma;
    pc.seed = o.seed;
    pc.grid.eta_points = o.eta_points;
    pc.center = false;
    const PipelineResult r = pipeline_lrps_ges(data, pc);
    cpdag = r.ges.cpdag;
    cov_used = r.adjusted_cov.mat();
    write_matrix_csv(o.out / "k_o.csv", r.solution.k_o.mat());
    write_matrix_csv(o.out / "l.csv", r.solution.l.mat());
    Json sel = to_json(r.selection);
    sel["effective_rank"] = r.solution.effective_rank;
    sel["iterations"] = r.solution.iterations;
    sel["converged"] = r.solution.converged;
    sel["objective"] = r.solution.objective;
    write_text_atomic(o.out / "selection.json", sel.dump(2) + "\n");
    m.outputs = {(o.out / "k_o.csv").string(), (o.out / "l.csv").string(), (o.out / "selection.json").string()};
  } else if (o.method == "pca-ges") {
    Matrix resid;
    try {
      resid = pca_regress_out(data, o.pca_k);
    } catch (const Error& e) {
      throw StageError("pca", e.what());
    }
    const CovarianceEstimate cov = sample_covariance(resid, false);
    cpdag = run_ges(cov);
    cov_used = cov.mat();
  } else if (o.method == "empty") {
    cpdag = Pdag(static_cast<int>(data.cols()));
    cov_used = sample_covariance(data, false).mat();
  } else if (o.method == "random") {
    if (!(o.random_prob > 0.0 && o.random_prob < 1.0)) throw InvalidArgument("--random-prob must lie in (0, 1)");
    CounterRng rng(o.seed, Stream::kRandomBaseline);
    cpdag = dag_to_cpdag(random_dag(static_cast<int>(data.cols()), o.random_prob, rng));
    cov_used = sample_covariance(data, false).mat();
  } else {
    throw InvalidArgument("unknown --method '" + o.method + "'");
  }
  write_pdag(o.out / "cpdag.edges", cpdag);
  write_matrix_csv(o.out / "cov.csv", cov_used);
  m.outputs.insert(m.outputs.begin(), {(o.out / "cpdag.edges").string(), (o.out / "cov.csv").string()});
  m.timings["total_seconds"] = detail::elapsed(t0);
  m.write(o.out / "manifest.json");
}

// ---------------------------------------------------------------------------
// ida

struct IdaOptions {
  fs::path cpdag;
  std::optional<fs::path> data;
  std::optional<fs::path> cov;
  /// Sample size recorded for a covariance read from --cov.
  long n = 1;
  fs::path out = "effects.json";
};

inline void cmd_ida(const IdaOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  if (o.data.has_value() == o.cov.has_value()) throw InvalidArgument("give exactly one of --data or --cov");
  const Pdag g = read_pdag(o.cpdag);
  const CovarianceEstimate cov = o.data ? sample_covariance(read_matrix_csv(*o.data))
                                        : CovarianceEstimate(read_matrix_csv(*o.cov), o.n);
  if (cov.dim() != g.num_nodes()) throw MismatchedDims("CPDAG and covariance differ in size");
  const EffectSets e = effect_matrix(g, cov);
  write_text_atomic(o.out, to_json(e).dump(2) + "\n");
  RunManifest m;
  m.command = "ida";
  m.inputs = {o.cpdag.string(), (o.data ? *o.data : *o.cov).string()};
  m.outputs = {o.out.string()};
  m.timings["total_seconds"] = detail::elapsed(t0);
  auto mpath = o.out;
  mpath.replace_filename(o.out.stem().string() + ".manifest.json");
  m.write(mpath);
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path est;
  fs::path truth;
  std::optional<fs::path> effects;
  double zero_tol = 1e-10;
  fs::path out = "metrics.json";
};

/// Metrics of one estimated CPDAG against the truth sidecar: skeleton and
/// directed precision/recall (each also as a one-point curve on the fixed
/// recall grid) and, with --effects, the effect-ranking curve.
inline Json evaluate(const Pdag& est, const LinearSem& sem, const std::optional<EffectSets>& effects, double zero_tol) {
  const Pdag truth = dag_to_cpdag(sem.observed_dag());
  const PrPoint s = skeleton_pr(est, truth);
  const PrPoint d = directed_pr(est, truth);
  Json metrics{{"skeleton", {{"precision", s.precision}, {"recall", s.recall}}},
               {"directed", {{"precision", d.precision}, {"recall", d.recall}}}};
  const bool has_edges = truth.num_edges() > 0;
  metrics["skeleton_pr_curve"] = has_edges ? to_json(path_pr_curve({s})) : Json(nullptr);
  metrics["directed_pr_curve"] = has_edges ? to_json(path_pr_curve({d})) : Json(nullptr);
  metrics["effect_pr_curve"] = nullptr;
  if (effects) {
    try {
      metrics["effect_pr_curve"] = to_json(effect_ranking_pr(*effects, true_total_effects(sem), zero_tol));
    } catch (const EmptyTruth&) {
    }
  }
  return metrics;
}

inline void cmd_eval(const EvalOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Pdag est = read_pdag(o.est);
  Json truth_json;
  try {
    truth_json = Json::parse(read_text(o.truth));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("truth JSON: ") + e.what());
  }
  const LinearSem sem = sem_from_json(truth_json);
  if (est.num_nodes() != sem.p) throw MismatchedDims("estimate and truth differ in node count");
  std::optional<EffectSets> effects;
  if (o.effects) {
    try {
      effects = effects_from_json(Json::parse(read_text(*o.effects)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("effects JSON: ") + e.what());
    }
    if (effects->num_nodes() != sem.p) throw MismatchedDims("effects and truth differ in node count");
  }
  Json out = evaluate(est, sem, effects, o.zero_tol);
  write_text_atomic(o.out, out.dump(2) + "\n");
  RunManifest m;
  m.command = "eval";
  m.inputs = {o.est.string(), o.truth.string()};
  if (o.effects) m.inputs.push_back(o.effects->string());
  m.outputs = {o.out.string()};
  m.timings["total_seconds"] = detail::elapsed(t0);
  auto mpath = o.out;
  mpath.replace_filename(o.out.stem().string() + ".manifest.json");
  m.write(mpath);
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  std::vector<int> p{50};
  std::vector<int> h{0, 5, 10};
  std::vector<long> n{50, 500, 1000};
  double f_pct = 70.0;
  double sparsity = 0.05;
  int reps = 1;
  std::uint64_t seed = 0;
  int jobs = 1;
  SelectionMethod select = SelectionMethod::kCv5;
  int eta_points = 20;
  int lambda_points = 25;
  int random_draws = 0;
  bool include_pca = true;
  fs::path out = "bench.csv";
  std::optional<fs::path> results_dir;
};

struct BenchUnit {
  SimDesign design;
  int rep = 0;
};

inline std::vector<BenchUnit> bench_units(const BenchOptions& o) {
  std::vector<BenchUnit> units;
  for (int p : o.p)
    for (int h : o.h)
      for (long n : o.n)
        for (int rep = 0; rep < o.reps; ++rep) {
          SimDesign d;
          d.p = p;
          d.h = h;
          d.n = n;
          d.f_pct = o.f_pct;
          d.sparsity = o.sparsity;
          d.seed = o.seed + static_cast<std::uint64_t>(rep);
          d.validate();
          units.push_back({d, rep});
        }
  return units;
}

inline ReplicateSettings bench_settings(const BenchOptions& o, long n) {
  ReplicateSettings s;
  s.pipeline.selection = o.select;
  s.pipeline.grid.eta_points = o.eta_points;
  s.lambda_path = default_lambda_path(n, o.lambda_points);
  s.include_pca = o.include_pca;
  s.random_draws = o.random_draws;
  return s;
}

/// Mean precision at each fixed recall per (design, method, curve), averaged
/// over replicates in which the curve exists. Rows are sorted, and numbers
/// printed with 17 significant digits, so the text depends only on the inputs.
inline std::string aggregate_csv(const std::vector<BenchUnit>& units, const std::vector<ReplicateResult>& results) {
  struct Acc {
    std::vector<double> sum;
    int count = 0;
  };
  using Key = std::tuple<int, int, long, std::string, std::string>;
  std::map<Key, Acc> acc;
  std::vector<double> grid;
  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto& d = units[u].design;
    for (const auto& [name, mc] : results[u].methods) {
      const std::pair<const char*, const std::optional<PrCurve>*> curves[] = {
          {"skeleton", &mc.skeleton}, {"directed", &mc.directed}, {"effect", &mc.effect}};
      for (const auto& [label, c] : curves) {
        if (!c->has_value()) continue;
        const PrCurve& curve = **c;
        grid = curve.recall_grid;
        Acc& a = acc[{d.p, d.h, d.n, name, label}];
        if (a.sum.empty()) a.sum.assign(curve.precision_at.size(), 0.0);
        for (std::size_t k = 0; k < curve.precision_at.size(); ++k) a.sum[k] += curve.precision_at[k];
        ++a.count;
      }
    }
  }
  std::string out = "p,h,n,method,curve,recall,mean_precision,replicates\n";
  for (const auto& [key, a] : acc) {
    const auto& [p, h, n, method, curve] = key;
    for (std::size_t k = 0; k < a.sum.size(); ++k) {
      out += std::to_string(p) + ',' + std::to_string(h) + ',' + std::to_string(n) + ',' + method + ',' + curve + ',' +
             format_double(grid[k]) + ',' + format_double(a.sum[k] / a.count) + ',' + std::to_string(a.count) + '\n';
    }
  }
  return out;
}

inline void cmd_bench(const BenchOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  if (o.reps < 1) throw InvalidArgument("--reps must be positive");
  if (o.jobs < 1) throw InvalidArgument("--jobs must be positive");
  const auto units = bench_units(o);
  const auto results = parallel_map<ReplicateResult>(units.size(), o.jobs, [&](std::size_t i) {
    return run_replicate(units[i].design, bench_settings(o, units[i].design.n));
  });
  write_text_atomic(o.out, aggregate_csv(units, results));

  RunManifest m;
  m.command = "bench";
  m.seed = o.seed;
  m.outputs = {o.out.string()};
  if (o.results_dir) {
    Json all = Json::array();
    for (const auto& r : results)
      for (const auto& [name, mc] : r.methods) all.push_back(results_json(r, name));
    const auto path = *o.results_dir / "results.json";
    write_text_atomic(path, all.dump(2) + "\n");
    m.outputs.push_back(path.string());
  }
  m.config = Json{{"p", o.p},
                  {"h", o.h},
                  {"n", o.n},
                  {"f_pct", o.f_pct},
                  {"sparsity", o.sparsity},
                  {"reps", o.reps},
                  {"jobs", o.jobs},
                  {"select", to_string(o.select)},
                  {"eta_points", o.eta_points},
                  {"lambda_points", o.lambda_points},
                  {"random_draws", o.random_draws},
                  {"include_pca", o.include_pca}};
  m.timings["total_seconds"] = detail::elapsed(t0);
  auto mpath = o.out;
  mpath.replace_filename(o.out.stem().string() + ".manifest.json");
  m.write(mpath);
}

// ---------------------------------------------------------------------------
// Argument parsing

/// Parses argv and dispatches. Exit codes: 0 success, 1 runtime failure,
/// 2 usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sparse-plus-low-rank precision decomposition followed by greedy equivalence search", "lrpsges"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  // Long form only: "-h" would clash with the --h design flag.
  app.set_help_flag("--help", "Print this help message and exit");

  SimulateOptions sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a dataset from a random linear SEM with hidden variables");
  c_sim->add_option("--p", sim.design.p, "Observed variables")->capture_default_str();
  c_sim->add_option("--h", sim.design.h, "Hidden variables")->capture_default_str();
  c_sim->add_option("--n", sim.design.n, "Sample size")->capture_default_str();
  c_sim->add_option("--f-pct", sim.design.f_pct, "Percent of observed children per hidden variable")->capture_default_str();
  c_sim->add_option("--sparsity", sim.design.sparsity, "Edge probability among observed variables")->capture_default_str();
  c_sim->add_option("--weight-lo", sim.design.weight_lo)->capture_default_str();
  c_sim->add_option("--weight-hi", sim.design.weight_hi)->capture_default_str();
  c_sim->add_option("--noise-lo", sim.design.noise_lo)->capture_default_str();
  c_sim->add_option("--noise-hi", sim.design.noise_hi)->capture_default_str();
  c_sim->add_option("--seed", sim.design.seed)->capture_default_str();
  c_sim->add_option("--out", sim.out, "Output directory")->capture_default_str();

  FitOptions fit;
  std::string fit_select = "cv5";
  std::string fit_lambda = "bic";
  auto* c_fit = app.add_subcommand("fit", "Estimate a CPDAG from data");
  c_fit->add_option("--data", fit.data, "Data CSV")->required();
  c_fit->add_option("--method", fit.method)
      ->check(CLI::IsMember({"ges", "lrps-ges", "pca-ges", "empty", "random"}))
      ->capture_default_str();
  c_fit->add_option("--select", fit_select)->check(CLI::IsMember({"cv5", "bic", "ebic"}))->capture_default_str();
  c_fit->add_option("--lambda", fit_lambda, "GES penalty: a number or 'bic'")->capture_default_str();
  c_fit->add_option("--ebic-gamma", fit.ebic_gamma)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_fit->add_option("--eta-points", fit.eta_points)->check(CLI::PositiveNumber)->capture_default_str();
  c_fit->add_option("--pca-k", fit.pca_k, "Components removed by pca-ges")->check(CLI::NonNegativeNumber)->capture_default_str();
  c_fit->add_option("--random-prob", fit.random_prob, "Edge probability for the random method")->capture_default_str();
  c_fit->add_option("--seed", fit.seed)->capture_default_str();
  c_fit->add_option("--out", fit.out, "Output directory")->capture_default_str();

  IdaOptions ida;
  std::string ida_data;
  std::string ida_cov;
  auto* c_ida = app.add_subcommand("ida", "Possible total effects for every ordered pair");
  c_ida->add_option("--cpdag", ida.cpdag)->required();
  auto* o_data = c_ida->add_option("--data", ida_data, "Data CSV (sample covariance is used)");
  auto* o_cov = c_ida->add_option("--cov", ida_cov, "Covariance CSV");
  o_data->excludes(o_cov);
  c_ida->add_option("--n", ida.n, "Sample size recorded with --cov")->check(CLI::PositiveNumber);
  c_ida->add_option("--out", ida.out)->capture_default_str();

  EvalOptions ev;
  std::string ev_effects;
  auto* c_eval = app.add_subcommand("eval", "Score an estimate against a simulated truth");
  c_eval->add_option("--est", ev.est, "Estimated CPDAG edge list")->required();
  c_eval->add_option("--truth", ev.truth, "truth.json from simulate")->required();
  c_eval->add_option("--effects", ev_effects, "effects.json from ida");
  c_eval->add_option("--zero-tol", ev.zero_tol)->capture_default_str();
  c_eval->add_option("--out", ev.out)->capture_default_str();

  BenchOptions bench;
  bench.jobs = jobs_from_env();
  std::string bench_select = "cv5";
  std::string bench_results;
  bool no_pca = false;
  auto* c_bench = app.add_subcommand("bench", "Full factorial simulation benchmark");
  c_bench->add_option("--p", bench.p)->capture_default_str();
  c_bench->add_option("--h", bench.h)->capture_default_str();
  c_bench->add_option("--n", bench.n)->capture_default_str();
  c_bench->add_option("--f-pct", bench.f_pct)->capture_default_str();
  c_bench->add_option("--sparsity", bench.sparsity)->capture_default_str();
  c_bench->add_option("--reps", bench.reps)->check(CLI::PositiveNumber)->capture_default_str();
  c_bench->add_option("--seed", bench.seed)->capture_default_str();
  c_bench->add_option("--jobs", bench.jobs, "Worker threads (default: $CAUSAL_LRPS_JOBS or 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_bench->add_option("--select", bench_select)->check(CLI::IsMember({"cv5", "bic", "ebic"}))->capture_default_str();
  c_bench->add_option("--eta-points", bench.eta_points)->check(CLI::PositiveNumber)->capture_default_str();
  c_bench->add_option("--lambda-points", bench.lambda_points)->check(CLI::PositiveNumber)->capture_default_str();
  c_bench->add_option("--random-draws", bench.random_draws)->check(CLI::NonNegativeNumber)->capture_default_str();
  c_bench->add_flag("--no-pca", no_pca, "Skip the PCA baseline");
  c_bench->add_option("--results-dir", bench_results, "Also write per-replicate results JSON here");
  c_bench->add_option("--out", bench.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_sim) {
      cmd_simulate(sim);
    } else if (*c_fit) {
      fit.select = *parse_selection(fit_select);
      fit.lambda = parse_lambda(fit_lambda);
      cmd_fit(fit);
    } else if (*c_ida) {
      if (!ida_data.empty()) ida.data = ida_data;
      if (!ida_cov.empty()) ida.cov = ida_cov;
      cmd_ida(ida);
    } else if (*c_eval) {
      if (!ev_effects.empty()) ev.effects = ev_effects;
      cmd_eval(ev);
    } else if (*c_bench) {
      bench.select = *parse_selection(bench_select);
      bench.include_pca = !no_pca;
      if (!bench_results.empty()) bench.results_dir = bench_results;
      cmd_bench(bench);
    }
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lrpsges::cli

#endif  // LRPSGES_CLI_HPP
