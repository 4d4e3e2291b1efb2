#ifndef LRPSGES_TUNE_EVAL_HPP
#define LRPSGES_TUNE_EVAL_HPP

// Tuning-parameter selection for the decomposition stage (k-fold CV, BIC,
// extended BIC), the two-stage LRpS+GES pipeline, baselines, and
// precision/recall evaluation of graphs and effect rankings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrpsges/errors.hpp"
#include "lrpsges/ges.hpp"
#include "lrpsges/graphs.hpp"
#include "lrpsges/ida.hpp"
#include "lrpsges/lrps.hpp"
#include "lrpsges/matcore.hpp"
#include "lrpsges/rng.hpp"
#include "lrpsges/simsem.hpp"

namespace lrpsges {

// ---------------------------------------------------------------------------
// Grids

inline std::vector<double> default_gamma_grid() { return {0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.7}; }

/// {0.01, 0.02, ..., 1}.
inline std::vector<double> default_recall_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 100; ++k) g.push_back(k / 100.0);
  return g;
}

/// `points` values from hi down to lo, evenly spaced in log scale.
inline std::vector<double> log_grid_descending(double hi, double lo, int points) {
  if (points < 1 || !(hi > 0.0) || !(lo > 0.0)) throw InvalidArgument("log grid needs positive bounds and points");
  std::vector<double> out;
  if (points == 1) return {hi};
  for (int k = 0; k < points; ++k) {
    out.push_back(std::exp(std::log(hi) + (std::log(lo) - std::log(hi)) * k / (points - 1)));
  }
  return out;
}

/// Smallest eta at which the fit is trivial (diagonal K, L = 0) for this
/// gamma: max(max|S_ij| / gamma, lambda_max(S_offdiag)), i != j.
inline double trivial_eta(const CovarianceEstimate& cov, double gamma) {
  Matrix off = cov.mat();
  off.diagonal().setZero();
  const double top = Eigen::SelfAdjointEigenSolver<Matrix>(off, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double largest = off.size() ? off.cwiseAbs().maxCoeff() : 0.0;
  const double eta = std::max(largest / gamma, top);
  return eta > 0.0 ? eta : 1e-3;
}

/// Default eta grid for one gamma: `points` log-spaced values spanning
/// [ratio, 1] x trivial_eta(cov, gamma), largest first.
inline std::vector<double> default_eta_grid(const CovarianceEstimate& cov, double gamma, int points = 20,
                                            double ratio = 1e-3) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("eta grid ratio must lie in (0, 1)");
  const double top = trivial_eta(cov, gamma);
  return log_grid_descending(top, ratio * top, points);
}

/// GES penalties whose single-edge inclusion thresholds are the partial
/// correlations r in a log grid over [r_lo, r_hi]: lambda = -(n/2) ln(1 - r^2).
/// Returned largest first (sparsest graph first).
inline std::vector<double> default_lambda_path(long n, int points = 25, double r_lo = 0.005, double r_hi = 0.95) {
  std::vector<double> out;
  for (double r : log_grid_descending(r_hi, r_lo, points)) {
    out.push_back(-0.5 * static_cast<double>(n) * std::log1p(-r * r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Selection

enum class SelectionMethod { kCv5, kBic, kEbic };

inline const char* to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::kCv5:
      return "cv5";
    case SelectionMethod::kBic:
      return "bic";
    case SelectionMethod::kEbic:
      return "ebic";
  }
  return "?";
}

struct GridPoint {
  double eta = 0.0;
  double gamma = 0.0;
  double score = std::numeric_limits<double>::infinity();
  bool failed = false;
};

struct SelectionResult {
  double chosen_eta = 0.0;
  double chosen_gamma = 0.0;
  std::vector<GridPoint> criterion_table;
  SelectionMethod method = SelectionMethod::kCv5;
};

/// Grid description: an explicit eta grid shared by every gamma, or (when
/// empty) the default per-gamma grid with `eta_points` values.
struct SelectionGrid {
  std::vector<double> eta_grid;
  std::vector<double> gamma_grid = default_gamma_grid();
  int eta_points = 20;
  double eta_ratio = 1e-3;

  std::vector<double> etas_for(const CovarianceEstimate& cov, double gamma) const {
    if (!eta_grid.empty()) {
      auto g = eta_grid;
      std::sort(g.begin(), g.end(), std::greater<>());
      return g;
    }
    return default_eta_grid(cov, gamma, eta_points, eta_ratio);
  }
};

/// Fold label (0..k-1) per row: a seeded permutation dealt round-robin.
inline std::vector<int> fold_assignment(long n, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("need at least two folds");
  CounterRng rng(seed, Stream::kFolds);
  const auto perm = rng.permutation(static_cast<int>(n));
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (long pos = 0; pos < n; ++pos) fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] = static_cast<int>(pos % k);
  return fold;
}

/// tr(K S) - log det K: the Gaussian negative log-likelihood per sample, up
/// to constants and a factor 1/2.
inline double gaussian_loss(const Matrix& precision, const Matrix& cov) {
  return precision.cwiseProduct(cov).sum() - log_det_spd(precision);
}

namespace detail {

inline Matrix select_rows(const Matrix& data, const std::vector<int>& fold, int keep, bool equal) {
  long count = 0;
  for (int f : fold) count += (f == keep) == equal ? 1 : 0;
  Matrix out(count, data.cols());
  long r = 0;
  for (long i = 0; i < data.rows(); ++i) {
    if ((fold[static_cast<std::size_t>(i)] == keep) == equal) out.row(r++) = data.row(i);
  }
  return out;
}

inline void finish_selection(SelectionResult& res) {
  const GridPoint* best = nullptr;
  for (const auto& g : res.criterion_table) {
    if (g.failed || !std::isfinite(g.score)) continue;
    if (best == nullptr || g.score < best->score) best = &g;
  }
  if (best == nullptr) throw StageError("selection", "every grid point failed");
  res.chosen_eta = best->eta;
  res.chosen_gamma = best->gamma;
}

}  // namespace detail

/// k-fold cross-validation: per fold, fit on the training covariance and
/// score tr(K S_test) - log det K with K = K_O - L on the held-out rows
/// (centred by the training mean); choose the grid point with the smallest
/// mean loss. Warm starts run along decreasing eta for each gamma.
inline SelectionResult cv_select_lrps(const Matrix& data, const SelectionGrid& grid, int k, std::uint64_t seed,
                                      const AdmmConfig& admm = {},
                                      LatentSign sign = LatentSign::kPositiveSemiDef) {
  const long n = data.rows();
  if (n < 2L * k) throw InsufficientSamples("cross-validation needs n >= 2k rows");
  const auto fold = fold_assignment(n, k, seed);
  const CovarianceEstimate full = sample_covariance(data);

  SelectionResult res;
  res.method = SelectionMethod::kCv5;
  std::vector<std::vector<double>> etas;
  for (double gamma : grid.gamma_grid) {
    etas.push_back(grid.etas_for(full, gamma));
    for (double eta : etas.back()) res.criterion_table.push_back({eta, gamma, 0.0, false});
  }

  for (int f = 0; f < k; ++f) {
    const Matrix train = detail::select_rows(data, fold, f, false);
    const Matrix test = detail::select_rows(data, fold, f, true);
    const Eigen::RowVectorXd mu = train.colwise().mean();
    const Matrix test_c = test.rowwise() - mu;
    const Matrix s_test = test_c.transpose() * test_c / static_cast<double>(test.rows());
    const CovarianceEstimate s_train = sample_covariance(train);
    std::size_t cell = 0;
    for (std::size_t gi = 0; gi < grid.gamma_grid.size(); ++gi) {
      std::optional<AdmmState> warm;
      for (double eta : etas[gi]) {
        GridPoint& gp = res.criterion_table[cell++];
        if (gp.failed) continue;
        try {
          const LrpsProblem prob(s_train, eta, grid.gamma_grid[gi], sign);
          const LrpsSolution sol = solve_lrps(prob, admm, warm ? &*warm : nullptr);
          warm = sol.state;
          gp.score += gaussian_loss(sol.marginal_precision().mat(), s_test) / k;
        } catch (const Error&) {
          gp.failed = true;
          warm.reset();
        }
      }
    }
  }
  detail::finish_selection(res);
  return res;
}

struct LrpsDof {
  double sparse = 0.0;
  double low_rank = 0.0;
  double total() const { return sparse + low_rank; }
};

/// Sparse part: (# non-zero off-diagonal entries)/2 + p. Low-rank part: the
/// dimension r p - r (r - 1) / 2 of rank-r PSD matrices, r the effective rank.
inline LrpsDof lrps_dof(const LrpsSolution& sol) {
  const int p = sol.k_o.dim();
  const IntMatrix nz = nnz_matrix(sol.k_o);
  const double off = nz.sum() - nz.diagonal().sum();
  const double r = sol.effective_rank;
  return {off / 2.0 + p, r * p - r * (r - 1.0) / 2.0};
}

/// n (tr(K S) - log det K) + ln(n) df + 4 ebic_gamma ln(p) df_sparse.
inline double ebic_criterion(const LrpsSolution& sol, const CovarianceEstimate& cov, double ebic_gamma) {
  const double n = static_cast<double>(cov.sample_size());
  const double p = cov.dim();
  const LrpsDof df = lrps_dof(sol);
  return n * gaussian_loss(sol.marginal_precision().mat(), cov.mat()) + std::log(n) * df.total() +
         4.0 * ebic_gamma * std::log(p) * df.sparse;
}

/// Extended BIC over the grid, fitted on the full data. ebic_gamma = 0 gives
/// the plain BIC.
inline SelectionResult ebic_select_lrps(const Matrix& data, const SelectionGrid& grid, double ebic_gamma,
                                        const AdmmConfig& admm = {},
                                        LatentSign sign = LatentSign::kPositiveSemiDef) {
  if (!(ebic_gamma >= 0.0 && ebic_gamma <= 1.0)) throw InvalidArgument("ebic_gamma must lie in [0, 1]");
  const CovarianceEstimate cov = sample_covariance(data);
  SelectionResult res;
  res.method = ebic_gamma == 0.0 ? SelectionMethod::kBic : SelectionMethod::kEbic;
  for (double gamma : grid.gamma_grid) {
    std::optional<AdmmState> warm;
    for (double eta : grid.etas_for(cov, gamma)) {
      GridPoint gp{eta, gamma, 0.0, false};
      try {
        const LrpsProblem prob(cov, eta, gamma, sign);
        const LrpsSolution sol = solve_lrps(prob, admm, warm ? &*warm : nullptr);
        warm = sol.state;
        gp.score = ebic_criterion(sol, cov, ebic_gamma);
      } catch (const Error&) {
        gp.failed = true;
        warm.reset();
      }
      res.criterion_table.push_back(gp);
    }
  }
  detail::finish_selection(res);
  return res;
}

// ---------------------------------------------------------------------------
// Pipeline and baselines

struct PipelineConfig {
  SelectionMethod selection = SelectionMethod::kCv5;
  /// GES penalty; nullopt selects ln(n)/2.
  std::optional<double> lambda;
  double ebic_gamma = 0.5;
  int folds = 5;
  std::uint64_t seed = 0;
  SelectionGrid grid;
  AdmmConfig admm;
  LatentSign latent_sign = LatentSign::kPositiveSemiDef;
  /// Centre columns before anything else.
  bool center = true;
};

struct PipelineResult {
  SelectionResult selection;
  LrpsSolution solution;
  /// K_O^-1 with the original sample size: the input to GES and IDA.
  CovarianceEstimate adjusted_cov{SymMatrix::identity(1), 1};
  double lambda = 0.0;
  ScoredCpdag ges;
};

inline SelectionResult select_lrps(const Matrix& data, const PipelineConfig& cfg) {
  switch (cfg.selection) {
    case SelectionMethod::kCv5:
      return cv_select_lrps(data, cfg.grid, cfg.folds, cfg.seed, cfg.admm, cfg.latent_sign);
    case SelectionMethod::kBic:
      return ebic_select_lrps(data, cfg.grid, 0.0, cfg.admm, cfg.latent_sign);
    case SelectionMethod::kEbic:
      return ebic_select_lrps(data, cfg.grid, cfg.ebic_gamma, cfg.admm, cfg.latent_sign);
  }
  throw InvalidArgument("unknown selection method");
}

/// Decomposition stage only: select (eta, gamma), refit on all rows, and
/// return the fit plus K_O^-1 as a covariance estimate.
inline PipelineResult fit_lrps_stage(const Matrix& raw, const PipelineConfig& cfg) {
  const Matrix data = cfg.center ? center_columns(raw) : raw;
  PipelineResult out;
  CovarianceEstimate cov = [&] {
    try {
      return sample_covariance(data, false);
    } catch (const Error& e) {
      throw StageError("covariance", e.what());
    }
  }();
  try {
    out.selection = select_lrps(data, cfg);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("selection", e.what());
  }
  try {
    const LrpsProblem prob(cov, out.selection.chosen_eta, out.selection.chosen_gamma, cfg.latent_sign);
    out.solution = solve_lrps(prob, cfg.admm);
    out.adjusted_cov = CovarianceEstimate(inverse_spd(out.solution.k_o), cov.sample_size());
  } catch (const Error& e) {
    throw StageError("lrps", e.what());
  }
  out.lambda = cfg.lambda.value_or(bic_lambda(cov.sample_size()));
  return out;
}

/// Two-stage estimator: decomposition, then GES on K_O^-1.
inline PipelineResult pipeline_lrps_ges(const Matrix& raw, const PipelineConfig& cfg) {
  PipelineResult out = fit_lrps_stage(raw, cfg);
  try {
    GesConfig gc;
    gc.lambda = out.lambda;
    out.ges = ges_run(out.adjusted_cov, gc);
  } catch (const Error& e) {
    throw StageError("ges", e.what());
  }
  return out;
}

/// Residuals of the centred data after removing its top-k principal
/// directions.
inline Matrix pca_regress_out(const Matrix& data, int k) {
  if (k < 0) throw InvalidArgument("pca_regress_out: k must be non-negative");
  if (k >= std::min(data.rows(), data.cols())) {
    throw DegenerateK("k = " + std::to_string(k) + " must be below min(n, p)");
  }
  const Matrix x = center_columns(data);
  if (k == 0) return x;
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinV);
  const Matrix v = svd.matrixV().leftCols(k);
  return x - x * v * v.transpose();
}

/// GES fits for each penalty in `lambdas`.
inline std::vector<Pdag> ges_lambda_path(const CovarianceEstimate& cov, const std::vector<double>& lambdas,
                                         std::optional<int> max_degree = std::nullopt) {
  std::vector<Pdag> out;
  for (double lam : lambdas) {
    GesConfig gc;
    gc.lambda = lam;
    gc.max_degree = max_degree;
    out.push_back(ges_run(cov, gc).cpdag);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

struct PrPoint {
  double precision = 1.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<double> recall_grid;
  std::vector<double> precision_at;

  double average_precision() const {
    if (precision_at.empty()) return 0.0;
    double s = 0.0;
    for (double v : precision_at) s += v;
    return s / static_cast<double>(precision_at.size());
  }
};

namespace detail {

inline void check_same_nodes(const Pdag& est, const Pdag& truth) {
  if (est.num_nodes() != truth.num_nodes()) throw MismatchedDims("estimate and truth differ in node count");
}

inline PrPoint make_point(double tp, double retrieved, double relevant) {
  return {retrieved > 0.0 ? tp / retrieved : 1.0, relevant > 0.0 ? tp / relevant : 1.0};
}

inline void check_grid(const std::vector<double>& grid) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] > 0.0 && grid[k] <= 1.0) || (k > 0 && !(grid[k] > grid[k - 1]))) {
      throw InvalidArgument("recall grid must be strictly increasing within (0, 1]");
    }
  }
}

}  // namespace detail

/// Precision and recall of the skeleton. An empty estimate has precision 1;
/// an empty truth has recall 1.
inline PrPoint skeleton_pr(const Pdag& est, const Pdag& truth) {
  detail::check_same_nodes(est, truth);
  double tp = 0.0;
  for (int i = 0; i < est.num_nodes(); ++i)
    for (int j = i + 1; j < est.num_nodes(); ++j)
      if (est.adjacent(i, j) && truth.adjacent(i, j)) tp += 1.0;
  return detail::make_point(tp, est.num_edges(), truth.num_edges());
}

/// Precision and recall with orientation. Matching orientation (or both
/// undirected) earns one true positive; an edge directed on one side and
/// undirected on the other earns half; reversed or absent edges earn none.
inline PrPoint directed_pr(const Pdag& est, const Pdag& truth) {
  detail::check_same_nodes(est, truth);
  double tp = 0.0;
  for (int i = 0; i < est.num_nodes(); ++i) {
    for (int j = i + 1; j < est.num_nodes(); ++j) {
      if (!est.adjacent(i, j) || !truth.adjacent(i, j)) continue;
      const bool est_und = est.has_undirected(i, j);
      const bool tru_und = truth.has_undirected(i, j);
      if (est_und && tru_und) {
        tp += 1.0;
      } else if (est_und || tru_und) {
        tp += 0.5;
      } else if (est.has_directed(i, j) == truth.has_directed(i, j)) {
        tp += 1.0;
      }
    }
  }
  return detail::make_point(tp, est.num_edges(), truth.num_edges());
}

/// Interpolated precision at fixed recalls: for each grid recall r, the best
/// precision among points with recall >= r (0 when none reaches r).
inline PrCurve path_pr_curve(std::vector<PrPoint> points, const std::vector<double>& grid = default_recall_grid()) {
  detail::check_grid(grid);
  std::sort(points.begin(), points.end(), [](const PrPoint& a, const PrPoint& b) { return a.recall > b.recall; });
  PrCurve curve{grid, std::vector<double>(grid.size(), 0.0)};
  double best = 0.0;
  std::size_t k = 0;
  for (std::size_t g = grid.size(); g-- > 0;) {
    while (k < points.size() && points[k].recall >= grid[g] - 1e-12) best = std::max(best, points[k++].precision);
    curve.precision_at[g] = best;
  }
  return curve;
}

struct RankedDecision {
  bool is_true_positive = false;
  /// Credit given when the decision is a true positive.
  double weight = 1.0;
};

/// Sweeps a ranking; at each grid recall r reports the best precision over
/// all prefixes reaching recall >= r (0 when none does).
inline PrCurve pr_at_fixed_recalls(const std::vector<RankedDecision>& ranked, double truth_count,
                                   const std::vector<double>& grid = default_recall_grid()) {
  if (!(truth_count > 0.0)) throw EmptyTruth("no positives in the truth");
  detail::check_grid(grid);
  std::vector<PrPoint> points;
  double tp = 0.0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (ranked[k].is_true_positive) tp += ranked[k].weight;
    points.push_back({tp / static_cast<double>(k + 1), tp / truth_count});
  }
  return path_pr_curve(points, grid);
}

/// Ranks pairs by min |S_ij| and scores the ranking against the truth: a
/// pair is positive when its true total effect exceeds zero_tol in magnitude.
inline PrCurve effect_ranking_pr(const EffectSets& effects, const Matrix& true_effects, double zero_tol = 1e-10,
                                 const std::vector<double>& grid = default_recall_grid()) {
  const int p = effects.num_nodes();
  if (true_effects.rows() != p || true_effects.cols() != p) throw MismatchedDims("effect truth has wrong shape");
  double positives = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j && std::abs(true_effects(i, j)) > zero_tol) positives += 1.0;
  std::vector<RankedDecision> ranked;
  for (auto [i, j] : rank_pairs(effects)) ranked.push_back({std::abs(true_effects(i, j)) > zero_tol, 1.0});
  return pr_at_fixed_recalls(ranked, positives, grid);
}

/// Linear-interpolation percentile (q in [0, 1]) of `values`.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct PrEnvelope {
  PrCurve lower;
  PrCurve upper;
};

/// Effect-ranking curves of IDA run on `draws` random DAGs (edge probability
/// `edge_prob`, converted to CPDAGs) with covariance `cov`; returns the 2.5
/// and 97.5 percentile bands per grid recall.
inline PrEnvelope random_ida_envelope(const CovarianceEstimate& cov, const Matrix& true_effects, double edge_prob,
                                      int draws, std::uint64_t seed, double zero_tol = 1e-10,
                                      const std::vector<double>& grid = default_recall_grid()) {
  if (draws < 1) throw InvalidArgument("random envelope needs at least one draw");
  CounterRng rng(seed, Stream::kRandomBaseline);
  std::vector<PrCurve> curves;
  for (int d = 0; d < draws; ++d) {
    const Dag dag = random_dag(cov.dim(), edge_prob, rng);
    curves.push_back(effect_ranking_pr(effect_matrix(dag_to_cpdag(dag), cov), true_effects, zero_tol, grid));
  }
  PrEnvelope env{{grid, std::vector<double>(grid.size())}, {grid, std::vector<double>(grid.size())}};
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> col;
    for (const auto& c : curves) col.push_back(c.precision_at[g]);
    env.lower.precision_at[g] = percentile(col, 0.025);
    env.upper.precision_at[g] = percentile(col, 0.975);
  }
  return env;
}

// ---------------------------------------------------------------------------
// One simulated replicate, all methods

struct ReplicateSettings {
  PipelineConfig pipeline;
  /// GES path penalties; empty selects default_lambda_path(n).
  std::vector<double> lambda_path;
  bool include_pca = true;
  /// Number of random DAGs for the RANDOM,IDA envelope (0 disables it).
  int random_draws = 0;
  double effect_zero_tol = 1e-10;
  std::vector<double> recall_grid = default_recall_grid();
};

struct MethodCurves {
  std::optional<PrCurve> skeleton;
  std::optional<PrCurve> directed;
  std::optional<PrCurve> effect;
  std::map<std::string, double> chosen_params;
  double seconds = 0.0;
};

struct ReplicateResult {
  SimDesign design;
  std::map<std::string, MethodCurves> methods;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::pair<PrCurve, PrCurve> path_curves(const std::vector<Pdag>& path, const Pdag& truth,
                                                const std::vector<double>& grid) {
  std::vector<PrPoint> skel;
  std::vector<PrPoint> dir;
  for (const auto& g : path) {
    skel.push_back(skeleton_pr(g, truth));
    dir.push_back(directed_pr(g, truth));
  }
  return {path_pr_curve(skel, grid), path_pr_curve(dir, grid)};
}

}  // namespace detail

/// Simulates one dataset from `design` and evaluates every method on it.
/// Skeleton/directed curves sweep the GES penalty path; effect curves use a
/// single BIC-tuned CPDAG per method. Curves are omitted when the truth has
/// no positives.
inline ReplicateResult run_replicate(const SimDesign& design, const ReplicateSettings& settings) {
  using clock = std::chrono::steady_clock;
  const LinearSem sem = random_sem(design);
  const Matrix data = center_columns(sample(sem, design.n, design.seed));
  const Pdag truth = dag_to_cpdag(sem.observed_dag());
  const Matrix effects_truth = true_total_effects(sem);
  const auto& grid = settings.recall_grid;
  const bool has_edges = truth.num_edges() > 0;
  bool has_effects = false;
  for (Eigen::Index i = 0; i < effects_truth.size(); ++i)
    if (std::abs(effects_truth.data()[i]) > settings.effect_zero_tol) has_effects = true;

  const CovarianceEstimate cov = sample_covariance(data, false);
  const auto lambdas = settings.lambda_path.empty() ? default_lambda_path(design.n) : settings.lambda_path;
  const double bic = settings.pipeline.lambda.value_or(bic_lambda(design.n));
  auto bic_cpdag = [&](const CovarianceEstimate& c) {
    GesConfig gc;
    gc.lambda = bic;
    return ges_run(c, gc).cpdag;
  };

  ReplicateResult res;
  res.design = design;

  {  // GES on the sample covariance
    auto t0 = clock::now();
    MethodCurves m;
    if (has_edges) std::tie(m.skeleton, m.directed) = detail::path_curves(ges_lambda_path(cov, lambdas), truth, grid);
    m.seconds = detail::seconds_since(t0);
    res.methods["ges"] = std::move(m);
    t0 = clock::now();
    MethodCurves e;
    if (has_effects) e.effect = effect_ranking_pr(effect_matrix(bic_cpdag(cov), cov), effects_truth, settings.effect_zero_tol, grid);
    e.chosen_params["lambda"] = bic;
    e.seconds = detail::seconds_since(t0);
    res.methods["ges-ida"] = std::move(e);
  }
  {  // LRpS + GES
    auto t0 = clock::now();
    PipelineConfig pc = settings.pipeline;
    pc.seed = design.seed;
    pc.center = false;
    const PipelineResult fit = fit_lrps_stage(data, pc);
    const double fit_seconds = detail::seconds_since(t0);
    MethodCurves m;
    m.chosen_params = {{"eta", fit.selection.chosen_eta},
                       {"gamma", fit.selection.chosen_gamma},
                       {"effective_rank", fit.solution.effective_rank}};
    if (has_edges) std::tie(m.skeleton, m.directed) = detail::path_curves(ges_lambda_path(fit.adjusted_cov, lambdas), truth, grid);
    m.seconds = detail::seconds_since(t0);
    MethodCurves e;
    e.chosen_params = m.chosen_params;
    e.chosen_params["lambda"] = bic;
    t0 = clock::now();
    if (has_effects) {
      e.effect = effect_ranking_pr(effect_matrix(bic_cpdag(fit.adjusted_cov), fit.adjusted_cov), effects_truth,
                                   settings.effect_zero_tol, grid);
    }
    e.seconds = fit_seconds + detail::seconds_since(t0);
    res.methods["lrps-ges"] = std::move(m);
    res.methods["lrps-ges-ida"] = std::move(e);
  }
  {  // EMPTY,IDA: unadjusted regressions
    auto t0 = clock::now();
    MethodCurves e;
    if (has_effects) e.effect = effect_ranking_pr(effect_matrix(Pdag(design.p), cov), effects_truth, settings.effect_zero_tol, grid);
    e.seconds = detail::seconds_since(t0);
    res.methods["empty-ida"] = std::move(e);
  }
  if (settings.include_pca) {
    // PCA*+GES: the number of components is picked with knowledge of the
    // truth, maximising average precision.
    auto t0 = clock::now();
    MethodCurves best_skel;
    MethodCurves best_eff;
    double best_skel_ap = -1.0;
    double best_eff_ap = -1.0;
    const int k_max = std::min<int>(design.h + 2, static_cast<int>(std::min<long>(design.n, design.p)) - 1);
    for (int k = 0; k <= k_max; ++k) {
      const Matrix resid = pca_regress_out(data, k);
      CovarianceEstimate rcov = [&] {
        try {
          return sample_covariance(resid, false);
        } catch (const NonPositiveDefiniteInput&) {
          return CovarianceEstimate(SymMatrix::identity(design.p), design.n);
        }
      }();
      const auto path = ges_lambda_path(rcov, lambdas);
      if (has_edges) {
        auto [skel, dir] = detail::path_curves(path, truth, grid);
        if (skel.average_precision() > best_skel_ap) {
          best_skel_ap = skel.average_precision();
          best_skel.skeleton = skel;
          best_skel.directed = dir;
          best_skel.chosen_params = {{"k", k}};
        }
      }
      if (has_effects) {
        for (std::size_t li = 0; li < path.size(); ++li) {
          auto curve = effect_ranking_pr(effect_matrix(path[li], rcov), effects_truth, settings.effect_zero_tol, grid);
          if (curve.average_precision() > best_eff_ap) {
            best_eff_ap = curve.average_precision();
            best_eff.effect = curve;
            best_eff.chosen_params = {{"k", k}, {"lambda", lambdas[li]}};
          }
        }
      }
    }
    best_skel.seconds = best_eff.seconds = detail::seconds_since(t0);
    res.methods["pca-ges"] = std::move(best_skel);
    res.methods["pca-ges-ida"] = std::move(best_eff);
  }
  if (settings.random_draws > 0 && has_effects) {
    auto t0 = clock::now();
    const auto env = random_ida_envelope(cov, effects_truth, design.sparsity, settings.random_draws, design.seed,
                                         settings.effect_zero_tol, grid);
    MethodCurves lo;
    MethodCurves hi;
    lo.effect = env.lower;
    hi.effect = env.upper;
    lo.seconds = hi.seconds = detail::seconds_since(t0);
    res.methods["random-ida-p2.5"] = std::move(lo);
    res.methods["random-ida-p97.5"] = std::move(hi);
  }
  return res;
}

}  // namespace lrpsges

#endif  // LRPSGES_TUNE_EVAL_HPP
