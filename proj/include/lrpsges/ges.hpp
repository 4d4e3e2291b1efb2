#ifndef LRPSGES_GES_HPP
#define LRPSGES_GES_HPP

// Greedy equivalence search over CPDAGs with a decomposable l0-penalised
// Gaussian log-likelihood score computed from a covariance matrix.
// Operators follow Chickering's Insert(x, y, T) / Delete(x, y, H).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrpsges/errors.hpp"
#include "lrpsges/graphs.hpp"
#include "lrpsges/matcore.hpp"

namespace lrpsges {

/// lambda = ln(n) / 2: the per-parameter BIC penalty in log-likelihood units.
inline double bic_lambda(long n) { return 0.5 * std::log(static_cast<double>(n)); }

/// s(i, P) = -(n/2) ln(var(i | P)) - lambda (|P| + 1).
inline double local_score(const CovarianceEstimate& cov, int node, std::span<const int> parents, double lambda) {
  const int p = cov.dim();
  if (node < 0 || node >= p) throw InvalidArgument("local_score: node out of range");
  for (int q : parents) {
    if (q == node || q < 0 || q >= p) throw InvalidArgument("local_score: bad parent set");
  }
  const Matrix& s = cov.mat();
  double resid = s(node, node);
  if (!parents.empty()) {
    const Matrix spp = principal_submatrix(s, parents);
    Vector spi(static_cast<Eigen::Index>(parents.size()));
    for (std::size_t k = 0; k < parents.size(); ++k) spi(static_cast<Eigen::Index>(k)) = s(parents[k], node);
    Eigen::LLT<Matrix> llt(spp);
    if (llt.info() != Eigen::Success || llt.rcond() < 1.0 / kMaxCondition) {
      throw SingularSubmatrix("parent covariance block is singular");
    }
    resid -= spi.dot(llt.solve(spi));
  }
  if (!(resid > 1e-12)) {
    throw NonPositiveResidualVariance("residual variance " + std::to_string(resid) + " for node " +
                                      std::to_string(node));
  }
  const double n = static_cast<double>(cov.sample_size());
  return -0.5 * n * std::log(resid) - lambda * (static_cast<double>(parents.size()) + 1.0);
}

struct GesConfig {
  /// Per-parameter penalty.
  double lambda = 1.0;
  /// Optional cap on the number of adjacencies of any node.
  std::optional<int> max_degree;
  /// Maximum number of operator applications per phase.
  int phase_limit = 100000;
  /// Minimum score improvement for an operator to be applied.
  double score_eps = 1e-9;
  /// Called after each applied operator with the new CPDAG and the
  /// incrementally maintained total score.
  std::function<void(const Pdag&, double)> on_step;
};

struct ScoredCpdag {
  Pdag cpdag;
  double total_score = 0.0;
  std::vector<double> per_node_scores;
  int steps = 0;
  bool phase_limit_hit = false;
};

/// Memoised local scores for one covariance and penalty.
class ScoreCache {
 public:
  ScoreCache(const CovarianceEstimate& cov, double lambda) : cov_(cov), lambda_(lambda) {}

  double operator()(int node, std::vector<int> parents) {
    std::sort(parents.begin(), parents.end());
    parents.push_back(node);  // key: sorted parents followed by the node
    auto it = memo_.find(parents);
    if (it != memo_.end()) return it->second;
    const double v = local_score(cov_, node, std::span<const int>(parents.data(), parents.size() - 1), lambda_);
    memo_.emplace(std::move(parents), v);
    return v;
  }

  const CovarianceEstimate& cov() const { return cov_; }
  double lambda() const { return lambda_; }

 private:
  const CovarianceEstimate& cov_;
  double lambda_;
  std::map<std::vector<int>, double> memo_;
};

/// Score of the class represented by `cpdag` (evaluated on one member DAG).
inline ScoredCpdag score_cpdag(const Pdag& cpdag, ScoreCache& score) {
  const Dag dag = pdag_to_dag(cpdag);
  ScoredCpdag out;
  out.cpdag = cpdag;
  out.per_node_scores.resize(static_cast<std::size_t>(cpdag.num_nodes()));
  for (int v = 0; v < cpdag.num_nodes(); ++v) {
    out.per_node_scores[static_cast<std::size_t>(v)] = score(v, dag.parents(v));
    out.total_score += out.per_node_scores[static_cast<std::size_t>(v)];
  }
  return out;
}

inline ScoredCpdag score_cpdag(const Pdag& cpdag, const CovarianceEstimate& cov, double lambda) {
  ScoreCache cache(cov, lambda);
  return score_cpdag(cpdag, cache);
}

namespace detail {

inline void check_ges_inputs(const CovarianceEstimate& cov, const GesConfig& config) {
  if (cov.sample_size() <= 2) throw InsufficientSamples("GES needs more than two samples");
  if (!(config.lambda > 0.0)) throw InvalidArgument("GES lambda must be positive");
  if (config.phase_limit < 1) throw InvalidArgument("phase_limit must be positive");
}

inline std::vector<int> subset(const std::vector<int>& pool, std::uint64_t mask) {
  std::vector<int> out;
  for (std::size_t k = 0; k < pool.size(); ++k)
    if (mask >> k & 1U) out.push_back(pool[k]);
  return out;
}

inline std::vector<int> set_union(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

/// True when every semi-directed path from `from` to `to` hits `blocked`.
inline bool semi_directed_paths_blocked(const Pdag& g, int from, int to, const std::vector<int>& blocked) {
  const int n = g.num_nodes();
  std::vector<bool> stop(static_cast<std::size_t>(n), false);
  for (int b : blocked) stop[static_cast<std::size_t>(b)] = true;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<int> stack{from};
  seen[static_cast<std::size_t>(from)] = true;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w = 0; w < n; ++w) {
      if (seen[static_cast<std::size_t>(w)] || w == v) continue;
      if (!(g.has_directed(v, w) || g.has_undirected(v, w))) continue;
      if (w == to) return false;
      if (stop[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = true;
      stack.push_back(w);
    }
  }
  return true;
}

struct Operator {
  int x = -1;
  int y = -1;
  std::vector<int> set;  // T for inserts, H for deletes
  double gain = -std::numeric_limits<double>::infinity();

  bool beats(double other_gain, int ox, int oy, const std::vector<int>& oset) const {
    // `this` is the incumbent; returns true when the challenger should win.
    if (other_gain > gain) return true;
    if (other_gain < gain) return false;
    return std::tie(ox, oy, oset) < std::tie(x, y, set);
  }
};

inline std::optional<Operator> best_insert(const Pdag& g, ScoreCache& score, const GesConfig& config) {
  const int n = g.num_nodes();
  std::optional<Operator> best;
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      if (x == y || g.adjacent(x, y)) continue;
      if (config.max_degree && (g.degree(x) >= *config.max_degree || g.degree(y) >= *config.max_degree)) continue;
      std::vector<int> na;
      std::vector<int> pool;
      for (int z : g.neighbors(y)) (g.adjacent(z, x) ? na : pool).push_back(z);
      if (!is_clique(g, na)) continue;
      if (pool.size() > 20) throw TooLarge("Insert operator: too many candidate T nodes");
      const auto pa_y = g.parents(y);
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pool.size()); ++mask) {
        const auto t = subset(pool, mask);
        const auto na_t = set_union(na, t);
        if (!is_clique(g, na_t)) continue;
        if (!semi_directed_paths_blocked(g, y, x, na_t)) continue;
        const auto base = set_union(na_t, pa_y);
        double gain;
        try {
          gain = score(y, set_union(base, {x})) - score(y, base);
        } catch (const SingularSubmatrix&) {
          continue;
        } catch (const NonPositiveResidualVariance&) {
          continue;
        }
        if (!best || best->beats(gain, x, y, t)) best = Operator{x, y, t, gain};
      }
    }
  }
  return best;
}

inline std::optional<Operator> best_delete(const Pdag& g, ScoreCache& score) {
  const int n = g.num_nodes();
  std::optional<Operator> best;
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      if (x == y || !(g.has_directed(x, y) || g.has_undirected(x, y))) continue;
      std::vector<int> na;
      for (int z : g.neighbors(y))
        if (z != x && g.adjacent(z, x)) na.push_back(z);
      if (na.size() > 20) throw TooLarge("Delete operator: too many candidate H nodes");
      auto pa_y = g.parents(y);
      std::erase(pa_y, x);
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << na.size()); ++mask) {
        const auto h = subset(na, mask);
        std::vector<int> rest;
        for (int z : na)
          if (!std::binary_search(h.begin(), h.end(), z)) rest.push_back(z);
        if (!is_clique(g, rest)) continue;
        const auto without = set_union(rest, pa_y);
        double gain;
        try {
          gain = score(y, without) - score(y, set_union(without, {x}));
        } catch (const SingularSubmatrix&) {
          continue;
        } catch (const NonPositiveResidualVariance&) {
          continue;
        }
        if (!best || best->beats(gain, x, y, h)) best = Operator{x, y, h, gain};
      }
    }
  }
  return best;
}

inline Pdag apply_insert(Pdag g, const Operator& op) {
  g.add_directed(op.x, op.y);
  for (int t : op.set) g.orient(t, op.y);
  return complete_pdag(g);
}

inline Pdag apply_delete(Pdag g, const Operator& op) {
  g.remove_edge(op.x, op.y);
  for (int h : op.set) {
    if (g.has_undirected(op.y, h)) g.orient(op.y, h);
    if (g.has_undirected(op.x, h)) g.orient(op.x, h);
  }
  return complete_pdag(g);
}

inline ScoredCpdag run_phase(ScoredCpdag state, ScoreCache& score, const GesConfig& config, bool forward) {
  double running = state.total_score;
  int steps = 0;
  bool limit_hit = false;
  while (true) {
    const auto op = forward ? best_insert(state.cpdag, score, config) : best_delete(state.cpdag, score);
    if (!op || !(op->gain > config.score_eps)) break;
    if (steps >= config.phase_limit) {
      limit_hit = true;
      break;
    }
    state.cpdag = forward ? apply_insert(state.cpdag, *op) : apply_delete(state.cpdag, *op);
    running += op->gain;
    ++steps;
    if (config.on_step) config.on_step(state.cpdag, running);
  }
  ScoredCpdag out = score_cpdag(state.cpdag, score);
  out.steps = state.steps + steps;
  out.phase_limit_hit = state.phase_limit_hit || limit_hit;
  return out;
}

}  // namespace detail

/// Forward phase from the empty graph. When the phase limit is reached the
/// best graph so far is returned with `phase_limit_hit` set.
inline ScoredCpdag ges_forward(const CovarianceEstimate& cov, const GesConfig& config) {
  detail::check_ges_inputs(cov, config);
  ScoreCache score(cov, config.lambda);
  return detail::run_phase(score_cpdag(Pdag(cov.dim()), score), score, config, true);
}

inline ScoredCpdag ges_backward(const ScoredCpdag& start, const CovarianceEstimate& cov, const GesConfig& config) {
  detail::check_ges_inputs(cov, config);
  if (start.cpdag.num_nodes() != cov.dim()) throw MismatchedDims("GES start graph and covariance differ in size");
  ScoreCache score(cov, config.lambda);
  ScoredCpdag rescored = score_cpdag(start.cpdag, score);
  rescored.steps = start.steps;
  rescored.phase_limit_hit = start.phase_limit_hit;
  return detail::run_phase(std::move(rescored), score, config, false);
}

/// Forward phase followed by backward phase.
inline ScoredCpdag ges_run(const CovarianceEstimate& cov, const GesConfig& config) {
  detail::check_ges_inputs(cov, config);
  ScoreCache score(cov, config.lambda);
  auto fwd = detail::run_phase(score_cpdag(Pdag(cov.dim()), score), score, config, true);
  return detail::run_phase(std::move(fwd), score, config, false);
}

}  // namespace lrpsges

#endif  // LRPSGES_GES_HPP
