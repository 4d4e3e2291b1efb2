#ifndef LRPSGES_IDA_HPP
#define LRPSGES_IDA_HPP

// Possible total causal effects consistent with a CPDAG (local IDA):
// for each locally valid parent set P of x, the effect of x on y is the
// coefficient of x in the regression of y on {x} u P, or 0 when y is in P.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "lrpsges/errors.hpp"
#include "lrpsges/graphs.hpp"
#include "lrpsges/matcore.hpp"

namespace lrpsges {

/// Parent sets of x obtainable by orienting its undirected edges without
/// creating a new v-structure at x. Each set is sorted; certain parents are
/// always included.
inline std::vector<std::vector<int>> possible_parent_sets(const Pdag& cpdag, int x) {
  const auto pa = cpdag.parents(x);
  const auto sib = cpdag.neighbors(x);
  if (sib.size() > 30) throw TooLarge("too many undirected neighbours for local IDA");
  std::vector<std::vector<int>> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << sib.size()); ++mask) {
    std::vector<int> chosen;
    for (std::size_t k = 0; k < sib.size(); ++k)
      if (mask >> k & 1U) chosen.push_back(sib[k]);
    bool valid = is_clique(cpdag, chosen);
    for (std::size_t a = 0; a < chosen.size() && valid; ++a)
      for (int q : pa)
        if (!cpdag.adjacent(chosen[a], q)) valid = false;
    if (!valid) continue;
    chosen.insert(chosen.end(), pa.begin(), pa.end());
    std::sort(chosen.begin(), chosen.end());
    out.push_back(std::move(chosen));
  }
  return out;
}

/// Coefficient of x in the least-squares regression of y on {x} u given,
/// computed from a covariance matrix.
inline double regression_coefficient(const Matrix& cov, int x, int y, const std::vector<int>& given) {
  std::vector<int> idx{x};
  idx.insert(idx.end(), given.begin(), given.end());
  const Matrix szz = principal_submatrix(cov, idx);
  Vector szy(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) szy(static_cast<Eigen::Index>(k)) = cov(idx[k], y);
  Eigen::LLT<Matrix> llt(szz);
  if (llt.info() != Eigen::Success || llt.rcond() < 1.0 / kMaxCondition) {
    throw SingularSubmatrix("regression design block is singular");
  }
  return llt.solve(szy)(0);
}

struct EffectList {
  /// One entry per parent set that could be evaluated (a multiset).
  std::vector<double> values;
  /// Parent sets skipped because their covariance block was singular.
  int skipped = 0;
};

inline EffectList total_effects(const Pdag& cpdag, const CovarianceEstimate& cov, int x, int y) {
  const int p = cpdag.num_nodes();
  if (cov.dim() != p) throw MismatchedDims("graph and covariance differ in size");
  if (x == y || x < 0 || y < 0 || x >= p || y >= p) throw InvalidArgument("total_effects: bad pair");
  EffectList out;
  for (const auto& pa : possible_parent_sets(cpdag, x)) {
    if (std::binary_search(pa.begin(), pa.end(), y)) {
      out.values.push_back(0.0);
      continue;
    }
    try {
      out.values.push_back(regression_coefficient(cov.mat(), x, y, pa));
    } catch (const SingularSubmatrix&) {
      ++out.skipped;
    }
  }
  return out;
}

/// Possible total effects for every ordered pair.
class EffectSets {
 public:
  EffectSets() = default;
  explicit EffectSets(int num_nodes)
      : n_(num_nodes), sets_(static_cast<std::size_t>(num_nodes) * num_nodes) {}

  int num_nodes() const noexcept { return n_; }
  const std::vector<double>& at(int i, int j) const { return sets_[index(i, j)]; }
  std::vector<double>& at(int i, int j) { return sets_[index(i, j)]; }

  /// min |s| over the set; 0 for an empty set.
  double min_abs(int i, int j) const {
    const auto& s = at(i, j);
    if (s.empty()) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (double v : s) best = std::min(best, std::abs(v));
    return best;
  }

  int skipped = 0;

 private:
  std::size_t index(int i, int j) const {
    if (i == j || i < 0 || j < 0 || i >= n_ || j >= n_) throw InvalidArgument("EffectSets: bad pair");
    return static_cast<std::size_t>(i) * n_ + j;
  }
  int n_ = 0;
  std::vector<std::vector<double>> sets_;
};

/// Effects of x on y for all ordered pairs; parent sets are shared per x.
inline EffectSets effect_matrix(const Pdag& cpdag, const CovarianceEstimate& cov) {
  const int p = cpdag.num_nodes();
  if (cov.dim() != p) throw MismatchedDims("graph and covariance differ in size");
  EffectSets out(p);
  for (int x = 0; x < p; ++x) {
    const auto sets = possible_parent_sets(cpdag, x);
    for (int y = 0; y < p; ++y) {
      if (y == x) continue;
      auto& cell = out.at(x, y);
      for (const auto& pa : sets) {
        if (std::binary_search(pa.begin(), pa.end(), y)) {
          cell.push_back(0.0);
          continue;
        }
        try {
          cell.push_back(regression_coefficient(cov.mat(), x, y, pa));
        } catch (const SingularSubmatrix&) {
          ++out.skipped;
        }
      }
    }
  }
  return out;
}

/// Ordered pairs by min |s| descending; ties by (i, j) ascending.
inline std::vector<Edge> rank_pairs(const EffectSets& effects) {
  const int p = effects.num_nodes();
  std::vector<std::pair<double, Edge>> scored;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j) scored.push_back({effects.min_abs(i, j), {i, j}});
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Edge> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(s.second);
  return out;
}

}  // namespace lrpsges

#endif  // LRPSGES_IDA_HPP
