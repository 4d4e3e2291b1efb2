#ifndef LRPSGES_SIMSEM_HPP
#define LRPSGES_SIMSEM_HPP

// Synthetic ground truth: random linear-Gaussian SEMs with hidden source
// variables, their exact population moments, the sparse-plus-low-rank split
// of the observed precision matrix, sampling, and true total effects.
//
// Model:  X = B X + e,  X = (X_O, X_H),  B = [[B_O, B_OH], [0, B_H]],
//         e ~ N(0, diag(noise_var)).  Row i of B holds the parents of i.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lrpsges/errors.hpp"
#include "lrpsges/graphs.hpp"
#include "lrpsges/matcore.hpp"
#include "lrpsges/rng.hpp"

namespace lrpsges {

struct SimDesign {
  int p = 50;
  int h = 5;
  long n = 500;
  /// Percentage of observed variables each hidden variable points to.
  double f_pct = 70.0;
  /// Probability of each admissible observed edge.
  double sparsity = 0.05;
  double weight_lo = 0.3;
  double weight_hi = 1.0;
  double noise_lo = 0.5;
  double noise_hi = 1.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (p < 1) throw InvalidArgument("design: p must be positive");
    if (h < 0) throw InvalidArgument("design: h must be non-negative");
    if (n < 0) throw InvalidArgument("design: n must be non-negative");
    if (!(f_pct >= 0.0 && f_pct <= 100.0)) throw InvalidArgument("design: f_pct must lie in [0, 100]");
    if (!(sparsity > 0.0 && sparsity < 1.0)) throw InvalidArgument("design: sparsity must lie in (0, 1)");
    if (!(weight_lo > 0.0 && weight_lo < weight_hi)) throw InvalidArgument("design: need 0 < weight_lo < weight_hi");
    if (!(noise_lo > 0.0 && noise_lo < noise_hi)) throw InvalidArgument("design: need 0 < noise_lo < noise_hi");
  }

  /// Number of observed children of every hidden variable.
  int hidden_fan_out() const {
    return static_cast<int>(std::ceil(f_pct * p / 100.0 - 1e-9));
  }
};

struct LinearSem {
  int p = 0;
  int h = 0;
  Matrix b_o;   // p x p
  Matrix b_oh;  // p x h, hidden -> observed
  Matrix b_h;   // h x h
  Vector noise_var;  // p + h

  void validate() const {
    if (b_o.rows() != p || b_o.cols() != p || b_oh.rows() != p || b_oh.cols() != h || b_h.rows() != h ||
        b_h.cols() != h || noise_var.size() != p + h) {
      throw MismatchedDims("LinearSem block sizes are inconsistent");
    }
    if ((noise_var.array() <= 0.0).any()) throw InvalidArgument("LinearSem noise variances must be positive");
    if (!is_acyclic(joint_graph())) throw InvalidArgument("LinearSem coefficients are not acyclic");
  }

  /// (p+h) x (p+h) coefficient matrix.
  Matrix joint_b() const {
    Matrix b = Matrix::Zero(p + h, p + h);
    b.topLeftCorner(p, p) = b_o;
    b.topRightCorner(p, h) = b_oh;
    b.bottomRightCorner(h, h) = b_h;
    return b;
  }

  /// Graph on all p + h nodes (hidden nodes are p..p+h-1).
  Pdag joint_graph() const {
    const Matrix b = joint_b();
    Pdag g(p + h);
    for (int i = 0; i < p + h; ++i)
      for (int j = 0; j < p + h; ++j)
        if (b(i, j) != 0.0) g.add_directed(j, i);
    return g;
  }

  Dag observed_dag() const {
    Pdag g(p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (b_o(i, j) != 0.0) g.add_directed(j, i);
    return Dag(std::move(g));
  }
};

namespace detail {

inline double draw_weight(CounterRng& rng, double lo, double hi) {
  const double mag = rng.uniform(lo, hi);
  return rng.bernoulli(0.5) ? mag : -mag;
}

}  // namespace detail

/// Random DAG over p nodes: each pair is joined with probability `edge_prob`,
/// oriented along a uniformly random node order.
inline Dag random_dag(int p, double edge_prob, CounterRng& structure) {
  const auto order = structure.permutation(p);
  Pdag g(p);
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b)
      if (structure.bernoulli(edge_prob)) g.add_directed(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]);
  return Dag(std::move(g));
}

inline LinearSem random_sem(const SimDesign& design) {
  design.validate();
  CounterRng structure(design.seed, Stream::kStructure);
  CounterRng weights(design.seed, Stream::kWeights);
  CounterRng noise(design.seed, Stream::kNoiseVariances);

  LinearSem sem;
  sem.p = design.p;
  sem.h = design.h;
  sem.b_o = Matrix::Zero(design.p, design.p);
  sem.b_oh = Matrix::Zero(design.p, design.h);
  sem.b_h = Matrix::Zero(design.h, design.h);

  const Dag dag = random_dag(design.p, design.sparsity, structure);
  for (auto [from, to] : dag.graph().directed_edges()) {
    sem.b_o(to, from) = detail::draw_weight(weights, design.weight_lo, design.weight_hi);
  }
  const int fan_out = design.hidden_fan_out();
  for (int k = 0; k < design.h; ++k) {
    const auto perm = structure.permutation(design.p);
    std::vector<int> kids(perm.begin(), perm.begin() + fan_out);
    std::sort(kids.begin(), kids.end());
    for (int child : kids) sem.b_oh(child, k) = detail::draw_weight(weights, design.weight_lo, design.weight_hi);
  }
  sem.noise_var.resize(design.p + design.h);
  for (int i = 0; i < design.p + design.h; ++i) sem.noise_var(i) = noise.uniform(design.noise_lo, design.noise_hi);
  return sem;
}

/// Population covariance (I - B)^-1 Lambda (I - B)^-T over all p + h variables.
inline CovarianceEstimate implied_covariance(const LinearSem& sem, long sample_size = 1) {
  const int d = sem.p + sem.h;
  const Matrix ib = Matrix::Identity(d, d) - sem.joint_b();
  const Matrix a = ib.partialPivLu().inverse();
  return CovarianceEstimate(SymMatrix::symmetrized(a * sem.noise_var.asDiagonal() * a.transpose()), sample_size);
}

/// Observed block of the population covariance.
inline CovarianceEstimate observed_covariance(const LinearSem& sem, long sample_size = 1) {
  const Matrix full = implied_covariance(sem).mat();
  return CovarianceEstimate(SymMatrix::symmetrized(full.topLeftCorner(sem.p, sem.p)), sample_size);
}

/// Joint precision (I - B)^T Lambda^-1 (I - B).
inline SymMatrix joint_precision(const LinearSem& sem) {
  const int d = sem.p + sem.h;
  const Matrix ib = Matrix::Identity(d, d) - sem.joint_b();
  return SymMatrix::symmetrized(ib.transpose() * sem.noise_var.cwiseInverse().asDiagonal() * ib);
}

struct PrecisionDecomposition {
  SymMatrix k_o_star;
  SymMatrix l_star;
};

/// Splits the observed marginal precision as K_O - K_HO^T K_H^-1 K_HO.
inline PrecisionDecomposition precision_decomposition(const LinearSem& sem) {
  const Matrix k = joint_precision(sem).mat();
  const int p = sem.p;
  const int h = sem.h;
  PrecisionDecomposition out{SymMatrix(Matrix(k.topLeftCorner(p, p))), SymMatrix::zero(p)};
  if (h > 0) {
    const Matrix k_ho = k.bottomLeftCorner(h, p);
    const Matrix k_h = k.bottomRightCorner(h, h);
    out.l_star = SymMatrix::symmetrized(k_ho.transpose() * k_h.ldlt().solve(k_ho));
  }
  return out;
}

/// n x p matrix of observed variables drawn by forward simulation in a
/// topological order of the joint graph.
inline Matrix sample(const LinearSem& sem, long n, std::uint64_t seed) {
  if (n < 0) throw InvalidArgument("sample: n must be non-negative");
  const int d = sem.p + sem.h;
  const Matrix b = sem.joint_b();
  const auto order = topological_order(sem.joint_graph());
  if (!order) throw InvalidArgument("sample: coefficients are cyclic");
  const Vector sd = sem.noise_var.cwiseSqrt();
  CounterRng rng(seed, Stream::kSampling);
  Matrix out(n, sem.p);
  Vector eps(d);
  Vector x(d);
  for (long r = 0; r < n; ++r) {
    for (int v = 0; v < d; ++v) eps(v) = rng.normal();
    for (int v : *order) {
      double acc = sd(v) * eps(v);
      for (int u = 0; u < d; ++u)
        if (b(v, u) != 0.0) acc += b(v, u) * x(u);
      x(v) = acc;
    }
    out.row(r) = x.head(sem.p).transpose();
  }
  return out;
}

/// Entry (i, j): total causal effect of X_i on X_j, the sum over directed
/// paths i -> ... -> j of products of edge weights. Hidden variables are
/// sources, so only observed paths contribute.
inline Matrix true_total_effects(const LinearSem& sem) {
  const int p = sem.p;
  // (I - B)^-1 = sum_k B^k; B is nilpotent, and summing powers keeps
  // pairs without a directed path exactly zero.
  Matrix t = Matrix::Identity(p, p);
  Matrix power = Matrix::Identity(p, p);
  for (int k = 1; k < p; ++k) {
    power = (sem.b_o * power).eval();
    if (power.cwiseAbs().maxCoeff() == 0.0) break;
    t += power;
  }
  Matrix out = t.transpose();
  out.diagonal().setZero();
  return out;
}

}  // namespace lrpsges

#endif  // LRPSGES_SIMSEM_HPP
