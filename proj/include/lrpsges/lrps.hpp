#ifndef LRPSGES_LRPS_HPP
#define LRPSGES_LRPS_HPP

// Sparse-plus-low-rank decomposition of a precision matrix:
//
//   minimise  tr((K - L) S) - log det(K - L) + eta * (gamma * |K|_1 + |L|_*)
//   subject to K - L > 0, L >= 0   (or L <= 0 for the selection-bias variant)
//
// solved by a three-block ADMM on the splitting R = K - L.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "lrpsges/errors.hpp"
#include "lrpsges/matcore.hpp"

namespace lrpsges {

/// Definiteness constraint placed on the latent component.
enum class LatentSign { kPositiveSemiDef, kNegativeSemiDef };

inline const char* to_string(LatentSign s) {
  return s == LatentSign::kPositiveSemiDef ? "psd" : "nsd";
}

struct LrpsProblem {
  LrpsProblem(CovarianceEstimate cov_in, double eta_in, double gamma_in,
              LatentSign sign = LatentSign::kPositiveSemiDef)
      : cov(std::move(cov_in)), eta(eta_in), gamma(gamma_in), latent_sign(sign) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw IllegalPenalty("eta must be positive, got " + std::to_string(eta));
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw IllegalPenalty("gamma must be positive, got " + std::to_string(gamma));
    }
  }

  CovarianceEstimate cov;
  double eta;
  double gamma;
  LatentSign latent_sign;
};

struct AdmmConfig {
  double penalty_rho = 1.0;
  int max_iter = 5000;
  double tol_primal = 1e-7;
  double tol_dual = 1e-7;
  /// Eigenvalues of L smaller than (largest / rank_ratio_cut) do not count
  /// towards the effective rank.
  double rank_ratio_cut = 100.0;
  /// Residual balancing: rho is doubled/halved when one residual exceeds
  /// the other by `balance_ratio`.
  bool adaptive_rho = true;
  double balance_ratio = 10.0;
  double balance_factor = 2.0;
  /// Penalise the diagonal of K as well (the literal program). Off by default.
  bool penalize_diagonal = false;
  /// Hold L at zero; the program then reduces to the graphical lasso.
  bool freeze_latent = false;

  void validate() const {
    if (!(penalty_rho > 0.0)) throw InvalidArgument("penalty_rho must be positive");
    if (max_iter < 1) throw InvalidArgument("max_iter must be positive");
    if (!(tol_primal > 0.0) || !(tol_dual > 0.0)) throw InvalidArgument("tolerances must be positive");
    if (!(rank_ratio_cut >= 1.0)) throw InvalidArgument("rank_ratio_cut must be >= 1");
    if (!(balance_ratio > 1.0) || !(balance_factor > 1.0)) throw InvalidArgument("bad residual balancing constants");
  }
};

/// Raw ADMM iterate; reusable as a warm start for a neighbouring problem.
struct AdmmState {
  Matrix r;
  Matrix s;
  Matrix l;
  Matrix y;  // unscaled dual
  double rho = 1.0;
};

struct LrpsSolution {
  SymMatrix k_o;
  /// Latent component at the optimum (numerically-zero eigenvalues removed).
  SymMatrix l;
  /// `l` with eigenvalues beyond the rank ratio cut set to zero.
  SymMatrix l_truncated;
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int effective_rank = 0;
  bool converged = false;
  /// Set when a ridge was added to a singular input covariance.
  bool regularized = false;
  double ridge = 0.0;
  bool penalize_diagonal = false;
  bool latent_frozen = false;
  AdmmState state;

  SymMatrix marginal_precision() const { return SymMatrix::symmetrized(k_o.mat() - l.mat()); }
};

/// sign(x) * max(|x| - t, 0).
inline double prox_soft_threshold(double x, double t) {
  if (t < 0.0) throw InvalidArgument("soft threshold requires t >= 0");
  const double mag = std::abs(x) - t;
  return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

/// Elementwise soft threshold; the diagonal is copied through unless
/// `penalize_diagonal` is set.
inline Matrix soft_threshold_matrix(const Matrix& a, double t, bool penalize_diagonal) {
  Matrix out = a.unaryExpr([t](double x) { return prox_soft_threshold(x, t); });
  if (!penalize_diagonal) out.diagonal() = a.diagonal();
  return out;
}

/// Minimiser over R > 0 of <sigma, R> - log det R + (rho/2) |R - a|_F^2.
inline SymMatrix prox_logdet(const Matrix& a, const Matrix& sigma, double rho) {
  if (!(rho > 0.0)) throw InvalidArgument("prox_logdet requires rho > 0");
  const auto es = eigen_sym(rho * a - sigma);
  Vector r(es.eigenvalues().size());
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    const double d = es.eigenvalues()(k);
    const double root = std::sqrt(d * d + 4.0 * rho);
    // Avoid cancellation for strongly negative d.
    r(k) = d >= 0.0 ? (d + root) / (2.0 * rho) : 2.0 / (root - d);
  }
  return SymMatrix::symmetrized(es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose());
}

inline SymMatrix prox_logdet(const SymMatrix& a, const SymMatrix& sigma, double rho) {
  return prox_logdet(a.mat(), sigma.mat(), rho);
}

/// Minimiser of t |L|_* + (1/2) |L - a|_F^2 over PSD (or NSD) matrices:
/// eigenvalues are shifted towards zero by t and clamped at zero.
inline SymMatrix prox_nuclear_semidef(const Matrix& a, double t, LatentSign sign) {
  if (t < 0.0) throw InvalidArgument("prox_nuclear_semidef requires t >= 0");
  const auto es = eigen_sym(0.5 * (a + a.transpose()));
  Vector ev = es.eigenvalues();
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    ev(k) = sign == LatentSign::kPositiveSemiDef ? std::max(ev(k) - t, 0.0) : std::min(ev(k) + t, 0.0);
  }
  return SymMatrix::symmetrized(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

inline SymMatrix prox_nuclear_semidef(const SymMatrix& a, double t, LatentSign sign) {
  return prox_nuclear_semidef(a.mat(), t, sign);
}

/// l1 norm of `k`, excluding the diagonal unless requested.
inline double sparse_penalty_norm(const Matrix& k, bool penalize_diagonal) {
  double total = k.cwiseAbs().sum();
  if (!penalize_diagonal) total -= k.diagonal().cwiseAbs().sum();
  return total;
}

/// Value of the penalised negative log-likelihood; +inf outside the domain.
inline double lrps_objective(const Matrix& k_o, const Matrix& l, const Matrix& sigma, double eta, double gamma,
                             bool penalize_diagonal) {
  const Matrix r = k_o - l;
  Eigen::LLT<Matrix> llt(0.5 * (r + r.transpose()));
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Vector lev = Eigen::SelfAdjointEigenSolver<Matrix>(l, Eigen::EigenvaluesOnly).eigenvalues();
  return (r.cwiseProduct(sigma)).sum() - logdet +
         eta * (gamma * sparse_penalty_norm(k_o, penalize_diagonal) + lev.cwiseAbs().sum());
}

inline double lrps_objective(const LrpsSolution& sol, const LrpsProblem& problem) {
  return lrps_objective(sol.k_o.mat(), sol.l.mat(), problem.cov.mat(), problem.eta, problem.gamma,
                        sol.penalize_diagonal);
}

/// Worst violation of the optimality conditions of the program at (k_o, l).
///
/// Sparse block: with G = S - (K - L)^-1, every penalised entry needs
/// G_ij = -eta*gamma*sign(K_ij) when K_ij != 0 and |G_ij| <= eta*gamma
/// otherwise; unpenalised diagonal entries need G_ii = 0.
/// Latent block (PSD case): eta*I - G >= 0 and (eta*I - G) u = 0 for every
/// eigenvector u of L with a positive eigenvalue. The NSD case mirrors this
/// with G + eta*I.
inline double kkt_residual(const Matrix& k_o, const Matrix& l, const LrpsProblem& problem, bool penalize_diagonal,
                           bool latent_frozen) {
  const int p = problem.cov.dim();
  const Matrix r = k_o - l;
  const auto es_r = eigen_sym(0.5 * (r + r.transpose()));
  if (!(es_r.eigenvalues()(0) > 0.0)) return std::numeric_limits<double>::infinity();
  const Matrix r_inv =
      es_r.eigenvectors() * es_r.eigenvalues().cwiseInverse().asDiagonal() * es_r.eigenvectors().transpose();
  const Matrix g = problem.cov.mat() - r_inv;
  const double t = problem.eta * problem.gamma;

  double worst = 0.0;
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < p; ++i) {
      double v;
      if (i == j && !penalize_diagonal) {
        v = std::abs(g(i, j));
      } else if (std::abs(k_o(i, j)) > kZeroTol) {
        v = std::abs(g(i, j) + t * (k_o(i, j) > 0.0 ? 1.0 : -1.0));
      } else {
        v = std::max(0.0, std::abs(g(i, j)) - t);
      }
      worst = std::max(worst, v);
    }
  }

  const auto es_l = eigen_sym(0.5 * (l + l.transpose()));
  const Vector& lev = es_l.eigenvalues();
  if (latent_frozen) {
    return std::max(worst, lev.cwiseAbs().maxCoeff());
  }
  const bool psd = problem.latent_sign == LatentSign::kPositiveSemiDef;
  // Complementary slack matrix: must be PSD and annihilate the range of L.
  const Matrix slack = psd ? Matrix(problem.eta * Matrix::Identity(p, p) - g)
                           : Matrix(g + problem.eta * Matrix::Identity(p, p));
  const double slack_min =
      Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (slack + slack.transpose()), Eigen::EigenvaluesOnly)
          .eigenvalues()(0);
  worst = std::max(worst, std::max(0.0, -slack_min));
  for (Eigen::Index k = 0; k < lev.size(); ++k) {
    const double lam = psd ? lev(k) : -lev(k);
    if (lam < -kZeroTol) worst = std::max(worst, -lam);  // wrong definiteness
    if (lam > kZeroTol) worst = std::max(worst, (slack * es_l.eigenvectors().col(k)).norm());
  }
  return worst;
}

inline double kkt_residual(const LrpsSolution& sol, const LrpsProblem& problem) {
  return kkt_residual(sol.k_o.mat(), sol.l.mat(), problem, sol.penalize_diagonal, sol.latent_frozen);
}

namespace detail {

/// Zeroes eigenvalues of `l` at or below `floor`; returns the cleaned matrix.
inline Matrix clean_low_rank(const Matrix& l, double floor) {
  const auto es = eigen_sym(l);
  Vector ev = es.eigenvalues();
  bool touched = false;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (std::abs(ev(k)) <= floor && ev(k) != 0.0) {
      ev(k) = 0.0;
      touched = true;
    }
  }
  if (!touched) return l;
  if (ev.cwiseAbs().maxCoeff() == 0.0) return Matrix::Zero(l.rows(), l.cols());
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Counts eigenvalues of `l` within `ratio_cut` of the largest one (in
/// magnitude) and returns the matrix with the remaining ones zeroed.
inline std::pair<int, Matrix> truncate_rank(const Matrix& l, double ratio_cut) {
  const auto es = eigen_sym(l);
  Vector ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  int rank = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (top > kZeroTol && std::abs(ev(k)) > kZeroTol && top / std::abs(ev(k)) <= ratio_cut) {
      ++rank;
    } else {
      ev(k) = 0.0;
    }
  }
  if (rank == 0) return {0, Matrix::Zero(l.rows(), l.cols())};
  return {rank, es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose()};
}

/// Solves the sparse-plus-low-rank program by ADMM. Never throws on
/// non-convergence: the last iterate is returned with `converged == false`.
inline LrpsSolution solve_lrps(const LrpsProblem& problem, const AdmmConfig& config = {},
                               const AdmmState* warm_start = nullptr) {
  config.validate();
  const int p = problem.cov.dim();
  Matrix sigma = problem.cov.mat();

  LrpsSolution sol;
  sol.penalize_diagonal = config.penalize_diagonal;
  sol.latent_frozen = config.freeze_latent;
  {
    const double min_ev =
        Eigen::SelfAdjointEigenSolver<Matrix>(sigma, Eigen::EigenvaluesOnly).eigenvalues()(0);
    const double scale = sigma.trace() / p;
    if (min_ev < 1e-8 * scale) {
      sol.regularized = true;
      sol.ridge = 1e-8 * scale;
      sigma.diagonal().array() += sol.ridge;
    }
  }

  const double l1_weight = problem.eta * problem.gamma;
  const double nuc_weight = problem.eta;
  const LatentSign sign = problem.latent_sign;

  Matrix r, s, l, y;
  double rho = config.penalty_rho;
  if (warm_start != nullptr && warm_start->s.rows() == p) {
    r = warm_start->r;
    s = warm_start->s;
    l = config.freeze_latent ? Matrix::Zero(p, p) : warm_start->l;
    y = warm_start->y;
    rho = warm_start->rho;
  } else {
    s = Matrix(sigma.diagonal().cwiseInverse().asDiagonal());
    r = s;
    l = Matrix::Zero(p, p);
    y = Matrix::Zero(p, p);
  }

  int it = 0;
  double pri = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();
  for (it = 1; it <= config.max_iter; ++it) {
    r = prox_logdet(s - l - y / rho, sigma, rho).mat();
    const Matrix s_old = s;
    const Matrix l_old = l;
    s = soft_threshold_matrix(r + l + y / rho, l1_weight / rho, config.penalize_diagonal);
    if (!config.freeze_latent) l = prox_nuclear_semidef(s - r - y / rho, nuc_weight / rho, sign).mat();
    const Matrix gap = r - s + l;
    y += rho * gap;

    const double r_norm = gap.norm();
    const double s_norm = rho * std::max(((s - l) - (s_old - l_old)).norm(), (l - l_old).norm());
    pri = r_norm / std::max({1.0, r.norm(), (s - l).norm()});
    dual = s_norm / std::max(1.0, y.norm());
    if (pri < config.tol_primal && dual < config.tol_dual) break;

    if (config.adaptive_rho && it % 10 == 0) {
      if (r_norm > config.balance_ratio * s_norm) {
        rho *= config.balance_factor;
      } else if (s_norm > config.balance_ratio * r_norm) {
        rho /= config.balance_factor;
      }
    }
  }
  sol.converged = it <= config.max_iter;
  sol.iterations = std::min(it, config.max_iter);
  sol.primal_residual = pri;
  sol.dual_residual = dual;
  sol.state = AdmmState{r, s, l, y, rho};

  Matrix k_out = 0.5 * (s + s.transpose());
  const Matrix l_sym = 0.5 * (l + l.transpose());
  const Matrix l_clean = config.freeze_latent ? Matrix::Zero(p, p) : detail::clean_low_rank(l_sym, 1e-12);
  const Matrix l_out = 0.5 * (l_clean + l_clean.transpose());
  {
    Eigen::LLT<Matrix> llt(k_out - l_out);
    if (llt.info() != Eigen::Success) {
      // Only reachable before convergence: fall back to the PD R-iterate.
      const Matrix fallback = r + l_out;
      k_out = 0.5 * (fallback + fallback.transpose());
    }
  }
  sol.k_o = SymMatrix(k_out);
  sol.l = SymMatrix(l_out);
  auto [rank, l_cut] = truncate_rank(l_out, config.rank_ratio_cut);
  sol.effective_rank = rank;
  sol.l_truncated = SymMatrix::symmetrized(l_cut);
  sol.objective = lrps_objective(k_out, l_out, problem.cov.mat(), problem.eta, problem.gamma, config.penalize_diagonal);
  return sol;
}

}  // namespace lrpsges

#endif  // LRPSGES_LRPS_HPP
