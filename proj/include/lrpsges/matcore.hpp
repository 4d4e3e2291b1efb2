#ifndef LRPSGES_MATCORE_HPP
#define LRPSGES_MATCORE_HPP

// Symmetric-matrix numerics shared by the solver, the scorer and the
// evaluation code: norms, sign/support patterns, structural diagnostics,
// partial correlations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrpsges/errors.hpp"

namespace lrpsges {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;

/// Threshold under which an entry counts as a structural zero.
inline constexpr double kZeroTol = 1e-9;
/// Relative PSD tolerance for covariance inputs.
inline constexpr double kPsdTol = 1e-10;
/// Condition number above which a matrix is treated as singular.
inline constexpr double kMaxCondition = 1e12;

/// Dense real matrix that is exactly symmetric and finite.
class SymMatrix {
 public:
  SymMatrix() : m_(Matrix::Zero(1, 1)) {}

  explicit SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1) {
      throw InvalidArgument("SymMatrix must be square with dim >= 1, got " + std::to_string(m_.rows()) +
                            "x" + std::to_string(m_.cols()));
    }
    if (!m_.allFinite()) throw InvalidArgument("SymMatrix entries must be finite");
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
      for (Eigen::Index i = j + 1; i < m_.rows(); ++i) {
        if (m_(i, j) != m_(j, i)) {
          throw InvalidArgument("SymMatrix is not exactly symmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
        }
      }
    }
  }

  /// Builds from (m + m^T) / 2.
  static SymMatrix symmetrized(const Matrix& m) {
    if (m.rows() != m.cols()) throw InvalidArgument("symmetrized: matrix must be square");
    Matrix s = 0.5 * (m + m.transpose());
    return SymMatrix(std::move(s));
  }

  static SymMatrix identity(int dim) { return SymMatrix(Matrix::Identity(dim, dim)); }
  static SymMatrix zero(int dim) { return SymMatrix(Matrix::Zero(dim, dim)); }
  static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Matrix& mat() const noexcept { return m_; }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  Matrix m_;
};

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
inline Eigen::SelfAdjointEigenSolver<Matrix> eigen_sym(const Matrix& m) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::ComputeEigenvectors);
}

/// Largest absolute eigenvalue.
inline double spectral_norm(const SymMatrix& m) {
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(m.mat(), Eigen::EigenvaluesOnly).eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

/// Largest singular value of an arbitrary matrix.
inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

inline double max_abs_norm(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
inline double max_abs_norm(const SymMatrix& m) { return max_abs_norm(m.mat()); }

inline double entrywise_l1(const Matrix& m) { return m.cwiseAbs().sum(); }
inline double entrywise_l1(const SymMatrix& m) { return entrywise_l1(m.mat()); }

inline double max_col_sum(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().colwise().sum().maxCoeff(); }
inline double max_col_sum(const SymMatrix& m) { return max_col_sum(m.mat()); }

inline double max_row_sum(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff(); }
inline double max_row_sum(const SymMatrix& m) { return max_row_sum(m.mat()); }

inline IntMatrix sign_matrix(const Matrix& m, double zero_tol = kZeroTol) {
  return m.unaryExpr([zero_tol](double x) { return std::abs(x) <= zero_tol ? 0 : (x > 0 ? 1 : -1); });
}
inline IntMatrix sign_matrix(const SymMatrix& m, double zero_tol = kZeroTol) { return sign_matrix(m.mat(), zero_tol); }

inline IntMatrix nnz_matrix(const Matrix& m, double zero_tol = kZeroTol) {
  return sign_matrix(m, zero_tol).cwiseAbs();
}
inline IntMatrix nnz_matrix(const SymMatrix& m, double zero_tol = kZeroTol) { return nnz_matrix(m.mat(), zero_tol); }

/// Maximum number of non-zero entries in any row; the diagonal counts.
inline int degree(const SymMatrix& m, double zero_tol = kZeroTol) {
  return nnz_matrix(m, zero_tol).rowwise().sum().maxCoeff();
}

/// Incoherence of the column space of `m`: max_i ||P e_i||_2 where P projects
/// onto the span of eigenvectors with |lambda| > rank_tol * ||m||_2.
/// Ranges over [sqrt(r/p), 1] for rank r; zero for the zero matrix.
inline double incoherence(const SymMatrix& m, double rank_tol = 1e-9) {
  const auto es = eigen_sym(m.mat());
  const Vector& ev = es.eigenvalues();
  const double scale = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  if (scale == 0.0) return 0.0;
  double best = 0.0;
  for (int i = 0; i < m.dim(); ++i) {
    double row_sq = 0.0;
    for (int k = 0; k < m.dim(); ++k) {
      if (std::abs(ev(k)) > rank_tol * scale) row_sq += es.eigenvectors()(i, k) * es.eigenvectors()(i, k);
    }
    best = std::max(best, std::sqrt(row_sq));
  }
  return best;
}

/// Principal submatrix over `idx`.
inline Matrix principal_submatrix(const Matrix& m, std::span<const int> idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Matrix out(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) out(a, b) = m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  return out;
}

/// Inverse of a symmetric positive definite matrix. Raises SingularSubmatrix
/// when the matrix is not PD or its condition number exceeds kMaxCondition.
inline Matrix inverse_spd(const Matrix& m) {
  const auto es = eigen_sym(m);
  const Vector& ev = es.eigenvalues();
  if (ev.size() == 0) return Matrix(0, 0);
  if (!(ev(0) > 0.0) || ev(ev.size() - 1) / ev(0) > kMaxCondition) {
    throw SingularSubmatrix("matrix not invertible at working precision (lambda_min=" + std::to_string(ev(0)) +
                            ", lambda_max=" + std::to_string(ev(ev.size() - 1)) + ")");
  }
  Matrix inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (inv + inv.transpose());
}

inline SymMatrix inverse_spd(const SymMatrix& m) { return SymMatrix(inverse_spd(m.mat())); }

/// log det of a symmetric positive definite matrix (via Cholesky).
inline double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw SingularSubmatrix("log_det_spd: matrix is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// Positive semi-definite matrix plus the number of observations it summarises.
class CovarianceEstimate {
 public:
  CovarianceEstimate(SymMatrix matrix, long sample_size) : matrix_(std::move(matrix)), n_(sample_size) {
    if (n_ < 1) throw InvalidArgument("sample_size must be positive");
    const Matrix& m = matrix_.mat();
    for (int i = 0; i < matrix_.dim(); ++i) {
      if (!(m(i, i) > 0.0)) {
        throw NonPositiveDefiniteInput("covariance diagonal must be strictly positive (entry " + std::to_string(i) +
                                       ")");
      }
    }
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
    const double norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    if (ev(0) < -kPsdTol * norm) {
      throw NonPositiveDefiniteInput("covariance has negative eigenvalue " + std::to_string(ev(0)));
    }
  }

  CovarianceEstimate(const Matrix& matrix, long sample_size)
      : CovarianceEstimate(SymMatrix::symmetrized(matrix), sample_size) {}

  const SymMatrix& matrix() const noexcept { return matrix_; }
  const Matrix& mat() const noexcept { return matrix_.mat(); }
  long sample_size() const noexcept { return n_; }
  int dim() const noexcept { return matrix_.dim(); }

 private:
  SymMatrix matrix_;
  long n_;
};

/// Column-centred copy of `data` (rows are observations).
inline Matrix center_columns(const Matrix& data) {
  if (data.rows() == 0) return data;
  return data.rowwise() - data.colwise().mean();
}

/// Maximum-likelihood covariance (divisor n) of the rows of `data`.
inline CovarianceEstimate sample_covariance(const Matrix& data, bool center = true) {
  if (data.rows() < 1) throw InsufficientSamples("sample_covariance needs at least one row");
  const Matrix x = center ? center_columns(data) : data;
  const Matrix s = (x.transpose() * x) / static_cast<double>(x.rows());
  return CovarianceEstimate(SymMatrix::symmetrized(s), static_cast<long>(x.rows()));
}

/// Partial correlation of variables i and j given the set `given`:
/// -(Psi^-1)_12 / sqrt((Psi^-1)_11 (Psi^-1)_22) over Psi = cov[{i,j} u given].
inline double partial_correlation(const CovarianceEstimate& cov, int i, int j, std::span<const int> given) {
  const int p = cov.dim();
  if (i == j || i < 0 || j < 0 || i >= p || j >= p) throw InvalidArgument("partial_correlation: bad pair");
  std::vector<int> idx{i, j};
  for (int u : given) {
    if (u == i || u == j || u < 0 || u >= p) throw InvalidArgument("partial_correlation: bad conditioning set");
    idx.push_back(u);
  }
  const Matrix inv = inverse_spd(principal_submatrix(cov.mat(), idx));
  const double rho = -inv(0, 1) / std::sqrt(inv(0, 0) * inv(1, 1));
  return std::clamp(rho, -1.0, 1.0);
}

/// h(rho) = sqrt(-0.5 log(1 - rho^2)).
inline double fisher_h(double rho) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("fisher_h requires |rho| < 1, got " + std::to_string(rho));
  return std::sqrt(-0.5 * std::log1p(-rho * rho));
}

}  // namespace lrpsges

#endif  // LRPSGES_MATCORE_HPP
