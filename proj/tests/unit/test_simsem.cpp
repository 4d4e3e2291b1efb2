#include <gtest/gtest.h>

#include <cmath>

#include "lrpsges/errors.hpp"
#include "lrpsges/simsem.hpp"
#include "oracles.hpp"

using namespace lrpsges;

namespace {

LinearSem empty_sem(int p, int h) {
  LinearSem sem;
  sem.p = p;
  sem.h = h;
  sem.b_o = Matrix::Zero(p, p);
  sem.b_oh = Matrix::Zero(p, h);
  sem.b_h = Matrix::Zero(h, h);
  sem.noise_var = Vector::Ones(p + h);
  return sem;
}

/// Two hidden parents over five observed nodes, X1..X5 = 0..4.
LinearSem hidden_example() {
  LinearSem sem = empty_sem(5, 2);
  sem.b_o(1, 0) = 0.7;
  sem.b_o(1, 2) = 0.7;
  sem.b_o(4, 3) = 0.7;
  sem.b_oh(0, 0) = 0.7;
  sem.b_oh(1, 0) = 0.7;
  sem.b_oh(3, 0) = 0.7;
  sem.b_oh(1, 1) = 0.7;
  sem.b_oh(3, 1) = 0.7;
  sem.b_oh(4, 1) = 0.7;
  return sem;
}

}  // namespace

TEST(Design, Validation) {
  SimDesign d;
  EXPECT_NO_THROW(d.validate());
  d.f_pct = 120;
  EXPECT_THROW(d.validate(), InvalidArgument);
  d = SimDesign{};
  d.sparsity = 0.0;
  EXPECT_THROW(d.validate(), InvalidArgument);
  d = SimDesign{};
  d.weight_lo = 2.0;
  EXPECT_THROW(d.validate(), InvalidArgument);
  EXPECT_THROW(random_sem(d), InvalidArgument);
}

TEST(RandomSem, EdgeDensityMatchesDesign) {
  // p = 50 at 5%: 61.25 expected edges, average degree about 2.45.
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    SimDesign d;
    d.p = 50;
    d.h = 0;
    d.seed = static_cast<std::uint64_t>(r);
    total += random_sem(d).observed_dag().graph().num_edges();
  }
  const double mean = total / reps;
  // sd of one count is sqrt(1225 * 0.05 * 0.95) = 7.63
  EXPECT_NEAR(mean, 61.25, 4.0 * 7.63 / std::sqrt(reps));
  EXPECT_NEAR(2.0 * mean / 50.0, 2.45, 0.1);
}

TEST(RandomSem, ExactHiddenFanOutAndStructure) {
  SimDesign d;
  d.p = 50;
  d.h = 5;
  d.f_pct = 70;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    d.seed = seed;
    const LinearSem sem = random_sem(d);
    EXPECT_NO_THROW(sem.validate());
    for (int k = 0; k < d.h; ++k) EXPECT_EQ((sem.b_oh.col(k).array() != 0.0).count(), 35);
    EXPECT_EQ(sem.b_h.cwiseAbs().maxCoeff(), 0.0);
    for (int i = 0; i < sem.p; ++i)
      for (int j = 0; j < sem.p + sem.h; ++j) {
        const double w = std::abs(sem.joint_b()(i, j));
        if (w != 0.0) {
          EXPECT_GE(w, d.weight_lo);
          EXPECT_LE(w, d.weight_hi);
        }
      }
    EXPECT_GE(sem.noise_var.minCoeff(), d.noise_lo);
    EXPECT_LE(sem.noise_var.maxCoeff(), d.noise_hi);
  }
  d.h = 0;
  const LinearSem plain = random_sem(d);
  EXPECT_EQ(plain.b_oh.cols(), 0);
  EXPECT_EQ(plain.b_o, random_sem(d).b_o);
}

TEST(RandomSem, BothSignsAndRandomOrder) {
  SimDesign d;
  d.p = 30;
  d.h = 0;
  d.sparsity = 0.3;
  d.seed = 4;
  const LinearSem sem = random_sem(d);
  EXPECT_GT((sem.b_o.array() > 0).count(), 0);
  EXPECT_GT((sem.b_o.array() < 0).count(), 0);
  // Not simply lower-triangular in the index order.
  EXPECT_GT(sem.b_o.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().cwiseAbs().sum(), 0.0);
}

TEST(ImpliedCovariance, Examples) {
  EXPECT_EQ(implied_covariance(empty_sem(3, 0)).mat(), Matrix::Identity(3, 3));
  LinearSem sem = empty_sem(2, 0);
  sem.b_o(1, 0) = 0.5;
  Matrix expected(2, 2);
  expected << 1.0, 0.5, 0.5, 1.25;
  EXPECT_LE((implied_covariance(sem).mat() - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Sample, EmptyAndMonteCarloMoments) {
  SimDesign d;
  d.p = 5;
  d.h = 1;
  d.f_pct = 60;
  d.sparsity = 0.4;
  d.seed = 11;
  const LinearSem sem = random_sem(d);
  EXPECT_EQ(sample(sem, 0, 1).rows(), 0);
  const long n = 1000000;
  const Matrix x = sample(sem, n, 11);
  EXPECT_EQ(x.cols(), 5);
  const Vector mean = x.colwise().mean();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 5.0 / std::sqrt(static_cast<double>(n)));
  const Matrix s = observed_covariance(sem).mat();
  const Matrix emp = x.transpose() * x / static_cast<double>(n);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double se = std::sqrt((s(i, i) * s(j, j) + s(i, j) * s(i, j)) / static_cast<double>(n));
      EXPECT_LE(std::abs(emp(i, j) - s(i, j)), 3.0 * se) << i << "," << j;
    }
  EXPECT_EQ(sample(sem, 10, 5), sample(sem, 10, 5));
}

TEST(Sample, ThreeSigmaExceedanceRateIsNominal) {
  // Over many designs, entries beyond 3 standard errors should be rare
  // (about 0.27% each); a biased sampler would blow this up.
  int exceed = 0;
  int checks = 0;
  const long n = 100000;
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    SimDesign d;
    d.p = 5;
    d.h = 1;
    d.f_pct = 60;
    d.sparsity = 0.4;
    d.seed = seed;
    const LinearSem sem = random_sem(d);
    const Matrix x = sample(sem, n, seed);
    const Matrix s = observed_covariance(sem).mat();
    const Matrix emp = x.transpose() * x / static_cast<double>(n);
    for (int i = 0; i < 5; ++i)
      for (int j = i; j < 5; ++j) {
        const double se = std::sqrt((s(i, i) * s(j, j) + s(i, j) * s(i, j)) / static_cast<double>(n));
        ++checks;
        if (std::abs(emp(i, j) - s(i, j)) > 3.0 * se) ++exceed;
      }
  }
  EXPECT_EQ(checks, 600);
  EXPECT_LE(exceed, 8);
}

TEST(PrecisionDecomposition, ReproducesMarginalCovariance) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SimDesign d;
    d.p = 12;
    d.h = static_cast<int>(seed % 4);
    d.sparsity = 0.2;
    d.seed = seed;
    const LinearSem sem = random_sem(d);
    const auto dec = precision_decomposition(sem);
    const Matrix marginal = (dec.k_o_star.mat() - dec.l_star.mat()).inverse();
    EXPECT_LE((marginal - observed_covariance(sem).mat()).cwiseAbs().maxCoeff(), 1e-8);
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(dec.l_star.mat()).eigenvalues();
    const int rank = static_cast<int>((ev.array() > 1e-9 * std::max(1.0, ev.maxCoeff())).count());
    EXPECT_LE(rank, d.h);
    if (d.h == 0 || Eigen::FullPivLU<Matrix>(sem.b_oh).rank() == d.h) EXPECT_EQ(rank, d.h);
    if (d.h == 0) EXPECT_EQ(dec.l_star.mat().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(PrecisionDecomposition, SingleHiddenIsRankOne) {
  SimDesign d;
  d.p = 8;
  d.h = 1;
  d.f_pct = 50;
  d.seed = 2;
  const LinearSem sem = random_sem(d);
  const Matrix k = joint_precision(sem).mat();
  const Vector v = k.block(8, 0, 1, 8).transpose();
  const Matrix expected = v * v.transpose() / k(8, 8);
  const Matrix l = precision_decomposition(sem).l_star.mat();
  EXPECT_LE((l - expected).cwiseAbs().maxCoeff(), 1e-12);
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(l).eigenvalues();
  EXPECT_GT(ev(7), 1e-6);
  EXPECT_LT(std::abs(ev(6)), 1e-10);
}

TEST(PrecisionDecomposition, TwoHiddenExampleIsDenseRankTwo) {
  const auto dec = precision_decomposition(hidden_example());
  const Matrix l = dec.l_star.mat();
  EXPECT_GT(l.cwiseAbs().minCoeff(), 1e-6);
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(l).eigenvalues();
  EXPECT_GT(ev(3), 1e-6);
  EXPECT_LT(std::abs(ev(2)), 1e-10);
}

TEST(PrecisionDecomposition, SparsePartIsMoralGraph) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SimDesign d;
    d.p = 15;
    d.h = 2;
    d.sparsity = 0.15;
    d.seed = seed;
    const LinearSem sem = random_sem(d);
    const auto a = oracle::adjacency(sem.observed_dag());
    const IntMatrix nnz = nnz_matrix(precision_decomposition(sem).k_o_star, 0.0);
    for (int i = 0; i < d.p; ++i) {
      EXPECT_EQ(nnz(i, i), 1);
      for (int j = i + 1; j < d.p; ++j) {
        bool moral = a[i][j] || a[j][i];
        for (int c = 0; c < d.p && !moral; ++c) moral = a[i][c] && a[j][c];
        EXPECT_EQ(nnz(i, j) != 0, moral) << i << "," << j;
      }
    }
  }
}

TEST(TotalEffectsTruth, PathTracing) {
  LinearSem chain = empty_sem(3, 0);
  chain.b_o(1, 0) = 0.5;
  chain.b_o(2, 1) = 0.8;
  const Matrix t = true_total_effects(chain);
  EXPECT_NEAR(t(0, 2), 0.4, 1e-15);
  EXPECT_EQ(t(2, 0), 0.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SimDesign d;
    d.p = 8;
    d.h = 2;
    d.sparsity = 0.35;
    d.seed = seed;
    const LinearSem sem = random_sem(d);
    const Matrix e = true_total_effects(sem);
    for (int i = 0; i < d.p; ++i)
      for (int j = 0; j < d.p; ++j) {
        if (i == j) continue;
        const double want = oracle::path_tracing_effect(sem.b_o, i, j);
        EXPECT_NEAR(e(i, j), want, 1e-12);
        if (want == 0.0) EXPECT_EQ(e(i, j), 0.0);
      }
  }
}

TEST(TotalEffectsTruth, InterventionalMonteCarlo) {
  // E[X_j | do(X_i = 1)] by forward simulation with X_i clamped.
  SimDesign d;
  d.p = 5;
  d.h = 1;
  d.f_pct = 60;
  d.sparsity = 0.5;
  d.seed = 21;
  const LinearSem sem = random_sem(d);
  const Matrix truth = true_total_effects(sem);
  const Matrix b = sem.joint_b();
  const auto order = *topological_order(sem.joint_graph());
  const int dim = sem.p + sem.h;
  const long n = 1000000;
  CounterRng rng(72, Stream::kTestFixtures);
  for (int i = 0; i < d.p; ++i) {
    Vector sum = Vector::Zero(dim);
    Vector sumsq = Vector::Zero(dim);
    Vector x(dim);
    for (long r = 0; r < n; ++r) {
      for (int v : order) {
        if (v == i) {
          x(v) = 1.0;
          continue;
        }
        double acc = std::sqrt(sem.noise_var(v)) * rng.normal();
        for (int u = 0; u < dim; ++u) acc += b(v, u) * x(u);
        x(v) = acc;
      }
      sum += x;
      sumsq += x.cwiseProduct(x);
    }
    for (int j = 0; j < d.p; ++j) {
      if (j == i) continue;
      const double mean = sum(j) / n;
      const double var = sumsq(j) / n - mean * mean;
      EXPECT_LE(std::abs(mean - truth(i, j)), 3.0 * std::sqrt(var / n)) << i << "->" << j;
    }
  }
}
