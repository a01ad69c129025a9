#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "hcl/spectra.hpp"

using namespace hcl;

namespace {

std::vector<double> eigen_oracle(const HermitianMatrix& A) {
  const int n = A.n();
  Eigen::MatrixXcd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = A(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M, Eigen::EigenvaluesOnly);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + n);
  return v;
}

HermitianMatrix random_hermitian(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<cplx> a(static_cast<std::size_t>(n) * n);
  for (auto& x : a) x = {g(rng), g(rng)};
  return HermitianMatrix(n, a);
}

BorderedHermitian random_bordered(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> d(static_cast<std::size_t>(n - 1));
  std::vector<cplx> a(static_cast<std::size_t>(n - 1));
  for (auto& x : d) x = u(rng);
  for (auto& x : a) {
    do x = {u(rng), u(rng)};
    while (std::abs(x) > 1.0);
  }
  return {d, a, 0.0};
}

}  // namespace

TEST(Jacobi, FrozenExamples) {
  auto v = eigenvalues(HermitianMatrix::diagonal({1, 2, 3}));
  EXPECT_EQ(v, (std::vector<double>{1, 2, 3}));
  HermitianMatrix px(2);
  px.set(0, 1, 1.0);
  v = eigenvalues(px);
  EXPECT_NEAR(v[0], -1.0, 1e-15);
  EXPECT_NEAR(v[1], 1.0, 1e-15);
  HermitianMatrix b(2);
  b.set(0, 0, 1.0);
  b.set(0, 1, 1.0);
  b.set(1, 1, 3.0);
  v = eigenvalues(b);
  EXPECT_NEAR(v[0], 2 - std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(v[1], 2 + std::sqrt(2.0), 1e-14);
}

TEST(Jacobi, AgreesWithOracleAndPreservesInvariants) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 300; ++t) {
    const int n = 1 + t % 8;
    const auto A = random_hermitian(n, rng, t % 3 == 0 ? 100.0 : 1.0);
    const auto e = eig_hermitian(A);
    const auto ref = eigen_oracle(A);
    double tr = 0.0, fro = 0.0;
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(e.values[i], ref[i], 1e-11 * (1.0 + A.frobenius()));
      tr += e.values[i];
      fro += e.values[i] * e.values[i];
    }
    EXPECT_NEAR(tr, A.trace(), 1e-10 * (1.0 + A.frobenius()));
    EXPECT_NEAR(std::sqrt(fro), A.frobenius(), 1e-10 * (1.0 + A.frobenius()));
  }
}

TEST(Jacobi, EigenvectorsReconstruct) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 5;
    const auto A = random_hermitian(n, rng);
    const auto e = eig_hermitian(A);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i) {
        cplx av{};
        for (int j = 0; j < n; ++j) av += A(i, j) * e.vector_entry(j, k, n);
        EXPECT_LT(std::abs(av - e.values[k] * e.vector_entry(i, k, n)), 1e-11 * (1 + A.frobenius()));
      }
  }
}

TEST(HermitianMatrix, SymmetrisesOnConstruction) {
  const HermitianMatrix A(2, {cplx(1, 5), cplx(2, 1), cplx(0, 0), cplx(3, 0)});
  EXPECT_EQ(A(0, 0), cplx(1, 0));
  EXPECT_EQ(A(1, 0), std::conj(A(0, 1)));
  EXPECT_THROW(HermitianMatrix(2, std::vector<cplx>(3)), Error);
}

TEST(Threshold, FrozenExamples) {
  EXPECT_DOUBLE_EQ(growth_threshold(BorderedHermitian({1}, {1}, 0), 0.5), 3.0);
  EXPECT_DOUBLE_EQ(growth_threshold(BorderedHermitian({0}, {0}, 0), 0.7), 0.0);
  EXPECT_NEAR(growth_threshold(BorderedHermitian({1, -1}, {1, 0}, 0), 1.0), 22.0 / 3.0, 1e-15);
  EXPECT_THROW((void)growth_threshold(BorderedHermitian({1}, {1}, 0), 0.0), Error);
}

TEST(Localize, FrozenExamples) {
  auto v = localize(BorderedHermitian({1}, {1}, 3.0), 0.5);
  EXPECT_TRUE(v.satisfied);
  EXPECT_NEAR(v.witness[0], 2 - std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(v.witness[1], 2 + std::sqrt(2.0), 1e-14);
  v = localize(BorderedHermitian({0}, {0}, 5.0), 0.1);
  EXPECT_TRUE(v.satisfied);
  EXPECT_EQ(v.witness, (std::vector<double>{0.0, 5.0}));
  std::mt19937_64 rng(4);
  auto B = random_bordered(4, rng);
  B.corner = growth_threshold(B, 0.3);
  EXPECT_TRUE(localize(B, 0.3).satisfied);
}

TEST(Localize, HoldsAboveThresholdOnRandomInstances) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    auto B = random_bordered(2 + t % 6, rng);
    for (double eps : {0.1, 0.3, 1.0})
      for (double m : {1.0, 1.5, 10.0}) {
        B.corner = m * growth_threshold(B, eps);
        const auto v = localize(B, eps);
        EXPECT_TRUE(v.satisfied) << "n=" << B.n() << " eps=" << eps << " viol=" << v.max_violation;
        const auto ref = eigen_oracle(B.to_matrix());
        EXPECT_NEAR(v.witness.back(), ref.back(), 1e-9 * (1 + B.corner));
      }
  }
}

TEST(Localize, CanFailBelowThreshold) {
  // Far below the threshold the conclusion is not promised; the verdict must say so honestly.
  const auto v = localize(BorderedHermitian({0}, {1}, 0.0), 0.1);
  EXPECT_FALSE(v.satisfied);
  EXPECT_GT(v.max_violation, 0.0);
}

TEST(Refinement, FrozenExamples) {
  BorderedHermitian B({1, 1}, {1, 1}, 0);
  B.corner = refinement_threshold(B, 1.0);
  EXPECT_TRUE(refinement_localize(B, 1.0).satisfied);
  BorderedHermitian Z({0.5, -2}, {0, 0}, 3.0);
  const auto z = refinement_localize(Z, 0.2);
  EXPECT_TRUE(z.satisfied);
  BorderedHermitian C({0, 2}, {0.5, 0.5}, 0);
  C.corner = refinement_threshold(C, 0.4);
  EXPECT_TRUE(refinement_localize(C, 0.4).satisfied);
}

TEST(Refinement, HoldsAboveThresholdOnRandomInstances) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 300; ++t) {
    auto B = random_bordered(2 + t % 5, rng);
    for (double eps : {0.1, 0.5}) {
      const double thr = refinement_threshold(B, eps);
      B.corner = thr + 0.5 * (1.0 + std::abs(thr));
      EXPECT_TRUE(refinement_localize(B, eps).satisfied);
    }
  }
}

TEST(CharPoly, Examples) {
  EXPECT_EQ(char_poly_residual(BorderedHermitian({1.5, 2}, {0, 0}, 4), 1.5), 0.0);
  EXPECT_NEAR(char_poly_residual(BorderedHermitian({1}, {1}, 3), 2 - std::sqrt(2.0)), 0.0, 1e-12);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    auto B = random_bordered(3, rng);
    B.corner = growth_threshold(B, 0.3);
    for (double x : eigen_oracle(B.to_matrix()))
      EXPECT_LE(std::abs(char_poly_residual(B, x)), 1e-8 * char_poly_scale(B, x));
  }
}

TEST(Census, FrozenExamples) {
  BorderedHermitian B({0, 2}, {1, 1}, 0);
  const double p0 = growth_threshold(B, 1.0);
  auto c = interval_census(B, 1.0, {p0, 2 * p0, 10 * p0});
  EXPECT_TRUE(c.stable);
  EXPECT_TRUE(c.top_outside);
  for (const auto& pa : c.per_alpha) EXPECT_EQ(pa, (std::vector<int>{1, 1}));

  BorderedHermitian D({1, 1, 3}, {0, 0, 0}, 0);
  c = interval_census(D, 0.5, {growth_threshold(D, 0.5) + 4});
  ASSERT_EQ(c.components.size(), 2u);
  EXPECT_EQ(c.counts[0], (std::vector<int>{2, 1}));
  EXPECT_TRUE(c.matches_sizes);

  c = interval_census(BorderedHermitian({1}, {1}, 0), 0.5, {3, 30});
  EXPECT_EQ(c.counts[0], (std::vector<int>{1}));
  EXPECT_EQ(c.counts[1], (std::vector<int>{1}));
}

TEST(Census, BelowThresholdIsPreconditionError) {
  try {
    (void)interval_census(BorderedHermitian({1}, {1}, 0), 0.5, {2.9});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

TEST(ClosedForm, AgreesWithJacobi) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int t = 0; t < 2000; ++t) {
    const double d = u(rng), c = u(rng);
    const cplx a{u(rng), u(rng)};
    const auto [lo, hi] = closed_form_2x2(d, a, c);
    const auto v = eigenvalues(BorderedHermitian({d}, {a}, c).to_matrix());
    EXPECT_NEAR(lo, v[0], 1e-12 * (1 + std::abs(v[0])) + 1e-12);
    EXPECT_NEAR(hi, v[1], 1e-12 * (1 + std::abs(v[1])) + 1e-12);
  }
}

TEST(MatrixDerivative, FrozenExamples) {
  auto D = matrix_derivative(FuncFamily::log_det(2), HermitianMatrix::identity(2));
  EXPECT_NEAR(std::abs(D(0, 0) - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(D(0, 1)), 0.0, 1e-14);
  D = matrix_derivative(FuncFamily::log_det(2), HermitianMatrix::diagonal({1, 2}));
  EXPECT_NEAR(D(0, 0).real(), 1.0, 1e-14);
  EXPECT_NEAR(D(1, 1).real(), 0.5, 1e-14);
  EXPECT_NEAR(std::abs(D(0, 1)), 0.0, 1e-14);
  try {
    (void)matrix_derivative(FuncFamily::log_det(2), HermitianMatrix::diagonal({-1, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::admissibility);
  }
}

TEST(MatrixDerivative, DirectionalDerivativeMatchesDifferences) {
  const auto F = FuncFamily::sigma_k_root(3, 2);
  std::mt19937_64 rng(10);
  int done = 0;
  while (done < 100) {
    auto G = random_hermitian(3, rng);
    G += 2.0 * HermitianMatrix::identity(3);
    if (!in_cone(eigenvalues(G), 2)) continue;
    const auto H = random_hermitian(3, rng);
    const double t = 1e-6;
    auto Gp = G, Gm = G;
    Gp += t * H;
    Gm -= t * H;
    if (!in_cone(eigenvalues(Gm), 2)) continue;
    const double fd = (eval_f(F, eigenvalues(Gp)) - eval_f(F, eigenvalues(Gm))) / (2 * t);
    const auto D = matrix_derivative(F, G);
    EXPECT_NEAR(trace_product(D, H), fd, 1e-5 * (1 + std::abs(fd)));
    // positive definite
    EXPECT_GT(eigenvalues(D).front(), 0.0);
    ++done;
  }
}

TEST(MatrixDerivative, PairingInequality) {
  for (const auto& F : {FuncFamily::log_det(3), FuncFamily::sigma_k_root(3, 2), FuncFamily::guan_mixed(3, 2, {0.0, 1.0})}) {
    std::mt19937_64 rng(11);
    int done = 0;
    while (done < 200) {
      auto G = random_hermitian(3, rng);
      auto Gb = random_hermitian(3, rng);
      G += 3.0 * HermitianMatrix::identity(3);
      Gb += 3.0 * HermitianMatrix::identity(3);
      if (!in_cone(eigenvalues(G), F.cone_index()) || !in_cone(eigenvalues(Gb), F.cone_index())) continue;
      EXPECT_GE(pairing_gap(F, G, Gb), -1e-10 * (1 + G.frobenius() + Gb.frobenius())) << F.name();
      ++done;
    }
  }
}
