#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "hcl/solve.hpp"

using namespace hcl;

namespace {

GridDomain product2(int scells, int xcells = 3) { return GridDomain::product(2, {xcells, xcells, scells, scells}, {1, 1, 1, 1}); }

HermitianMatrix chi_offdiag() {
  HermitianMatrix M = HermitianMatrix::identity(2);
  M.set(0, 1, cplx(0.3, 0.2));
  return M;
}

ProblemSpec make_spec(const GridDomain& d, const FuncFamily& F, const HermitianMatrix& chi, const ScalarField& psi,
                      const ScalarField& phi, SolveMode mode) {
  return ProblemSpec{d, F, HermitianField::constant(d, chi), psi, phi, mode, false};
}

double s_x(const GridDomain& d, std::size_t i) { return d.position(i, d.axes() - 2); }
double s_y(const GridDomain& d, std::size_t i) { return d.position(i, d.axes() - 1); }

// Continuous solution of Delta_euc v = 1 on the unit square with v = 0 on the boundary, at (1/2, 1/2).
double square_series_center() {
  double v = 0.0;
  for (int m = 1; m < 400; m += 2)
    for (int n = 1; n < 400; n += 2) {
      const double sm = (m / 2) % 2 ? -1.0 : 1.0, sn = (n / 2) % 2 ? -1.0 : 1.0;
      v += -16.0 / (std::pow(M_PI, 4) * m * n * (m * m + n * n)) * sm * sn;
    }
  return v;
}

// u* = A (sin(pi x) sin(pi y) + x^2 + x y) on S, independent of X.
struct Manufactured {
  double A = 0.1;
  double u(double x, double y) const { return A * (std::sin(M_PI * x) * std::sin(M_PI * y) + x * x + x * y); }
  double chern_lap(double x, double y) const { return 0.25 * A * (-2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y) + 2.0); }
};

ProblemSpec manufactured_dirichlet(int scells, const Manufactured& m) {
  const auto d = product2(scells);
  const auto chi = chi_offdiag();
  ScalarField psi(d), phi(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = s_x(d, i), y = s_y(d, i);
    // det [[1, a], [conj a, 1 + L]] = 1 + L - |a|^2
    psi[i] = std::log(1.0 + m.chern_lap(x, y) - std::norm(cplx(0.3, 0.2)));
    phi[i] = m.A * (x * x + x * y);
  }
  return make_spec(d, FuncFamily::log_det(2), chi, psi, phi, SolveMode::dirichlet);
}

double error_vs(const SolveResult& r, const Manufactured& m) {
  const auto& d = r.u.domain();
  double e = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) e = std::max(e, std::abs(r.u[i] - m.u(s_x(d, i), s_y(d, i))));
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Poisson
// ---------------------------------------------------------------------------

TEST(Poisson, ZeroDataGivesZero) {
  const auto s = GridDomain::product(1, {16, 16}, {1, 1});
  const auto h = poisson_dirichlet(s, ScalarField(s), ScalarField(s));
  EXPECT_EQ(h.sup_abs(), 0.0);
}

TEST(Poisson, SquareCenterMatchesSineSeries) {
  const auto s = GridDomain::product(1, {64, 64}, {1, 1});
  const auto h = poisson_dirichlet(s, ScalarField(s, 1.0), ScalarField(s));
  const double ref = 4.0 * square_series_center();
  EXPECT_NEAR(ref, -0.294685, 5e-6);
  const double centre = h[s.index({32, 32})];
  EXPECT_LT(std::abs(centre - ref) / std::abs(ref), 5e-4);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.role(i) == NodeRole::interior) { EXPECT_LT(h[i], 0.0); }
    if (s.role(i) == NodeRole::boundary && !s.is_corner(i)) { EXPECT_LT(inner_normal_derivative(h, i), 0.0); }
  }
  // discrete residual
  const auto lap = chern_laplacian(h);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.role(i) == NodeRole::interior) { EXPECT_NEAR(lap[i], 1.0, 1e-10 * 2); }
}

TEST(Poisson, SecondOrderInH) {
  const double ref = 4.0 * square_series_center();
  double prev = 0.0;
  for (int N : {8, 16, 32}) {
    const auto s = GridDomain::product(1, {N, N}, {1, 1});
    const auto h = poisson_dirichlet(s, ScalarField(s, 1.0), ScalarField(s));
    const double e = std::abs(h[s.index({N / 2, N / 2})] - ref);
    if (prev > 0.0) { EXPECT_GT(std::log2(prev / e), 1.8); }
    prev = e;
  }
}

TEST(Poisson, AnnulusPotentialIsNegative) {
  const auto s = GridDomain::product(1, {12, 16}, {1, 2 * M_PI}, true);
  const auto h = poisson_dirichlet(s, ScalarField(s, 1.0), ScalarField(s));
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.role(i) == NodeRole::interior) { EXPECT_LT(h[i], 0.0); }
    if (s.role(i) == NodeRole::boundary) { EXPECT_LT(inner_normal_derivative(h, i), 0.0); }
  }
}

TEST(Supersolution, LinearInTrace) {
  const auto d = product2(12);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d, 1.0), ScalarField(d),
                              SolveMode::dirichlet);
  const auto up = build_supersolution(spec);
  const auto h = s_potential(d);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(up[i], -2.0 * h[i], 1e-9);
  auto zero = spec;
  zero.chi = HermitianField(d);
  EXPECT_EQ(build_supersolution(zero).sup_abs(), 0.0);
}

// ---------------------------------------------------------------------------
// Subsolution
// ---------------------------------------------------------------------------

TEST(Subsolution, PhiItselfWhenStrict) {
  const auto d = product2(8);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d, -0.5), ScalarField(d),
                              SolveMode::dirichlet);
  const auto s = build_subsolution(spec, 0.1);
  EXPECT_EQ(s.t, 0.0);
  EXPECT_EQ(s.u.sup_abs(), 0.0);
}

TEST(Subsolution, FiniteLadderValueForLogDet) {
  const auto d = product2(8);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d, 0.5), ScalarField(d),
                              SolveMode::dirichlet);
  const double delta = 1e-3;
  const auto s = build_subsolution(spec, delta);
  // The discrete Hessian of h is exactly e_n e_n^* at interior nodes: f = log(1 + t).
  EXPECT_GE(std::log1p(s.t), 0.5 + delta);
  EXPECT_LT(std::log1p(0.5 * s.t), 0.5 + delta);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.role(i) == NodeRole::boundary) { EXPECT_EQ(s.u[i], 0.0); }
}

TEST(Subsolution, BoundedAxisLimitIsConstructionError) {
  // sigma_2 / sigma_1 along (1, 1, 1 + t) tends to 2; psi = 3 is out of reach.
  const auto d = GridDomain::product(3, {3, 3, 3, 3, 4, 4}, {1, 1, 1, 1, 1, 1});
  const auto spec = make_spec(d, FuncFamily::sigma_quotient(3, 2, 1), HermitianMatrix::identity(3), ScalarField(d, 3.0),
                              ScalarField(d), SolveMode::dirichlet);
  try {
    (void)build_subsolution(spec, 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::construction);
    EXPECT_NE(std::string(e.what()).find("node"), std::string::npos);
  }
}

TEST(Subsolution, NegativeDirectionOnXIsConstructionError) {
  // chi restricted to X has a negative eigenvalue; no amount of t e_n e_n^* enters Gamma_2.
  const auto d = product2(6);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::diagonal({-0.2, 1.0}), ScalarField(d, 0.0),
                              ScalarField(d), SolveMode::dirichlet);
  EXPECT_THROW((void)build_subsolution(spec, 1e-3), Error);
}

// ---------------------------------------------------------------------------
// Dirichlet
// ---------------------------------------------------------------------------

TEST(Dirichlet, IdentityBackgroundGivesZero) {
  const auto d = product2(10);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d, 0.0), ScalarField(d),
                              SolveMode::dirichlet);
  const auto r = solve_dirichlet(spec);
  EXPECT_LT(r.u.sup_abs(), 1e-9);
  EXPECT_TRUE(r.admissible);
  EXPECT_TRUE(r.estimates.sandwich_ok);
  EXPECT_TRUE(r.estimates.normal_order_ok);
  EXPECT_TRUE(r.estimates.finite());
}

TEST(Dirichlet, SubsolutionThatSolvesNeedsNoIteration) {
  const auto d = product2(8);
  auto spec = make_spec(d, FuncFamily::sigma_k_root(2, 2), chi_offdiag(), ScalarField(d, 0.5), ScalarField(d),
                        SolveMode::dirichlet);
  const auto sub = build_subsolution(spec, 1e-3);
  const DiscreteOperator op(spec);
  const auto f = op.values(sub.u);
  for (std::size_t j = 0; j < f.size(); ++j) spec.psi[op.active()[j]] = f[j];
  SolveOptions o;
  o.initial = sub.u;
  const auto r = solve_dirichlet(spec, o);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(sup_diff(r.u, sub.u), 0.0);
}

TEST(Dirichlet, ManufacturedSecondOrder) {
  const Manufactured m;
  std::vector<double> err;
  for (int N : {8, 16, 32}) {
    const auto r = solve_dirichlet(manufactured_dirichlet(N, m));
    EXPECT_LE(r.residual(), 1e-9 * 2);
    EXPECT_TRUE(r.admissible);
    EXPECT_TRUE(r.estimates.sandwich_ok) << r.estimates.sandwich_violation;
    EXPECT_TRUE(r.estimates.finite());
    err.push_back(error_vs(r, m));
  }
  EXPECT_GT(std::log2(err[0] / err[1]), 1.8);
  EXPECT_GT(std::log2(err[1] / err[2]), 1.8);
}

TEST(Dirichlet, ResidualHistoryDecreases) {
  const auto r = solve_dirichlet(manufactured_dirichlet(12, Manufactured{0.15}));
  ASSERT_GE(r.residual_history.size(), 2u);
  for (std::size_t k = 1; k < r.residual_history.size(); ++k) EXPECT_LT(r.residual_history[k], r.residual_history[k - 1]);
}

TEST(Dirichlet, ConstantOnPhiShiftsSolution) {
  const auto base = manufactured_dirichlet(10, Manufactured{});
  auto shifted = base;
  shifted.phi += 0.3;
  const auto a = solve_dirichlet(base), b = solve_dirichlet(shifted);
  for (std::size_t i = 0; i < a.u.size(); ++i) EXPECT_NEAR(b.u[i] - a.u[i], 0.3, 1e-9);
}

TEST(Dirichlet, ContinuationReachesSameSolution) {
  const auto spec = manufactured_dirichlet(10, Manufactured{});
  SolveOptions on;
  on.continuation = Continuation::on;
  const auto a = solve_dirichlet(spec), b = solve_dirichlet(spec, on);
  EXPECT_EQ(b.continuation_stages, 8);
  EXPECT_LT(sup_diff(a.u, b.u), 1e-9);
}

TEST(Dirichlet, SandwichAcrossFamilies) {
  const auto d = product2(10);
  struct Case {
    FuncFamily F;
    double psi;
  };
  const std::vector<Case> cases{{FuncFamily::log_det(2), 0.2},
                                {FuncFamily::sigma_k_root(2, 2), 1.1},
                                {FuncFamily::sigma_k_root(2, 1), 2.5},
                                {FuncFamily::log_sigma_k(2, 1), 1.0},
                                {FuncFamily::sigma_quotient(2, 2, 1), 0.6}};
  for (const auto& cs : cases) {
    ScalarField psi(d), phi(d);
    for (std::size_t i = 0; i < d.size(); ++i) {
      psi[i] = cs.psi * (1.0 + 0.2 * std::sin(3.0 * s_x(d, i)) * std::cos(2.0 * s_y(d, i)));
      phi[i] = 0.2 * s_x(d, i) - 0.1 * s_y(d, i) * s_y(d, i);
    }
    const auto r = solve_dirichlet(make_spec(d, cs.F, chi_offdiag(), psi, phi, SolveMode::dirichlet));
    EXPECT_TRUE(r.admissible) << cs.F.name();
    EXPECT_TRUE(r.estimates.sandwich_ok) << cs.F.name() << " " << r.estimates.sandwich_violation;
    EXPECT_TRUE(r.estimates.finite()) << cs.F.name();
  }
}

TEST(Dirichlet, ClosedSpecRejected) {
  const auto d = product2(6);
  auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d, 0.0), ScalarField(d),
                        SolveMode::closed);
  EXPECT_THROW((void)solve_closed(spec), Error);
}

TEST(Dirichlet, PsiAtBoundarySupremumNeedsDegenerateFlag) {
  const auto d = product2(6);
  const auto spec = make_spec(d, FuncFamily::sigma_k_root(2, 2), HermitianMatrix::identity(2), ScalarField(d, 0.0),
                              ScalarField(d), SolveMode::dirichlet);
  try {
    (void)solve_dirichlet(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

// ---------------------------------------------------------------------------
// Closed
// ---------------------------------------------------------------------------

namespace {
GridDomain torus_axes02(int N, int coarse = 3) {
  return GridDomain::torus(2, {N, coarse, N, coarse}, {2 * M_PI, 2 * M_PI, 2 * M_PI, 2 * M_PI});
}

// u* = A (sin x1 + cos x2 + 0.5 sin x1 cos x2) on the torus, a function of x1, x2 only.
struct ClosedManufactured {
  double A = 0.1;
  double u(double a, double b) const { return A * (std::sin(a) + std::cos(b) + 0.5 * std::sin(a) * std::cos(b)); }
  double psi(double a, double b) const {
    const double uaa = A * (-std::sin(a) - 0.5 * std::sin(a) * std::cos(b));
    const double ubb = A * (-std::cos(b) - 0.5 * std::sin(a) * std::cos(b));
    const double uab = A * (-0.5 * std::cos(a) * std::sin(b));
    // u_{j kbar} = 1/4 D_{xj xk} for a function of the real parts only
    return std::log((1.0 + 0.25 * uaa) * (1.0 + 0.25 * ubb) - 0.0625 * uab * uab);
  }
};
}  // namespace

TEST(Closed, ConstantsSolveWithPureC) {
  const auto d = torus_axes02(6, 4);
  for (double shift : {0.0, 1.0, -0.7}) {
    const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d, -shift), ScalarField(d),
                                SolveMode::closed);
    const auto r = solve_closed(spec);
    ASSERT_TRUE(r.c.has_value());
    EXPECT_NEAR(*r.c, shift, 1e-9);
    EXPECT_LT(r.u.sup_abs(), 1e-9);
  }
}

TEST(Closed, ManufacturedCIsSecondOrder) {
  const ClosedManufactured m;
  std::vector<double> cs, us;
  for (int N : {8, 16, 32}) {
    const auto d = torus_axes02(N);
    ScalarField psi(d);
    double top = -1e300;
    for (std::size_t i = 0; i < d.size(); ++i) {
      psi[i] = m.psi(d.position(i, 0), d.position(i, 2));
      top = std::max(top, m.u(d.position(i, 0), d.position(i, 2)));
    }
    const auto r = solve_closed(make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), psi, ScalarField(d), SolveMode::closed));
    EXPECT_TRUE(r.admissible);
    EXPECT_NEAR(r.u.max(), 0.0, 1e-14);
    double e = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) e = std::max(e, std::abs(r.u[i] - (m.u(d.position(i, 0), d.position(i, 2)) - top)));
    cs.push_back(std::abs(*r.c));
    us.push_back(e);
  }
  EXPECT_GT(std::log2(cs[0] / cs[1]), 1.8);
  EXPECT_GT(std::log2(cs[1] / cs[2]), 1.8);
  EXPECT_GT(std::log2(us[1] / us[2]), 1.8);
}

TEST(Closed, PsiShiftChangesOnlyC) {
  const ClosedManufactured m;
  const auto d = torus_axes02(10);
  ScalarField psi(d);
  for (std::size_t i = 0; i < d.size(); ++i) psi[i] = m.psi(d.position(i, 0), d.position(i, 2));
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), psi, ScalarField(d), SolveMode::closed);
  auto moved = spec;
  moved.psi += 0.4;
  const auto a = solve_closed(spec), b = solve_closed(moved);
  EXPECT_NEAR(*b.c - *a.c, -0.4, 1e-9);
  EXPECT_LT(sup_diff(a.u, b.u), 1e-9);
}

TEST(Closed, InadmissibleStartIsConstructionError) {
  const auto d = torus_axes02(6);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::diagonal({-1.0, 1.0}), ScalarField(d, 0.0),
                              ScalarField(d), SolveMode::closed);
  try {
    (void)solve_closed(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::construction);
  }
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

TEST(Linearization, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const std::vector<FuncFamily> fams{FuncFamily::log_det(2), FuncFamily::sigma_k_root(2, 2), FuncFamily::sigma_k_root(2, 1),
                                     FuncFamily::log_sigma_k(2, 1), FuncFamily::sigma_quotient(2, 2, 1)};
  for (const auto& F : fams) {
    for (int trial = 0; trial < 4; ++trial) {
      const bool closed = trial % 2 == 0;
      const auto d = closed ? GridDomain::torus(2, {4, 3, 3, 4}, {1, 1.3, 0.9, 1}) : GridDomain::product(2, {3, 4, 4, 5}, {1, 1, 1, 1});
      HermitianMatrix chi = HermitianMatrix::identity(2);
      chi.set(0, 1, cplx(0.2 * U(rng), 0.2 * U(rng)));
      ScalarField u(d), v(d);
      for (std::size_t i = 0; i < d.size(); ++i) {
        u[i] = 0.002 * U(rng);
        v[i] = U(rng);
      }
      const auto spec = make_spec(d, F, chi, ScalarField(d, 10.0), ScalarField(d), closed ? SolveMode::closed : SolveMode::dirichlet);
      EXPECT_LT(linearization_defect(spec, u, v), 1e-5) << F.name() << " trial " << trial;
    }
  }
}

TEST(Linearization, ThreeDimensionalMixedFamily) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const auto d = GridDomain::torus(3, {3, 3, 3, 3, 3, 3}, {1, 1, 1, 1, 1, 1});
  HermitianMatrix chi = HermitianMatrix::identity(3);
  chi.set(0, 2, cplx(0.1, -0.15));
  chi.set(1, 2, cplx(-0.05, 0.1));
  ScalarField u(d), v(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    u[i] = 0.001 * U(rng);
    v[i] = U(rng);
  }
  const auto spec = make_spec(d, FuncFamily::guan_mixed(3, 2, {0.0, 1.0}), chi, ScalarField(d, 10.0), ScalarField(d), SolveMode::closed);
  EXPECT_LT(linearization_defect(spec, u, v), 1e-5);
}

// ---------------------------------------------------------------------------
// Degenerate data
// ---------------------------------------------------------------------------

namespace {
// Weight vanishing at the S node (N/2, N/2) only.
ScalarField bump_weight(const GridDomain& d) {
  ScalarField w(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = s_x(d, i) - 0.5, y = s_y(d, i) - 0.5;
    w[i] = x * x + y * y;
  }
  return w;
}
}  // namespace

TEST(Degenerate, LogDetLadderHasMonotoneCauchyDifferences) {
  const auto d = product2(12);
  auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d), ScalarField(d), SolveMode::dirichlet);
  spec.degenerate = true;
  const auto rep = degenerate_sweep(spec, bump_weight(d), {1.0, 0.5, 0.25, 0.125});
  ASSERT_FALSE(rep.aborted) << rep.abort_reason;
  ASSERT_EQ(rep.results.size(), 4u);
  ASSERT_EQ(rep.cauchy.size(), 3u);
  EXPECT_TRUE(rep.cauchy_monotone());
  for (const auto& r : rep.results) EXPECT_TRUE(r.estimates.sandwich_ok);
  EXPECT_DOUBLE_EQ(rep.rho[0], 0.5);
}

TEST(Degenerate, SigmaRootLadder) {
  const auto d = product2(12);
  auto spec = make_spec(d, FuncFamily::sigma_k_root(2, 2), HermitianMatrix::identity(2), ScalarField(d), ScalarField(d),
                        SolveMode::dirichlet);
  spec.degenerate = true;
  const auto rep = degenerate_sweep(spec, bump_weight(d), {1.0, 0.5, 0.25, 0.125});
  ASSERT_FALSE(rep.aborted) << rep.abort_reason;
  EXPECT_TRUE(rep.cauchy_monotone());
}

TEST(Degenerate, BoundaryShiftIsTranslation) {
  const auto d = product2(10);
  auto spec = make_spec(d, FuncFamily::log_det(2), chi_offdiag(), ScalarField(d), ScalarField(d), SolveMode::dirichlet);
  spec.degenerate = true;
  const auto rep = stability_pair(spec, bump_weight(d), 0.25, ScalarField(d, 0.05));
  EXPECT_NEAR(rep.boundary_shift, 0.05, 1e-15);
  EXPECT_NEAR(rep.solution_diff, 0.05, 1e-9);
  EXPECT_TRUE(rep.within());
}

TEST(Degenerate, VaryingPerturbationIsContracted) {
  const auto d = product2(12);
  auto spec = make_spec(d, FuncFamily::log_det(2), chi_offdiag(), ScalarField(d), ScalarField(d), SolveMode::dirichlet);
  spec.degenerate = true;
  ScalarField p(d);
  for (std::size_t i = 0; i < d.size(); ++i) p[i] = 0.05 * std::cos(2.0 * s_x(d, i) + s_y(d, i));
  const auto rep = stability_pair(spec, bump_weight(d), 0.125, p);
  EXPECT_TRUE(rep.within()) << rep.solution_diff << " vs " << rep.boundary_shift;
}

TEST(Degenerate, NonDegenerateWeightRejected) {
  const auto d = product2(6);
  auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d), ScalarField(d), SolveMode::dirichlet);
  spec.degenerate = true;
  EXPECT_THROW((void)degenerate_sweep(spec, ScalarField(d, 1.0), {1.0}), Error);
  EXPECT_THROW((void)degenerate_sweep(spec, bump_weight(d), {0.5, 1.0}), Error);
}

TEST(Degenerate, RegularizedPsiForms) {
  const auto d = product2(4);
  const ScalarField w(d, 0.0);
  EXPECT_DOUBLE_EQ(regularized_psi(FuncFamily::log_det(2), w, 0.25)[0], std::log(0.25));
  EXPECT_DOUBLE_EQ(regularized_psi(FuncFamily::sigma_k_root(2, 2), w, 0.25)[0], 0.25);
}

// ---------------------------------------------------------------------------
// Exhaustion
// ---------------------------------------------------------------------------

TEST(Exhaustion, HugeLevelIsResolutionError) {
  const auto s = GridDomain::product(1, {16, 16}, {1, 1});
  const auto hs = poisson_dirichlet(s, ScalarField(s, 1.0), ScalarField(s));
  try {
    (void)level_mask(hs, 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::resolution);
  }
}

TEST(Exhaustion, NestedMasksAndSolves) {
  const auto d = product2(16);
  ScalarField psi(d), phi(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    psi[i] = 0.1 * std::sin(3.0 * s_x(d, i));
    phi[i] = 0.1 * s_y(d, i);
  }
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), psi, phi, SolveMode::dirichlet);
  const auto rep = domain_exhaustion(spec, {0.2, 0.1, 0.05, 0.02});
  ASSERT_EQ(rep.results.size(), 4u);
  for (std::size_t k = 1; k < rep.interior_counts.size(); ++k) EXPECT_GE(rep.interior_counts[k], rep.interior_counts[k - 1]);
  EXPECT_EQ(rep.successive_diff.size(), 3u);
  for (const auto& r : rep.results) {
    EXPECT_TRUE(r.admissible);
    EXPECT_TRUE(r.estimates.finite());
  }
  for (double x : rep.diff_to_full) EXPECT_TRUE(std::isfinite(x));
}

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

TEST(Estimates, TrivialInstance) {
  const auto d = product2(8);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d), ScalarField(d), SolveMode::dirichlet);
  SolveResult r;
  r.u = ScalarField(d);
  const auto e = verify_estimates(r, spec, &r.u, &r.u);
  EXPECT_TRUE(e.sandwich_ok);
  EXPECT_TRUE(e.normal_order_ok);
  EXPECT_EQ(e.sup_dbar, 0.0);
  EXPECT_EQ(e.grad_sq, 0.0);
  EXPECT_DOUBLE_EQ(e.bdry_ratio, 1.0);  // g = I on the boundary
}

TEST(Estimates, SandwichViolationReported) {
  const auto d = product2(8);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d), ScalarField(d), SolveMode::dirichlet);
  SolveResult r;
  r.u = ScalarField(d);
  ScalarField above(d, 0.0);
  above[d.index({1, 1, 4, 4})] = 1e-6;
  const auto e = verify_estimates(r, spec, &above, nullptr);
  EXPECT_FALSE(e.sandwich_ok);
  EXPECT_NEAR(e.sandwich_violation, 1e-6, 1e-18);
}

TEST(Estimates, HessianNormAndGradient) {
  // u = x^2 along the real S axis: D_xx = 2, u_{nn} = 1/2; one-sided gradient 2 at x = 1.
  const auto d = product2(8, 4);
  const auto spec = make_spec(d, FuncFamily::log_det(2), HermitianMatrix::identity(2), ScalarField(d), ScalarField(d), SolveMode::dirichlet);
  SolveResult r;
  r.u = ScalarField::from_function(d, [](const std::vector<double>& x) { return x[2] * x[2]; });
  const auto e = verify_estimates(r, spec, nullptr, nullptr);
  EXPECT_NEAR(e.sup_dbar, 0.5, 1e-12);
  EXPECT_NEAR(e.grad_sq, 4.0, 1e-12);
  EXPECT_NEAR(e.ratio2nd, 0.1, 1e-12);
}
