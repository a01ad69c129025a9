#pragma once

// Eigenvalue localisation for bordered Hermitian matrices
//
//     [ d_1              a_1     ]
//     [      ...         ...     ]
//     [          d_{n-1} a_{n-1} ]
//     [ a_1^* ... a_{n-1}^*  corner ]
//
// when the corner grows quadratically in the border, plus the derivative of
// F(G) = f(lambda(G)) with respect to the Hermitian argument.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hcl/error.hpp"
#include "hcl/hermitian.hpp"
#include "hcl/symfunc.hpp"

namespace hcl {

struct BorderedHermitian {
  std::vector<double> d;  // fixed diagonal, n-1 entries
  std::vector<cplx> a;    // fixed border, n-1 entries
  double corner = 0.0;    // the variable bottom-right entry

  BorderedHermitian() = default;
  BorderedHermitian(std::vector<double> diag, std::vector<cplx> border, double c)
      : d(std::move(diag)), a(std::move(border)), corner(c) {
    if (d.empty() || d.size() != a.size())
      fail(ErrorKind::domain, "BorderedHermitian needs n-1 >= 1 diagonal and border entries");
  }

  [[nodiscard]] int n() const noexcept { return static_cast<int>(d.size()) + 1; }

  [[nodiscard]] BorderedHermitian with_corner(double c) const { return {d, a, c}; }

  [[nodiscard]] HermitianMatrix to_matrix() const {
    const int m = n();
    HermitianMatrix A(m);
    for (int i = 0; i < m - 1; ++i) {
      A.set(i, i, d[i]);
      A.set(i, m - 1, a[i]);
    }
    A.set(m - 1, m - 1, corner);
    return A;
  }

  [[nodiscard]] double border_sq() const {
    double s = 0.0;
    for (const auto& x : a) s += std::norm(x);
    return s;
  }
  [[nodiscard]] double diag_abs_sum() const {
    double s = 0.0;
    for (double x : d) s += std::abs(x);
    return s;
  }
};

/// Corner threshold of the quantitative lemma:
/// (2n-3)/eps * sum|a_i|^2 + (n-1) sum|d_i| + (n-2) eps / (2n-3).
[[nodiscard]] inline double growth_threshold(const BorderedHermitian& B, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::domain, "growth_threshold needs eps > 0");
  const double n = B.n();
  return (2.0 * n - 3.0) / eps * B.border_sq() + (n - 1.0) * B.diag_abs_sum() + (n - 2.0) * eps / (2.0 * n - 3.0);
}

/// Corner threshold of the refinement statement:
/// (1/eps) sum|a_i|^2 + sum (d_i + (n-2)|d_i|) + (n-2) eps.
[[nodiscard]] inline double refinement_threshold(const BorderedHermitian& B, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::domain, "refinement_threshold needs eps > 0");
  const double n = B.n();
  double s = B.border_sq() / eps + (n - 2.0) * eps;
  for (double x : B.d) s += x + (n - 2.0) * std::abs(x);
  return s;
}

/// Slack used for the strict lemma inequalities: absorbs eigensolver error.
[[nodiscard]] inline double lemma_slack(const BorderedHermitian& B) {
  return 1e-10 * (1.0 + B.to_matrix().frobenius());
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct LocalizationVerdict {
  double epsilon = 0.0;
  double threshold = 0.0;
  std::vector<Interval> intervals;  // (d_alpha - eps, d_alpha + eps), in the given order of d
  Interval top_interval;            // [corner, corner + (n-1) eps)
  bool satisfied = false;
  bool top_boundary_hit = false;  // lambda_max == corner within slack
  std::vector<double> witness;    // all eigenvalues, ascending
  std::vector<int> assignment;    // assignment[alpha] = index of the eigenvalue matched to d_alpha
  double max_violation = 0.0;     // largest amount by which any inequality failed (0 if none)
};

/// Checks the quantitative localisation: after a permutation, |lambda_alpha - d_alpha| < eps for the
/// n-1 lower eigenvalues and corner <= lambda_max < corner + (n-1) eps. The permutation is the
/// minimal-displacement assignment, i.e. sorted d matched with sorted lower eigenvalues.
[[nodiscard]] inline LocalizationVerdict localize(const BorderedHermitian& B, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::domain, "localize needs eps > 0");
  const int n = B.n();
  LocalizationVerdict v;
  v.epsilon = eps;
  v.threshold = growth_threshold(B, eps);
  v.witness = eigenvalues(B.to_matrix());
  const double slack = lemma_slack(B);
  for (double x : B.d) v.intervals.push_back({x - eps, x + eps});
  v.top_interval = {B.corner, B.corner + (n - 1) * eps};

  std::vector<int> order(static_cast<std::size_t>(n - 1));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return B.d[x] < B.d[y]; });
  v.assignment.assign(static_cast<std::size_t>(n - 1), -1);
  double worst = 0.0;
  for (int r = 0; r < n - 1; ++r) {
    const int alpha = order[r];
    v.assignment[alpha] = r;
    worst = std::max(worst, std::abs(v.witness[r] - B.d[alpha]) - eps);
  }
  const double top = v.witness.back();
  worst = std::max(worst, B.corner - top);
  worst = std::max(worst, top - v.top_interval.hi);
  v.top_boundary_hit = std::abs(top - B.corner) <= slack;
  // Strict inequalities are relaxed by the eigensolver slack.
  v.satisfied = worst < slack;
  v.max_violation = std::max(0.0, worst);
  return v;
}

struct RefinementVerdict {
  double epsilon = 0.0;
  double threshold = 0.0;
  bool satisfied = false;
  std::vector<int> nearest;   // nearest[alpha] = i_alpha, index into d of the closest diagonal entry
  double top_excess = 0.0;    // lambda_max - corner
  double excess_bound = 0.0;  // (n-1) eps + |sum (d_alpha - d_{i_alpha})|
  std::vector<double> witness;
};

/// The weaker conclusion: every lower eigenvalue lies within eps of some diagonal entry, and
/// 0 <= lambda_max - corner < (n-1) eps + |sum_alpha (d_alpha - d_{i_alpha})|.
[[nodiscard]] inline RefinementVerdict refinement_localize(const BorderedHermitian& B, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::domain, "refinement_localize needs eps > 0");
  const int n = B.n();
  RefinementVerdict v;
  v.epsilon = eps;
  v.threshold = refinement_threshold(B, eps);
  v.witness = eigenvalues(B.to_matrix());
  const double slack = lemma_slack(B);
  bool ok = true;
  double disp = 0.0;
  for (int alpha = 0; alpha < n - 1; ++alpha) {
    const double lam = v.witness[alpha];
    int best = 0;
    for (int i = 1; i < n - 1; ++i)
      if (std::abs(lam - B.d[i]) < std::abs(lam - B.d[best])) best = i;
    v.nearest.push_back(best);
    if (!(std::abs(lam - B.d[best]) < eps + slack)) ok = false;
    disp += B.d[alpha] - B.d[best];
  }
  v.top_excess = v.witness.back() - B.corner;
  v.excess_bound = (n - 1) * eps + std::abs(disp);
  if (v.top_excess < -slack) ok = false;
  if (!(v.top_excess < v.excess_bound + slack)) ok = false;
  v.satisfied = ok;
  return v;
}

/// (x - corner) prod (x - d_i) - sum |a_i|^2 prod_{j != i} (x - d_j): vanishes at every eigenvalue.
[[nodiscard]] inline double char_poly_residual(const BorderedHermitian& B, double x) {
  const int m = B.n() - 1;
  double lead = x - B.corner;
  for (double di : B.d) lead *= x - di;
  double border = 0.0;
  for (int i = 0; i < m; ++i) {
    double p = std::norm(B.a[i]);
    for (int j = 0; j < m; ++j)
      if (j != i) p *= x - B.d[j];
    border += p;
  }
  return lead - border;
}

/// Magnitude of the largest monomial in char_poly_residual; the natural scale for its size.
[[nodiscard]] inline double char_poly_scale(const BorderedHermitian& B, double x) {
  const int m = B.n() - 1;
  double lead = std::abs(x - B.corner);
  for (double di : B.d) lead *= std::abs(x - di);
  double s = lead;
  for (int i = 0; i < m; ++i) {
    double p = std::norm(B.a[i]);
    for (int j = 0; j < m; ++j)
      if (j != i) p *= std::abs(x - B.d[j]);
    s = std::max(s, p);
  }
  return s;
}

/// Counting of eigenvalues in the connected components J_k of the union of the intervals
/// I'_alpha = (d_alpha - eps/(2n-3), d_alpha + eps/(2n-3)).
struct Census {
  struct Component {
    Interval span;
    std::vector<int> members;  // indices alpha whose interval belongs to this component
  };
  std::vector<Component> components;
  std::vector<double> corners;
  std::vector<std::vector<int>> counts;      // counts[c][k]: eigenvalues in component k at corner c
  std::vector<std::vector<int>> per_alpha;   // per_alpha[c][alpha] = counts[c][component of alpha]
  bool stable = false;                       // counts identical across all corners
  bool matches_sizes = false;                // every count equals the component's member count
  bool top_outside = false;                  // the largest eigenvalue lies in no interval, at every corner
};

[[nodiscard]] inline Census interval_census(const BorderedHermitian& B, double eps, const std::vector<double>& corners) {
  if (!(eps > 0.0)) fail(ErrorKind::domain, "interval_census needs eps > 0");
  const int n = B.n();
  const double thr = growth_threshold(B, eps);
  for (double c : corners)
    if (c < thr)
      fail(ErrorKind::precondition,
           "interval_census: corner " + std::to_string(c) + " below growth threshold " + std::to_string(thr));
  const double half = eps / (2.0 * n - 3.0);
  Census out;
  out.corners = corners;
  std::vector<int> order(static_cast<std::size_t>(n - 1));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return B.d[x] < B.d[y]; });
  std::vector<int> comp_of(static_cast<std::size_t>(n - 1));
  for (int r = 0; r < n - 1; ++r) {
    const int alpha = order[r];
    const double lo = B.d[alpha] - half, hi = B.d[alpha] + half;
    if (!out.components.empty() && lo < out.components.back().span.hi) {
      out.components.back().span.hi = std::max(out.components.back().span.hi, hi);
    } else {
      out.components.push_back({{lo, hi}, {}});
    }
    out.components.back().members.push_back(alpha);
    comp_of[alpha] = static_cast<int>(out.components.size()) - 1;
  }
  out.top_outside = true;
  for (double c : corners) {
    const auto lam = eigenvalues(B.with_corner(c).to_matrix());
    std::vector<int> cnt(out.components.size(), 0);
    for (std::size_t k = 0; k < out.components.size(); ++k)
      for (double l : lam)
        if (l > out.components[k].span.lo && l < out.components[k].span.hi) ++cnt[k];
    const double top = lam.back();
    for (const auto& comp : out.components)
      if (top >= comp.span.lo && top <= comp.span.hi) out.top_outside = false;
    std::vector<int> pa(static_cast<std::size_t>(n - 1));
    for (int alpha = 0; alpha < n - 1; ++alpha) pa[alpha] = cnt[comp_of[alpha]];
    out.counts.push_back(std::move(cnt));
    out.per_alpha.push_back(std::move(pa));
  }
  out.stable = std::all_of(out.counts.begin(), out.counts.end(), [&](const auto& c) { return c == out.counts.front(); });
  out.matches_sizes = true;
  for (const auto& cnt : out.counts)
    for (std::size_t k = 0; k < cnt.size(); ++k)
      if (cnt[k] != static_cast<int>(out.components[k].members.size())) out.matches_sizes = false;
  return out;
}

/// 2x2 closed form [[d, a], [conj(a), corner]]: ascending pair, evaluated without cancellation.
[[nodiscard]] inline std::pair<double, double> closed_form_2x2(double d, cplx a, double corner) {
  const double mean = 0.5 * (d + corner);
  const double half_gap = 0.5 * (corner - d);
  const double rad = std::hypot(half_gap, std::abs(a));
  // The root far from cancellation first; the other from the product lambda_1 lambda_2 = d*corner - |a|^2.
  if (mean >= 0.0) {
    const double hi = mean + rad;
    const double lo = hi != 0.0 ? (d * corner - std::norm(a)) / hi : mean - rad;
    return {lo, hi};
  }
  const double lo = mean - rad;
  const double hi = lo != 0.0 ? (d * corner - std::norm(a)) / lo : mean + rad;
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// Derivative of F(G) = f(lambda(G))
// ---------------------------------------------------------------------------

/// F^{i jbar} = sum_k f_k(lambda) P_ik conj(P_jk) with P the unitary eigenframe of G.
/// The first variation of F is Re tr(F^{..} dG).
[[nodiscard]] inline HermitianMatrix matrix_derivative(const FuncFamily& F, const HermitianMatrix& G) {
  const int n = G.n();
  const auto eg = eig_hermitian(G);
  const auto fk = grad_f(F, eg.values);  // throws admissibility error outside the cone
  HermitianMatrix D(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      cplx s{};
      for (int k = 0; k < n; ++k) s += fk[k] * eg.vector_entry(i, k, n) * std::conj(eg.vector_entry(j, k, n));
      D.set(i, j, s);
    }
  return D;
}

/// tr(F^{..}(G) (Gbar - G)) - sum f_i(lambda)(lambdabar_i - lambda_i), both spectra ascending.
/// Non-negative for concave symmetric f.
[[nodiscard]] inline double pairing_gap(const FuncFamily& F, const HermitianMatrix& G, const HermitianMatrix& Gbar) {
  const auto lam = eigenvalues(G);
  const auto lamb = eigenvalues(Gbar);
  const auto fk = grad_f(F, lam);
  const HermitianMatrix D = matrix_derivative(F, G);
  double rhs = 0.0;
  for (std::size_t i = 0; i < lam.size(); ++i) rhs += fk[i] * (lamb[i] - lam[i]);
  return trace_product(D, Gbar - G) - rhs;
}

}  // namespace hcl
