#pragma once

// Level sets of f, the explicit epsilon of the dichotomy lemma, and the
// pointwise C-subsolution test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hcl/error.hpp"
#include "hcl/symfunc.hpp"

namespace hcl {

namespace detail {

/// Bisection for phi(t) = sigma with phi nondecreasing, phi(lo) < sigma <= phi(hi). Runs until the
/// bracket stops shrinking and returns the endpoint closer to the level.
template <class Phi>
double bisect_level(Phi&& phi, double lo, double hi, double sigma) {
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (phi(mid) < sigma ? lo : hi) = mid;
  }
  const double flo = phi(lo), fhi = phi(hi);
  return std::isfinite(flo) && std::abs(flo - sigma) < std::abs(fhi - sigma) ? lo : hi;
}

inline double level_tol(double sigma) { return 1e-10 * (1.0 + std::abs(sigma)); }

}  // namespace detail

/// Point t* d on the ray through `direction` with f(t* d) = sigma (t* > 0).
[[nodiscard]] inline std::vector<double> level_set_point(const FuncFamily& F, double sigma,
                                                         std::span<const double> direction) {
  std::vector<double> p(direction.size());
  auto phi = [&](double t) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = t * direction[i];
    return eval_f_ext(F, p);
  };
  double lo = 1.0, hi = 1.0;
  int guard = 0;
  while (!(phi(hi) >= sigma)) {
    hi *= 2.0;
    if (++guard > 200) fail(ErrorKind::range, "level_set_point: level not attained along the ray (above)");
  }
  lo = hi;
  guard = 0;
  while (phi(lo) >= sigma) {
    lo *= 0.5;
    if (++guard > 1100 || lo == 0.0) fail(ErrorKind::range, "level_set_point: level not attained along the ray (below)");
  }
  const double t = detail::bisect_level(phi, lo, hi, sigma);
  phi(t);
  if (!(std::abs(eval_f_ext(F, p) - sigma) <= detail::level_tol(sigma)))
    fail(ErrorKind::range, "level_set_point: bisection did not reach the level");
  return p;
}

/// Point base + t*1 with f = sigma. f(base + t 1) is strictly increasing, so the root is unique.
[[nodiscard]] inline std::vector<double> level_set_point_shift(const FuncFamily& F, double sigma,
                                                               std::span<const double> base) {
  std::vector<double> p(base.size());
  auto phi = [&](double t) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = base[i] + t;
    return eval_f_ext(F, p);
  };
  double scale = 1.0;
  for (double b : base) scale = std::max(scale, std::abs(b));
  double hi = scale;
  int guard = 0;
  while (!(phi(hi) >= sigma)) {
    hi = 2.0 * hi + scale;
    if (++guard > 200) fail(ErrorKind::range, "level_set_point_shift: level not attained");
  }
  double lo = -2.0 * scale;  // below the cone: sigma_1 < 0 there
  while (phi(lo) >= sigma) {
    lo = 2.0 * lo;
    if (++guard > 400) fail(ErrorKind::range, "level_set_point_shift: level not attained below");
  }
  const double t = detail::bisect_level(phi, lo, hi, sigma);
  phi(t);
  return p;
}

/// Quasi-random points of the level set {f = sigma}: a fan of 1-shift rays through
/// base points with entries of random magnitude.
[[nodiscard]] inline std::vector<std::vector<double>> sample_level_set(const FuncFamily& F, double sigma, int count,
                                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> expo(-1.0, 2.0);
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<double> base(static_cast<std::size_t>(F.dimension()));
  for (int s = 0; s < count; ++s) {
    const double mag = std::pow(10.0, expo(rng));
    for (double& b : base) b = mag * u(rng);
    out.push_back(level_set_point_shift(F, sigma, base));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Explicit epsilon of the dichotomy lemma
// ---------------------------------------------------------------------------

struct DichotomyContext {
  FuncFamily F;
  double sigma = 0.0;
  std::vector<double> mu;
  double delta = 0.0;
  double R = 0.0;
  double R0 = 0.0;
  double eps1 = 0.0;
  double delta0 = 0.0;
  double epsilon = 0.0;
  std::vector<double> eps_terms;   // the six candidates whose minimum is epsilon
  double certified_radius = 0.0;   // largest |lambda| over the sampled hypothesis rays
};

namespace detail {

inline void check_level_range(const FuncFamily& F, double sigma) {
  if (!(sigma > F.sup_boundary() && sigma < F.sup_cone()))
    fail(ErrorKind::precondition, "dichotomy context: sigma must lie strictly between sup_boundary f and sup f");
}

inline std::vector<double> tilde_mu(const std::vector<double>& mu, double delta) {
  std::vector<double> t(mu);
  for (double& v : t) v -= delta;
  return t;
}

/// min over i of f(scale * mutilde + R0 e_i) - sigma (and -inf if any point leaves the cone).
inline double axis_margin(const FuncFamily& F, const std::vector<double>& mt, double scale, double R0, double sigma) {
  double m = std::numeric_limits<double>::infinity();
  std::vector<double> p(mt.size());
  for (std::size_t i = 0; i < mt.size(); ++i) {
    for (std::size_t j = 0; j < mt.size(); ++j) p[j] = scale * mt[j];
    p[i] += R0;
    m = std::min(m, eval_f_ext(F, p) - sigma);
  }
  return m;
}

}  // namespace detail

/// Context from explicit R0 and eps1: computes delta0 and the six-term minimum
/// epsilon = min{delta0/(2R0), delta(1-eps1)/(2R0), eps1/(2R0), delta0/(2(1+eps1)), delta/2, eps1/(2(1+eps1))}.
[[nodiscard]] inline DichotomyContext make_context(const FuncFamily& F, double sigma, std::vector<double> mu,
                                                   double delta, double R, double R0, double eps1) {
  detail::check_level_range(F, sigma);
  if (!(delta > 0.0 && R > 0.0 && R0 > 0.0 && eps1 > 0.0 && eps1 < 1.0))
    fail(ErrorKind::precondition, "make_context: need delta, R, R0 > 0 and 0 < eps1 < 1");
  if (!in_cone(mu, F.cone_index())) fail(ErrorKind::admissibility, "make_context: mu outside the cone");
  DichotomyContext c{F, sigma, std::move(mu), delta, R, R0, eps1, 0.0, 0.0, {}, 0.0};
  const auto mt = detail::tilde_mu(c.mu, delta);
  c.delta0 = std::min(detail::axis_margin(F, mt, 1.0 + eps1, R0, sigma), detail::axis_margin(F, mt, 1.0 - eps1, R0, sigma));
  if (!(c.delta0 > 0.0))
    fail(ErrorKind::hypothesis, "make_context: f((1 +- eps1) mutilde + R0 e_i) > sigma fails for the given R0, eps1");
  c.eps_terms = {c.delta0 / (2.0 * R0),        delta * (1.0 - eps1) / (2.0 * R0), eps1 / (2.0 * R0),
                 c.delta0 / (2.0 * (1.0 + eps1)), delta / 2.0,                       eps1 / (2.0 * (1.0 + eps1))};
  c.epsilon = *std::min_element(c.eps_terms.begin(), c.eps_terms.end());
  return c;
}

/// Samples the hypothesis (mu - 2 delta 1 + Gamma_n) cap {f = sigma} within B_R(0) along `rays`
/// quasi-random positive directions. Returns the largest |lambda| found (0 if the set looks empty).
[[nodiscard]] inline double certify_bounded_intersection(const FuncFamily& F, double sigma, const std::vector<double>& mu,
                                                         double delta, int rays, std::uint64_t seed) {
  const std::size_t n = mu.size();
  std::vector<double> base(mu);
  for (double& v : base) v -= 2.0 * delta;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> dir(n), p(n);
  double worst = 0.0;
  const double f0 = eval_f_ext(F, base);
  if (f0 >= sigma) {
    // The ray family starts on or above the level; only the base itself can touch it.
    if (std::abs(f0 - sigma) <= detail::level_tol(sigma)) {
      double nb = 0.0;
      for (double v : base) nb += v * v;
      worst = std::sqrt(nb);
    }
    return worst;
  }
  for (int r = 0; r < rays; ++r) {
    double nd = 0.0;
    for (double& v : dir) {
      v = expo(rng) + 1e-6;
      nd += v * v;
    }
    nd = std::sqrt(nd);
    for (double& v : dir) v /= nd;
    auto phi = [&](double s) {
      for (std::size_t i = 0; i < n; ++i) p[i] = base[i] + s * dir[i];
      return eval_f_ext(F, p);
    };
    double hi = 1.0;
    bool found = true;
    while (!(phi(hi) >= sigma)) {
      hi *= 2.0;
      if (hi > 1e15) {
        found = false;  // the level is never reached along this ray: ray misses the level set
        break;
      }
    }
    if (!found) continue;
    const double s = detail::bisect_level(phi, 0.0, hi, sigma);
    phi(s);
    double np = 0.0;
    for (double v : p) np += v * v;
    worst = std::max(worst, std::sqrt(np));
  }
  return worst;
}

/// Builds the dichotomy context by search: R0 is twice the smallest value with
/// f(mutilde + R0 e_i) > sigma for all i (and mutilde_i + R0 > R), eps1 is halved from 1/2 until
/// f((1 +- eps1) mutilde + R0 e_i) > sigma. The bounded-intersection hypothesis is certified on
/// `rays` sampled rays; a point outside B_R(0) is a hypothesis error.
[[nodiscard]] inline DichotomyContext build_context(const FuncFamily& F, double sigma, std::vector<double> mu,
                                                    double delta, double R, int rays = 200,
                                                    std::uint64_t seed = 0) {
  detail::check_level_range(F, sigma);
  if (!(delta > 0.0 && R > 0.0)) fail(ErrorKind::precondition, "build_context: delta and R must be positive");
  if (!in_cone(mu, F.cone_index())) fail(ErrorKind::admissibility, "build_context: mu outside the cone");
  const double radius = certify_bounded_intersection(F, sigma, mu, delta, rays, seed);
  if (radius >= R)
    fail(ErrorKind::hypothesis, "build_context: sampled intersection point with |lambda| = " + std::to_string(radius) +
                                    " outside B_R, R = " + std::to_string(R));
  const auto mt = detail::tilde_mu(mu, delta);
  auto ok = [&](double r0) { return detail::axis_margin(F, mt, 1.0, r0, sigma) > 0.0; };
  double hi = 1.0;
  while (!ok(hi)) {
    hi *= 2.0;
    if (hi > 1e15) fail(ErrorKind::hypothesis, "build_context: no R0 with f(mutilde + R0 e_i) > sigma");
  }
  double lo = 0.0;
  if (ok(lo)) {
    hi = 0.0;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? hi : lo) = mid;
    }
  }
  const double min_mt = *std::min_element(mt.begin(), mt.end());
  const double R0 = 2.0 * std::max({hi, R - min_mt, 1e-3});
  double eps1 = 0.5;
  for (int it = 0; it < 60; ++it, eps1 *= 0.5) {
    if (detail::axis_margin(F, mt, 1.0 + eps1, R0, sigma) > 0.0 && detail::axis_margin(F, mt, 1.0 - eps1, R0, sigma) > 0.0)
      break;
  }
  auto c = make_context(F, sigma, std::move(mu), delta, R, R0, eps1);
  c.certified_radius = radius;
  return c;
}

enum class DichotomyCase { case1, case2, both };

inline const char* to_string(DichotomyCase c) {
  switch (c) {
    case DichotomyCase::case1: return "case1";
    case DichotomyCase::case2: return "case2";
    case DichotomyCase::both: return "both";
  }
  return "?";
}

struct DichotomySlack {
  double case1 = 0.0;  // sum f_i (mu_i - lambda_i) - eps * Q
  double case2 = 0.0;  // min_i f_i - eps * Q
  double Q = 0.0;      // 1 + sum f_i + |sum f_i lambda_i|
};

[[nodiscard]] inline DichotomySlack dichotomy_slack(const DichotomyContext& ctx, std::span<const double> lambda) {
  const auto g = grad_f(ctx.F, lambda);
  double sum_f = 0.0, sum_fl = 0.0, lin = 0.0, fmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    sum_f += g[i];
    sum_fl += g[i] * lambda[i];
    lin += g[i] * (ctx.mu[i] - lambda[i]);
    fmin = std::min(fmin, g[i]);
  }
  DichotomySlack s;
  s.Q = 1.0 + sum_f + std::abs(sum_fl);
  s.case1 = lin - ctx.epsilon * s.Q;
  s.case2 = fmin - ctx.epsilon * s.Q;
  return s;
}

/// Which alternative of the dichotomy holds at lambda on the level set; a lemma violation
/// error if neither does beyond round-off.
[[nodiscard]] inline DichotomyCase dichotomy_check(const DichotomyContext& ctx, std::span<const double> lambda) {
  const double fl = eval_f(ctx.F, lambda);
  if (!(std::abs(fl - ctx.sigma) <= 1e-8 * (1.0 + std::abs(ctx.sigma))))
    fail(ErrorKind::precondition, "dichotomy_check: lambda is not on the level set");
  const auto s = dichotomy_slack(ctx, lambda);
  const double tol = 1e-12 * s.Q;
  const bool c1 = s.case1 >= -tol;
  const bool c2 = s.case2 >= -tol;
  if (c1 && c2) return DichotomyCase::both;
  if (c1) return DichotomyCase::case1;
  if (c2) return DichotomyCase::case2;
  fail(ErrorKind::lemma_violation, "dichotomy_check: neither alternative holds");
}

// ---------------------------------------------------------------------------
// C-subsolution test
// ---------------------------------------------------------------------------

enum class Verdict { yes, no, indeterminate };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "?";
}

/// lim_{t -> inf} f(lambda + t e_i). Every family except sigma_quotient with l >= 1 is unbounded
/// along the axes of its cone (a logarithm or a positive power of t survives); the quotient tends to
/// (sigma_{k-1}(lambda|i) / sigma_{l-1}(lambda|i))^{1/(k-l)}.
[[nodiscard]] inline double axis_limit(const FuncFamily& F, std::span<const double> lambda, int i) {
  if (F.kind() != FamilyKind::sigma_quotient || F.lower_index() == 0) return std::numeric_limits<double>::infinity();
  std::vector<double> rest;
  for (int j = 0; j < static_cast<int>(lambda.size()); ++j)
    if (j != i) rest.push_back(lambda[j]);
  const int k = F.cone_index(), l = F.lower_index();
  return std::pow(sigma_of(rest, k - 1) / sigma_of(rest, l - 1), 1.0 / (k - l));
}

struct CSubsolutionReport {
  Verdict verdict = Verdict::indeterminate;  // from the axis limits
  Verdict ladder_verdict = Verdict::indeterminate;
  std::vector<double> axis_limit;      // exact lim_t f(lambda + t e_i)
  std::vector<double> axis_sup;        // sup over the ladder t = 1, 2, ..., t_max
  std::vector<double> axis_limit_est;  // extrapolated ladder limit (inf when the tail does not settle)

  /// The ladder never contradicts the exact verdict (it may only be inconclusive).
  [[nodiscard]] bool consistent() const { return ladder_verdict == Verdict::indeterminate || ladder_verdict == verdict; }
};

/// Boundedness of {mu in lambda + Gamma_n : f(mu) = psi} holds iff every axis limit exceeds psi.
/// The truncated ladder t = 1, 2, ..., t_max gives the numerical surrogate: yes once the sup passes
/// psi, no when geometrically decaying increments extrapolate below psi, indeterminate otherwise.
[[nodiscard]] inline CSubsolutionReport c_subsolution_report(const FuncFamily& F, std::span<const double> lambda,
                                                             double psi, double t_max = 1048576.0) {
  if (!in_cone(lambda, F.cone_index())) fail(ErrorKind::admissibility, "is_c_subsolution: lambda outside the cone");
  const std::size_t n = lambda.size();
  CSubsolutionReport rep;
  bool lad_indet = false, lad_no = false, exact_no = false;
  std::vector<double> p(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double lim = axis_limit(F, lambda, static_cast<int>(i));
    rep.axis_limit.push_back(lim);
    if (!(lim > psi)) exact_no = true;

    std::vector<double> vals;
    for (double t = 1.0; t <= t_max * (1.0 + 1e-12); t *= 2.0) {
      p[i] = lambda[i] + t;
      vals.push_back(eval_f(F, p));
    }
    p[i] = lambda[i];
    const double sup = *std::max_element(vals.begin(), vals.end());
    rep.axis_sup.push_back(sup);
    if (sup > psi || vals.size() < 3) {
      rep.axis_limit_est.push_back(sup);
      if (!(sup > psi)) lad_indet = true;
      continue;
    }
    const std::size_t m = vals.size();
    const double d1 = vals[m - 1] - vals[m - 2];
    const double d0 = vals[m - 2] - vals[m - 3];
    const double tol = 1e-12 * (1.0 + std::abs(vals[m - 1]));
    double est;
    if (d1 <= tol) {
      est = vals[m - 1];
    } else if (d0 > 0.0 && d1 / d0 < 0.75) {
      const double r = d1 / d0;
      est = vals[m - 1] + d1 * r / (1.0 - r);
    } else {
      est = std::numeric_limits<double>::infinity();
    }
    rep.axis_limit_est.push_back(est);
    if (est < psi - 1e-9 * (1.0 + std::abs(psi)))
      lad_no = true;
    else
      lad_indet = true;
  }
  rep.verdict = exact_no ? Verdict::no : Verdict::yes;
  rep.ladder_verdict = lad_no ? Verdict::no : (lad_indet ? Verdict::indeterminate : Verdict::yes);
  return rep;
}

[[nodiscard]] inline Verdict is_c_subsolution(const FuncFamily& F, std::span<const double> lambda, double psi,
                                              double t_max = 1048576.0) {
  return c_subsolution_report(F, lambda, psi, t_max).verdict;
}

}  // namespace hcl
