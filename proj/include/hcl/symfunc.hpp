#pragma once

// Symmetric functions f(lambda) on Garding cones: the operator families,
// their derivatives, cone tests and the structure-condition checks.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcl/error.hpp"

namespace hcl {

/// Eigenvalue tuple (lambda_1, ..., lambda_n), n >= 2, all entries finite.
class LambdaTuple {
 public:
  explicit LambdaTuple(std::vector<double> values) : values_(std::move(values)) { validate(); }
  LambdaTuple(std::initializer_list<double> values) : values_(values) { validate(); }

  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
  [[nodiscard]] std::span<const double> span() const noexcept { return values_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
  [[nodiscard]] auto begin() const noexcept { return values_.begin(); }
  [[nodiscard]] auto end() const noexcept { return values_.end(); }

  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

 private:
  void validate() const {
    if (values_.size() < 2) fail(ErrorKind::domain, "LambdaTuple needs n >= 2 entries");
    for (double v : values_)
      if (!std::isfinite(v)) fail(ErrorKind::domain, "LambdaTuple entries must be finite");
  }

  std::vector<double> values_;
};

/// Row-major square matrix of doubles; used for gradients' Jacobians and f's Hessian.
struct DenseMatrix {
  int n = 0;
  std::vector<double> a;

  DenseMatrix() = default;
  explicit DenseMatrix(int size) : n(size), a(static_cast<std::size_t>(size) * size, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }

  [[nodiscard]] double frobenius() const {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
  }
};

// ---------------------------------------------------------------------------
// Elementary symmetric functions
// ---------------------------------------------------------------------------

/// All e_0..e_m of the values, via the coefficient recurrence of prod(x + v_i).
[[nodiscard]] inline std::vector<double> elementary_symmetric_all(std::span<const double> v) {
  const std::size_t m = v.size();
  std::vector<double> e(m + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j >= 1; --j) e[j] += v[i] * e[j - 1];
  return e;
}

/// sigma_k(v) for an arbitrary-length value list; sigma_0 = 1, sigma_k = 0 for k > len or k < 0.
[[nodiscard]] inline double sigma_of(std::span<const double> v, int k) {
  if (k < 0 || k > static_cast<int>(v.size())) return 0.0;
  return elementary_symmetric_all(v)[static_cast<std::size_t>(k)];
}

/// k-th elementary symmetric polynomial of lambda, 0 <= k <= n.
[[nodiscard]] inline double sigma_k(const LambdaTuple& lambda, int k) {
  if (k < 0 || k > static_cast<int>(lambda.size()))
    fail(ErrorKind::domain, "sigma_k: k=" + std::to_string(k) + " outside [0, n]");
  return sigma_of(lambda.span(), k);
}

/// Garding cone test: sigma_1 > 0, ..., sigma_k > 0.
[[nodiscard]] inline bool in_cone(std::span<const double> lambda, int k) {
  const auto e = elementary_symmetric_all(lambda);
  for (int j = 1; j <= k; ++j)
    if (!(e[static_cast<std::size_t>(j)] > 0.0)) return false;
  return true;
}

[[nodiscard]] inline bool in_cone(const LambdaTuple& lambda, int k) {
  if (k < 1 || k > static_cast<int>(lambda.size()))
    fail(ErrorKind::domain, "in_cone: k outside [1, n]");
  return in_cone(lambda.span(), k);
}

// ---------------------------------------------------------------------------
// Operator families
// ---------------------------------------------------------------------------

enum class FamilyKind { log_det, sigma_k_root, log_sigma_k, sigma_quotient, guan_mixed };

/// A symmetric function f together with its cone Gamma_k.
///
/// - log_det:        sum log lambda_i on Gamma_n
/// - sigma_k_root:   sigma_k^{1/k} on Gamma_k
/// - log_sigma_k:    log sigma_k on Gamma_k
/// - sigma_quotient: (sigma_k / sigma_l)^{1/(k-l)} on Gamma_k, 0 <= l < k
/// - guan_mixed:     sigma_{k+1}/sigma_k + sum_j beta_j log sigma_j on Gamma_k, k < n
class FuncFamily {
 public:
  static FuncFamily log_det(int n) { return FuncFamily(FamilyKind::log_det, n, n, 0, {}); }
  static FuncFamily sigma_k_root(int n, int k) { return FuncFamily(FamilyKind::sigma_k_root, n, k, 0, {}); }
  static FuncFamily log_sigma_k(int n, int k) { return FuncFamily(FamilyKind::log_sigma_k, n, k, 0, {}); }
  static FuncFamily sigma_quotient(int n, int k, int l) {
    return FuncFamily(FamilyKind::sigma_quotient, n, k, l, {});
  }
  static FuncFamily guan_mixed(int n, int k, std::vector<double> beta) {
    return FuncFamily(FamilyKind::guan_mixed, n, k, 0, std::move(beta));
  }

  [[nodiscard]] FamilyKind kind() const noexcept { return kind_; }
  [[nodiscard]] int dimension() const noexcept { return n_; }
  [[nodiscard]] int cone_index() const noexcept { return k_; }
  [[nodiscard]] int lower_index() const noexcept { return l_; }
  [[nodiscard]] const std::vector<double>& beta() const noexcept { return beta_; }

  /// sup of f over the cone boundary: -inf for the logarithmic families, 0 for the homogeneous ones.
  [[nodiscard]] double sup_boundary() const noexcept {
    switch (kind_) {
      case FamilyKind::sigma_k_root:
      case FamilyKind::sigma_quotient: return 0.0;
      default: return -std::numeric_limits<double>::infinity();
    }
  }

  /// Every implemented family is unbounded above on its cone.
  [[nodiscard]] double sup_cone() const noexcept { return std::numeric_limits<double>::infinity(); }

  [[nodiscard]] std::string name() const {
    switch (kind_) {
      case FamilyKind::log_det: return "logdet(n=" + std::to_string(n_) + ")";
      case FamilyKind::sigma_k_root:
        return "sigma" + std::to_string(k_) + "^(1/" + std::to_string(k_) + ")(n=" + std::to_string(n_) + ")";
      case FamilyKind::log_sigma_k: return "log_sigma" + std::to_string(k_) + "(n=" + std::to_string(n_) + ")";
      case FamilyKind::sigma_quotient:
        return "sigma" + std::to_string(k_) + "/sigma" + std::to_string(l_) + "(n=" + std::to_string(n_) + ")";
      case FamilyKind::guan_mixed: {
        std::string s = "guan_mixed(k=" + std::to_string(k_) + ",beta=";
        char buf[32];
        for (std::size_t j = 0; j < beta_.size(); ++j) {
          std::snprintf(buf, sizeof buf, "%g", beta_[j]);
          s += (j ? ":" : "") + std::string(buf);
        }
        return s + ",n=" + std::to_string(n_) + ")";
      }
    }
    return "?";
  }

 private:
  FuncFamily(FamilyKind kind, int n, int k, int l, std::vector<double> beta)
      : kind_(kind), n_(n), k_(k), l_(l), beta_(std::move(beta)) {
    if (n_ < 2) fail(ErrorKind::domain, "family dimension must be >= 2");
    if (k_ < 1 || k_ > n_) fail(ErrorKind::domain, "cone index k must satisfy 1 <= k <= n");
    if (kind_ == FamilyKind::sigma_quotient && (l_ < 0 || l_ >= k_))
      fail(ErrorKind::domain, "sigma quotient needs 0 <= l < k");
    if (kind_ == FamilyKind::guan_mixed) {
      if (k_ >= n_) fail(ErrorKind::domain, "guan_mixed needs k < n (uses sigma_{k+1})");
      if (static_cast<int>(beta_.size()) != k_) fail(ErrorKind::domain, "guan_mixed needs k weights beta_1..beta_k");
      double sum = 0.0;
      for (double b : beta_) {
        if (!(b >= 0.0)) fail(ErrorKind::domain, "guan_mixed weights must be >= 0");
        sum += b;
      }
      if (!(sum > 0.0)) fail(ErrorKind::domain, "guan_mixed weights must have positive sum");
    }
  }

  FamilyKind kind_;
  int n_;
  int k_;
  int l_;
  std::vector<double> beta_;
};

// ---------------------------------------------------------------------------
// Jets: value, gradient and Hessian carried through the chain rule
// ---------------------------------------------------------------------------

namespace detail {

struct Jet {
  double value = 0.0;
  std::vector<double> grad;
  DenseMatrix hess;
  bool with_hess = false;
};

inline std::vector<double> drop(std::span<const double> v, std::size_t i) {
  std::vector<double> r;
  r.reserve(v.size() - 1);
  for (std::size_t a = 0; a < v.size(); ++a)
    if (a != i) r.push_back(v[a]);
  return r;
}

inline std::vector<double> drop2(std::span<const double> v, std::size_t i, std::size_t j) {
  std::vector<double> r;
  r.reserve(v.size() - 2);
  for (std::size_t a = 0; a < v.size(); ++a)
    if (a != i && a != j) r.push_back(v[a]);
  return r;
}

/// sigma_j with d sigma_j / d lambda_i = sigma_{j-1}(lambda|i) and
/// d^2 sigma_j / d lambda_i d lambda_l = sigma_{j-2}(lambda|il), i != l.
inline Jet sigma_jet(std::span<const double> lambda, int j, bool with_hess) {
  const int n = static_cast<int>(lambda.size());
  Jet J;
  J.value = sigma_of(lambda, j);
  J.grad.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) J.grad[i] = sigma_of(drop(lambda, i), j - 1);
  J.with_hess = with_hess;
  if (with_hess) {
    J.hess = DenseMatrix(n);
    for (int i = 0; i < n; ++i)
      for (int l = i + 1; l < n; ++l) {
        const double v = sigma_of(drop2(lambda, i, l), j - 2);
        J.hess(i, l) = v;
        J.hess(l, i) = v;
      }
  }
  return J;
}

inline Jet jet_log(const Jet& a) {
  Jet r;
  r.value = std::log(a.value);
  r.grad.resize(a.grad.size());
  for (std::size_t i = 0; i < a.grad.size(); ++i) r.grad[i] = a.grad[i] / a.value;
  r.with_hess = a.with_hess;
  if (a.with_hess) {
    const int n = a.hess.n;
    r.hess = DenseMatrix(n);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l)
        r.hess(i, l) = a.hess(i, l) / a.value - a.grad[i] * a.grad[l] / (a.value * a.value);
  }
  return r;
}

inline Jet jet_pow(const Jet& a, double p) {
  Jet r;
  r.value = std::pow(a.value, p);
  const double d1 = p * std::pow(a.value, p - 1.0);
  r.grad.resize(a.grad.size());
  for (std::size_t i = 0; i < a.grad.size(); ++i) r.grad[i] = d1 * a.grad[i];
  r.with_hess = a.with_hess;
  if (a.with_hess) {
    const double d2 = p * (p - 1.0) * std::pow(a.value, p - 2.0);
    const int n = a.hess.n;
    r.hess = DenseMatrix(n);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) r.hess(i, l) = d1 * a.hess(i, l) + d2 * a.grad[i] * a.grad[l];
  }
  return r;
}

inline Jet jet_div(const Jet& a, const Jet& b) {
  Jet r;
  const double q = a.value / b.value;
  r.value = q;
  const std::size_t n = a.grad.size();
  r.grad.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.grad[i] = (a.grad[i] - q * b.grad[i]) / b.value;
  r.with_hess = a.with_hess;
  if (a.with_hess) {
    const int m = a.hess.n;
    r.hess = DenseMatrix(m);
    const double b2 = b.value * b.value;
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < m; ++l)
        r.hess(i, l) = a.hess(i, l) / b.value - (a.grad[i] * b.grad[l] + b.grad[i] * a.grad[l]) / b2 -
                       q * b.hess(i, l) / b.value + 2.0 * q * b.grad[i] * b.grad[l] / b2;
  }
  return r;
}

inline void jet_axpy(Jet& acc, double s, const Jet& x) {
  acc.value += s * x.value;
  for (std::size_t i = 0; i < acc.grad.size(); ++i) acc.grad[i] += s * x.grad[i];
  if (acc.with_hess)
    for (std::size_t i = 0; i < acc.hess.a.size(); ++i) acc.hess.a[i] += s * x.hess.a[i];
}

inline Jet family_jet(const FuncFamily& F, std::span<const double> lambda, bool with_hess) {
  const int n = static_cast<int>(lambda.size());
  switch (F.kind()) {
    case FamilyKind::log_det: {
      Jet J;
      J.grad.resize(static_cast<std::size_t>(n));
      J.with_hess = with_hess;
      if (with_hess) J.hess = DenseMatrix(n);
      for (int i = 0; i < n; ++i) {
        J.value += std::log(lambda[i]);
        J.grad[i] = 1.0 / lambda[i];
        if (with_hess) J.hess(i, i) = -1.0 / (lambda[i] * lambda[i]);
      }
      return J;
    }
    case FamilyKind::sigma_k_root:
      return jet_pow(sigma_jet(lambda, F.cone_index(), with_hess), 1.0 / F.cone_index());
    case FamilyKind::log_sigma_k: return jet_log(sigma_jet(lambda, F.cone_index(), with_hess));
    case FamilyKind::sigma_quotient: {
      const int k = F.cone_index();
      const int l = F.lower_index();
      const Jet q = jet_div(sigma_jet(lambda, k, with_hess), sigma_jet(lambda, l, with_hess));
      return k - l == 1 ? q : jet_pow(q, 1.0 / (k - l));
    }
    case FamilyKind::guan_mixed: {
      const int k = F.cone_index();
      Jet J = jet_div(sigma_jet(lambda, k + 1, with_hess), sigma_jet(lambda, k, with_hess));
      for (int j = 1; j <= k; ++j) {
        const double b = F.beta()[static_cast<std::size_t>(j - 1)];
        if (b != 0.0) jet_axpy(J, b, jet_log(sigma_jet(lambda, j, with_hess)));
      }
      return J;
    }
  }
  return {};
}

inline void require_admissible(const FuncFamily& F, std::span<const double> lambda, const char* who) {
  if (static_cast<int>(lambda.size()) != F.dimension())
    fail(ErrorKind::domain, std::string(who) + ": tuple length does not match family dimension");
  if (!in_cone(lambda, F.cone_index()))
    fail(ErrorKind::admissibility, std::string(who) + ": lambda outside Gamma_" + std::to_string(F.cone_index()));
}

}  // namespace detail

/// f(lambda); lambda must lie in the family's cone.
[[nodiscard]] inline double eval_f(const FuncFamily& F, std::span<const double> lambda) {
  detail::require_admissible(F, lambda, "eval_f");
  return detail::family_jet(F, lambda, false).value;
}
[[nodiscard]] inline double eval_f(const FuncFamily& F, const LambdaTuple& lambda) {
  return eval_f(F, lambda.span());
}

/// f extended by -inf outside the cone; convenient for bisection along rays.
[[nodiscard]] inline double eval_f_ext(const FuncFamily& F, std::span<const double> lambda) {
  if (!in_cone(lambda, F.cone_index())) return -std::numeric_limits<double>::infinity();
  return detail::family_jet(F, lambda, false).value;
}

[[nodiscard]] inline std::vector<double> grad_f(const FuncFamily& F, std::span<const double> lambda) {
  detail::require_admissible(F, lambda, "grad_f");
  return detail::family_jet(F, lambda, false).grad;
}
[[nodiscard]] inline LambdaTuple grad_f(const FuncFamily& F, const LambdaTuple& lambda) {
  return LambdaTuple(grad_f(F, lambda.span()));
}

/// Analytic n x n Hessian of f.
[[nodiscard]] inline DenseMatrix hessian_f(const FuncFamily& F, std::span<const double> lambda) {
  detail::require_admissible(F, lambda, "hessian_f");
  return detail::family_jet(F, lambda, true).hess;
}

// ---------------------------------------------------------------------------
// Sampling of the cone
// ---------------------------------------------------------------------------

/// Largest s with lambda - s*1 still in Gamma_k (lambda itself in Gamma_k).
[[nodiscard]] inline double shift_to_boundary(std::span<const double> lambda, int k) {
  std::vector<double> w(lambda.begin(), lambda.end());
  auto shifted_in = [&](double s) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = lambda[i] - s;
    return in_cone(w, k);
  };
  double lo = 0.0;
  double hi = *std::max_element(lambda.begin(), lambda.end());
  if (hi <= 0.0) return 0.0;
  while (shifted_in(hi)) hi *= 2.0;  // cannot happen for k >= 1, kept for safety of the bracket
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (shifted_in(mid) ? lo : hi) = mid;
  }
  return lo;
}

/// Seed-deterministic sampler of Gamma_k: exponential draws in the positive orthant,
/// then sheared toward the cone boundary along -1 by a uniform fraction of the admissible shift.
class ConeSampler {
 public:
  ConeSampler(int n, int k, std::uint64_t seed, double max_shear = 0.9)
      : n_(n), k_(k), max_shear_(max_shear), rng_(seed) {}

  [[nodiscard]] std::vector<double> next() {
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unif(0.0, max_shear_);
    std::vector<double> lam(static_cast<std::size_t>(n_));
    for (double& v : lam) v = expo(rng_) + 1e-3;
    const double smax = shift_to_boundary(lam, k_);
    const double s = unif(rng_) * smax;
    for (double& v : lam) v -= s;
    return lam;
  }

  std::mt19937_64& engine() noexcept { return rng_; }

 private:
  int n_;
  int k_;
  double max_shear_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Structure-condition verification
// ---------------------------------------------------------------------------

/// Largest eigenvalue of a real symmetric matrix by cyclic Jacobi.
[[nodiscard]] inline double max_symmetric_eigenvalue(DenseMatrix A) {
  const int n = A.n;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off <= 1e-30 * (1.0 + A.frobenius() * A.frobenius())) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (A(p, q) == 0.0) continue;
        const double zeta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int r = 0; r < n; ++r) {
          const double arp = A(r, p), arq = A(r, q);
          A(r, p) = c * arp - s * arq;
          A(r, q) = s * arp + c * arq;
        }
        for (int r = 0; r < n; ++r) {
          const double apr = A(p, r), aqr = A(q, r);
          A(p, r) = c * apr - s * aqr;
          A(q, r) = s * apr + c * aqr;
        }
        A(p, q) = A(q, p) = 0.0;
      }
  }
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) m = std::max(m, A(i, i));
  return m;
}

struct StructureReport {
  int samples = 0;
  double min_gradient = std::numeric_limits<double>::infinity();  // min_i f_i over all samples
  int nonpositive_gradients = 0;
  double worst_hessian_excess = -std::numeric_limits<double>::infinity();  // max eig / (1 + |H|)
  int hessian_violations = 0;  // max eig > 1e-7 (1 + |H|)
  double worst_chord_violation = 0.0;  // max of f(mu)-f(lambda) - sum f_i(lambda)(mu_i-lambda_i), clipped at 0
  int chord_violations = 0;
  double worst_gradient_mismatch = 0.0;  // analytic vs central differences, relative to |grad|_inf
  int gradient_checks = 0;

  [[nodiscard]] bool ok() const {
    return nonpositive_gradients == 0 && hessian_violations == 0 && chord_violations == 0 &&
           worst_gradient_mismatch <= 1e-6;
  }
};

/// Central-difference gradient of f at lambda, step h.
[[nodiscard]] inline std::vector<double> fd_gradient(const FuncFamily& F, std::span<const double> lambda, double h) {
  std::vector<double> g(lambda.size());
  std::vector<double> p(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    p[i] = lambda[i] + h;
    const double fp = eval_f(F, p);
    p[i] = lambda[i] - h;
    const double fm = eval_f(F, p);
    p[i] = lambda[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Samples Gamma and checks ellipticity, Hessian negative semidefiniteness, the pairwise
/// concavity chord inequality and the analytic-vs-finite-difference gradient.
[[nodiscard]] inline StructureReport check_structure(const FuncFamily& F, int samples, std::uint64_t seed) {
  if (samples < 1) fail(ErrorKind::precondition, "check_structure needs samples >= 1");
  const int n = F.dimension();
  ConeSampler sampler(n, F.cone_index(), seed);
  std::vector<std::vector<double>> pts;
  std::vector<double> fvals;
  std::vector<std::vector<double>> grads;
  StructureReport rep;
  rep.samples = samples;
  constexpr double fd_step = 1e-5;
  for (int s = 0; s < samples; ++s) {
    auto lam = sampler.next();
    const auto jet = detail::family_jet(F, lam, true);
    for (double g : jet.grad) {
      rep.min_gradient = std::min(rep.min_gradient, g);
      if (!(g > 0.0)) ++rep.nonpositive_gradients;
    }
    const double hn = jet.hess.frobenius();
    const double excess = max_symmetric_eigenvalue(jet.hess) / (1.0 + hn);
    rep.worst_hessian_excess = std::max(rep.worst_hessian_excess, excess);
    if (excess > 1e-7) ++rep.hessian_violations;

    // Finite differences only where the whole stencil stays well inside the cone.
    bool well_conditioned = true;
    std::vector<double> probe(lam);
    for (int i = 0; i < n && well_conditioned; ++i) {
      for (double sgn : {-1.0, 1.0}) {
        probe[i] = lam[i] + sgn * 1e-3;
        if (!in_cone(probe, F.cone_index())) well_conditioned = false;
      }
      probe[i] = lam[i];
    }
    if (well_conditioned) {
      const auto fd = fd_gradient(F, lam, fd_step);
      double gmax = 0.0, diff = 0.0;
      for (int i = 0; i < n; ++i) {
        gmax = std::max(gmax, std::abs(jet.grad[i]));
        diff = std::max(diff, std::abs(fd[i] - jet.grad[i]));
      }
      rep.worst_gradient_mismatch = std::max(rep.worst_gradient_mismatch, diff / gmax);
      ++rep.gradient_checks;
    }
    pts.push_back(std::move(lam));
    fvals.push_back(jet.value);
    grads.push_back(jet.grad);
  }
  for (int a = 0; a < samples; ++a)
    for (int b = 0; b < samples; ++b) {
      if (a == b) continue;
      double lin = 0.0;
      for (int i = 0; i < n; ++i) lin += grads[a][i] * (pts[b][i] - pts[a][i]);
      const double gap = (fvals[b] - fvals[a]) - lin;
      const double tol = 1e-9 * (1.0 + std::abs(fvals[a]) + std::abs(fvals[b]) + std::abs(lin));
      if (gap > tol) {
        ++rep.chord_violations;
        rep.worst_chord_violation = std::max(rep.worst_chord_violation, gap);
      }
    }
  return rep;
}

// ---------------------------------------------------------------------------
// The sub-cone on which f stays bounded below along rays
// ---------------------------------------------------------------------------

struct ConeVerdict {
  bool in_gamma = false;
  bool in_gamma_G = false;
  double margin = 0.0;         // min over the defining sigma_j (j <= k) of lambda
  bool indeterminate = false;  // analytic and numeric criteria disagreed
};

/// Values f(t lambda) on the ladder t = 1, 2, 4, ..., t_max.
[[nodiscard]] inline std::vector<std::pair<double, double>> ray_ladder(const FuncFamily& F,
                                                                       std::span<const double> lambda,
                                                                       double t_max) {
  std::vector<std::pair<double, double>> out;
  std::vector<double> p(lambda.size());
  for (double t = 1.0; t <= t_max * (1.0 + 1e-12); t *= 2.0) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = t * lambda[i];
    out.emplace_back(t, eval_f_ext(F, p));
  }
  return out;
}

/// Criterion (1), numerically: the tail increments of f along the t-ladder stay above -tol.
[[nodiscard]] inline bool ray_bounded_below_numeric(const FuncFamily& F, std::span<const double> lambda,
                                                    double t_max) {
  const auto ladder = ray_ladder(F, lambda, t_max);
  const double tol = 1e-9 * (1.0 + std::abs(ladder.front().second));
  const std::size_t tail = std::min<std::size_t>(4, ladder.size() - 1);
  for (std::size_t m = ladder.size() - tail; m < ladder.size(); ++m)
    if (ladder[m].second - ladder[m - 1].second < -tol) return false;
  return std::isfinite(ladder.back().second);
}

/// Criterion (2): limsup f(t mu)/t >= 0, approximated by the ratio at t_max.
[[nodiscard]] inline double ray_slope_at(const FuncFamily& F, std::span<const double> mu, double t_max) {
  const auto ladder = ray_ladder(F, mu, t_max);
  return ladder.back().second / ladder.back().first;
}

/// Criterion (3): min over sampled lambda in Gamma of sum f_i(lambda) mu_i. The samples include
/// random cone points and the scaled copies t*mu on the ladder.
[[nodiscard]] inline double min_gradient_pairing(const FuncFamily& F, std::span<const double> mu, int samples,
                                                 std::uint64_t seed, double t_max = 1048576.0) {
  ConeSampler sampler(F.dimension(), F.cone_index(), seed);
  double m = std::numeric_limits<double>::infinity();
  auto pair_with = [&](std::span<const double> lam) {
    const auto g = grad_f(F, lam);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * mu[i];
    m = std::min(m, s);
  };
  for (int s = 0; s < samples; ++s) pair_with(sampler.next());
  std::vector<double> p(mu.size());
  for (double t = 1.0; t <= t_max; t *= 2.0) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = t * mu[i];
    pair_with(p);
  }
  return m;
}

/// Membership of lambda in the sub-cone where lim f(t lambda) > -inf.
///
/// Decided analytically: every family except guan_mixed satisfies lim f(t lambda) = +inf on its
/// cone; guan_mixed is inside iff sigma_{k+1}(lambda) >= 0. The t-ladder test is evaluated as a
/// cross-check and disagreement sets `indeterminate`.
[[nodiscard]] inline ConeVerdict in_gamma_G(const FuncFamily& F, std::span<const double> lambda,
                                            double t_max = 1048576.0) {
  if (!(t_max > 1.0)) fail(ErrorKind::precondition, "in_gamma_G needs t_max > 1");
  ConeVerdict v;
  const auto e = elementary_symmetric_all(lambda);
  v.margin = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= F.cone_index(); ++j) v.margin = std::min(v.margin, e[static_cast<std::size_t>(j)]);
  v.in_gamma = in_cone(lambda, F.cone_index());
  if (!v.in_gamma) return v;
  if (F.kind() == FamilyKind::guan_mixed)
    v.in_gamma_G = e[static_cast<std::size_t>(F.cone_index() + 1)] >= 0.0;
  else
    v.in_gamma_G = true;
  v.indeterminate = ray_bounded_below_numeric(F, lambda, t_max) != v.in_gamma_G;
  return v;
}
[[nodiscard]] inline ConeVerdict in_gamma_G(const FuncFamily& F, const LambdaTuple& lambda,
                                            double t_max = 1048576.0) {
  return in_gamma_G(F, lambda.span(), t_max);
}

// ---------------------------------------------------------------------------
// Coercivity floor |lambda| sum f_i(lambda) on a level band
// ---------------------------------------------------------------------------

/// Empirical minimum of |lambda| * sum_i f_i(lambda) over sampled lambda with
/// band_lo <= f(lambda) <= band_hi and |lambda| >= r1. Directions come from the cone sampler,
/// radii from a geometric ladder starting exactly at r1.
[[nodiscard]] inline double coercivity_floor(const FuncFamily& F, double band_lo, double band_hi, double r1,
                                             int samples, std::uint64_t seed = 0) {
  if (!(band_lo <= band_hi)) fail(ErrorKind::precondition, "coercivity_floor: empty band bounds");
  if (!(r1 > 0.0)) fail(ErrorKind::precondition, "coercivity_floor: r1 must be positive");
  ConeSampler sampler(F.dimension(), F.cone_index(), seed, 0.999);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> p(static_cast<std::size_t>(F.dimension()));
  for (int s = 0; s < samples; ++s) {
    auto dir = sampler.next();
    double nrm = 0.0;
    for (double v : dir) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (double& v : dir) v /= nrm;
    double r = r1;
    for (int m = 0; m < 800; ++m, r *= 1.02) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = r * dir[i];
      if (!in_cone(p, F.cone_index())) continue;
      const auto jet = detail::family_jet(F, p, false);
      if (jet.value < band_lo || jet.value > band_hi) continue;
      double sum = 0.0;
      for (double g : jet.grad) sum += g;
      best = std::min(best, r * sum);
    }
  }
  if (!std::isfinite(best)) fail(ErrorKind::range, "coercivity_floor: no sample found in the level band");
  return best;
}

}  // namespace hcl
