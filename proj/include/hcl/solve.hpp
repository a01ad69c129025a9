#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hcl/error.hpp"
#include "hcl/grid.hpp"
#include "hcl/parallel.hpp"
#include "hcl/spectra.hpp"
#include "hcl/symfunc.hpp"

namespace hcl {

enum class SolveMode { closed, dirichlet };

inline const char* to_string(SolveMode m) { return m == SolveMode::closed ? "closed" : "dirichlet"; }

/// Problem data on a grid: f(lambda(chi + i ddbar u)) = psi (+ c in closed mode), u = phi on the boundary.
/// `phi` is a full field; its boundary values are the data and its interior values the extension
/// used by the subsolution.
struct ProblemSpec {
  GridDomain domain;
  FuncFamily family;
  HermitianField chi;
  ScalarField psi;
  ScalarField phi;
  SolveMode mode = SolveMode::dirichlet;
  bool degenerate = false;

  void validate() const {
    if (family.dimension() != domain.n()) fail(ErrorKind::domain, "ProblemSpec: family dimension differs from grid n");
    if (!chi.domain().same_shape(domain) || !psi.domain().same_shape(domain) || !phi.domain().same_shape(domain))
      fail(ErrorKind::domain, "ProblemSpec: field grids differ from the domain");
    if (!psi.all_finite() || !phi.all_finite()) fail(ErrorKind::domain, "ProblemSpec: psi and phi must be finite");
    if (mode == SolveMode::closed && domain.kind() != DomainKind::torus)
      fail(ErrorKind::domain, "ProblemSpec: closed mode needs a fully periodic domain");
    if (mode == SolveMode::dirichlet && !domain.has_boundary())
      fail(ErrorKind::domain, "ProblemSpec: Dirichlet mode needs boundary nodes");
    const double s0 = family.sup_boundary();
    double inf_psi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < domain.size(); ++i)
      if (domain.role(i) != NodeRole::exterior) inf_psi = std::min(inf_psi, psi[i]);
    if (!degenerate && !(inf_psi > s0))
      fail(ErrorKind::precondition, "ProblemSpec: inf psi must exceed the boundary supremum of f");
  }
};

enum class Continuation { off, on, fallback };

struct SolveOptions {
  double tol = 1e-9;  // residual <= tol * (1 + |psi|_inf)
  int max_iterations = 60;
  double min_step = 1e-12;
  double linear_tol = 1e-11;
  Continuation continuation = Continuation::fallback;
  int continuation_steps = 8;
  int max_bisections = 8;
  double strictness = 1e-3;
  std::optional<ScalarField> initial;
};

struct EstimateReport {
  double sup_dbar = 0.0;
  double grad_sq = 0.0;
  double ratio2nd = 0.0;
  bool sandwich_ok = true;
  bool normal_order_ok = true;
  double bdry_ratio = 0.0;
  double sandwich_violation = 0.0;
  double normal_violation = 0.0;

  [[nodiscard]] bool finite() const {
    return std::isfinite(sup_dbar) && std::isfinite(grad_sq) && std::isfinite(ratio2nd) && std::isfinite(bdry_ratio);
  }
};

struct SolveResult {
  ScalarField u;
  std::optional<double> c;
  int iterations = 0;
  std::vector<double> residual_history;
  bool admissible = false;
  EstimateReport estimates;
  double subsolution_t = 0.0;
  int continuation_stages = 0;

  [[nodiscard]] double residual() const { return residual_history.empty() ? 0.0 : residual_history.back(); }
};

// ---------------------------------------------------------------------------
// Discrete operator
// ---------------------------------------------------------------------------

/// Residual and Jacobian of u -> f(lambda(chi + Hess_h u)) on the active nodes
/// (interior nodes in Dirichlet mode, every node in closed mode).
class DiscreteOperator {
 public:
  explicit DiscreteOperator(const ProblemSpec& spec) : spec_(&spec) {
    const auto& d = spec.domain;
    col_.assign(d.size(), -1);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const bool on = spec.mode == SolveMode::closed ? d.role(i) != NodeRole::exterior : d.role(i) == NodeRole::interior;
      if (on) {
        col_[i] = static_cast<long>(active_.size());
        active_.push_back(i);
      }
    }
    if (active_.empty()) fail(ErrorKind::resolution, "DiscreteOperator: no active nodes");
  }

  [[nodiscard]] const std::vector<std::size_t>& active() const noexcept { return active_; }
  [[nodiscard]] long column(std::size_t node) const { return col_[node]; }
  [[nodiscard]] const ProblemSpec& spec() const noexcept { return *spec_; }

  [[nodiscard]] HermitianMatrix g_at(const ScalarField& u, std::size_t node) const {
    return spec_->chi.at(node) + complex_hessian_at(u, node);
  }

  /// Index of the first active node where lambda(g[u]) leaves the cone, or -1.
  [[nodiscard]] long first_inadmissible(const ScalarField& u) const {
    std::vector<char> bad(active_.size(), 0);
    const int k = spec_->family.cone_index();
    parallel_for(active_.size(), [&](std::size_t r) { bad[r] = in_cone(eigenvalues(g_at(u, active_[r])), k) ? 0 : 1; });
    for (std::size_t r = 0; r < bad.size(); ++r)
      if (bad[r]) return static_cast<long>(active_[r]);
    return -1;
  }

  /// f(lambda(g[u])) per active node; -inf where inadmissible.
  [[nodiscard]] std::vector<double> values(const ScalarField& u) const {
    std::vector<double> out(active_.size());
    parallel_for(active_.size(), [&](std::size_t r) { out[r] = eval_f_ext(spec_->family, eigenvalues(g_at(u, active_[r]))); });
    return out;
  }

  /// f - psi - c per active node (psi given per active node).
  [[nodiscard]] std::vector<double> residual(const ScalarField& u, const std::vector<double>& psi, double c = 0.0) const {
    auto r = values(u);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= psi[j] + c;
    return r;
  }

  /// Real 2n x 2n symmetric coefficients A with Re tr(F^{..} Hess v) = sum_ab A_ab D_ab v.
  [[nodiscard]] std::vector<double> coefficients(const HermitianMatrix& G) const {
    const int n = G.n();
    const int A = 2 * n;
    const HermitianMatrix D = matrix_derivative(spec_->family, G);
    std::vector<double> C(static_cast<std::size_t>(A) * A, 0.0);
    auto c = [&](int a, int b) -> double& { return C[static_cast<std::size_t>(a) * A + b]; };
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const cplx dkj = D(k, j);
        c(2 * j, 2 * k) += 0.25 * dkj.real();
        c(2 * j + 1, 2 * k + 1) += 0.25 * dkj.real();
        c(2 * j, 2 * k + 1) -= 0.25 * dkj.imag();
        c(2 * j + 1, 2 * k) += 0.25 * dkj.imag();
      }
    for (int a = 0; a < A; ++a)
      for (int b = a + 1; b < A; ++b) c(a, b) = c(b, a) = 0.5 * (c(a, b) + c(b, a));
    return C;
  }

  /// Linearization at u as (row, node, value) entries over active rows; columns are node indices.
  /// Entries at non-active nodes are kept so callers can decide how to treat them.
  [[nodiscard]] std::vector<std::vector<std::pair<std::size_t, double>>> stencil_rows(const ScalarField& u) const {
    const auto& d = spec_->domain;
    const int A = d.axes();
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(active_.size());
    parallel_for(active_.size(), [&](std::size_t r) {
      const std::size_t i = active_[r];
      const auto C = coefficients(g_at(u, i));
      auto& row = rows[r];
      auto at = [&](long k) {
        if (k < 0) fail(ErrorKind::stencil, "linearization: stencil leaves the grid at an active node");
        return static_cast<std::size_t>(k);
      };
      double centre = 0.0;
      for (int a = 0; a < A; ++a) {
        const double w = C[static_cast<std::size_t>(a) * A + a] / (d.spacing(a) * d.spacing(a));
        row.emplace_back(at(d.neighbor(i, a, 1)), w);
        row.emplace_back(at(d.neighbor(i, a, -1)), w);
        centre -= 2.0 * w;
        for (int b = a + 1; b < A; ++b) {
          const double m = 2.0 * C[static_cast<std::size_t>(a) * A + b] / (4.0 * d.spacing(a) * d.spacing(b));
          if (m == 0.0) continue;
          for (int da : {1, -1})
            for (int db : {1, -1}) row.emplace_back(at(d.neighbor(at(d.neighbor(i, a, da)), b, db)), da * db * m);
        }
      }
      row.emplace_back(i, centre);
    });
    return rows;
  }

  /// Jacobian applied to a full-field direction v (boundary entries of v included as given).
  [[nodiscard]] std::vector<double> apply_jacobian(const ScalarField& u, const ScalarField& v) const {
    const auto rows = stencil_rows(u);
    std::vector<double> out(rows.size(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (const auto& [k, w] : rows[r]) out[r] += w * v[k];
    return out;
  }

 private:
  const ProblemSpec* spec_;
  std::vector<std::size_t> active_;
  std::vector<long> col_;
};

/// max_r |J v - (R(u + tau v) - R(u - tau v)) / (2 tau)|_r / (1 + |J v|_inf).
[[nodiscard]] inline double linearization_defect(const ProblemSpec& spec, const ScalarField& u, const ScalarField& v,
                                                 double tau = 1e-5) {
  const DiscreteOperator op(spec);
  const auto Jv = op.apply_jacobian(u, v);
  ScalarField up = u, um = u;
  for (std::size_t i = 0; i < u.size(); ++i) {
    up[i] += tau * v[i];
    um[i] -= tau * v[i];
  }
  const auto fp = op.values(up), fm = op.values(um);
  double err = 0.0, scale = 0.0;
  for (std::size_t r = 0; r < Jv.size(); ++r) {
    err = std::max(err, std::abs(Jv[r] - (fp[r] - fm[r]) / (2.0 * tau)));
    scale = std::max(scale, std::abs(Jv[r]));
  }
  return err / (1.0 + scale);
}

namespace detail {

inline double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline std::string describe_node(const GridDomain& d, std::size_t i) {
  std::ostringstream os;
  os << "node " << i << " (";
  for (int a = 0; a < d.axes(); ++a) os << (a ? "," : "") << d.coord(i, a);
  os << ")";
  return os.str();
}

/// Solves A x = b: BiCGSTAB with a diagonal preconditioner, then with an incomplete LU, then SparseLU.
inline Eigen::VectorXd sparse_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b, double tol,
                                    ErrorKind singular_kind) {
  const double bn = b.norm();
  if (bn == 0.0) return Eigen::VectorXd::Zero(b.size());
  auto good = [&](const Eigen::VectorXd& x) { return x.allFinite() && (A * x - b).norm() <= 10.0 * tol * bn; };
  {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> it;
    it.setTolerance(tol);
    it.setMaxIterations(std::max<Eigen::Index>(1000, 4 * static_cast<Eigen::Index>(std::sqrt(static_cast<double>(A.rows())))));
    it.compute(A);
    Eigen::VectorXd x = it.solve(b);
    if (it.info() == Eigen::Success && good(x)) return x;
  }
  {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it;
    it.preconditioner().setDroptol(1e-4);
    it.preconditioner().setFillfactor(4);
    it.setTolerance(tol);
    it.compute(A);
    if (it.info() == Eigen::Success) {
      Eigen::VectorXd x = it.solve(b);
      if (it.info() == Eigen::Success && good(x)) return x;
    }
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) fail(singular_kind, "linear solve: matrix is singular");
  Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) fail(singular_kind, "linear solve: direct solve failed");
  return x;
}

struct NewtonOutcome {
  ScalarField u;
  double c = 0.0;
  int iterations = 0;
  std::vector<double> history;
};

/// Damped Newton for R(u, c) = f(g[u]) - psi - c on the active nodes.
/// Dirichlet: unknowns are the active node values. Closed: node 0 is pinned and its column carries dc.
inline NewtonOutcome newton(const DiscreteOperator& op, ScalarField u, double c, const std::vector<double>& psi,
                            const SolveOptions& opt) {
  const bool closed = op.spec().mode == SolveMode::closed;
  const auto& act = op.active();
  const std::size_t m = act.size();
  const double target = opt.tol * (1.0 + sup_abs(psi));
  if (op.first_inadmissible(u) >= 0)
    fail(ErrorKind::admissibility, "newton: starting iterate is not admissible at " + describe_node(u.domain(), static_cast<std::size_t>(op.first_inadmissible(u))));

  NewtonOutcome out;
  auto r = op.residual(u, psi, c);
  double rn = sup_abs(r);
  out.history.push_back(rn);
  while (rn > target) {
    if (out.iterations >= opt.max_iterations)
      fail(ErrorKind::stall, "newton: iteration limit reached with residual " + std::to_string(rn));
    const auto rows = op.stencil_rows(u);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m * (rows.empty() ? 1 : rows[0].size() + 1));
    for (std::size_t rr = 0; rr < m; ++rr) {
      for (const auto& [k, w] : rows[rr]) {
        long col = op.column(k);
        if (col < 0) continue;  // boundary value is fixed
        if (closed && col == 0) continue;  // pinned node
        trip.emplace_back(static_cast<int>(rr), static_cast<int>(col), w);
      }
      if (closed) trip.emplace_back(static_cast<int>(rr), 0, -1.0);
    }
    Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    J.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) rhs[static_cast<Eigen::Index>(j)] = -r[j];
    const Eigen::VectorXd x = sparse_solve(J, rhs, opt.linear_tol, closed ? ErrorKind::gauge : ErrorKind::numeric);

    std::vector<double> dir(m, 0.0);
    double dc = 0.0;
    if (closed) {
      for (std::size_t j = 1; j < m; ++j) dir[j] = x[static_cast<Eigen::Index>(j)];
      dc = x[0];
      // zero-mean gauge on the update; constants lie in the kernel of the linearization
      const double mean = std::accumulate(dir.begin(), dir.end(), 0.0) / static_cast<double>(m);
      for (double& v : dir) v -= mean;
    } else {
      for (std::size_t j = 0; j < m; ++j) dir[j] = x[static_cast<Eigen::Index>(j)];
    }

    double step = 1.0;
    bool seen_admissible = false;
    bool accepted = false;
    ScalarField trial = u;
    while (step >= opt.min_step) {
      for (std::size_t j = 0; j < m; ++j) trial[act[j]] = u[act[j]] + step * dir[j];
      if (op.first_inadmissible(trial) < 0) {
        seen_admissible = true;
        auto rt = op.residual(trial, psi, c + step * dc);
        const double tn = sup_abs(rt);
        if (tn < rn) {
          u = trial;
          c += step * dc;
          r = std::move(rt);
          rn = tn;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      std::ostringstream os;
      os << "newton: damping underflow at iteration " << out.iterations << ", residual " << rn;
      fail(seen_admissible ? ErrorKind::stall : ErrorKind::cone_exit,
           seen_admissible ? os.str() : "newton: no admissible step along the Newton direction (" + os.str() + ")");
    }
    ++out.iterations;
    out.history.push_back(rn);
  }
  out.u = std::move(u);
  out.c = c;
  return out;
}

inline std::vector<double> psi_active(const DiscreteOperator& op, const ScalarField& psi) {
  std::vector<double> p(op.active().size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = psi[op.active()[j]];
  return p;
}

inline double mean_gap(const std::vector<double>& f, const std::vector<double>& psi) {
  double s = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) s += f[j] - psi[j];
  return s / static_cast<double>(f.size());
}

/// Newton with the continuation ladder psi_s = (1 - s) f(g[u0]) + s psi, bisected on failure.
inline NewtonOutcome solve_with_policy(const DiscreteOperator& op, const ScalarField& u0, const std::vector<double>& psi,
                                       const SolveOptions& opt, int& stages) {
  const bool closed = op.spec().mode == SolveMode::closed;
  stages = 0;
  auto initial_c = [&](const ScalarField& u, const std::vector<double>& p) { return closed ? mean_gap(op.values(u), p) : 0.0; };
  if (opt.continuation != Continuation::on) {
    try {
      return newton(op, u0, initial_c(u0, psi), psi, opt);
    } catch (const Error& e) {
      if (opt.continuation == Continuation::off || (e.kind() != ErrorKind::stall && e.kind() != ErrorKind::cone_exit)) throw;
    }
  }
  const auto psi0 = op.values(u0);
  double s = 0.0;
  double ds = 1.0 / std::max(1, opt.continuation_steps);
  int bisections = 0;
  ScalarField u = u0;
  int iters = 0;
  NewtonOutcome last;
  while (s < 1.0) {
    const double sn = std::min(1.0, s + ds);
    std::vector<double> ps(psi.size());
    for (std::size_t j = 0; j < ps.size(); ++j) ps[j] = (1.0 - sn) * psi0[j] + sn * psi[j];
    try {
      last = newton(op, u, initial_c(u, ps), ps, opt);
    } catch (const Error& e) {
      if ((e.kind() != ErrorKind::stall && e.kind() != ErrorKind::cone_exit) || ++bisections > opt.max_bisections) throw;
      ds *= 0.5;
      continue;
    }
    iters += last.iterations;
    u = last.u;
    s = sn;
    ++stages;
  }
  last.iterations = iters;
  return last;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear solves
// ---------------------------------------------------------------------------

/// Solves chern_laplacian(h) = rhs at interior nodes with h = bc at boundary nodes, by CG on the
/// symmetric positive-definite system -Delta_h. Exterior nodes are copied from bc.
[[nodiscard]] inline ScalarField poisson_dirichlet(const GridDomain& d, const ScalarField& rhs, const ScalarField& bc) {
  if (!d.has_boundary()) fail(ErrorKind::precondition, "poisson_dirichlet: domain has no boundary nodes");
  if (!rhs.domain().same_shape(d) || !bc.domain().same_shape(d)) fail(ErrorKind::domain, "poisson_dirichlet: grid mismatch");
  const int A = d.axes();
  std::vector<std::size_t> nodes;
  std::vector<long> col(d.size(), -1);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.role(i) == NodeRole::interior) {
      col[i] = static_cast<long>(nodes.size());
      nodes.push_back(i);
    }
  ScalarField h = bc;
  if (nodes.empty()) return h;
  const std::size_t m = nodes.size();
  std::vector<double> w(static_cast<std::size_t>(A));
  double diag = 0.0;
  for (int a = 0; a < A; ++a) {
    w[a] = 0.25 / (d.spacing(a) * d.spacing(a));
    diag += 2.0 * w[a];
  }
  // neighbour table: unknown index, or -(1 + node) for a fixed boundary node
  std::vector<long> nb(m * 2 * A);
  std::vector<double> b(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = nodes[r];
    b[r] = -rhs[i];
    for (int a = 0; a < A; ++a)
      for (int s = 0; s < 2; ++s) {
        const long k = d.neighbor(i, a, s ? -1 : 1);
        if (k < 0 || d.role(static_cast<std::size_t>(k)) == NodeRole::exterior)
          fail(ErrorKind::stencil, "poisson_dirichlet: interior node without a full stencil");
        const long c = col[static_cast<std::size_t>(k)];
        nb[r * 2 * A + 2 * a + s] = c >= 0 ? c : -(1 + k);
        if (c < 0) b[r] += w[a] * bc[static_cast<std::size_t>(k)];
      }
  }
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    parallel_for(m, [&](std::size_t r) {
      double s = diag * x[r];
      for (int a = 0; a < A; ++a)
        for (int t = 0; t < 2; ++t) {
          const long c = nb[r * 2 * A + 2 * a + t];
          if (c >= 0) s -= w[a] * x[static_cast<std::size_t>(c)];
        }
      y[r] = s;
    });
  };
  double rhs_norm = 0.0;
  for (std::size_t r = 0; r < m; ++r) rhs_norm = std::max(rhs_norm, std::abs(rhs[nodes[r]]));
  const double target = 1e-10 * (1.0 + rhs_norm);

  std::vector<double> x(m, 0.0), res = b, p = res, q(m);
  double rr = 0.0;
  for (double v : res) rr += v * v;
  const std::size_t max_it = 20 * m + 1000;
  bool done = detail::sup_abs(res) <= target;
  for (std::size_t it = 0; !done && it < max_it; ++it) {
    apply(p, q);
    double pq = 0.0;
    for (std::size_t r = 0; r < m; ++r) pq += p[r] * q[r];
    const double alpha = rr / pq;
    double rr_new = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      x[r] += alpha * p[r];
      res[r] -= alpha * q[r];
      rr_new += res[r] * res[r];
    }
    if ((it + 1) % 50 == 0) {  // refresh against drift of the recursive residual
      apply(x, q);
      for (std::size_t r = 0; r < m; ++r) res[r] = b[r] - q[r];
      rr_new = 0.0;
      for (double v : res) rr_new += v * v;
    }
    if (detail::sup_abs(res) <= target) {
      apply(x, q);
      double true_res = 0.0;
      for (std::size_t r = 0; r < m; ++r) true_res = std::max(true_res, std::abs(b[r] - q[r]));
      if (true_res <= target) done = true;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t r = 0; r < m; ++r) p[r] = res[r] + beta * p[r];
  }
  if (!done) fail(ErrorKind::numeric, "poisson_dirichlet: CG did not converge");
  for (std::size_t r = 0; r < m; ++r) h[nodes[r]] = x[r];
  return h;
}

/// h on the S factor with Delta_S h = 1 and h = 0 on the boundary of S, pulled back to the product.
[[nodiscard]] inline ScalarField s_potential(const GridDomain& product) {
  const GridDomain s = product.s_factor();
  const ScalarField hs = poisson_dirichlet(s, ScalarField(s, 1.0), ScalarField(s, 0.0));
  return pullback_from_s(hs, product);
}

struct Subsolution {
  ScalarField u;
  double t = 0.0;
  ScalarField h;  // pulled-back potential
};

/// u_ = phi + t h for the smallest ladder t in {0, 2^-4, ..., 2^30} with lambda(g[u_]) in the cone and
/// f >= psi + delta at every interior node.
[[nodiscard]] inline Subsolution build_subsolution(const ProblemSpec& spec, double delta) {
  spec.validate();
  if (spec.mode != SolveMode::dirichlet || spec.domain.kind() != DomainKind::product_xs)
    fail(ErrorKind::precondition, "build_subsolution: needs Dirichlet mode on a product domain");
  const auto& d = spec.domain;
  const ScalarField h = s_potential(d);
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.role(i) == NodeRole::interior) nodes.push_back(i);
  std::vector<HermitianMatrix> base(nodes.size()), dir(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t r) {
    base[r] = spec.chi.at(nodes[r]) + complex_hessian_at(spec.phi, nodes[r]);
    dir[r] = complex_hessian_at(h, nodes[r]);
  });
  std::vector<double> ladder{0.0};
  for (int e = -4; e <= 30; ++e) ladder.push_back(std::ldexp(1.0, e));
  const int k = spec.family.cone_index();
  long failing = -1;
  for (double t : ladder) {
    std::vector<char> bad(nodes.size(), 0);
    parallel_for(nodes.size(), [&](std::size_t r) {
      const auto lam = eigenvalues(base[r] + t * dir[r]);
      bad[r] = !(in_cone(lam, k) && eval_f(spec.family, lam) >= spec.psi[nodes[r]] + delta);
    });
    const auto it = std::find(bad.begin(), bad.end(), 1);
    if (it == bad.end()) {
      Subsolution s{spec.phi, t, h};
      for (std::size_t i = 0; i < d.size(); ++i)
        if (d.role(i) == NodeRole::interior) s.u[i] += t * h[i];
      return s;
    }
    failing = static_cast<long>(nodes[static_cast<std::size_t>(it - bad.begin())]);
  }
  fail(ErrorKind::construction, "build_subsolution: t-ladder exhausted; conditions fail at " +
                                    detail::describe_node(d, static_cast<std::size_t>(failing)));
}

/// Delta u = -tr chi in the interior, u = phi on the boundary.
[[nodiscard]] inline ScalarField build_supersolution(const ProblemSpec& spec) {
  if (spec.mode != SolveMode::dirichlet) fail(ErrorKind::precondition, "build_supersolution: needs Dirichlet mode");
  ScalarField rhs(spec.domain);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -spec.chi.at(i).trace();
  return poisson_dirichlet(spec.domain, rhs, spec.phi);
}

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

/// Sup of the complex Hessian, gradient, sandwich and normal ordering, boundary Hessian ratio.
/// Masked domains use interior nodes only and report bdry_ratio = 0; so does closed mode.
[[nodiscard]] inline EstimateReport verify_estimates(const SolveResult& result, const ProblemSpec& spec,
                                                     const ScalarField* lower, const ScalarField* upper) {
  const auto& d = spec.domain;
  const auto& u = result.u;
  const bool masked = d.masked();
  EstimateReport rep;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const NodeRole role = d.role(i);
    if (role == NodeRole::exterior || (masked && role != NodeRole::interior)) continue;
    for (double l : eigenvalues(complex_hessian_at(u, i))) rep.sup_dbar = std::max(rep.sup_dbar, std::abs(l));
    double g = 0.0;
    for (int a = 0; a < d.axes(); ++a) {
      const double v = first_difference(u, i, a);
      g += v * v;
    }
    rep.grad_sq = std::max(rep.grad_sq, g);
  }
  rep.ratio2nd = rep.sup_dbar / (1.0 + rep.grad_sq);
  if (spec.mode == SolveMode::closed) return rep;

  constexpr double slack = 1e-8;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.role(i) == NodeRole::exterior) continue;
    if (lower) rep.sandwich_violation = std::max(rep.sandwich_violation, (*lower)[i] - u[i]);
    if (upper) rep.sandwich_violation = std::max(rep.sandwich_violation, u[i] - (*upper)[i]);
  }
  rep.sandwich_ok = rep.sandwich_violation <= slack;
  if (masked) return rep;

  const int n = d.n();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.role(i) != NodeRole::boundary || d.is_corner(i)) continue;
    const double du = inner_normal_derivative(u, i);
    if (lower) rep.normal_violation = std::max(rep.normal_violation, inner_normal_derivative(*lower, i) - du);
    if (upper) rep.normal_violation = std::max(rep.normal_violation, du - inner_normal_derivative(*upper, i));
    const HermitianMatrix g = spec.chi.at(i) + complex_hessian_at(u, i);
    double mixed = 0.0;
    for (int a = 0; a < n - 1; ++a) mixed += std::norm(g(a, n - 1));
    rep.bdry_ratio = std::max(rep.bdry_ratio, g(n - 1, n - 1).real() / (1.0 + mixed));
  }
  rep.normal_order_ok = rep.normal_violation <= slack;
  return rep;
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

/// Damped Newton from a strict subsolution (built, or options.initial) for the Dirichlet problem.
[[nodiscard]] inline SolveResult solve_dirichlet(const ProblemSpec& spec, const SolveOptions& opt = {}) {
  spec.validate();
  if (spec.mode != SolveMode::dirichlet) fail(ErrorKind::precondition, "solve_dirichlet: needs Dirichlet mode");
  const auto& d = spec.domain;
  SolveResult res;
  ScalarField lower(d);
  if (opt.initial) {
    if (!opt.initial->domain().same_shape(d)) fail(ErrorKind::domain, "solve_dirichlet: initial iterate grid mismatch");
    lower = *opt.initial;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d.role(i) != NodeRole::interior) lower[i] = spec.phi[i];
  } else {
    auto sub = build_subsolution(spec, opt.strictness);
    lower = std::move(sub.u);
    res.subsolution_t = sub.t;
  }
  const DiscreteOperator op(spec);
  const auto psi = detail::psi_active(op, spec.psi);
  auto out = detail::solve_with_policy(op, lower, psi, opt, res.continuation_stages);
  res.u = std::move(out.u);
  res.iterations = out.iterations;
  res.residual_history = std::move(out.history);
  res.admissible = op.first_inadmissible(res.u) < 0;
  const ScalarField upper = build_supersolution(spec);
  res.estimates = verify_estimates(res, spec, &lower, &upper);
  return res;
}

/// Newton for (u, c) with f(lambda(chi + Hess u)) = psi + c on a torus, normalised to sup u = 0.
[[nodiscard]] inline SolveResult solve_closed(const ProblemSpec& spec, const SolveOptions& opt = {}) {
  spec.validate();
  if (spec.mode != SolveMode::closed) fail(ErrorKind::precondition, "solve_closed: needs closed mode");
  const auto& d = spec.domain;
  ScalarField start(d, 0.0);
  if (opt.initial) {
    if (!opt.initial->domain().same_shape(d)) fail(ErrorKind::domain, "solve_closed: initial iterate grid mismatch");
    start = *opt.initial;
  }
  const DiscreteOperator op(spec);
  const long bad = op.first_inadmissible(start);
  if (bad >= 0)
    fail(ErrorKind::construction,
         "solve_closed: starting function is not admissible at " + detail::describe_node(d, static_cast<std::size_t>(bad)));
  const auto psi = detail::psi_active(op, spec.psi);
  SolveResult res;
  auto out = detail::solve_with_policy(op, start, psi, opt, res.continuation_stages);
  res.u = std::move(out.u);
  const double top = res.u.max();
  res.u += -top;
  res.c = out.c;
  res.iterations = out.iterations;
  res.residual_history = std::move(out.history);
  res.admissible = op.first_inadmissible(res.u) < 0;
  res.estimates = verify_estimates(res, spec, nullptr, nullptr);
  return res;
}

[[nodiscard]] inline SolveResult solve(const ProblemSpec& spec, const SolveOptions& opt = {}) {
  return spec.mode == SolveMode::closed ? solve_closed(spec, opt) : solve_dirichlet(spec, opt);
}

// ---------------------------------------------------------------------------
// Degenerate right-hand sides
// ---------------------------------------------------------------------------

/// Regularised right-hand side for a degenerate weight w >= 0 (min w = 0) at offset rho > 0:
/// log(w + rho) for families unbounded below on the cone boundary, s0 + w + rho otherwise.
[[nodiscard]] inline ScalarField regularized_psi(const FuncFamily& F, const ScalarField& weight, double rho) {
  ScalarField psi(weight.domain());
  const double s0 = F.sup_boundary();
  for (std::size_t i = 0; i < psi.size(); ++i)
    psi[i] = std::isfinite(s0) ? s0 + weight[i] + rho : std::log(weight[i] + rho);
  return psi;
}

struct SweepReport {
  std::vector<double> eps;
  std::vector<double> rho;
  std::vector<SolveResult> results;
  std::vector<double> cauchy;  // |u_k - u_{k+1}|_inf
  bool aborted = false;
  std::string abort_reason;

  [[nodiscard]] bool cauchy_monotone(double tol = 1e-12) const {
    for (std::size_t k = 1; k < cauchy.size(); ++k)
      if (cauchy[k] > cauchy[k - 1] + tol) return false;
    return true;
  }
};

namespace detail {
inline void check_degenerate_weight(const ProblemSpec& spec, const ScalarField& weight) {
  if (spec.mode != SolveMode::dirichlet) fail(ErrorKind::precondition, "degenerate: needs Dirichlet mode");
  if (!weight.domain().same_shape(spec.domain)) fail(ErrorKind::domain, "degenerate: weight grid mismatch");
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (spec.domain.role(i) == NodeRole::exterior) continue;
    if (!(weight[i] >= 0.0) || !std::isfinite(weight[i])) fail(ErrorKind::precondition, "degenerate: weight must be finite and >= 0");
    lo = std::min(lo, weight[i]);
  }
  if (lo > 1e-12) fail(ErrorKind::precondition, "degenerate: weight does not touch zero, the data is not degenerate");
}
}  // namespace detail

/// Solves the problems with psi_eps = regularized_psi(w, eps / 2) along a decreasing eps ladder,
/// warm-starting each solve from the previous solution (a strict subsolution for smaller eps).
/// A failing solve aborts the sweep with the results so far.
[[nodiscard]] inline SweepReport degenerate_sweep(const ProblemSpec& spec, const ScalarField& weight,
                                                  const std::vector<double>& ladder, const SolveOptions& opt = {}) {
  detail::check_degenerate_weight(spec, weight);
  for (std::size_t k = 0; k < ladder.size(); ++k)
    if (!(ladder[k] > 0.0) || (k && !(ladder[k] < ladder[k - 1])))
      fail(ErrorKind::precondition, "degenerate_sweep: ladder must be positive and strictly decreasing");
  SweepReport rep;
  std::optional<ScalarField> warm;
  for (double eps : ladder) {
    ProblemSpec s = spec;
    s.degenerate = false;
    s.psi = regularized_psi(spec.family, weight, 0.5 * eps);
    SolveOptions o = opt;
    try {
      SolveResult r;
      if (warm) {
        o.initial = warm;
        r = solve_dirichlet(s, o);
        // sandwich against the constructed subsolution rather than the warm start
        const auto sub = build_subsolution(s, opt.strictness);
        const ScalarField upper = build_supersolution(s);
        r.subsolution_t = sub.t;
        r.estimates = verify_estimates(r, s, &sub.u, &upper);
      } else {
        r = solve_dirichlet(s, o);
      }
      if (!rep.results.empty()) rep.cauchy.push_back(sup_diff(rep.results.back().u, r.u));
      warm = r.u;
      rep.eps.push_back(eps);
      rep.rho.push_back(0.5 * eps);
      rep.results.push_back(std::move(r));
    } catch (const Error& e) {
      rep.aborted = true;
      rep.abort_reason = e.what();
      break;
    }
  }
  return rep;
}

struct StabilityReport {
  double boundary_shift = 0.0;  // sup over boundary nodes of |phi1 - phi2|
  double solution_diff = 0.0;   // sup |u1 - u2|
  double ratio = 0.0;
  SolveResult first, second;

  [[nodiscard]] bool within(double rel = 1e-6, double abs = 1e-8) const {
    return solution_diff <= boundary_shift * (1.0 + rel) + abs;
  }
};

/// Paired regularised solves at level eps with boundary data phi and phi + perturbation.
[[nodiscard]] inline StabilityReport stability_pair(const ProblemSpec& spec, const ScalarField& weight, double eps,
                                                    const ScalarField& perturbation, const SolveOptions& opt = {}) {
  detail::check_degenerate_weight(spec, weight);
  ProblemSpec a = spec;
  a.degenerate = false;
  a.psi = regularized_psi(spec.family, weight, 0.5 * eps);
  ProblemSpec b = a;
  for (std::size_t i = 0; i < b.phi.size(); ++i) b.phi[i] += perturbation[i];
  StabilityReport rep;
  for (std::size_t i = 0; i < spec.domain.size(); ++i)
    if (spec.domain.role(i) == NodeRole::boundary) rep.boundary_shift = std::max(rep.boundary_shift, std::abs(perturbation[i]));
  rep.first = solve_dirichlet(a, opt);
  rep.second = solve_dirichlet(b, opt);
  rep.solution_diff = sup_diff(rep.first.u, rep.second.u);
  rep.ratio = rep.boundary_shift > 0.0 ? rep.solution_diff / rep.boundary_shift : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Exhaustion by level sets of h
// ---------------------------------------------------------------------------

/// S-factor roles for {h < -alpha}: interior where the whole 3 x 3 neighbourhood lies in the set,
/// boundary for the remaining nodes touching an interior node, exterior otherwise.
[[nodiscard]] inline std::vector<NodeRole> level_mask(const ScalarField& hs, double alpha) {
  const GridDomain& s = hs.domain();
  if (s.n() != 1) fail(ErrorKind::domain, "level_mask: expects an S-factor field");
  const std::size_t N = s.size();
  std::vector<char> inside(N);
  for (std::size_t i = 0; i < N; ++i) inside[i] = s.role(i) == NodeRole::interior && hs[i] < -alpha;
  auto around = [&](std::size_t i, auto&& fn) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy) {
        const long p = s.neighbor(i, 0, dx);
        const long q = p < 0 ? -1 : s.neighbor(static_cast<std::size_t>(p), 1, dy);
        fn(q);
      }
  };
  std::vector<NodeRole> roles(N, NodeRole::exterior);
  for (std::size_t i = 0; i < N; ++i) {
    if (!inside[i]) continue;
    bool all = true;
    around(i, [&](long q) { all = all && q >= 0 && inside[static_cast<std::size_t>(q)]; });
    if (all) roles[i] = NodeRole::interior;
  }
  for (std::size_t i = 0; i < N; ++i)
    if (roles[i] == NodeRole::interior)
      around(i, [&](long q) {
        if (roles[static_cast<std::size_t>(q)] == NodeRole::exterior) roles[static_cast<std::size_t>(q)] = NodeRole::boundary;
      });
  std::vector<int> xs, ys;
  for (std::size_t i = 0; i < N; ++i)
    if (roles[i] == NodeRole::interior) {
      xs.push_back(s.coord(i, 0));
      ys.push_back(s.coord(i, 1));
    }
  auto distinct = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
  };
  if (xs.empty() || distinct(xs) < 3 || distinct(ys) < 3)
    fail(ErrorKind::resolution, "level_mask: sub-domain {h < -alpha} is less than 3 nodes across");
  return roles;
}

struct ExhaustionReport {
  std::vector<double> levels;
  std::vector<std::size_t> interior_counts;
  std::vector<SolveResult> results;
  std::vector<double> successive_diff;  // on the common interior of consecutive sub-domains
  std::vector<double> diff_to_full;     // against the full-domain solve, same nodes
  SolveResult full;
};

/// Solves on {h < -alpha_k} with boundary data from the subsolution, and on the full domain.
[[nodiscard]] inline ExhaustionReport domain_exhaustion(const ProblemSpec& spec, const std::vector<double>& levels,
                                                        const SolveOptions& opt = {}) {
  spec.validate();
  if (spec.mode != SolveMode::dirichlet || spec.domain.kind() != DomainKind::product_xs || spec.domain.masked())
    fail(ErrorKind::precondition, "domain_exhaustion: needs Dirichlet mode on an unmasked product domain");
  for (std::size_t k = 0; k < levels.size(); ++k)
    if (!(levels[k] > 0.0) || (k && !(levels[k] < levels[k - 1])))
      fail(ErrorKind::precondition, "domain_exhaustion: levels must be positive and strictly decreasing");
  const auto& d = spec.domain;
  const GridDomain sd = d.s_factor();
  const ScalarField hs = poisson_dirichlet(sd, ScalarField(sd, 1.0), ScalarField(sd, 0.0));
  const auto sub = build_subsolution(spec, opt.strictness);

  ExhaustionReport rep;
  rep.full = solve_dirichlet(spec, opt);
  std::vector<NodeRole> prev;
  for (double alpha : levels) {
    const auto roles = lift_s_mask(level_mask(hs, alpha), d);
    const GridDomain md = d.with_mask(roles);
    ProblemSpec s{md, spec.family, HermitianField(md), ScalarField(md, spec.psi.values()), ScalarField(md, sub.u.values()),
                  SolveMode::dirichlet, spec.degenerate};
    for (std::size_t i = 0; i < d.size(); ++i) s.chi.set(i, spec.chi.at(i));
    SolveOptions o = opt;
    o.initial = s.phi;
    SolveResult r = solve_dirichlet(s, o);
    r.subsolution_t = sub.t;
    double to_full = 0.0, succ = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (roles[i] != NodeRole::interior) continue;
      ++count;
      to_full = std::max(to_full, std::abs(r.u[i] - rep.full.u[i]));
      if (!prev.empty() && prev[i] == NodeRole::interior)
        succ = std::max(succ, std::abs(r.u[i] - rep.results.back().u[i]));
    }
    if (!prev.empty()) rep.successive_diff.push_back(succ);
    rep.diff_to_full.push_back(to_full);
    rep.levels.push_back(alpha);
    rep.interior_counts.push_back(count);
    rep.results.push_back(std::move(r));
    prev = roles;
  }
  return rep;
}

}  // namespace hcl
