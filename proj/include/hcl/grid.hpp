#pragma once

// Flat structured grids on a complex torus or a product (flat torus) x S, with
// S a rectangle or an annulus modelled as a rectangle with a periodic angular axis.
// Real axis 2j carries x^j, axis 2j+1 carries y^j.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hcl/error.hpp"
#include "hcl/hermitian.hpp"

namespace hcl {

enum class DomainKind { torus, product_xs };

enum class NodeRole : std::uint8_t { interior = 0, boundary = 1, exterior = 2 };

inline const char* to_string(DomainKind k) { return k == DomainKind::torus ? "torus" : "product"; }

class GridDomain {
 public:
  GridDomain() = default;

  /// Complex torus: every axis periodic, `cells[a]` nodes on an axis of length `lengths[a]`.
  static GridDomain torus(int n, std::vector<int> cells, std::vector<double> lengths) {
    GridDomain g;
    g.init(n, DomainKind::torus, std::move(cells), std::move(lengths), std::vector<bool>(2 * static_cast<std::size_t>(n), true));
    return g;
  }

  /// X x S: the first 2(n-1) axes periodic; S a rectangle, or an annulus when `annulus` (y^n periodic).
  /// Non-periodic axes get cells + 1 nodes including both ends.
  static GridDomain product(int n, std::vector<int> cells, std::vector<double> lengths, bool annulus = false) {
    std::vector<bool> per(2 * static_cast<std::size_t>(n), true);
    per[2 * n - 2] = false;
    per[2 * n - 1] = annulus;
    GridDomain g;
    g.init(n, DomainKind::product_xs, std::move(cells), std::move(lengths), std::move(per));
    return g;
  }

  /// Same geometry with a replacement role mask (used for sub-domains of S).
  [[nodiscard]] GridDomain with_mask(std::vector<NodeRole> roles) const {
    if (roles.size() != size()) fail(ErrorKind::domain, "with_mask: mask size mismatch");
    GridDomain g = *this;
    g.role_ = std::move(roles);
    g.masked_ = true;
    return g;
  }

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] int axes() const noexcept { return 2 * n_; }
  [[nodiscard]] DomainKind kind() const noexcept { return kind_; }
  [[nodiscard]] bool annulus() const noexcept { return kind_ == DomainKind::product_xs && periodic_[2 * n_ - 1]; }
  [[nodiscard]] bool masked() const noexcept { return masked_; }
  [[nodiscard]] int cells(int a) const { return cells_[a]; }
  [[nodiscard]] int nodes(int a) const { return nodes_[a]; }
  [[nodiscard]] double spacing(int a) const { return h_[a]; }
  [[nodiscard]] double length(int a) const { return len_[a]; }
  [[nodiscard]] bool periodic(int a) const { return periodic_[a]; }
  [[nodiscard]] std::size_t size() const noexcept { return role_.size(); }
  [[nodiscard]] std::size_t stride(int a) const { return stride_[a]; }
  [[nodiscard]] NodeRole role(std::size_t i) const { return role_[i]; }
  [[nodiscard]] const std::vector<NodeRole>& roles() const noexcept { return role_; }
  [[nodiscard]] bool has_boundary() const {
    return std::any_of(role_.begin(), role_.end(), [](NodeRole r) { return r == NodeRole::boundary; });
  }
  [[nodiscard]] std::size_t count(NodeRole r) const {
    return static_cast<std::size_t>(std::count(role_.begin(), role_.end(), r));
  }

  [[nodiscard]] int coord(std::size_t i, int a) const {
    return static_cast<int>((i / stride_[a]) % static_cast<std::size_t>(nodes_[a]));
  }
  [[nodiscard]] double position(std::size_t i, int a) const { return coord(i, a) * h_[a]; }

  [[nodiscard]] std::size_t index(const std::vector<int>& c) const {
    std::size_t k = 0;
    for (int a = 0; a < axes(); ++a) k += static_cast<std::size_t>(c[a]) * stride_[a];
    return k;
  }

  /// Neighbour along axis a at offset d; -1 when it falls off a non-periodic axis.
  [[nodiscard]] long neighbor(std::size_t i, int a, int d) const {
    const int c = coord(i, a);
    int t = c + d;
    if (periodic_[a]) {
      t = ((t % nodes_[a]) + nodes_[a]) % nodes_[a];
    } else if (t < 0 || t >= nodes_[a]) {
      return -1;
    }
    return static_cast<long>(i) + (static_cast<long>(t) - c) * static_cast<long>(stride_[a]);
  }

  /// Boundary axis of a node on the geometric boundary (-1 otherwise); corners report the first axis.
  [[nodiscard]] int boundary_axis(std::size_t i) const {
    for (int a = 0; a < axes(); ++a)
      if (!periodic_[a] && (coord(i, a) == 0 || coord(i, a) == nodes_[a] - 1)) return a;
    return -1;
  }

  /// True when the node sits on the boundary of more than one non-periodic axis.
  [[nodiscard]] bool is_corner(std::size_t i) const {
    int hits = 0;
    for (int a = 0; a < axes(); ++a)
      if (!periodic_[a] && (coord(i, a) == 0 || coord(i, a) == nodes_[a] - 1)) ++hits;
    return hits > 1;
  }

  /// The S factor as a one-dimensional product domain (n = 1).
  [[nodiscard]] GridDomain s_factor() const {
    if (kind_ != DomainKind::product_xs) fail(ErrorKind::domain, "s_factor: torus has no S factor");
    return product(1, {cells_[2 * n_ - 2], cells_[2 * n_ - 1]}, {len_[2 * n_ - 2], len_[2 * n_ - 1]}, annulus());
  }

  /// Node index in the S factor for a product node.
  [[nodiscard]] std::size_t s_index(std::size_t i) const {
    return static_cast<std::size_t>(coord(i, 2 * n_ - 2)) +
           static_cast<std::size_t>(coord(i, 2 * n_ - 1)) * static_cast<std::size_t>(nodes_[2 * n_ - 2]);
  }

  [[nodiscard]] bool same_shape(const GridDomain& o) const {
    return n_ == o.n_ && kind_ == o.kind_ && nodes_ == o.nodes_ && periodic_ == o.periodic_ && len_ == o.len_;
  }

 private:
  void init(int n, DomainKind kind, std::vector<int> cells, std::vector<double> lengths, std::vector<bool> per) {
    if (n < 1) fail(ErrorKind::domain, "GridDomain: n must be >= 1");
    const auto A = static_cast<std::size_t>(2 * n);
    if (cells.size() != A || lengths.size() != A) fail(ErrorKind::domain, "GridDomain: need one cell count and length per real axis");
    n_ = n;
    kind_ = kind;
    cells_ = std::move(cells);
    len_ = std::move(lengths);
    periodic_ = std::move(per);
    nodes_.resize(A);
    h_.resize(A);
    stride_.resize(A);
    std::size_t total = 1;
    for (std::size_t a = 0; a < A; ++a) {
      if (!(len_[a] > 0.0) || !std::isfinite(len_[a])) fail(ErrorKind::domain, "GridDomain: axis lengths must be positive");
      const int minc = periodic_[a] ? 3 : 2;
      if (cells_[a] < minc) fail(ErrorKind::domain, "GridDomain: too few cells on an axis");
      nodes_[a] = periodic_[a] ? cells_[a] : cells_[a] + 1;
      h_[a] = len_[a] / cells_[a];
      stride_[a] = total;
      total *= static_cast<std::size_t>(nodes_[a]);
    }
    role_.assign(total, NodeRole::interior);
    for (std::size_t i = 0; i < total; ++i)
      if (boundary_axis(i) >= 0) role_[i] = NodeRole::boundary;
  }

  int n_ = 0;
  DomainKind kind_ = DomainKind::torus;
  std::vector<int> cells_, nodes_;
  std::vector<double> len_, h_;
  std::vector<bool> periodic_;
  std::vector<std::size_t> stride_;
  std::vector<NodeRole> role_;
  bool masked_ = false;
};

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridDomain d, double value = 0.0) : dom_(std::move(d)), v_(dom_.size(), value) {}
  ScalarField(GridDomain d, std::vector<double> values) : dom_(std::move(d)), v_(std::move(values)) {
    if (v_.size() != dom_.size()) fail(ErrorKind::domain, "ScalarField: value count does not match the domain");
  }

  /// Samples fn(position vector) at every node.
  static ScalarField from_function(const GridDomain& d, const std::function<double(const std::vector<double>&)>& fn) {
    ScalarField f(d);
    std::vector<double> x(static_cast<std::size_t>(d.axes()));
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (int a = 0; a < d.axes(); ++a) x[a] = d.position(i, a);
      f.v_[i] = fn(x);
    }
    return f;
  }

  [[nodiscard]] const GridDomain& domain() const noexcept { return dom_; }
  [[nodiscard]] std::size_t size() const noexcept { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  [[nodiscard]] std::vector<double>& values() noexcept { return v_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return v_; }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }

  /// sup |v| over nodes that are not exterior.
  [[nodiscard]] double sup_abs() const {
    double m = 0.0;
    for (std::size_t i = 0; i < v_.size(); ++i)
      if (dom_.role(i) != NodeRole::exterior) m = std::max(m, std::abs(v_[i]));
    return m;
  }
  [[nodiscard]] double max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v_.size(); ++i)
      if (dom_.role(i) != NodeRole::exterior) m = std::max(m, v_[i]);
    return m;
  }
  [[nodiscard]] double min() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v_.size(); ++i)
      if (dom_.role(i) != NodeRole::exterior) m = std::min(m, v_[i]);
    return m;
  }

  ScalarField& operator+=(double s) {
    for (double& x : v_) x += s;
    return *this;
  }

 private:
  GridDomain dom_;
  std::vector<double> v_;
};

/// sup |a - b| over nodes that are not exterior in `a`'s domain.
[[nodiscard]] inline double sup_diff(const ScalarField& a, const ScalarField& b) {
  if (a.size() != b.size()) fail(ErrorKind::domain, "sup_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.domain().role(i) != NodeRole::exterior) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// One n x n Hermitian matrix per node, stored flat (node-major, column-major blocks).
class HermitianField {
 public:
  HermitianField() = default;
  explicit HermitianField(GridDomain d)
      : dom_(std::move(d)), a_(dom_.size() * static_cast<std::size_t>(dom_.n()) * dom_.n(), cplx{}) {}

  static HermitianField constant(const GridDomain& d, const HermitianMatrix& M) {
    if (M.n() != d.n()) fail(ErrorKind::domain, "HermitianField::constant: matrix size differs from n");
    HermitianField f(d);
    for (std::size_t i = 0; i < d.size(); ++i) f.set(i, M);
    return f;
  }

  [[nodiscard]] const GridDomain& domain() const noexcept { return dom_; }
  [[nodiscard]] int n() const noexcept { return dom_.n(); }
  [[nodiscard]] std::size_t size() const noexcept { return dom_.size(); }

  [[nodiscard]] HermitianMatrix at(std::size_t i) const {
    const std::size_t b = block();
    return HermitianMatrix(n(), std::vector<cplx>(a_.begin() + static_cast<long>(i * b), a_.begin() + static_cast<long>((i + 1) * b)));
  }
  [[nodiscard]] cplx entry(std::size_t i, int r, int c) const { return a_[i * block() + static_cast<std::size_t>(c) * n() + r]; }

  void set(std::size_t i, const HermitianMatrix& M) {
    std::copy(M.data().begin(), M.data().end(), a_.begin() + static_cast<long>(i * block()));
  }

  [[nodiscard]] const std::vector<cplx>& data() const noexcept { return a_; }

  /// max over nodes of |M - M^*| entrywise.
  [[nodiscard]] double hermiticity_defect() const {
    double m = 0.0;
    const int k = n();
    for (std::size_t i = 0; i < size(); ++i)
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) m = std::max(m, std::abs(entry(i, r, c) - std::conj(entry(i, c, r))));
    return m;
  }

 private:
  [[nodiscard]] std::size_t block() const { return static_cast<std::size_t>(n()) * n(); }
  GridDomain dom_;
  std::vector<cplx> a_;
};

// ---------------------------------------------------------------------------
// Stencils
// ---------------------------------------------------------------------------

namespace detail {

/// Value at node i displaced by (da along a, db along b). Off a non-periodic end the value is
/// extrapolated quadratically through the last three nodes (ghost = 3u0 - 3u1 + u2).
/// Exterior nodes are never read.
inline double stencil_value(const ScalarField& u, std::size_t i, int a, int da, int b, int db) {
  const GridDomain& d = u.domain();
  auto fetch = [&](long k) {
    if (d.role(static_cast<std::size_t>(k)) == NodeRole::exterior)
      fail(ErrorKind::stencil, "stencil reaches an exterior node");
    return u[static_cast<std::size_t>(k)];
  };
  // Resolve the displacement along b first, then a, extrapolating where needed.
  auto along = [&](std::size_t base, int ax, int off, auto&& inner) -> double {
    if (off == 0) return inner(base);
    const long k = d.neighbor(base, ax, off);
    if (k >= 0) return inner(static_cast<std::size_t>(k));
    const int dir = off > 0 ? -1 : 1;  // step back into the grid
    const long k0 = d.neighbor(base, ax, 0);
    const long k1 = d.neighbor(base, ax, dir);
    const long k2 = d.neighbor(base, ax, 2 * dir);
    if (k1 < 0 || k2 < 0 || std::abs(off) > 1) fail(ErrorKind::stencil, "stencil needs data beyond one ghost layer");
    return 3.0 * inner(static_cast<std::size_t>(k0)) - 3.0 * inner(static_cast<std::size_t>(k1)) +
           inner(static_cast<std::size_t>(k2));
  };
  return along(i, a, da, [&](std::size_t p) { return along(p, b, db, [&](std::size_t q) { return fetch(static_cast<long>(q)); }); });
}

}  // namespace detail

/// Real second difference D_ab u at node i (3-point for a == b, 4-corner cross otherwise).
[[nodiscard]] inline double second_difference(const ScalarField& u, std::size_t i, int a, int b) {
  const GridDomain& d = u.domain();
  if (a == b) {
    const double h = d.spacing(a);
    return (detail::stencil_value(u, i, a, 1, a, 0) - 2.0 * u[i] + detail::stencil_value(u, i, a, -1, a, 0)) / (h * h);
  }
  const double pp = detail::stencil_value(u, i, a, 1, b, 1);
  const double pm = detail::stencil_value(u, i, a, 1, b, -1);
  const double mp = detail::stencil_value(u, i, a, -1, b, 1);
  const double mm = detail::stencil_value(u, i, a, -1, b, -1);
  return (pp - pm - mp + mm) / (4.0 * d.spacing(a) * d.spacing(b));
}

/// Complex Hessian at one node: u_{jk} = 1/4 (D_{xj xk} + D_{yj yk}) + i/4 (D_{xj yk} - D_{yj xk}).
[[nodiscard]] inline HermitianMatrix complex_hessian_at(const ScalarField& u, std::size_t i) {
  const int n = u.domain().n();
  const int A = 2 * n;
  std::vector<double> R(static_cast<std::size_t>(A) * A);
  for (int a = 0; a < A; ++a)
    for (int b = a; b < A; ++b) R[static_cast<std::size_t>(a) * A + b] = R[static_cast<std::size_t>(b) * A + a] = second_difference(u, i, a, b);
  auto r = [&](int a, int b) { return R[static_cast<std::size_t>(a) * A + b]; };
  HermitianMatrix H(n);
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k)
      H.set(j, k, cplx(0.25 * (r(2 * j, 2 * k) + r(2 * j + 1, 2 * k + 1)), 0.25 * (r(2 * j, 2 * k + 1) - r(2 * j + 1, 2 * k))));
  return H;
}

/// Complex Hessian at every non-exterior node (boundary nodes use the ghost layer).
[[nodiscard]] inline HermitianField complex_hessian(const ScalarField& u) {
  HermitianField H(u.domain());
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u.domain().role(i) != NodeRole::exterior) H.set(i, complex_hessian_at(u, i));
  return H;
}

/// Chern Laplacian sum_j u_{j jbar} = 1/4 of the Euclidean Laplacian.
[[nodiscard]] inline double chern_laplacian_at(const ScalarField& u, std::size_t i) {
  double s = 0.0;
  for (int a = 0; a < u.domain().axes(); ++a) s += second_difference(u, i, a, a);
  return 0.25 * s;
}

[[nodiscard]] inline ScalarField chern_laplacian(const ScalarField& u) {
  ScalarField out(u.domain());
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u.domain().role(i) != NodeRole::exterior) out[i] = chern_laplacian_at(u, i);
  return out;
}

/// First derivative along axis a: centred, or 3-point one-sided at a non-periodic end.
[[nodiscard]] inline double first_difference(const ScalarField& u, std::size_t i, int a) {
  const GridDomain& d = u.domain();
  const double h = d.spacing(a);
  const long p = d.neighbor(i, a, 1), m = d.neighbor(i, a, -1);
  auto val = [&](long k) { return u[static_cast<std::size_t>(k)]; };
  if (p >= 0 && m >= 0) return (val(p) - val(m)) / (2.0 * h);
  if (p >= 0) return (-3.0 * u[i] + 4.0 * val(p) - val(d.neighbor(i, a, 2))) / (2.0 * h);
  return (3.0 * u[i] - 4.0 * val(m) + val(d.neighbor(i, a, -2))) / (2.0 * h);
}

/// sup over non-exterior nodes of sum_a (d_a u)^2.
[[nodiscard]] inline double gradient_sup(const ScalarField& u) {
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u.domain().role(i) == NodeRole::exterior) continue;
    double s = 0.0;
    for (int a = 0; a < u.domain().axes(); ++a) {
      const double g = first_difference(u, i, a);
      s += g * g;
    }
    m = std::max(m, s);
  }
  return m;
}

/// Inner-normal derivative at a geometric boundary node (3-point one-sided along the boundary axis).
[[nodiscard]] inline double inner_normal_derivative(const ScalarField& u, std::size_t i) {
  const GridDomain& d = u.domain();
  const int a = d.boundary_axis(i);
  if (a < 0) fail(ErrorKind::precondition, "inner_normal_derivative: node is not on the boundary");
  const int dir = d.coord(i, a) == 0 ? 1 : -1;
  const auto k1 = static_cast<std::size_t>(d.neighbor(i, a, dir));
  const auto k2 = static_cast<std::size_t>(d.neighbor(i, a, 2 * dir));
  return (-3.0 * u[i] + 4.0 * u[k1] - u[k2]) / (2.0 * d.spacing(a));
}

/// Pulls a field on the S factor back to the product along the projection X x S -> S.
[[nodiscard]] inline ScalarField pullback_from_s(const ScalarField& s_field, const GridDomain& product) {
  if (product.kind() != DomainKind::product_xs) fail(ErrorKind::domain, "pullback_from_s: needs a product domain");
  if (!s_field.domain().same_shape(product.s_factor())) fail(ErrorKind::domain, "pullback_from_s: S grid mismatch");
  ScalarField out(product);
  for (std::size_t i = 0; i < product.size(); ++i) out[i] = s_field[product.s_index(i)];
  return out;
}

/// S-factor roles of a product mask (a product node inherits the role of its S node).
[[nodiscard]] inline std::vector<NodeRole> lift_s_mask(const std::vector<NodeRole>& s_roles, const GridDomain& product) {
  std::vector<NodeRole> r(product.size());
  for (std::size_t i = 0; i < product.size(); ++i) r[i] = s_roles[product.s_index(i)];
  return r;
}

}  // namespace hcl
