#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "hcl/error.hpp"

namespace hcl {

using cplx = std::complex<double>;

/// n x n complex Hermitian matrix, column-major. Construction from arbitrary entries
/// symmetrises to (A + A^*)/2, so conjugate symmetry holds exactly afterwards.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, cplx{}) {
    if (n < 1) fail(ErrorKind::domain, "HermitianMatrix needs n >= 1");
  }

  /// Column-major entries; symmetrised on construction.
  HermitianMatrix(int n, std::vector<cplx> column_major) : n_(n), a_(std::move(column_major)) {
    if (n < 1 || a_.size() != static_cast<std::size_t>(n) * n)
      fail(ErrorKind::domain, "HermitianMatrix: entry count does not match n*n");
    symmetrize();
  }

  static HermitianMatrix identity(int n) {
    HermitianMatrix I(n);
    for (int i = 0; i < n; ++i) I.set(i, i, 1.0);
    return I;
  }

  static HermitianMatrix diagonal(const std::vector<double>& d) {
    HermitianMatrix D(static_cast<int>(d.size()));
    for (int i = 0; i < D.n_; ++i) D.set(i, i, d[i]);
    return D;
  }

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] cplx operator()(int i, int j) const { return a_[idx(i, j)]; }

  /// Sets (i,j) and its mirror (j,i) = conj(v); diagonal entries keep only the real part.
  void set(int i, int j, cplx v) {
    if (i == j) {
      a_[idx(i, i)] = cplx(v.real(), 0.0);
    } else {
      a_[idx(i, j)] = v;
      a_[idx(j, i)] = std::conj(v);
    }
  }

  [[nodiscard]] const std::vector<cplx>& data() const noexcept { return a_; }

  [[nodiscard]] double trace() const {
    double t = 0.0;
    for (int i = 0; i < n_; ++i) t += a_[idx(i, i)].real();
    return t;
  }

  [[nodiscard]] double frobenius() const {
    double s = 0.0;
    for (const auto& v : a_) s += std::norm(v);
    return std::sqrt(s);
  }

  HermitianMatrix& operator+=(const HermitianMatrix& o) {
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
  }
  HermitianMatrix& operator-=(const HermitianMatrix& o) {
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
  }
  HermitianMatrix& operator*=(double s) {
    for (auto& v : a_) v *= s;
    return *this;
  }
  friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
  friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
  friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }

  /// Re tr(A B) for Hermitian A, B.
  [[nodiscard]] friend double trace_product(const HermitianMatrix& A, const HermitianMatrix& B) {
    double t = 0.0;
    for (int i = 0; i < A.n_; ++i)
      for (int j = 0; j < A.n_; ++j) t += (A(i, j) * B(j, i)).real();
    return t;
  }

 private:
  [[nodiscard]] std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * n_ + i; }

  void symmetrize() {
    for (int j = 0; j < n_; ++j) {
      a_[idx(j, j)] = cplx(a_[idx(j, j)].real(), 0.0);
      for (int i = j + 1; i < n_; ++i) {
        const cplx m = 0.5 * (a_[idx(i, j)] + std::conj(a_[idx(j, i)]));
        a_[idx(i, j)] = m;
        a_[idx(j, i)] = std::conj(m);
      }
    }
  }

  int n_ = 0;
  std::vector<cplx> a_;
};

/// Eigenvalues (ascending) and the unitary eigenframe: column k of `vectors` is the
/// eigenvector of values[k]; `vectors` is column-major n x n.
struct HermitianEigen {
  std::vector<double> values;
  std::vector<cplx> vectors;
  int sweeps = 0;

  [[nodiscard]] cplx vector_entry(int i, int k, int n) const { return vectors[static_cast<std::size_t>(k) * n + i]; }
};

/// Cyclic complex Jacobi. Each pivot (p,q) with a_pq = |a_pq| e^{i phi} is annihilated by the
/// unitary G = diag(e^{i phi}, 1) R(theta), R the real Jacobi rotation of the modulus problem.
/// Stops when the off-diagonal Frobenius norm is <= 1e-12 |A|_F (or exactly zero).
[[nodiscard]] inline HermitianEigen eig_hermitian(const HermitianMatrix& A, bool want_vectors = true) {
  const int n = A.n();
  std::vector<cplx> a = A.data();
  auto at = [&](int i, int j) -> cplx& { return a[static_cast<std::size_t>(j) * n + i]; };
  std::vector<cplx> v;
  if (want_vectors) {
    v.assign(static_cast<std::size_t>(n) * n, cplx{});
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
  }
  const double scale = A.frobenius();
  const double target = 1e-12 * scale;

  auto off_norm = [&] {
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (i != j) s += std::norm(at(i, j));
    return std::sqrt(s);
  };

  HermitianEigen out;
  int sweep = 0;
  // A couple of extra sweeps past the target polish the diagonal to full precision cheaply.
  int polish = 0;
  for (;;) {
    const double off = off_norm();
    if (off == 0.0 || (off <= target && ++polish > 1)) break;
    if (sweep >= 100) fail(ErrorKind::numeric, "eig_hermitian: Jacobi did not converge in 100 sweeps");
    ++sweep;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        const cplx apq = at(p, q);
        const double mod = std::abs(apq);
        if (mod == 0.0) continue;
        const double app = at(p, p).real();
        const double aqq = at(q, q).real();
        const cplx phase = apq / mod;  // e^{i phi}
        const double zeta = (aqq - app) / (2.0 * mod);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // G = [[phase*c, phase*s], [-s, c]] acting on coordinates (p, q).
        const cplx gpp = phase * c, gpq = phase * s, gqp = -s, gqq = c;
        for (int k = 0; k < n; ++k) {  // A <- A G (columns p, q)
          const cplx akp = at(k, p), akq = at(k, q);
          at(k, p) = akp * gpp + akq * gqp;
          at(k, q) = akp * gpq + akq * gqq;
        }
        for (int k = 0; k < n; ++k) {  // A <- G^* A (rows p, q)
          const cplx apk = at(p, k), aqk = at(q, k);
          at(p, k) = std::conj(gpp) * apk + std::conj(gqp) * aqk;
          at(q, k) = std::conj(gpq) * apk + std::conj(gqq) * aqk;
        }
        at(p, q) = at(q, p) = 0.0;
        at(p, p) = app - t * mod;
        at(q, q) = aqq + t * mod;
        if (want_vectors)
          for (int k = 0; k < n; ++k) {
            cplx& vkp = v[static_cast<std::size_t>(p) * n + k];
            cplx& vkq = v[static_cast<std::size_t>(q) * n + k];
            const cplx x = vkp, y = vkq;
            vkp = x * gpp + y * gqp;
            vkq = x * gpq + y * gqq;
          }
      }
  }
  out.sweeps = sweep;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return at(x, x).real() < at(y, y).real(); });
  out.values.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.values[k] = at(order[k], order[k]).real();
  if (want_vectors) {
    out.vectors.resize(v.size());
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        out.vectors[static_cast<std::size_t>(k) * n + i] = v[static_cast<std::size_t>(order[k]) * n + i];
  }
  return out;
}

[[nodiscard]] inline std::vector<double> eigenvalues(const HermitianMatrix& A) {
  return eig_hermitian(A, false).values;
}

}  // namespace hcl
