#pragma once

// Seeded verification batteries shared by the command-line tool and the acceptance run.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hcl/spectra.hpp"
#include "hcl/subsol.hpp"
#include "hcl/symfunc.hpp"

namespace hcl {

struct LemmaRow {
  int id = 0;
  int n = 0;
  double eps = 0.0;
  double corner_factor = 0.0;
  BorderedHermitian matrix;
  LocalizationVerdict verdict;
};

/// Instance id: n = 2 + id % 5, eps from {0.1, 0.3, 1}, corner = {1, 1.5, 10} x threshold.
/// Diagonal entries uniform in [-2, 2], border entries with real and imaginary parts in [-1, 1].
[[nodiscard]] inline BorderedHermitian lemma_instance(int id, std::mt19937_64& rng, double& eps, double& factor) {
  static constexpr double kEps[] = {0.1, 0.3, 1.0};
  static constexpr double kFactor[] = {1.0, 1.5, 10.0};
  const int n = 2 + id % 5;
  eps = kEps[(id / 5) % 3];
  factor = kFactor[(id / 15) % 3];
  std::uniform_real_distribution<double> D(-2.0, 2.0), A(-1.0, 1.0);
  std::vector<double> d(static_cast<std::size_t>(n - 1));
  std::vector<cplx> a(static_cast<std::size_t>(n - 1));
  for (auto& x : d) x = D(rng);
  for (auto& z : a) {
    const double re = A(rng);
    z = cplx(re, A(rng));
  }
  BorderedHermitian B(d, a, 0.0);
  B.corner = factor * growth_threshold(B, eps);
  return B;
}

[[nodiscard]] inline std::vector<LemmaRow> lemma_battery(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LemmaRow> rows;
  rows.reserve(static_cast<std::size_t>(count));
  for (int id = 0; id < count; ++id) {
    LemmaRow r;
    r.id = id;
    r.matrix = lemma_instance(id, rng, r.eps, r.corner_factor);
    r.n = r.matrix.n();
    r.verdict = localize(r.matrix, r.eps);
    rows.push_back(std::move(r));
  }
  return rows;
}

struct ConeRow {
  int id = 0;
  std::string family;
  std::vector<double> lambda;
  ConeVerdict verdict;
  bool slope_ok = false;    // limsup f(t lambda)/t >= 0
  bool pairing_ok = false;  // sum f_i(mu) lambda_i >= 0 over samples
  [[nodiscard]] bool agree() const {
    return !verdict.indeterminate && verdict.in_gamma_G == slope_ok && verdict.in_gamma_G == pairing_ok;
  }
};

/// Three sub-cone criteria on sampled cone points of the given family.
[[nodiscard]] inline std::vector<ConeRow> cone_battery(const FuncFamily& F, int count, std::uint64_t seed) {
  ConeSampler s(F.dimension(), F.cone_index(), seed, 0.95);
  std::vector<ConeRow> rows;
  for (int id = 0; id < count; ++id) {
    ConeRow r;
    r.id = id;
    r.family = F.name();
    r.lambda = s.next();
    r.verdict = in_gamma_G(F, r.lambda);
    r.slope_ok = ray_slope_at(F, r.lambda, 1048576.0) >= -1e-9;
    r.pairing_ok = min_gradient_pairing(F, r.lambda, 50, seed + 1000 + static_cast<std::uint64_t>(id)) >= -1e-9;
    rows.push_back(std::move(r));
  }
  return rows;
}

struct DichotomyRow {
  int id = 0;
  std::string context;
  double epsilon = 0.0;
  DichotomyCase result = DichotomyCase::case1;
  bool neither = false;
  std::string message;
};

struct NamedContext {
  std::string name;
  DichotomyContext context;
};

/// The sigma_1 worked context and two contexts certified by build_context.
[[nodiscard]] inline std::vector<NamedContext> standard_contexts(std::uint64_t seed) {
  std::vector<NamedContext> out;
  out.push_back({"sigma1-worked", make_context(FuncFamily::sigma_k_root(3, 1), 3.0, {2, 2, 2}, 0.5, 2.0, 0.6, 0.25)});
  out.push_back({"logdet2", build_context(FuncFamily::log_det(2), 0.0, {2, 2}, 0.25, 4.0, 200, seed)});
  out.push_back({"sigma2-root3", build_context(FuncFamily::sigma_k_root(3, 2), 1.0, {1, 1, 1}, 0.3, 4.0, 200, seed)});
  return out;
}

/// Level-set samples per context; a sample where neither case holds is recorded, not thrown.
[[nodiscard]] inline std::vector<DichotomyRow> dichotomy_battery(const std::vector<NamedContext>& contexts, int per_context,
                                                                 std::uint64_t seed) {
  std::vector<DichotomyRow> rows;
  int id = 0;
  for (const auto& nc : contexts) {
    for (const auto& l : sample_level_set(nc.context.F, nc.context.sigma, per_context, seed)) {
      DichotomyRow r;
      r.id = id++;
      r.context = nc.name;
      r.epsilon = nc.context.epsilon;
      try {
        r.result = dichotomy_check(nc.context, l);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::lemma_violation) throw;
        r.neither = true;
        r.message = e.what();
      }
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

}  // namespace hcl
