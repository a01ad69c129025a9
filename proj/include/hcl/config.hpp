#pragma once

// JSON run configuration: problem data, named expressions and run options.
//
// {
//   "domain":  {"kind": "product" | "torus", "n": 2, "cells": [...], "lengths": [...], "annulus": false},
//   "family":  {"kind": "log_det" | "sigma_k_root" | "log_sigma_k" | "sigma_quotient" | "guan_mixed",
//               "k": 2, "l": 1, "beta": [...]},
//   "chi":     "identity" | "<field file>" | {"diag": [...], "offdiag": [[i, j, re, im], ...]},
//   "psi":     "<expression id>" | {"expr": id, ...params} | "<field file>",
//   "phi":     same forms as psi (Dirichlet only),
//   "weight":  same forms as psi (degenerate runs only),
//   "mode":    "closed" | "dirichlet",
//   "degenerate": false,
//   "options": {...}
// }

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcl/error.hpp"
#include "hcl/field_io.hpp"
#include "hcl/grid.hpp"
#include "hcl/solve.hpp"
#include "hcl/symfunc.hpp"

namespace hcl {

using json = nlohmann::json;

struct RunOptions {
  SolveOptions solve;
  std::vector<double> ladder{1.0, 0.5, 0.25, 0.125};
  std::vector<double> levels{0.1, 0.05, 0.02};
  std::vector<double> amplitudes{0.25, 0.5, 1.0};
  double boundary_shift = 0.05;
  double stability_eps = 0.125;
  int count = 1000;
  std::optional<std::uint64_t> seed;
};

struct LoadedConfig {
  std::optional<ProblemSpec> spec;  // absent when the document has no domain
  std::optional<ScalarField> weight;
  RunOptions options;
  std::string run_id = "run";
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::config, std::string("config: missing field '") + key + "'");
  return j.at(key);
}

inline GridDomain parse_domain(const json& j) {
  const auto kind = get_or<std::string>(j, "kind", "product");
  const int n = get_or<int>(j, "n", 2);
  if (n < 1 || n > 6) fail(ErrorKind::config, "config: domain.n must be in 1..6");
  const auto cells = get_or<std::vector<int>>(j, "cells", {});
  if (cells.size() != static_cast<std::size_t>(2 * n)) fail(ErrorKind::config, "config: domain.cells needs 2n entries");
  std::vector<double> lengths = get_or<std::vector<double>>(j, "lengths", {});
  if (lengths.empty()) lengths.assign(cells.size(), kind == "torus" ? 2.0 * M_PI : 1.0);
  try {
    if (kind == "torus") return GridDomain::torus(n, cells, lengths);
    if (kind == "product") return GridDomain::product(n, cells, lengths, get_or<bool>(j, "annulus", false));
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("config: domain: ") + e.what());
  }
  fail(ErrorKind::config, "config: unknown domain kind '" + kind + "'");
}

inline FuncFamily parse_family(const json& j, int n) {
  const auto kind = get_or<std::string>(j, "kind", "log_det");
  const int k = get_or<int>(j, "k", n);
  const int l = get_or<int>(j, "l", 0);
  try {
    if (kind == "log_det") return FuncFamily::log_det(n);
    if (kind == "sigma_k_root") return FuncFamily::sigma_k_root(n, k);
    if (kind == "log_sigma_k") return FuncFamily::log_sigma_k(n, k);
    if (kind == "sigma_quotient") return FuncFamily::sigma_quotient(n, k, l);
    if (kind == "guan_mixed") return FuncFamily::guan_mixed(n, k, get_or<std::vector<double>>(j, "beta", {}));
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("config: family: ") + e.what());
  }
  fail(ErrorKind::config, "config: unknown family kind '" + kind + "'");
}

inline std::string resolve(const std::string& base, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? path : (std::filesystem::path(base) / p).string();
}

inline HermitianField parse_chi(const json& j, const GridDomain& d, const std::string& base) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "identity") return HermitianField::constant(d, HermitianMatrix::identity(d.n()));
    HermitianField f = load_hermitian_field(resolve(base, s));
    if (!f.domain().same_shape(d)) fail(ErrorKind::config, "config: chi field grid differs from the domain");
    return f;
  }
  if (j.is_object()) {
    const auto diag = get_or<std::vector<double>>(j, "diag", std::vector<double>(static_cast<std::size_t>(d.n()), 1.0));
    if (diag.size() != static_cast<std::size_t>(d.n())) fail(ErrorKind::config, "config: chi.diag needs n entries");
    HermitianMatrix M = HermitianMatrix::diagonal(diag);
    for (const auto& e : get_or<std::vector<std::vector<double>>>(j, "offdiag", {})) {
      if (e.size() != 4) fail(ErrorKind::config, "config: chi.offdiag entries are [i, j, re, im]");
      const int r = static_cast<int>(e[0]), c = static_cast<int>(e[1]);
      if (r < 0 || c < 0 || r >= d.n() || c >= d.n() || r == c) fail(ErrorKind::config, "config: chi.offdiag index out of range");
      M.set(r, c, cplx(e[2], e[3]));
    }
    return HermitianField::constant(d, M);
  }
  fail(ErrorKind::config, "config: chi must be \"identity\", a field file or a constant matrix");
}

inline double s_coord(const GridDomain& d, std::size_t i, int which) {
  // S coordinates on a product; the first complex coordinate on a torus
  return d.kind() == DomainKind::product_xs ? d.position(i, d.axes() - 2 + which) : d.position(i, which == 0 ? 0 : 2);
}

/// Analytic complex Hessian of the manufactured shapes.
inline HermitianMatrix manufactured_hessian(const std::string& shape, double A, const GridDomain& d, std::size_t i) {
  const int n = d.n();
  HermitianMatrix H(n);
  if (shape == "s-wave") {
    const double x = s_coord(d, i, 0), y = s_coord(d, i, 1);
    H.set(n - 1, n - 1, 0.25 * A * (-2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y) + 2.0));
  } else {
    // function of the real parts of z^1, z^2: u_{j kbar} = D_{xj xk} / 4
    const double a = d.position(i, 0), b = d.position(i, 2);
    const double uaa = A * (-std::sin(a) - 0.5 * std::sin(a) * std::cos(b));
    const double ubb = A * (-std::cos(b) - 0.5 * std::sin(a) * std::cos(b));
    const double uab = A * (-0.5 * std::cos(a) * std::sin(b));
    H.set(0, 0, 0.25 * uaa);
    H.set(1, 1, 0.25 * ubb);
    H.set(0, 1, 0.25 * uab);
  }
  return H;
}

}  // namespace detail

/// Exact manufactured solution values for the named shapes (used for the boundary data).
[[nodiscard]] inline double manufactured_value(const std::string& shape, double A, const GridDomain& d, std::size_t i) {
  if (shape == "s-wave") {
    const double x = detail::s_coord(d, i, 0), y = detail::s_coord(d, i, 1);
    return A * (std::sin(M_PI * x) * std::sin(M_PI * y) + x * x + x * y);
  }
  const double a = d.position(i, 0), b = d.position(i, 2);
  return A * (std::sin(a) + std::cos(b) + 0.5 * std::sin(a) * std::cos(b));
}

/// Named scalar expressions:
///   zero; constant{value}; linear{a, b}; wave{base, amplitude}; bump{cx, cy};
///   manufactured{shape: "s-wave" | "torus-wave", amplitude} (psi: f of the exact Hessian;
///   phi: exact values on the boundary, quadratic part inside).
[[nodiscard]] inline ScalarField eval_expression(const json& spec, const std::string& role, const GridDomain& d,
                                                 const FuncFamily& F, const HermitianField& chi, const std::string& base) {
  json j = spec;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    static const std::vector<std::string> ids{"zero", "constant", "linear", "wave", "bump", "manufactured"};
    if (std::find(ids.begin(), ids.end(), s) == ids.end()) {
      ScalarField f = load_field(detail::resolve(base, s));
      if (!f.domain().same_shape(d)) fail(ErrorKind::config, "config: " + role + " field grid differs from the domain");
      return f;
    }
    j = json{{"expr", s}};
  }
  if (!j.is_object()) fail(ErrorKind::config, "config: " + role + " must be an expression or a field file");
  if (j.contains("file")) return eval_expression(j.at("file"), role, d, F, chi, base);
  const auto id = detail::get_or<std::string>(j, "expr", "");
  ScalarField f(d);
  if (id == "zero") return f;
  if (id == "constant") return ScalarField(d, detail::get_or<double>(j, "value", 0.0));
  if (id == "linear") {
    const double a = detail::get_or<double>(j, "a", 0.0), b = detail::get_or<double>(j, "b", 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) f[i] = a * detail::s_coord(d, i, 0) + b * detail::s_coord(d, i, 1);
    return f;
  }
  if (id == "wave") {
    const double c = detail::get_or<double>(j, "base", 0.0), A = detail::get_or<double>(j, "amplitude", 0.1);
    for (std::size_t i = 0; i < d.size(); ++i)
      f[i] = c + A * std::sin(3.0 * detail::s_coord(d, i, 0)) * std::cos(2.0 * detail::s_coord(d, i, 1));
    return f;
  }
  if (id == "bump") {
    const double cx = detail::get_or<double>(j, "cx", 0.5), cy = detail::get_or<double>(j, "cy", 0.5);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x = detail::s_coord(d, i, 0) - cx, y = detail::s_coord(d, i, 1) - cy;
      f[i] = x * x + y * y;
    }
    return f;
  }
  if (id == "manufactured") {
    const auto shape = detail::get_or<std::string>(j, "shape", d.kind() == DomainKind::torus ? "torus-wave" : "s-wave");
    const double A = detail::get_or<double>(j, "amplitude", 0.1);
    if (shape != "s-wave" && shape != "torus-wave") fail(ErrorKind::config, "config: unknown manufactured shape '" + shape + "'");
    if (shape == "s-wave" && d.kind() != DomainKind::product_xs) fail(ErrorKind::config, "config: s-wave needs a product domain");
    if (shape == "torus-wave" && d.n() < 2) fail(ErrorKind::config, "config: torus-wave needs n >= 2");
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (role == "psi") {
        const auto lam = eigenvalues(chi.at(i) + detail::manufactured_hessian(shape, A, d, i));
        if (!in_cone(lam, F.cone_index())) fail(ErrorKind::config, "config: manufactured amplitude leaves the cone");
        f[i] = eval_f(F, lam);
      } else if (shape == "s-wave" && d.role(i) == NodeRole::interior) {
        const double x = detail::s_coord(d, i, 0), y = detail::s_coord(d, i, 1);
        f[i] = A * (x * x + x * y);
      } else {
        f[i] = manufactured_value(shape, A, d, i);
      }
    }
    return f;
  }
  fail(ErrorKind::config, "config: unknown expression '" + id + "' for " + role);
}

[[nodiscard]] inline RunOptions parse_options(const json& j) {
  RunOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) fail(ErrorKind::config, "config: options must be an object");
  using detail::get_or;
  o.solve.tol = get_or<double>(j, "tol", o.solve.tol);
  o.solve.max_iterations = get_or<int>(j, "max_iterations", o.solve.max_iterations);
  o.solve.linear_tol = get_or<double>(j, "linear_tol", o.solve.linear_tol);
  o.solve.strictness = get_or<double>(j, "strictness", o.solve.strictness);
  o.solve.continuation_steps = get_or<int>(j, "continuation_steps", o.solve.continuation_steps);
  const auto cont = get_or<std::string>(j, "continuation", "fallback");
  if (cont == "off") o.solve.continuation = Continuation::off;
  else if (cont == "on") o.solve.continuation = Continuation::on;
  else if (cont == "fallback") o.solve.continuation = Continuation::fallback;
  else fail(ErrorKind::config, "config: continuation must be off, on or fallback");
  o.ladder = get_or<std::vector<double>>(j, "ladder", o.ladder);
  o.levels = get_or<std::vector<double>>(j, "levels", o.levels);
  o.amplitudes = get_or<std::vector<double>>(j, "amplitudes", o.amplitudes);
  o.boundary_shift = get_or<double>(j, "boundary_shift", o.boundary_shift);
  o.stability_eps = get_or<double>(j, "stability_eps", o.stability_eps);
  o.count = get_or<int>(j, "count", o.count);
  if (j.contains("seed")) o.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (o.count < 1) fail(ErrorKind::config, "config: count must be positive");
  return o;
}

/// Builds the problem from a parsed document. `base` resolves relative field-file paths.
[[nodiscard]] inline LoadedConfig load_config(const json& j, const std::string& base = "") {
  if (!j.is_object()) fail(ErrorKind::config, "config: top level must be an object");
  LoadedConfig cfg;
  cfg.options = parse_options(j.contains("options") ? j.at("options") : json());
  cfg.run_id = detail::get_or<std::string>(j, "run_id", "run");
  if (!j.contains("domain")) return cfg;
  const GridDomain d = detail::parse_domain(j.at("domain"));
  const FuncFamily F = detail::parse_family(detail::require(j, "family"), d.n());
  const auto mode_s = detail::get_or<std::string>(j, "mode", d.kind() == DomainKind::torus ? "closed" : "dirichlet");
  if (mode_s != "closed" && mode_s != "dirichlet") fail(ErrorKind::config, "config: mode must be closed or dirichlet");
  const SolveMode mode = mode_s == "closed" ? SolveMode::closed : SolveMode::dirichlet;
  const HermitianField chi = detail::parse_chi(j.contains("chi") ? j.at("chi") : json("identity"), d, base);
  const bool degenerate = detail::get_or<bool>(j, "degenerate", false);
  ScalarField psi(d);
  if (j.contains("psi")) psi = eval_expression(j.at("psi"), "psi", d, F, chi, base);
  else if (!degenerate) fail(ErrorKind::config, "config: missing field 'psi'");
  ScalarField phi(d);
  if (j.contains("phi")) phi = eval_expression(j.at("phi"), "phi", d, F, chi, base);
  if (degenerate) cfg.weight = eval_expression(detail::require(j, "weight"), "weight", d, F, chi, base);
  cfg.spec = ProblemSpec{d, F, chi, psi, phi, mode, degenerate};
  try {
    cfg.spec->validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("config: ") + e.what());
  }
  return cfg;
}

[[nodiscard]] inline LoadedConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::config, "cannot open config file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("config: parse error: ") + e.what());
  }
  LoadedConfig cfg = load_config(j, std::filesystem::path(path).parent_path().string());
  if (!j.contains("run_id")) cfg.run_id = std::filesystem::path(path).stem().string();
  return cfg;
}

}  // namespace hcl
