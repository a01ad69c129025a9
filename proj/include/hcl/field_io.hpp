#pragma once

// "HCL1" field container: magic, u32 n, u32 kind, u32 annulus flag, then per real axis
// u32 cell count and f64 length, then one little-endian f64 per node (axis 0 fastest).
// "HCLH" holds a Hermitian field with the same header and n*n (re, im) pairs per node,
// column-major within a node.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "hcl/error.hpp"
#include "hcl/grid.hpp"

namespace hcl {

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  std::array<unsigned char, sizeof(T)> b{};
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  os.write(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), sizeof(T))) fail(ErrorKind::config, "field container truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

}  // namespace detail

namespace detail {

inline void write_header(std::ostream& os, const char* magic, const GridDomain& d) {
  os.write(magic, 4);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.n()));
  put_le<std::uint32_t>(os, d.kind() == DomainKind::torus ? 0u : 1u);
  put_le<std::uint32_t>(os, d.annulus() ? 1u : 0u);
  for (int a = 0; a < d.axes(); ++a) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.cells(a)));
    put_le<double>(os, d.length(a));
  }
}

inline GridDomain read_header(std::istream& is, const char* magic) {
  char m[4];
  if (!is.read(m, 4) || std::memcmp(m, magic, 4) != 0)
    fail(ErrorKind::config, std::string("not an ") + std::string(magic, 4) + " field container");
  const auto n = static_cast<int>(get_le<std::uint32_t>(is));
  const auto kind = get_le<std::uint32_t>(is);
  const bool annulus = get_le<std::uint32_t>(is) != 0;
  if (n < 1 || n > 16 || kind > 1) fail(ErrorKind::config, "field container header out of range");
  std::vector<int> cells;
  std::vector<double> lengths;
  for (int a = 0; a < 2 * n; ++a) {
    const auto c = get_le<std::uint32_t>(is);
    if (c > (1u << 20)) fail(ErrorKind::config, "field container cell count out of range");
    cells.push_back(static_cast<int>(c));
    lengths.push_back(get_le<double>(is));
  }
  try {
    return kind == 0 ? GridDomain::torus(n, cells, lengths) : GridDomain::product(n, cells, lengths, annulus);
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("field container geometry: ") + e.what());
  }
}

}  // namespace detail

inline void write_field(std::ostream& os, const ScalarField& f) {
  detail::write_header(os, "HCL1", f.domain());
  for (double v : f.values()) detail::put_le<double>(os, v);
}

[[nodiscard]] inline ScalarField read_field(std::istream& is) {
  GridDomain d = detail::read_header(is, "HCL1");
  std::vector<double> v(d.size());
  for (double& x : v) x = detail::get_le<double>(is);
  return ScalarField(std::move(d), std::move(v));
}

inline void write_hermitian_field(std::ostream& os, const HermitianField& f) {
  detail::write_header(os, "HCLH", f.domain());
  for (const cplx& z : f.data()) {
    detail::put_le<double>(os, z.real());
    detail::put_le<double>(os, z.imag());
  }
}

[[nodiscard]] inline HermitianField read_hermitian_field(std::istream& is) {
  GridDomain d = detail::read_header(is, "HCLH");
  HermitianField f(d);
  const int n = d.n();
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<cplx> block(static_cast<std::size_t>(n) * n);
    for (auto& z : block) {
      const double re = detail::get_le<double>(is);
      z = cplx(re, detail::get_le<double>(is));
    }
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (std::abs(block[static_cast<std::size_t>(c) * n + r] - std::conj(block[static_cast<std::size_t>(r) * n + c])) > 1e-12)
          fail(ErrorKind::config, "Hermitian field container holds a non-Hermitian block");
    f.set(i, HermitianMatrix(n, std::move(block)));
  }
  return f;
}

inline void save_field(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::config, "cannot open " + path + " for writing");
  write_field(os, f);
}

[[nodiscard]] inline ScalarField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::config, "cannot open field file " + path);
  return read_field(is);
}

inline void save_hermitian_field(const std::string& path, const HermitianField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::config, "cannot open " + path + " for writing");
  write_hermitian_field(os, f);
}

[[nodiscard]] inline HermitianField load_hermitian_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::config, "cannot open field file " + path);
  return read_hermitian_field(is);
}

/// One row per node: the real-axis positions followed by the value.
inline void write_field_csv(std::ostream& os, const ScalarField& f) {
  const GridDomain& d = f.domain();
  for (int a = 0; a < d.axes(); ++a) os << (a % 2 == 0 ? "x" : "y") << a / 2 + 1 << ',';
  os << "value\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (int a = 0; a < d.axes(); ++a) os << d.position(i, a) << ',';
    os << f[i] << '\n';
  }
}

}  // namespace hcl
