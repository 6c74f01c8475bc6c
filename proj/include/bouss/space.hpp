#pragma once

#include <cmath>
#include <algorithm>
#include <compare>
#include <numbers>
#include <cstdlib>
#include <span>
#include <type_traits>
#include <stdexcept>
#include <vector>

#include "bouss/interval.hpp"
#include "bouss/matrix.hpp"

namespace bouss {

struct MultiIndex {
  int k1 = 0;
  int k2 = 0;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;
};

inline int order(MultiIndex k) noexcept { return std::abs(k.k1) + std::abs(k.k2); }

// F_m = {0 <= k1 < m1, 0 < k2 < m2}, stored row-major in (k1, k2).
struct Truncation {
  int m1 = 1;
  int m2 = 2;

  friend bool operator==(const Truncation&, const Truncation&) = default;

  int size() const noexcept { return m1 * (m2 - 1); }
  bool contains(MultiIndex k) const noexcept {
    return k.k1 >= 0 && k.k1 < m1 && k.k2 > 0 && k.k2 < m2;
  }
  int flat(MultiIndex k) const noexcept { return k.k1 * (m2 - 1) + (k.k2 - 1); }
  MultiIndex index(int flat) const noexcept { return {flat / (m2 - 1), flat % (m2 - 1) + 1}; }
  Truncation scaled(int n) const noexcept { return {n * m1, n * m2}; }
  // F_{2m-1}: support of quadratic terms.
  Truncation doubled_minus_one() const noexcept { return {2 * m1 - 1, 2 * m2 - 1}; }
  int max_order() const noexcept { return (m1 - 1) + (m2 - 1); }
  std::vector<MultiIndex> indices() const;
};

// F_m^± = {|k1| < m1, 0 < |k2| < m2}.
inline bool in_signed_block(MultiIndex k, Truncation m) noexcept {
  return std::abs(k.k1) < m.m1 && k.k2 != 0 && std::abs(k.k2) < m.m2;
}

// R_n = F_{(n+1)m} \ F_{nm}.
inline bool in_ring(MultiIndex k, int n, Truncation m) noexcept {
  return m.scaled(n + 1).contains(k) && !m.scaled(n).contains(k);
}

std::vector<MultiIndex> ring(int n, Truncation m);
// F_outer \ F_inner in lexicographic order.
std::vector<MultiIndex> difference(Truncation outer, Truncation inner);
// Members of F_m^± in lexicographic order.
std::vector<MultiIndex> signed_block(Truncation m);

struct Params {
  double lambda = 0.1446;
  double L = 2.0 * std::numbers::pi;
  double nu = 1.01;
  Truncation m{35, 35};

  // Throws std::invalid_argument on violated invariants.
  void validate() const;
};

// Dense values over F_m.
template <class T>
class Sequence {
 public:
  Sequence() = default;
  explicit Sequence(Truncation m) : m_(m), data_(static_cast<std::size_t>(std::max(m.size(), 0)), T(0)) {}

  Truncation truncation() const noexcept { return m_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator[](MultiIndex k) { return data_[m_.flat(k)]; }
  const T& operator[](MultiIndex k) const { return data_[m_.flat(k)]; }
  // Zero outside F_m.
  T at(MultiIndex k) const { return m_.contains(k) ? data_[m_.flat(k)] : T(0); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

 private:
  Truncation m_{};
  std::vector<T> data_;
};

// x over F_m plus the mean mode c00; represents c(x) = c00 + sym(x).
template <class T>
class SymCoeffs {
 public:
  SymCoeffs() = default;
  explicit SymCoeffs(Truncation m, T c00 = T(0)) : c00_(c00), x_(m) {}

  Truncation truncation() const noexcept { return x_.truncation(); }
  T& c00() noexcept { return c00_; }
  const T& c00() const noexcept { return c00_; }
  Sequence<T>& x() noexcept { return x_; }
  const Sequence<T>& x() const noexcept { return x_; }

  T& operator[](MultiIndex k) { return x_[k]; }
  const T& operator[](MultiIndex k) const { return x_[k]; }
  std::span<T> values() noexcept { return x_.values(); }
  std::span<const T> values() const noexcept { return x_.values(); }

  // sym(x) at a signed lattice index.
  T sym(MultiIndex k) const {
    if (k.k2 == 0) return T(0);
    return x_.at({std::abs(k.k1), std::abs(k.k2)});
  }
  // c(x) at a signed lattice index.
  T c(MultiIndex k) const {
    if (k.k1 == 0 && k.k2 == 0) return c00_;
    return sym(k);
  }

  // Zero-padded or truncated copy.
  SymCoeffs resized(Truncation m) const {
    SymCoeffs r(m, c00_);
    for (const MultiIndex& k : m.indices()) r[k] = x_.at(k);
    return r;
  }

 private:
  T c00_{};
  Sequence<T> x_;
};

template <class U, class T>
SymCoeffs<U> convert(const SymCoeffs<T>& x) {
  SymCoeffs<U> r(x.truncation(), U(x.c00()));
  auto src = x.values();
  auto dst = r.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = U(src[i]);
  return r;
}

// Even/even symmetric grid over 0 <= k1 < n1, 0 <= k2 < n2 with
// lookups at signed indices folded by |.|; zero outside.
template <class T>
class EvenGrid {
 public:
  EvenGrid() = default;
  EvenGrid(int n1, int n2) : n1_(n1), n2_(n2), data_(static_cast<std::size_t>(n1) * n2, T(0)) {}

  int n1() const noexcept { return n1_; }
  int n2() const noexcept { return n2_; }
  T& ref(int k1, int k2) { return data_[static_cast<std::size_t>(k1) * n2_ + k2]; }
  T at(MultiIndex k) const {
    const int a = std::abs(k.k1), b = std::abs(k.k2);
    if (a >= n1_ || b >= n2_) return T(0);
    return data_[static_cast<std::size_t>(a) * n2_ + b];
  }

 private:
  int n1_ = 0;
  int n2_ = 0;
  std::vector<T> data_;
};

// Table of nu^n for n = 0..max_order.
template <class T>
class NuPowers {
 public:
  NuPowers() = default;
  NuPowers(T nu, int max_order);
  const T& operator()(int n) const { return pw_.at(static_cast<std::size_t>(n)); }
  const T& operator()(MultiIndex k) const { return (*this)(order(k)); }
  int max_order() const noexcept { return static_cast<int>(pw_.size()) - 1; }

 private:
  std::vector<T> pw_;
};

inline double magnitude(double v) noexcept { return std::fabs(v); }
inline Interval magnitude(const Interval& v) { return abs(v); }

// ||x||_nu = sum |x_k| nu^|k| over F_m; c00 excluded.
template <class T>
T norm_nu(const Sequence<T>& x, const NuPowers<T>& pw);
template <class T>
T norm_nu(const SymCoeffs<T>& x, const T& nu);

// (c(x) * c(x))_k for 0 <= k1 <= 2(m1-1), 0 <= k2 <= 2(m2-1).
template <class T>
EvenGrid<T> conv_square(const SymCoeffs<T>& x);
// (c(x) * c(x) * c(x))_(k1, 0) for 0 <= k1 <= 3(m1-1).
template <class T>
std::vector<T> conv_triple(const SymCoeffs<T>& x);

// ||L|| = sup_j nu^-|j| sum_k |L_kj| nu^|k| for a finite block with rows
// and cols indexed by the given multi-indices, plus an optional diagonal
// tail acting on indices outside the block.
template <class T, class Entry>
T op_norm(std::span<const MultiIndex> rows, std::span<const MultiIndex> cols, Entry&& entry,
          const NuPowers<T>& pw, std::span<const T> tail = {}) {
  T best(0);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    T sum(0);
    for (std::size_t i = 0; i < rows.size(); ++i) sum += magnitude(T(entry(i, j))) * pw(rows[i]);
    const T col = sum / pw(cols[j]);
    if constexpr (std::is_same_v<T, double>) best = std::max(best, col);
    else best = max(best, col);
  }
  for (const T& d : tail) {
    if constexpr (std::is_same_v<T, double>) best = std::max(best, magnitude(d));
    else best = max(best, magnitude(d));
  }
  return best;
}

template <class T>
T op_norm(const Matrix<T>& block, std::span<const MultiIndex> rows,
          std::span<const MultiIndex> cols, const NuPowers<T>& pw, std::span<const T> tail = {}) {
  if (block.rows() != rows.size() || block.cols() != cols.size())
    throw ShapeError("op_norm: block shape does not match index lists");
  return op_norm<T>(rows, cols, [&](std::size_t i, std::size_t j) { return block(i, j); }, pw, tail);
}

}  // namespace bouss
