#include "bouss/space.hpp"

#include <string>

namespace bouss {

std::vector<MultiIndex> Truncation::indices() const {
  std::vector<MultiIndex> out;
  out.reserve(static_cast<std::size_t>(std::max(size(), 0)));
  for (int k1 = 0; k1 < m1; ++k1)
    for (int k2 = 1; k2 < m2; ++k2) out.push_back({k1, k2});
  return out;
}

std::vector<MultiIndex> difference(Truncation outer, Truncation inner) {
  std::vector<MultiIndex> out;
  for (const MultiIndex& k : outer.indices())
    if (!inner.contains(k)) out.push_back(k);
  return out;
}

std::vector<MultiIndex> ring(int n, Truncation m) { return difference(m.scaled(n + 1), m.scaled(n)); }

std::vector<MultiIndex> signed_block(Truncation m) {
  std::vector<MultiIndex> out;
  for (int k1 = -(m.m1 - 1); k1 <= m.m1 - 1; ++k1)
    for (int k2 = -(m.m2 - 1); k2 <= m.m2 - 1; ++k2)
      if (k2 != 0) out.push_back({k1, k2});
  return out;
}

void Params::validate() const {
  if (!(lambda > 0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be positive, got " + std::to_string(lambda));
  if (!(L > 0) || !std::isfinite(L))
    throw std::invalid_argument("L must be positive, got " + std::to_string(L));
  if (!(nu > 1) || !std::isfinite(nu))
    throw std::invalid_argument("nu must exceed 1, got " + std::to_string(nu));
  if (m.m1 < 1 || m.m2 < 2)
    throw std::invalid_argument("truncation needs m1 >= 1 and m2 >= 2");
}

template <class T>
NuPowers<T>::NuPowers(T nu, int max_order) : pw_(static_cast<std::size_t>(max_order) + 1) {
  pw_[0] = T(1);
  for (std::size_t n = 1; n < pw_.size(); ++n) pw_[n] = pw_[n - 1] * nu;
}

template <class T>
T norm_nu(const Sequence<T>& x, const NuPowers<T>& pw) {
  const Truncation m = x.truncation();
  auto v = x.values();
  T sum(0);
  for (std::size_t i = 0; i < v.size(); ++i)
    sum += magnitude(v[i]) * pw(m.index(static_cast<int>(i)));
  return sum;
}

template <class T>
T norm_nu(const SymCoeffs<T>& x, const T& nu) {
  return norm_nu(x.x(), NuPowers<T>(nu, x.truncation().max_order()));
}

namespace {

// c(x) on the signed box |k1| < m1, |k2| < m2.
template <class T>
struct SignedBox {
  int r1, r2;  // radii: m1 - 1, m2 - 1
  std::vector<T> v;

  explicit SignedBox(const SymCoeffs<T>& x)
      : r1(x.truncation().m1 - 1), r2(x.truncation().m2 - 1),
        v(static_cast<std::size_t>(2 * r1 + 1) * (2 * r2 + 1), T(0)) {
    for (int a = -r1; a <= r1; ++a)
      for (int b = -r2; b <= r2; ++b) ref(a, b) = x.c({a, b});
  }
  T& ref(int a, int b) { return v[static_cast<std::size_t>(a + r1) * (2 * r2 + 1) + (b + r2)]; }
  const T& get(int a, int b) const {
    return v[static_cast<std::size_t>(a + r1) * (2 * r2 + 1) + (b + r2)];
  }
};

}  // namespace

template <class T>
EvenGrid<T> conv_square(const SymCoeffs<T>& x) {
  const SignedBox<T> box(x);
  const int r1 = box.r1, r2 = box.r2;
  EvenGrid<T> out(2 * r1 + 1, 2 * r2 + 1);
#pragma omp parallel for schedule(dynamic)
  for (int k1 = 0; k1 <= 2 * r1; ++k1) {
    for (int k2 = 0; k2 <= 2 * r2; ++k2) {
      T sum(0);
      for (int j1 = k1 - r1; j1 <= r1; ++j1)
        for (int j2 = k2 - r2; j2 <= r2; ++j2) sum += box.get(j1, j2) * box.get(k1 - j1, k2 - j2);
      out.ref(k1, k2) = sum;
    }
  }
  return out;
}

template <class T>
std::vector<T> conv_triple(const SymCoeffs<T>& x) {
  const SignedBox<T> box(x);
  const EvenGrid<T> sq = conv_square(x);
  const int r1 = box.r1, r2 = box.r2;
  std::vector<T> out(static_cast<std::size_t>(3 * r1 + 1), T(0));
  for (int k1 = 0; k1 <= 3 * r1; ++k1) {
    T sum(0);
    // (c^2)_j c_{(k1,0)-j} with |k1 - j1| <= r1, |j2| <= r2.
    for (int j1 = k1 - r1; j1 <= k1 + r1; ++j1) {
      if (std::abs(j1) > 2 * r1) continue;
      for (int j2 = -r2; j2 <= r2; ++j2) sum += sq.at({j1, j2}) * box.get(k1 - j1, -j2);
    }
    out[static_cast<std::size_t>(k1)] = sum;
  }
  return out;
}

#define BOUSS_INSTANTIATE(T)                                          \
  template class NuPowers<T>;                                         \
  template T norm_nu<T>(const Sequence<T>&, const NuPowers<T>&);      \
  template T norm_nu<T>(const SymCoeffs<T>&, const T&);               \
  template EvenGrid<T> conv_square<T>(const SymCoeffs<T>&);           \
  template std::vector<T> conv_triple<T>(const SymCoeffs<T>&);

BOUSS_INSTANTIATE(double)
BOUSS_INSTANTIATE(Interval)

#undef BOUSS_INSTANTIATE

}  // namespace bouss
