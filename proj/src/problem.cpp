#include "bouss/problem.hpp"

#include <numbers>

namespace bouss {

template <class T>
T Symbol<T>::mu(MultiIndex k) const {
  if (k.k2 == 0) throw DomainError("mu_k is undefined for k2 = 0");
  const double a = static_cast<double>(k.k1) * k.k1;
  const double b = static_cast<double>(k.k2) * k.k2;
  return time_coef * (T(a) / T(b)) + space_coef * T(b) - T(1);
}

Symbol<double> make_symbol(const Params& p) {
  constexpr double pi = std::numbers::pi;
  return {p.L * p.L / (4.0 * pi * pi), 4.0 * pi * pi * p.lambda};
}

Symbol<Interval> make_symbol_enclosure(const Params& p) {
  const Interval lambda(rnd::next_down(p.lambda), rnd::next_up(p.lambda));
  const Interval L(rnd::next_down(p.L), rnd::next_up(p.L));
  const Interval pi2 = square(pi_interval());
  return {square(L) / (Interval(4.0) * pi2), Interval(4.0) * pi2 * lambda};
}

double mu(MultiIndex k, const Params& p) { return make_symbol(p).mu(k); }

template <class T>
ResidualVector<T> residual(const SymCoeffs<T>& x, const Symbol<T>& s, Truncation range) {
  const Truncation lim = x.truncation().doubled_minus_one();
  if (range.m1 > lim.m1 || range.m2 > lim.m2)
    throw ShapeError("residual range exceeds F_{2m-1}");
  const EvenGrid<T> sq = conv_square(x);
  ResidualVector<T> f(range);
  for (const MultiIndex& k : range.indices()) f[k] = s.mu(k) * x.x().at(k) - sq.at(k);
  return f;
}

ResidualVector<double> residual(const SymCoeffs<double>& x, const Params& p, Truncation range) {
  return residual(x, make_symbol(p), range);
}

template <class T>
T coupling(const SymCoeffs<T>& x, MultiIndex k, MultiIndex j) {
  T sum = x.c({k.k1 - j.k1, k.k2 - j.k2}) + x.c({k.k1 + j.k1, k.k2 + j.k2});
  if (j.k1 != 0) sum += x.c({k.k1 - j.k1, k.k2 + j.k2}) + x.c({k.k1 + j.k1, k.k2 - j.k2});
  return sum;
}

template <class T>
T jacobian_entry(const SymCoeffs<T>& x, const Symbol<T>& s, MultiIndex k, MultiIndex j) {
  const T off = T(2) * coupling(x, k, j);
  return k == j ? s.mu(k) - off : -off;
}

template <class T>
Matrix<T> jacobian_block(const SymCoeffs<T>& x, const Symbol<T>& s) {
  const Truncation m = x.truncation();
  const int n = m.size();
  Matrix<T> J(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const MultiIndex k = m.index(r);
    for (int c = 0; c < n; ++c) J(r, c) = jacobian_entry(x, s, k, m.index(c));
  }
  return J;
}

Matrix<double> jacobian_block(const SymCoeffs<double>& x, const Params& p) {
  return jacobian_block(x, make_symbol(p));
}

template <class T>
T energy(const SymCoeffs<T>& x, const Symbol<T>& s) {
  const int r1 = x.truncation().m1 - 1, r2 = x.truncation().m2 - 1;
  const EvenGrid<T> sq = conv_square(x);
  const std::vector<T> cube = conv_triple(x);
  const T w = s.energy_weight();
  const T half(0.5), third = T(1) / T(3);

  // Line sums over k2 = 0; every term is even in k1.
  T total(0);
  for (int k1 = 0; k1 <= 3 * r1; ++k1) {
    // (alpha*alpha)_(k1,0) = -sum_j j2^2 c_j c_(k1-j1, j2).
    T aa(0);
    if (k1 <= 2 * r1)
      for (int j1 = k1 - r1; j1 <= r1; ++j1)
        for (int j2 = 1; j2 <= r2; ++j2)
          aa -= T(2.0 * j2 * j2) * x.sym({j1, j2}) * x.sym({k1 - j1, j2});
    T term = w * aa + half * sq.at({k1, 0}) + third * cube[static_cast<std::size_t>(k1)];
    total += k1 == 0 ? term : T(2) * term;
  }
  return total;
}

double energy(const SymCoeffs<double>& x, const Params& p) { return energy(x, make_symbol(p)); }

template <class T>
EnergyGradient<T> energy_gradient(const SymCoeffs<T>& x, const Symbol<T>& s) {
  const Truncation m = x.truncation();
  const EvenGrid<T> sq = conv_square(x);
  // Column sums along k1 at fixed k2 of c and c*c.
  auto line_c = [&](int k2) {
    T sum = x.c({0, k2});
    for (int k1 = 1; k1 < m.m1; ++k1) sum += T(2) * x.c({k1, k2});
    return sum;
  };
  auto line_sq = [&](int k2) {
    T sum = sq.at({0, k2});
    for (int k1 = 1; k1 < sq.n1(); ++k1) sum += T(2) * sq.at({k1, k2});
    return sum;
  };
  EnergyGradient<T> g{x.c00() + line_sq(0), Sequence<T>(m)};
  for (int k2 = 1; k2 < m.m2; ++k2) {
    const T per = (T(1) - s.space_coef * T(double(k2) * k2)) * line_c(k2) + line_sq(k2);
    for (int k1 = 0; k1 < m.m1; ++k1) g.d_x[{k1, k2}] = k1 == 0 ? T(2) * per : T(4) * per;
  }
  return g;
}

#define BOUSS_INSTANTIATE(T)                                                                  \
  template struct Symbol<T>;                                                                  \
  template ResidualVector<T> residual<T>(const SymCoeffs<T>&, const Symbol<T>&, Truncation); \
  template T coupling<T>(const SymCoeffs<T>&, MultiIndex, MultiIndex);                        \
  template T jacobian_entry<T>(const SymCoeffs<T>&, const Symbol<T>&, MultiIndex, MultiIndex); \
  template Matrix<T> jacobian_block<T>(const SymCoeffs<T>&, const Symbol<T>&);                \
  template T energy<T>(const SymCoeffs<T>&, const Symbol<T>&);                                \
  template EnergyGradient<T> energy_gradient<T>(const SymCoeffs<T>&, const Symbol<T>&);

BOUSS_INSTANTIATE(double)
BOUSS_INSTANTIATE(Interval)

#undef BOUSS_INSTANTIATE

}  // namespace bouss
