#pragma once

#include "bouss/interval.hpp"
#include "bouss/matrix.hpp"
#include "bouss/space.hpp"

namespace bouss {

// mu_k = time_coef k1^2/k2^2 + space_coef k2^2 - 1 with
// time_coef = L^2/(4 pi^2), space_coef = 4 pi^2 lambda.
template <class T>
struct Symbol {
  T time_coef;
  T space_coef;

  T mu(MultiIndex k) const;
  // 2 lambda pi^2 = space_coef / 2, the weight of (alpha*alpha) in the energy.
  T energy_weight() const { return space_coef / T(2); }
};

Symbol<double> make_symbol(const Params& p);
// Encloses the symbol for every lambda, L within one ulp of the stored values.
Symbol<Interval> make_symbol_enclosure(const Params& p);

double mu(MultiIndex k, const Params& p);

template <class T>
using ResidualVector = Sequence<T>;

// f_k = mu_k x_k - (c^2)_k for k in F_range (range within F_{2m-1}).
template <class T>
ResidualVector<T> residual(const SymCoeffs<T>& x, const Symbol<T>& s, Truncation range);
ResidualVector<double> residual(const SymCoeffs<double>& x, const Params& p, Truncation range);

// C_{k,j}: sum of c(x)_{k-l} over the symmetry orbit l of j in the
// upper half plane, i.e. (j1, j2), (-j1, j2) and their negatives.
template <class T>
T coupling(const SymCoeffs<T>& x, MultiIndex k, MultiIndex j);

template <class T>
T jacobian_entry(const SymCoeffs<T>& x, const Symbol<T>& s, MultiIndex k, MultiIndex j);

// Df over F_m x F_m in flat order.
template <class T>
Matrix<T> jacobian_block(const SymCoeffs<T>& x, const Symbol<T>& s);
Matrix<double> jacobian_block(const SymCoeffs<double>& x, const Params& p);

// E = sum over k2 = 0 of 2 lambda pi^2 (alpha*alpha)_k + (c*c)_k / 2 + (c*c*c)_k / 3,
// alpha_k = c_k k2.
template <class T>
T energy(const SymCoeffs<T>& x, const Symbol<T>& s);
double energy(const SymCoeffs<double>& x, const Params& p);

template <class T>
struct EnergyGradient {
  T d_c00;
  Sequence<T> d_x;
};

template <class T>
EnergyGradient<T> energy_gradient(const SymCoeffs<T>& x, const Symbol<T>& s);

}  // namespace bouss
