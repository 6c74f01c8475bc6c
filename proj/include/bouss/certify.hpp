#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "bouss/interval.hpp"
#include "bouss/problem.hpp"
#include "bouss/space.hpp"

namespace bouss {

class MuSignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoundSet {
  Interval Y, Z0, Z1, Z2;
};

class NoNegativeRadius : public std::runtime_error {
 public:
  explicit NoNegativeRadius(const std::string& what, BoundSet b = {})
      : std::runtime_error(what), bounds_(b) {}
  const BoundSet& bounds() const noexcept { return bounds_; }

 private:
  BoundSet bounds_;
};

// Interval data shared by all bounds of one proof: the symbol enclosure,
// nu powers, and mu / mu^-1 caches over F_{4m}.
class ProofContext {
 public:
  explicit ProofContext(const Params& p);

  const Params& params() const noexcept { return params_; }
  Truncation m() const noexcept { return params_.m; }
  const Symbol<Interval>& symbol() const noexcept { return symbol_; }
  const Interval& nu() const noexcept { return nu_; }
  Interval nu_pow(int n) const;
  Interval nu_pow(MultiIndex k) const { return nu_pow(order(k)); }
  // mu at |k| componentwise; k2 != 0.
  Interval mu(MultiIndex k) const;
  // 1/mu_k for k in I_m; throws MuSignError unless mu_k > 0 is proved.
  Interval mu_inv(MultiIndex k) const;

 private:
  Params params_;
  Symbol<Interval> symbol_;
  Interval nu_;
  NuPowers<Interval> pw_;
  Truncation cache_;
  std::vector<Interval> mu_cache_;
};

// cond_m: m2 >= max{m1, L / (2 pi^2 sqrt(lambda))}, proved over the
// parameter enclosure.
bool check_cond_m(const Params& p);

// A (block A^(m), tail mu^-1) or A-dagger (block Df on F_m, tail mu).
struct TailOperator {
  enum class Kind { Inverse, Jacobian };
  Kind kind = Kind::Inverse;
  Truncation m;
  MidRadMatrix block;

  Interval entry(MultiIndex k, MultiIndex j, const ProofContext& ctx) const;
};

TailOperator make_A(const Matrix<double>& Am, Truncation m);
TailOperator make_A_dagger(const SymCoeffs<Interval>& xbar, const ProofContext& ctx);

Interval bound_Y(const SymCoeffs<Interval>& xbar, const TailOperator& A, const ProofContext& ctx);
Interval bound_Z0(const TailOperator& A, const TailOperator& Adag, const ProofContext& ctx);

struct Z1Parts {
  Interval case1;  // max over q in F_m
  Interval case2;  // max over q in F_2m \ F_m
  Interval tail;   // max of the column bound over R_2
  Interval value;  // max of the three
};

Z1Parts bound_Z1_parts(const SymCoeffs<Interval>& xbar, const TailOperator& A,
                       const ProofContext& ctx);
Interval bound_Z1(const SymCoeffs<Interval>& xbar, const TailOperator& A, const ProofContext& ctx);

// Column bound for q in I_2m:
//   2 sum_{p in F_m^pm or p = 0, (p+q)_2 != 0} mult(p+q) mu_{p+q}^-1 |c_p| nu^|p|,
// mult(v) = 2 if v1 = 0 else 1. Dominates ||A Gamma e_q|| / nu^|q| and is
// maximized over I_2m on the ring R_2 when cond_m holds.
Interval tail_column_bound(MultiIndex q, const SymCoeffs<Interval>& xbar, const ProofContext& ctx);

// max of mu_k^-1 over R_1.
Interval ring_mu_inv_max(const ProofContext& ctx);

Interval bound_Z2(const TailOperator& A, const ProofContext& ctx);

bool verify_A_injective(const TailOperator& A, const Interval& Z0, const ProofContext& ctx);

struct RadiiResult {
  Interval r_min;
  Interval r_max;
  double r_star = 0;
  Interval p_at_r_star;
};

// p(r) = Y + (Z0 + Z1 - 1) r + Z2 r^2 on the upper endpoints of the bounds.
RadiiResult radii_polynomial(const BoundSet& b);

struct ErrorBounds {
  double c0 = 0;
  double l2 = 0;
};

ErrorBounds error_bounds(double r_star);

struct ProofResult {
  Params params;
  BoundSet bounds;
  Z1Parts z1;
  RadiiResult radii;
  ErrorBounds errors;
  Interval min_mu_ring1;
  bool cond_m = false;
  bool injective = false;
  double wall_time = 0;
};

// Full validation of xbar (c00 frozen). Throws PreconditionFailure,
// MuSignError or NoNegativeRadius; returns only on success.
ProofResult prove(const SymCoeffs<double>& xbar, const Params& p);

}  // namespace bouss
