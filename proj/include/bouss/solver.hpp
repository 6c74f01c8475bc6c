#pragma once

#include <stdexcept>
#include <vector>

#include "bouss/matrix.hpp"
#include "bouss/problem.hpp"
#include "bouss/space.hpp"

namespace bouss {

class SingularJacobian : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NewtonOptions {
  double tol = 1e-13;
  int max_iter = 30;
};

struct NewtonReport {
  int iterations = 0;
  double residual = 0;  // final infinity norm
  std::vector<double> history;
};

struct NewtonResult {
  SymCoeffs<double> x;
  NewtonReport report;
};

// Unknowns (c00, x over F_m); equations E(x) - energy_target = 0 and
// f_k = 0 for k in F_m.
struct AugmentedSystem {
  Params params;
  double energy_target = 0;
};

// Converged when the residual drops below tol, or when it stops decreasing
// while already below tol times the roundoff scale (1 + ||c||_1)^3 of the
// convolutions; large orbits cannot reach an absolute 1e-13.
NewtonResult newton_solve(const AugmentedSystem& sys, const SymCoeffs<double>& guess,
                          const NewtonOptions& opt = {});
// c00 held fixed; solves f_k = 0 on F_m for x.
NewtonResult newton_solve_fixed_mean(const Params& p, const SymCoeffs<double>& guess,
                                     const NewtonOptions& opt = {});
// x_mode held at amplitude; solves f_k = 0 on F_m for (c00, remaining x).
NewtonResult newton_solve_pinned(const Params& p, MultiIndex mode, double amplitude,
                                 const SymCoeffs<double>& guess, const NewtonOptions& opt = {});

// Single-mode ansatz near the bifurcation from the constant state, with c00
// from the linear balance mu_mode = 2 c00 and the first harmonics from the
// quadratic feedback, refined by Newton at fixed amplitude when possible.
SymCoeffs<double> seed_branch(MultiIndex mode, const Params& p, double amplitude);

enum class Policy { Energy, Mean };

struct BranchPoint {
  Params params;
  SymCoeffs<double> x;
  double energy_target = 0;
  double energy = 0;
  double norm_nu = 0;
  double residual = 0;  // ||f||_inf on F_m
  int iterations = 0;
};

struct Branch {
  std::vector<BranchPoint> points;
};

class StepUnderflow : public std::runtime_error {
 public:
  StepUnderflow(const std::string& what, Branch partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const Branch& partial() const noexcept { return partial_; }

 private:
  Branch partial_;
};

BranchPoint make_branch_point(const Params& p, const SymCoeffs<double>& x, double energy_target,
                              int iterations = 0);

struct ContinuationOptions {
  double lambda_end = 0;
  double step = 1e-3;
  double step_min = 1e-7;
  double step_max = 1e-2;
  int max_steps = 100000;
  Policy policy = Policy::Energy;
  NewtonOptions newton;
  // Intermediate lambda values the branch must land on exactly.
  std::vector<double> stops;
  // Rejects steps whose ||x||_nu shrinks below this fraction of the previous
  // point; guards against sliding onto the constant solution.
  double collapse_ratio = 0.5;
};

Branch continue_branch(const BranchPoint& start, const ContinuationOptions& opt);

Matrix<double> approx_inverse(const Matrix<double>& J);

// Fraction of sum |x_k| carried by the outermost layer k1 = m1-1 or k2 = m2-1.
double trailing_mass(const SymCoeffs<double>& x);

// Grows m by 25% and re-solves until trailing_mass <= threshold or m1, m2
// would exceed m_cap.
BranchPoint ensure_resolution(const BranchPoint& pt, Policy policy, const NewtonOptions& opt = {},
                              double threshold = 1e-14, int m_cap = 160);

}  // namespace bouss
