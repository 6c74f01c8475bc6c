#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "bouss/problem.hpp"
#include "bouss/solver.hpp"

using namespace bouss;

namespace {

Params params(double lambda, Truncation m) {
  Params p;
  p.lambda = lambda;
  p.m = m;
  return p;
}

double sup_residual(const SymCoeffs<double>& x, const Params& p) {
  const auto f = residual(x, p, p.m);
  double r = 0;
  for (double v : f.values()) r = std::max(r, std::fabs(v));
  return r;
}

// (0,1) branch point at lambda = 0.03, as used throughout.
BranchPoint seeded_start(Truncation m) {
  const Params p = params(0.03, m);
  const SymCoeffs<double> seed = seed_branch({0, 1}, p, 0.2);
  const double E = energy(seed, p);
  const NewtonResult res = newton_solve({p, E}, seed);
  return make_branch_point(p, res.x, E, res.report.iterations);
}

}  // namespace

TEST_CASE("newton on the constant solution") {
  const Params p = params(0.2, {4, 4});
  const double a = 0.3;
  SymCoeffs<double> x(p.m, a);
  const double E = a * a / 2 + a * a * a / 3;
  const NewtonResult res = newton_solve({p, E}, x);
  CHECK(res.report.iterations <= 1);
  CHECK(res.report.residual < 1e-15);
  CHECK(res.x.c00() == doctest::Approx(a).epsilon(1e-15));
}

TEST_CASE("newton converges quadratically from a perturbed constant") {
  const Params p = params(0.2, {4, 4});
  const double a = 0.3;
  SymCoeffs<double> x(p.m, a + 1e-3);
  x[{0, 1}] = 2e-3;
  x[{1, 2}] = -1e-3;
  const NewtonResult res = newton_solve({p, a * a / 2 + a * a * a / 3}, x);
  const auto& h = res.report.history;
  REQUIRE(h.size() >= 3);
  int checked = 0;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) {
    if (h[i] > 1e-2 || h[i + 1] < 1e-12) continue;
    // error exponent near 2
    CHECK(std::log(h[i + 1]) / std::log(h[i]) > 1.7);
    ++checked;
  }
  CHECK(checked >= 1);
  CHECK(res.report.residual < 1e-13);
  CHECK(res.x.c00() == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("newton failure paths") {
  const Params p = params(0.2, {4, 4});
  SymCoeffs<double> far(p.m, 5.0);
  for (double& v : far.values()) v = 3.0;
  NewtonOptions o;
  o.max_iter = 2;
  CHECK_THROWS_AS(newton_solve({p, 0.0}, far, o), NoConvergence);
  CHECK_THROWS_AS(newton_solve_fixed_mean(p, far, o), NoConvergence);
}

TEST_CASE("seeds") {
  SUBCASE("(0,1) just above its bifurcation") {
    const Params p = params(0.03, {12, 12});
    CHECK(p.lambda > 1.0 / (4 * std::numbers::pi * std::numbers::pi));
    const SymCoeffs<double> seed = seed_branch({0, 1}, p, 0.2);
    const NewtonResult res = newton_solve({p, energy(seed, p)}, seed);
    CHECK(norm_nu(res.x, p.nu) > 1e-6);
    CHECK(res.report.residual < 1e-13);
  }
  SUBCASE("(1,2) near its bifurcation") {
    const Params p = params(0.006, {12, 12});
    CHECK(std::fabs(p.lambda - 3.0 / (64 * std::numbers::pi * std::numbers::pi)) < 2e-3);
    const SymCoeffs<double> seed = seed_branch({1, 2}, p, 0.05);
    const NewtonResult res = newton_solve({p, energy(seed, p)}, seed);
    CHECK(norm_nu(res.x, p.nu) > 1e-6);
    CHECK(res.report.residual < 1e-13);
    double off_axis = 0;
    for (const MultiIndex& k : p.m.indices())
      if (k.k1 > 0) off_axis += std::fabs(res.x[k]);
    CHECK(off_axis > 1e-6);
  }
  SUBCASE("zero amplitude is the trivial solution") {
    const Params p = params(0.1446, {6, 6});
    const SymCoeffs<double> seed = seed_branch({0, 1}, p, 0.0);
    CHECK(seed.c00() == 0.0);
    for (double v : seed.values()) CHECK(v == 0.0);
    const NewtonResult res = newton_solve({p, 0.0}, seed);
    CHECK(res.report.residual == 0.0);
  }
  SUBCASE("mode outside F_m") {
    CHECK_THROWS_AS(seed_branch({7, 1}, params(0.1, {6, 6}), 0.1), std::invalid_argument);
  }
}

TEST_CASE("continuation") {
  const Truncation m{20, 20};
  const BranchPoint start = seeded_start(m);
  const double tol = NewtonOptions{}.tol;

  ContinuationOptions to;
  to.lambda_end = 0.1446;
  to.step = 2e-3;
  const Branch warm = continue_branch(start, to);
  REQUIRE(warm.points.back().params.lambda == 0.1446);

  SUBCASE("0.1446 to 0.2346 in at most 200 steps") {
    ContinuationOptions o;
    o.lambda_end = 0.2346;
    o.step = 1e-3;
    o.stops = {0.2};
    const Branch br = continue_branch(warm.points.back(), o);
    CHECK(br.points.size() <= 201);
    CHECK(br.points.front().params.lambda == 0.1446);
    CHECK(br.points.back().params.lambda == 0.2346);
    bool hit_stop = false;
    for (std::size_t i = 0; i < br.points.size(); ++i) {
      const BranchPoint& b = br.points[i];
      if (i) CHECK(b.params.lambda > br.points[i - 1].params.lambda);
      hit_stop |= b.params.lambda == 0.2;
      CHECK(b.residual < tol);
      CHECK(sup_residual(b.x, b.params) == b.residual);
      CHECK(std::fabs(b.energy - b.energy_target) < tol);
      CHECK(b.energy_target == start.energy_target);
    }
    CHECK(hit_stop);

    // re-solving a converged point reproduces it
    const BranchPoint& last = br.points.back();
    const NewtonResult again = newton_solve({last.params, last.energy_target}, last.x);
    CHECK(std::fabs(again.x.c00() - last.x.c00()) < 10 * tol);
    for (std::size_t i = 0; i < last.x.values().size(); ++i)
      CHECK(std::fabs(again.x.values()[i] - last.x.values()[i]) < 10 * tol);
  }

  SUBCASE("zero-length range") {
    ContinuationOptions o;
    o.lambda_end = warm.points.back().params.lambda;
    CHECK(continue_branch(warm.points.back(), o).points.size() == 1);
  }

  SUBCASE("decreasing lambda") {
    ContinuationOptions o;
    o.lambda_end = 0.12;
    o.step = 5e-3;
    const Branch br = continue_branch(warm.points.back(), o);
    CHECK(br.points.back().params.lambda == 0.12);
    for (std::size_t i = 1; i < br.points.size(); ++i)
      CHECK(br.points[i].params.lambda < br.points[i - 1].params.lambda);
  }

  SUBCASE("mean policy keeps c00") {
    ContinuationOptions o;
    o.lambda_end = 0.16;
    o.step = 5e-3;
    o.policy = Policy::Mean;
    const Branch br = continue_branch(warm.points.back(), o);
    for (const BranchPoint& b : br.points) {
      CHECK(b.x.c00() == warm.points.back().x.c00());
      CHECK(b.residual < tol);
    }
  }

  SUBCASE("step underflow keeps the partial branch") {
    ContinuationOptions o;
    o.lambda_end = 50.0;
    o.step = 20.0;
    o.step_min = 5.0;
    o.newton.max_iter = 2;
    try {
      continue_branch(warm.points.back(), o);
      FAIL("expected StepUnderflow");
    } catch (const StepUnderflow& e) {
      REQUIRE(e.partial().points.size() >= 1);
      CHECK(e.partial().points.front().params.lambda == 0.1446);
    }
  }

  SUBCASE("invalid steps") {
    ContinuationOptions o;
    o.lambda_end = 0.2;
    o.step = 0.0;
    CHECK_THROWS_AS(continue_branch(warm.points.back(), o), std::invalid_argument);
  }
}

TEST_CASE("approx_inverse") {
  SUBCASE("diagonal") {
    const Params p = params(0.1446, {4, 4});
    Matrix<double> J(static_cast<std::size_t>(p.m.size()), static_cast<std::size_t>(p.m.size()), 0.0);
    for (const MultiIndex& k : p.m.indices()) {
      const auto i = static_cast<std::size_t>(p.m.flat(k));
      J(i, i) = mu(k, p);
    }
    const Matrix<double> A = approx_inverse(J);
    for (std::size_t i = 0; i < J.rows(); ++i)
      for (std::size_t j = 0; j < J.cols(); ++j)
        CHECK(A(i, j) == doctest::Approx(i == j ? 1.0 / J(i, i) : 0.0).epsilon(1e-15));
  }
  SUBCASE("random well conditioned") {
    std::mt19937_64 g(61);
    std::uniform_real_distribution<double> u(-1, 1);
    const std::size_t n = 20;
    Matrix<double> J(n, n);
    for (double& v : J.storage()) v = u(g);
    for (std::size_t i = 0; i < n; ++i) J(i, i) += 10.0;
    const Matrix<double> A = approx_inverse(J);
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < n; ++j) {
        double s = i == j ? -1.0 : 0.0;
        for (std::size_t k = 0; k < n; ++k) s += A(i, k) * J(k, j);
        row += std::fabs(s);
      }
      worst = std::max(worst, row);
    }
    CHECK(worst < 1e-10);
  }
  SUBCASE("a large Jacobian block") {
    // exercises the blocked factorization path
    const BranchPoint b = seeded_start({25, 25});
    const Matrix<double> J = jacobian_block(b.x, b.params);
    const Matrix<double> A = approx_inverse(J);
    double worst = 0;
    for (std::size_t i = 0; i < J.rows(); i += 13)
      for (std::size_t j = 0; j < J.cols(); ++j) {
        double s = i == j ? -1.0 : 0.0;
        for (std::size_t k = 0; k < J.rows(); ++k) s += A(i, k) * J(k, j);
        worst = std::max(worst, std::fabs(s));
      }
    CHECK(worst < 1e-10);
  }
  SUBCASE("singular and non-square") {
    Matrix<double> J(3, 3, 1.0);
    CHECK_THROWS_AS(approx_inverse(J), SingularJacobian);
    CHECK_THROWS_AS(approx_inverse(Matrix<double>(2, 3)), ShapeError);
  }
}

TEST_CASE("resolution growth") {
  const Params p = params(0.2, {4, 4});
  SymCoeffs<double> x(p.m);
  x[{0, 1}] = 1.0;
  x[{3, 3}] = 1.0;
  CHECK(trailing_mass(x) == doctest::Approx(0.5));
  CHECK(trailing_mass(SymCoeffs<double>(p.m)) == 0.0);

  // a converged small-amplitude point is already resolved at m = 8
  const Params q = params(0.03, {8, 8});
  const SymCoeffs<double> seed = seed_branch({0, 1}, q, 0.05);
  const double E = energy(seed, q);
  const NewtonResult res = newton_solve({q, E}, seed);
  const BranchPoint b = make_branch_point(q, res.x, E);
  const BranchPoint same = ensure_resolution(b, Policy::Energy, {}, 1e-3);
  CHECK(same.params.m == q.m);

  const BranchPoint grown = ensure_resolution(b, Policy::Energy, {}, 1e-40, 12);
  CHECK(grown.params.m.m1 > q.m.m1);
  CHECK(grown.params.m.m1 <= 12);
  CHECK(grown.residual < 1e-13);
  CHECK(std::fabs(grown.energy - E) < 1e-13);
}
