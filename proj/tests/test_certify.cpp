#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bouss/certificate.hpp"
#include "bouss/certify.hpp"
#include "bouss/space_io.hpp"
#include "bouss/solver.hpp"
#include "bound_oracles.hpp"

using namespace bouss;
using oracle::Real;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Params params(double lambda, Truncation m, double L = kTwoPi) {
  Params p;
  p.lambda = lambda;
  p.L = L;
  p.m = m;
  return p;
}

Params params(const oracle::Setup& s) { return params(s.lambda, s.m, s.L); }

oracle::Setup setup(const Params& p) { return {p.lambda, p.L, p.nu, p.m}; }

Matrix<double> diagonal(const std::vector<double>& d) {
  Matrix<double> A(d.size(), d.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) A(i, i) = d[i];
  return A;
}

double rel(const Real& got, const Real& want) {
  const Real s = abs(want) > 1e-300 ? abs(want) : Real(1);
  return static_cast<double>(abs(got - want) / s);
}

// Converged (0,1) orbit continued to lambda_end.
BranchPoint orbit(Truncation m, double lambda_end) {
  const Params p = params(0.03, m);
  const SymCoeffs<double> seed = seed_branch({0, 1}, p, 0.2);
  const double E = energy(seed, p);
  const NewtonResult res = newton_solve({p, E}, seed);
  const BranchPoint start = make_branch_point(p, res.x, E, res.report.iterations);
  if (lambda_end == 0.03) return start;
  ContinuationOptions o;
  o.lambda_end = lambda_end;
  o.step = 2e-3;
  return continue_branch(start, o).points.back();
}

}  // namespace

TEST_CASE("cond_m") {
  const Params p = params(0.1446, {35, 35});
  CHECK(check_cond_m(p));
  const Real bound = 1 / (oracle::pi() * sqrt(Real("0.1446")));
  CHECK(std::fabs(static_cast<double>(bound) - 0.837) < 1e-3);

  CHECK_FALSE(check_cond_m(params(0.1446, {10, 5})));
  CHECK_FALSE(check_cond_m(params(1e-8, {35, 35})));

  // L / (2 pi^2 sqrt(lambda)) = 4 / pi at lambda = 1/4, L = 4 pi: borderline at m2 = 1 fails, 2 passes
  CHECK_FALSE(check_cond_m(params(0.25, {1, 1}, 4 * std::numbers::pi)));
  CHECK(check_cond_m(params(0.25, {2, 2}, 4 * std::numbers::pi)));
}

TEST_CASE("Y") {
  const Params p = params(0.1446, {3, 3});
  const ProofContext ctx(p);

  SUBCASE("constant solution") {
    SymCoeffs<double> x(p.m, 0.4);
    const TailOperator A = make_A(approx_inverse(jacobian_block(x, p)), p.m);
    const Interval Y = bound_Y(convert<Interval>(x), A, ctx);
    CHECK(Y.contains(0.0));
    CHECK(Y.hi() < 1e-300);
  }

  SUBCASE("single defect with the identity block") {
    // x = eps e_(1,1): f = mu_11 eps at (1,1), -eps^2 at (2,2), -2 eps^2 at (0,2)
    const double eps = 1e-3;
    SymCoeffs<double> x(p.m);
    x[{1, 1}] = eps;
    const Matrix<double> I = Matrix<double>::identity(static_cast<std::size_t>(p.m.size()));
    const Interval Y = bound_Y(convert<Interval>(x), make_A(I, p.m), ctx);
    const Real e(eps), nu(p.nu);
    const Real hand = abs(oracle::mu({1, 1}, p.lambda, p.L) * e) * nu * nu + e * e * pow(nu, 4) + 2 * e * e * nu * nu;
    CHECK(oracle::encloses(Y, hand));
    CHECK(Y.width() < 1e-13 * Y.hi());
    CHECK(rel(hand, oracle::y_exact(x, I, setup(p))) < 1e-28);
  }

  SUBCASE("mu straddling zero in the tail aborts") {
    // mu_(0,3) = 4 pi^2 lambda 9 - 1 vanishes at lambda = 1/(36 pi^2)
    const Params q = params(1.0 / (36 * std::numbers::pi * std::numbers::pi), {3, 3}, 1.0);
    SymCoeffs<double> x(q.m);
    x[{1, 1}] = 0.1;
    const Matrix<double> I = Matrix<double>::identity(static_cast<std::size_t>(q.m.size()));
    CHECK_THROWS_AS(bound_Y(convert<Interval>(x), make_A(I, q.m), ProofContext(q)), MuSignError);
  }
}

TEST_CASE("Z0") {
  const Params p = params(0.1446, {3, 3});
  const ProofContext ctx(p);
  const auto n = static_cast<std::size_t>(p.m.size());
  std::vector<double> d(n), dinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = std::ldexp(1.0, static_cast<int>(i) - 2);
    dinv[i] = 1.0 / d[i];
  }
  const TailOperator Adag{TailOperator::Kind::Jacobian, p.m, to_midrad(diagonal(d))};

  SUBCASE("exact inverse") {
    const Interval Z0 = bound_Z0(make_A(diagonal(dinv), p.m), Adag, ctx);
    CHECK(Z0.contains(0.0));
    CHECK(Z0.width() < 1e-12);
  }
  SUBCASE("(1 + eps) times the inverse") {
    for (double eps : {0x1p-10, 1e-3, -0.25}) {
      std::vector<double> a(dinv);
      for (double& v : a) v *= 1 + eps;
      const Interval Z0 = bound_Z0(make_A(diagonal(a), p.m), Adag, ctx);
      CHECK(Z0.hi() >= std::fabs(eps));
      CHECK(Z0.hi() == doctest::Approx(std::fabs(eps)).epsilon(1e-12));
    }
  }
  SUBCASE("a diagonal Jacobian with generic entries") {
    SymCoeffs<double> x(p.m);
    const TailOperator A = make_A(approx_inverse(jacobian_block(x, p)), p.m);
    const Interval Z0 = bound_Z0(A, make_A_dagger(convert<Interval>(x), ctx), ctx);
    CHECK(Z0.hi() < 1e-14);
    CHECK(Z0.width() < 1e-12);
  }
}

TEST_CASE("Z1") {
  const Params p = params(0.1446, {3, 3});
  const ProofContext ctx(p);

  SUBCASE("zero data") {
    SymCoeffs<double> x(p.m);
    const TailOperator A = make_A(approx_inverse(jacobian_block(x, p)), p.m);
    const Z1Parts z = bound_Z1_parts(convert<Interval>(x), A, ctx);
    // the verified product adds an underflow term only
    CHECK(z.value.contains(0.0));
    CHECK(z.value.hi() < 1e-300);
    CHECK(z.case1.hi() == 0.0);
    CHECK(z.tail.hi() == 0.0);
  }

  SUBCASE("mean only") {
    // C_{k,j} = a delta_{k,j}: case 1 vanishes, case 2 is 2|a| mu_q^-1 on F_2m \ F_m,
    // the tail column bound is 2 mult(q) |a| mu_q^-1 on R_2.
    const double a = -0.3;
    SymCoeffs<double> x(p.m, a);
    const TailOperator A = make_A(approx_inverse(jacobian_block(x, p)), p.m);
    const Z1Parts z = bound_Z1_parts(convert<Interval>(x), A, ctx);
    Real case2 = 0, tail = 0;
    for (const MultiIndex& q : difference(p.m.scaled(2), p.m))
      case2 = std::max(case2, 2 * abs(Real(a)) / oracle::mu(q, p.lambda, p.L));
    for (const MultiIndex& q : ring(2, p.m))
      tail = std::max(tail, (q.k1 == 0 ? 4 : 2) * abs(Real(a)) / oracle::mu(q, p.lambda, p.L));
    CHECK(z.case1.hi() == 0.0);
    CHECK(oracle::encloses(z.case2, case2));
    CHECK(oracle::encloses(z.tail, tail));
    CHECK(rel(Real(z.value.hi()), std::max(case2, tail)) < 1e-13);
    // and it dominates the true column sup 2|a| max mu^-1
    CHECK(Real(z.value.hi()) >= oracle::z1_colsup(x, approx_inverse(jacobian_block(x, p)), setup(p), p.m.scaled(8)));
  }
}

TEST_CASE("Z2") {
  SUBCASE("identity block, large mu") {
    const Params p = params(100.0, {3, 3});
    const ProofContext ctx(p);
    CHECK(ring_mu_inv_max(ctx).hi() < 1.0);
    const Interval Z2 = bound_Z2(make_A(Matrix<double>::identity(static_cast<std::size_t>(p.m.size())), p.m), ctx);
    CHECK(Z2.contains(32.0));
    CHECK(Z2.width() < 1e-12);
  }
  SUBCASE("diagonal block") {
    const Params p = params(0.1446, {3, 3});
    const ProofContext ctx(p);
    const auto n = static_cast<std::size_t>(p.m.size());
    Real tail = 0;
    for (const MultiIndex& k : ring(1, p.m)) tail = std::max(tail, 1 / oracle::mu(k, p.lambda, p.L));
    CHECK(oracle::encloses(ring_mu_inv_max(ctx), tail));
    for (double top : {0.01, 2.5}) {
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = top * (i % 2 ? -1.0 : 1.0) / (1.0 + static_cast<double>(i));
      const Interval Z2 = bound_Z2(make_A(diagonal(d), p.m), ctx);
      const Real want = 32 * std::max(Real(top), tail);
      CHECK(oracle::encloses(Z2, want));
      CHECK(Z2.width() < 1e-12 * Z2.hi());
    }
  }
}

TEST_CASE("injectivity") {
  const Params p = params(0.1446, {3, 3});
  const ProofContext ctx(p);
  const TailOperator A = make_A(Matrix<double>::identity(static_cast<std::size_t>(p.m.size())), p.m);
  CHECK(verify_A_injective(A, Interval(0.0, 0.1), ctx));
  CHECK_FALSE(verify_A_injective(A, Interval(0.0, 1.5), ctx));
  CHECK_FALSE(verify_A_injective(A, Interval(0.0, 1.0), ctx));

  // mu_(0,3) straddles 0 on R_1 while cond_m still holds (L = 1 <= pi)
  const Params q = params(1.0 / (36 * std::numbers::pi * std::numbers::pi), {3, 3}, 1.0);
  CHECK(check_cond_m(q));
  const ProofContext cq(q);
  CHECK(cq.mu({0, 3}).contains_zero());
  CHECK_FALSE(verify_A_injective(A, Interval(0.0, 0.1), cq));
  CHECK_THROWS_AS(ring_mu_inv_max(cq), MuSignError);
}

TEST_CASE("radii polynomial") {
  SUBCASE("Y = 0") {
    const RadiiResult r = radii_polynomial({Interval(0.0), Interval(0.0), Interval(0.0), Interval(1.0)});
    CHECK(r.r_star > 0);
    CHECK(r.r_star < 1e-100);
    CHECK(r.p_at_r_star.hi() < 0);
    CHECK(r.r_max.contains(1.0));
  }
  SUBCASE("Y = 0.3 has no real roots") {
    // p(r) = r^2 - r + 0.3 has discriminant 1 - 1.2 < 0
    CHECK_THROWS_AS(radii_polynomial({Interval(0.3), Interval(0.0), Interval(0.0), Interval(1.0)}),
                    NoNegativeRadius);
  }
  SUBCASE("Y = 0.2 against the quadratic formula") {
    const RadiiResult r = radii_polynomial({Interval(0.2), Interval(0.0), Interval(0.0), Interval(1.0)});
    const Real s = sqrt(1 - 4 * Real(0.2));
    // Interval(0.2) is the double nearest 0.2; the real root for that input is enclosed
    CHECK(oracle::encloses(r.r_min, (1 - s) / 2));
    CHECK(oracle::encloses(r.r_max, (1 + s) / 2));
    CHECK(r.r_star >= r.r_min.hi());
    CHECK(r.r_star < r.r_max.lo());
    const Real pr = Real(r.r_star) * Real(r.r_star) - Real(r.r_star) + Real(0.2);
    CHECK(pr < 0);
    CHECK(std::fabs(r.r_star / r.r_min.mid() - 1.001) < 1e-9);
  }
  SUBCASE("Z0 + Z1 = 1") {
    CHECK_THROWS_AS(radii_polynomial({Interval(1.0), Interval(0.5), Interval(0.5), Interval(1.0)}),
                    NoNegativeRadius);
  }
  SUBCASE("r_star moves inward when the margin near r_min is too thin") {
    // discriminant 1e-24: r_min and r_max almost coincide
    const double Y = 0.25 - 0x1p-40;
    try {
      const RadiiResult r = radii_polynomial({Interval(Y), Interval(0.0), Interval(0.0), Interval(1.0)});
      CHECK(r.p_at_r_star.hi() < 0);
      CHECK(r.r_star > r.r_min.hi());
      CHECK(r.r_star < r.r_max.lo());
    } catch (const NoNegativeRadius&) {
      FAIL("expected a validated radius");
    }
  }
}

TEST_CASE("error bounds") {
  const ErrorBounds a = error_bounds(1.07191e-11);
  CHECK(a.c0 == a.l2);
  CHECK(a.c0 == doctest::Approx(4.28764e-11).epsilon(1e-15));
  CHECK(Real(a.c0) >= 4 * Real(1.07191e-11));
  CHECK(error_bounds(0.0).c0 == 0.0);
  const ErrorBounds b = error_bounds(2.68062e-12);
  CHECK(b.l2 == doctest::Approx(1.072248e-11).epsilon(1e-15));
}

TEST_CASE("bounds dominate brute force on the truncated lattice") {
  std::mt19937_64 g(71);
  for (int rep = 0; rep < 6; ++rep) {
    const oracle::Setup s = oracle::random_setup(g, 3, 3);
    const Params p = params(s);
    const SymCoeffs<double> x = oracle::random_coeffs(g, p.m, 0.2, 0.6, 0.5);
    const Matrix<double> Am = approx_inverse(jacobian_block(x, p));
    const ProofContext ctx(p);
    const SymCoeffs<Interval> xi = convert<Interval>(x);
    const TailOperator A = make_A(Am, p.m);

    const Real y = oracle::y_exact(x, Am, s);
    const Real z0 = oracle::z0_exact(x, Am, s);
    const Real z1 = oracle::z1_colsup(x, Am, s, p.m.scaled(8));
    const Real z2 = oracle::z2_exact(Am, s, p.m.scaled(8));
    const Interval Y = bound_Y(xi, A, ctx);
    const Interval Z0 = bound_Z0(A, make_A_dagger(xi, ctx), ctx);
    const Interval Z1 = bound_Z1(xi, A, ctx);
    const Interval Z2 = bound_Z2(A, ctx);
    INFO("lambda " << s.lambda << " L " << s.L);
    CHECK(Real(Y.hi()) >= y);
    CHECK(Real(Z0.hi()) >= z0);
    CHECK(Real(Z1.hi()) >= z1);
    CHECK(Real(Z2.hi()) >= z2);
    // Y and Z0 are computed, not estimated
    CHECK(rel(Real(Y.hi()), y) < 1e-12);
    CHECK(static_cast<double>(Real(Z0.hi()) - z0) < 1e-13);
  }
}

TEST_CASE("ring reductions agree with brute force") {
  std::mt19937_64 g(73);
  for (int rep = 0; rep < 3; ++rep) {
    const oracle::Setup s = oracle::random_setup(g, 2, 4);
    const Params p = params(s);
    INFO("lambda " << s.lambda << " L " << s.L << " m " << s.m.m1 << "," << s.m.m2);
    const SymCoeffs<double> x = oracle::random_coeffs(g, p.m, 0.5, 0.7, 1.0);
    const oracle::Lattice c = oracle::spread(x);
    const oracle::NuTable w(s.nu, 20 * (s.m.m1 + s.m.m2));
    const Truncation box = p.m.scaled(7);

    Real all = 0, on_ring = 0, mu_all = 0, mu_ring = 0;
    for (const MultiIndex& q : box.indices()) {
      if (!p.m.contains(q)) mu_all = std::max(mu_all, 1 / oracle::mu(q, s));
      if (in_ring(q, 1, p.m)) mu_ring = std::max(mu_ring, 1 / oracle::mu(q, s));
      if (p.m.scaled(2).contains(q)) continue;
      const Real b = oracle::tail_column(q, c, s, w);
      all = std::max(all, b);
      if (in_ring(q, 2, p.m)) on_ring = std::max(on_ring, b);
    }
    CHECK(all == on_ring);
    CHECK(mu_all == mu_ring);

    const ProofContext ctx(p);
    const SymCoeffs<Interval> xi = convert<Interval>(x);
    Interval lib(0.0);
    for (const MultiIndex& q : ring(2, p.m)) lib = max(lib, tail_column_bound(q, xi, ctx));
    CHECK(oracle::encloses(lib, on_ring));
    CHECK(oracle::encloses(ring_mu_inv_max(ctx), mu_ring));
  }
}

TEST_CASE("proof on a converged orbit") {
  const BranchPoint b = orbit({20, 20}, 0.1446);
  REQUIRE(b.residual < 1e-13);
  const ProofResult r = prove(b.x, b.params);
  CHECK(r.cond_m);
  CHECK(r.injective);
  CHECK(r.bounds.Y.hi() <= 1e-10);
  CHECK(r.bounds.Z0.hi() < 1e-8);
  CHECK(r.radii.p_at_r_star.hi() < 0);
  CHECK(r.radii.r_star <= 1e-9);
  const double margin = 1 - r.bounds.Z0.hi() - r.bounds.Z1.hi();
  CHECK(r.bounds.Z2.hi() * r.radii.r_star < 1e-6 * margin);
  CHECK(r.errors.c0 == error_bounds(r.radii.r_star).c0);
  CHECK(r.z1.value.hi() == r.bounds.Z1.hi());

  SUBCASE("the same bounds with one thread") {
    const int before = omp_get_max_threads();
    omp_set_num_threads(1);
    const ProofResult one = prove(b.x, b.params);
    omp_set_num_threads(before);
    CHECK(one.bounds.Y.lo() == r.bounds.Y.lo());
    CHECK(one.bounds.Y.hi() == r.bounds.Y.hi());
    CHECK(one.bounds.Z0.hi() == r.bounds.Z0.hi());
    CHECK(one.bounds.Z1.hi() == r.bounds.Z1.hi());
    CHECK(one.bounds.Z2.hi() == r.bounds.Z2.hi());
    CHECK(one.radii.r_star == r.radii.r_star);
  }

  SUBCASE("Y does not grow under zero padding") {
    Interval prev = r.bounds.Y;
    for (int m : {22, 25}) {
      Params q = b.params;
      q.m = {m, m};
      const SymCoeffs<double> x = b.x.resized(q.m);
      const ProofContext ctx(q);
      const TailOperator A = make_A(approx_inverse(jacobian_block(x, q)), q.m);
      const Interval Y = bound_Y(convert<Interval>(x), A, ctx);
      INFO("m " << m << " Y " << Y.hi() << " previous " << prev.hi());
      CHECK(Y.hi() <= prev.hi() + prev.width() + Y.width());
      prev = Y;
    }
  }

  SUBCASE("certificate text round trip") {
    Certificate c;
    c.proof = r;
    c.c00 = b.x.c00();
    c.solution_path = "point.json";
    c.solution_sha256 = std::string(64, 'a');
    c.config = "{}";
    const Certificate back = certificate_from_text(certificate_to_text(c));
    CHECK(back.proof.bounds.Y.contains(r.bounds.Y));
    CHECK(back.proof.bounds.Z1.contains(r.bounds.Z1));
    CHECK(back.proof.bounds.Z2.hi() >= r.bounds.Z2.hi());
    CHECK(back.proof.radii.r_star == r.radii.r_star);
    CHECK(back.proof.params.lambda == r.params.lambda);
    CHECK(back.solution_sha256 == c.solution_sha256);
    CHECK_THROWS_AS(certificate_from_text("{\"format\": 3}"), FormatError);
  }

  SUBCASE("corrupted coefficients leave no negative radius") {
    SymCoeffs<double> bad = b.x;
    bad[{0, 1}] *= 1.5;
    bad[{0, 2}] += 0.05;
    CHECK_THROWS_AS(prove(bad, b.params), NoNegativeRadius);
  }
}

TEST_CASE("preconditions") {
  SymCoeffs<double> x(Truncation{10, 5});
  CHECK_THROWS_AS(prove(x, params(0.1446, {10, 5})), PreconditionFailure);
  CHECK_THROWS_AS(prove(SymCoeffs<double>(Truncation{4, 4}), params(0.1446, {5, 5})), ShapeError);
  const Params q = params(1.0 / (36 * std::numbers::pi * std::numbers::pi), {3, 3}, 1.0);
  SymCoeffs<double> y(q.m);
  y[{0, 1}] = 0.01;
  CHECK_THROWS_AS(prove(y, q), MuSignError);

  const double d = 1e-3;
  CHECK(std::strtod(decimal_down(d).c_str(), nullptr) < d);
  CHECK(std::strtod(decimal_up(d).c_str(), nullptr) > d);
}
