#include "bouss/certify.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <mutex>
#include <string>

#include "bouss/solver.hpp"

namespace bouss {

namespace {

std::string idx(MultiIndex k) {
  return "(" + std::to_string(k.k1) + "," + std::to_string(k.k2) + ")";
}

// Collects the first exception thrown inside an OpenMP region.
class ErrorSlot {
 public:
  template <class F>
  void run(F&& f) {
    try {
      f();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!err_) err_ = std::current_exception();
    }
  }
  void rethrow() {
    if (err_) std::rethrow_exception(err_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr err_;
};

}  // namespace

ProofContext::ProofContext(const Params& p)
    : params_(p),
      symbol_(make_symbol_enclosure(p)),
      nu_(p.nu),
      pw_(Interval(p.nu), 8 * (p.m.m1 + p.m.m2)),
      cache_(p.m.scaled(4)) {
  p.validate();
  mu_cache_.resize(static_cast<std::size_t>(cache_.size()));
  for (int i = 0; i < cache_.size(); ++i) mu_cache_[static_cast<std::size_t>(i)] = symbol_.mu(cache_.index(i));
}

Interval ProofContext::nu_pow(int n) const {
  if (n <= pw_.max_order()) return pw_(n);
  return pow_int(nu_, n);
}

Interval ProofContext::mu(MultiIndex k) const {
  const MultiIndex a{std::abs(k.k1), std::abs(k.k2)};
  if (cache_.contains(a)) return mu_cache_[static_cast<std::size_t>(cache_.flat(a))];
  return symbol_.mu(a);
}

Interval ProofContext::mu_inv(MultiIndex k) const {
  const Interval v = mu(k);
  if (!(v.lo() > 0)) throw MuSignError("cannot prove mu_k > 0 at k = " + idx(k));
  return Interval(1.0) / v;
}

bool check_cond_m(const Params& p) {
  if (p.m.m2 < p.m.m1) return false;
  if (!(p.lambda > 0) || !(p.L > 0)) return false;
  const Interval lambda(rnd::next_down(p.lambda), rnd::next_up(p.lambda));
  if (!(lambda.lo() > 0)) return false;
  const Interval L(rnd::next_down(p.L), rnd::next_up(p.L));
  const Interval bound = L / (Interval(2.0) * square(pi_interval()) * sqrt(lambda));
  return bound.hi() <= static_cast<double>(p.m.m2);
}

Interval TailOperator::entry(MultiIndex k, MultiIndex j, const ProofContext& ctx) const {
  if (m.contains(k) && m.contains(j))
    return block.at(static_cast<std::size_t>(m.flat(k)), static_cast<std::size_t>(m.flat(j)));
  if (k != j) return Interval(0.0);
  return kind == Kind::Inverse ? ctx.mu_inv(k) : ctx.mu(k);
}

TailOperator make_A(const Matrix<double>& Am, Truncation m) {
  if (Am.rows() != static_cast<std::size_t>(m.size()) || Am.cols() != Am.rows())
    throw ShapeError("A^(m) must be |F_m| x |F_m|");
  return {TailOperator::Kind::Inverse, m, to_midrad(Am)};
}

TailOperator make_A_dagger(const SymCoeffs<Interval>& xbar, const ProofContext& ctx) {
  return {TailOperator::Kind::Jacobian, xbar.truncation(),
          to_midrad(jacobian_block(xbar, ctx.symbol()))};
}

Interval bound_Y(const SymCoeffs<Interval>& xbar, const TailOperator& A, const ProofContext& ctx) {
  const Truncation m = xbar.truncation();
  const Truncation outer = m.doubled_minus_one();
  const ResidualVector<Interval> f = residual(xbar, ctx.symbol(), outer);

  IntervalMatrix fF(static_cast<std::size_t>(m.size()), 1);
  for (const MultiIndex& k : m.indices()) fF(static_cast<std::size_t>(m.flat(k)), 0) = f[k];
  const MidRadMatrix y = mat_mul_verified(A.block, to_midrad(fF));

  Interval sum(0.0);
  for (const MultiIndex& k : m.indices())
    sum += abs(y.at(static_cast<std::size_t>(m.flat(k)), 0)) * ctx.nu_pow(k);
  for (const MultiIndex& k : difference(outer, m)) {
    const Interval mk = ctx.mu(k);
    if (mk.contains_zero()) throw MuSignError("mu_k straddles 0 at k = " + idx(k));
    sum += abs(f[k] / mk) * ctx.nu_pow(k);
  }
  return sum;
}

Interval bound_Z0(const TailOperator& A, const TailOperator& Adag, const ProofContext& ctx) {
  const Truncation m = A.m;
  const MidRadMatrix P = mat_mul_verified(A.block, Adag.block);
  const std::vector<MultiIndex> ix = m.indices();
  const auto n = ix.size();
  std::vector<Interval> col(n);
  ErrorSlot err;
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < n; ++j) {
    err.run([&] {
      Interval s(0.0);
      for (std::size_t i = 0; i < n; ++i)
        s += abs(Interval(i == j ? 1.0 : 0.0) - P.at(i, j)) * ctx.nu_pow(ix[i]);
      col[j] = s / ctx.nu_pow(ix[j]);
    });
  }
  err.rethrow();
  Interval best(0.0);
  for (const Interval& c : col) best = max(best, c);
  return best;
}

namespace {

// mu_s^-1 nu^|s| over F_{3m} \ F_m (zero inside F_m, unused there).
std::vector<Interval> tail_weights(const ProofContext& ctx) {
  const Truncation m = ctx.m(), big = m.scaled(3);
  std::vector<Interval> w(static_cast<std::size_t>(big.size()), Interval(0.0));
  for (const MultiIndex& s : difference(big, m))
    w[static_cast<std::size_t>(big.flat(s))] = ctx.mu_inv(s) * ctx.nu_pow(s);
  return w;
}

// sum over s in I_m of mu_s^-1 |C_{s,q}| nu^|s|, s restricted to the window
// that can carry nonzero couplings (q + F_m^pm and its reflections).
Interval tail_sum(MultiIndex q, const SymCoeffs<Interval>& xbar, const Truncation m,
                  const std::vector<Interval>& w) {
  const Truncation big = m.scaled(3);
  Interval sum(0.0);
  for (int s1 = std::max(0, q.k1 - m.m1 + 1); s1 <= q.k1 + m.m1 - 1; ++s1)
    for (int s2 = std::max(1, q.k2 - m.m2 + 1); s2 <= q.k2 + m.m2 - 1; ++s2) {
      const MultiIndex s{s1, s2};
      if (m.contains(s)) continue;
      const Interval c = coupling(xbar, s, q);
      if (c.lo() == 0 && c.hi() == 0) continue;
      sum += abs(c) * w[static_cast<std::size_t>(big.flat(s))];
    }
  return sum;
}

}  // namespace

Interval tail_column_bound(MultiIndex q, const SymCoeffs<Interval>& xbar, const ProofContext& ctx) {
  const Truncation m = xbar.truncation();
  Interval sum(0.0);
  auto add = [&](MultiIndex p, const Interval& cp) {
    const MultiIndex v{p.k1 + q.k1, p.k2 + q.k2};
    if (v.k2 == 0 || (cp.lo() == 0 && cp.hi() == 0)) return;
    const Interval t = ctx.mu_inv(v) * abs(cp) * ctx.nu_pow(p);
    sum += v.k1 == 0 ? Interval(2.0) * t : t;
  };
  add({0, 0}, xbar.c00());
  for (const MultiIndex& p : signed_block(m)) add(p, xbar.sym(p));
  return Interval(2.0) * sum;
}

Z1Parts bound_Z1_parts(const SymCoeffs<Interval>& xbar, const TailOperator& A,
                       const ProofContext& ctx) {
  const Truncation m = xbar.truncation();
  const std::vector<Interval> w = tail_weights(ctx);
  ErrorSlot err;

  // q in F_m: only tail rows of Gamma are nonzero.
  const std::vector<MultiIndex> fm = m.indices();
  std::vector<Interval> b1(fm.size(), Interval(0.0));
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < fm.size(); ++i)
    err.run([&] {
      b1[i] = Interval(2.0) * tail_sum(fm[i], xbar, m, w) / ctx.nu_pow(fm[i]);
    });
  err.rethrow();

  // q in F_2m \ F_m: block rows through A^(m), batched.
  const std::vector<MultiIndex> ring1 = difference(m.scaled(2), m);
  std::vector<Interval> b2(ring1.size(), Interval(0.0));
  const std::size_t n = fm.size();
  const std::size_t batch = 768;
  for (std::size_t start = 0; start < ring1.size(); start += batch) {
    const std::size_t cols = std::min(batch, ring1.size() - start);
    MidRadMatrix C(n, cols);
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < n; ++j)
      err.run([&] {
        for (std::size_t c = 0; c < cols; ++c) {
          const MidRad mr = to_midrad(coupling(xbar, fm[j], ring1[start + c]));
          C.mid(j, c) = mr.mid;
          C.rad(j, c) = mr.rad;
        }
      });
    err.rethrow();
    const MidRadMatrix P = mat_mul_verified(A.block, C);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t c = 0; c < cols; ++c)
      err.run([&] {
        const MultiIndex q = ring1[start + c];
        Interval head(0.0);
        for (std::size_t s = 0; s < n; ++s) head += abs(P.at(s, c)) * ctx.nu_pow(fm[s]);
        b2[start + c] = Interval(2.0) * (head + tail_sum(q, xbar, m, w)) / ctx.nu_pow(q);
      });
    err.rethrow();
  }

  // q in I_2m, reduced to the ring R_2.
  const std::vector<MultiIndex> ring2 = ring(2, m);
  std::vector<Interval> b3(ring2.size(), Interval(0.0));
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < ring2.size(); ++i)
    err.run([&] { b3[i] = tail_column_bound(ring2[i], xbar, ctx); });
  err.rethrow();

  auto maxof = [](const std::vector<Interval>& v) {
    Interval best(0.0);
    for (const Interval& e : v) best = max(best, e);
    return best;
  };
  Z1Parts parts{maxof(b1), maxof(b2), maxof(b3), Interval(0.0)};
  parts.value = max(max(parts.case1, parts.case2), parts.tail);
  return parts;
}

Interval bound_Z1(const SymCoeffs<Interval>& xbar, const TailOperator& A, const ProofContext& ctx) {
  return bound_Z1_parts(xbar, A, ctx).value;
}

Interval ring_mu_inv_max(const ProofContext& ctx) {
  Interval best(0.0);
  for (const MultiIndex& k : ring(1, ctx.m())) best = max(best, ctx.mu_inv(k));
  return best;
}

Interval bound_Z2(const TailOperator& A, const ProofContext& ctx) {
  const std::vector<MultiIndex> ix = A.m.indices();
  const NuPowers<Interval> pw(ctx.nu(), A.m.max_order());
  const Interval block_norm = op_norm<Interval>(
      ix, ix, [&](std::size_t i, std::size_t j) { return A.block.at(i, j); }, pw);
  return Interval(32.0) * max(block_norm, ring_mu_inv_max(ctx));
}

bool verify_A_injective(const TailOperator& A, const Interval& Z0, const ProofContext& ctx) {
  (void)A;
  if (!(Z0.hi() < 1.0)) return false;
  if (!check_cond_m(ctx.params())) return false;
  for (const MultiIndex& k : ring(1, ctx.m()))
    if (!(ctx.mu(k).lo() > 0)) return false;
  return true;
}

RadiiResult radii_polynomial(const BoundSet& b) {
  const Interval Y(b.Y.hi()), Z2(b.Z2.hi());
  const Interval lin = Interval(b.Z0.hi()) + Interval(b.Z1.hi()) - Interval(1.0);
  if (Y.hi() < 0 || Z2.hi() < 0) throw NoNegativeRadius("negative bound supplied", b);
  if (!(lin.hi() < 0))
    throw NoNegativeRadius("Z0 + Z1 >= 1: no negative radius", b);
  auto p = [&](double r) {
    const Interval R(r);
    return Y + lin * R + Z2 * R * R;
  };

  RadiiResult out;
  if (Z2.hi() == 0) {
    out.r_min = Y / (-lin);
    out.r_max = Interval(rnd::kInf);
  } else {
    const Interval disc = lin * lin - Interval(4.0) * Z2 * Y;
    if (!(disc.lo() > 0)) throw NoNegativeRadius("radii polynomial discriminant is not positive", b);
    const Interval root = sqrt(disc);
    out.r_min = Interval(2.0) * Y / (-lin + root);
    out.r_max = (-lin + root) / (Interval(2.0) * Z2);
  }

  double r = Y.hi() == 0 ? 1e-300 : rnd::mul_up(out.r_min.hi(), 1.0 + 1e-3);
  Interval pr = p(r);
  if (!(pr.hi() < 0) && Z2.hi() > 0) {
    // Move toward the vertex of p where the margin is largest.
    const double vertex = (-lin / (Interval(2.0) * Z2)).mid();
    for (int i = 0; i < 200 && !(pr.hi() < 0); ++i) {
      r = 0.5 * (r + vertex);
      pr = p(r);
    }
  }
  if (!(pr.hi() < 0))
    throw NoNegativeRadius("could not verify p(r) < 0 at any trial radius", b);
  out.r_star = r;
  out.p_at_r_star = pr;
  return out;
}

ErrorBounds error_bounds(double r_star) {
  const double e = rnd::mul_up(4.0, r_star);
  return {e, e};
}

ProofResult prove(const SymCoeffs<double>& xbar, const Params& p) {
  const auto t0 = std::chrono::steady_clock::now();
  p.validate();
  if (xbar.truncation() != p.m) throw ShapeError("solution truncation differs from params");
  ProofResult res;
  res.params = p;
  res.cond_m = check_cond_m(p);
  if (!res.cond_m)
    throw PreconditionFailure("cond_m fails: need m2 >= max(m1, L / (2 pi^2 sqrt(lambda)))");

  const ProofContext ctx(p);
  const SymCoeffs<Interval> xi = convert<Interval>(xbar);
  const Matrix<double> Am = approx_inverse(jacobian_block(xbar, p));
  const TailOperator A = make_A(Am, p.m);

  res.bounds.Z2 = bound_Z2(A, ctx);
  res.min_mu_ring1 = Interval(rnd::kInf);
  for (const MultiIndex& k : ring(1, p.m)) res.min_mu_ring1 = min(res.min_mu_ring1, ctx.mu(k));
  {
    const TailOperator Adag = make_A_dagger(xi, ctx);
    res.bounds.Z0 = bound_Z0(A, Adag, ctx);
  }
  res.injective = verify_A_injective(A, res.bounds.Z0, ctx);
  if (!res.injective)
    throw PreconditionFailure("injectivity of A not verified (Z0 upper bound " +
                              std::to_string(res.bounds.Z0.hi()) + ")");
  res.bounds.Y = bound_Y(xi, A, ctx);
  res.z1 = bound_Z1_parts(xi, A, ctx);
  res.bounds.Z1 = res.z1.value;
  res.radii = radii_polynomial(res.bounds);
  res.errors = error_bounds(res.radii.r_star);
  res.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace bouss
