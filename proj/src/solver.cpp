#include "bouss/solver.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <string>

namespace bouss {

namespace {

double inf_norm(const std::vector<double>& v) {
  double r = 0;
  for (double e : v) r = std::max(r, std::fabs(e));
  return std::isnan(r) ? INFINITY : r;
}

double roundoff_scale(const SymCoeffs<double>& x) {
  double l1 = std::fabs(x.c00());
  const Truncation m = x.truncation();
  for (const MultiIndex& k : m.indices()) l1 += (k.k1 == 0 ? 2.0 : 4.0) * std::fabs(x[k]);
  const double s = 1.0 + l1;
  return s * s * s;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

bool pivots_nonzero(const RowMat& lu) {
  for (Eigen::Index i = 0; i < lu.rows(); ++i)
    if (lu(i, i) == 0.0 || !std::isfinite(lu(i, i))) return false;
  return true;
}

// Solves J d = b in place (row-major n x n).
void solve_dense(std::vector<double>& J, std::vector<double>& b, int n) {
  const Eigen::PartialPivLU<RowMat> lu(Eigen::Map<const RowMat>(J.data(), n, n));
  if (!pivots_nonzero(lu.matrixLU())) throw SingularJacobian("Newton system is singular");
  Eigen::Map<Eigen::VectorXd> rhs(b.data(), n);
  rhs = lu.solve(Eigen::VectorXd(rhs));
  for (double v : b)
    if (!std::isfinite(v)) throw SingularJacobian("Newton step is not finite");
}

// Unknown layout: [c00?, x (flat F_m order)].
struct Layout {
  bool with_c00;
  int n;  // |F_m|
  int dim() const { return n + (with_c00 ? 1 : 0); }
  int off() const { return with_c00 ? 1 : 0; }
};

// Residual G and Jacobian of the first row (the extra equation) supplied by
// the caller; the f-rows are shared.
struct ExtraRow {
  std::function<double(const SymCoeffs<double>&)> value;
  std::function<void(const SymCoeffs<double>&, double* row)> gradient;
};

NewtonResult newton_core(const Params& p, const SymCoeffs<double>& guess, const NewtonOptions& opt,
                         const ExtraRow* extra) {
  p.validate();
  if (guess.truncation() != p.m) throw ShapeError("Newton guess truncation differs from params");
  const Symbol<double> s = make_symbol(p);
  const Truncation m = p.m;
  const Layout lay{extra != nullptr, m.size()};
  const int dim = lay.dim();

  SymCoeffs<double> x = guess;
  NewtonResult out;
  double prev = INFINITY;
  for (int it = 0;; ++it) {
    std::vector<double> G(static_cast<std::size_t>(dim));
    if (extra) G[0] = extra->value(x);
    const ResidualVector<double> f = residual(x, s, m);
    std::copy(f.values().begin(), f.values().end(), G.begin() + lay.off());
    const double r = inf_norm(G);
    out.report.history.push_back(r);
    out.report.residual = r;
    out.report.iterations = it;
    if (r < opt.tol) break;
    if (!std::isfinite(r)) throw NoConvergence("Newton iteration diverged");
    if (it > 0 && r > 0.5 * prev && r < opt.tol * roundoff_scale(x)) break;
    if (it >= opt.max_iter)
      throw NoConvergence("Newton did not converge in " + std::to_string(opt.max_iter) +
                          " iterations (residual " + std::to_string(r) + ")");
    prev = r;

    std::vector<double> J(static_cast<std::size_t>(dim) * dim, 0.0);
    const Matrix<double> D = jacobian_block(x, s);
    for (int i = 0; i < lay.n; ++i) {
      double* row = &J[static_cast<std::size_t>(i + lay.off()) * dim];
      if (lay.with_c00) row[0] = -2.0 * x.values()[i];
      std::copy(&D(i, 0), &D(i, 0) + lay.n, row + lay.off());
    }
    if (extra) extra->gradient(x, J.data());
    for (double& g : G) g = -g;
    solve_dense(J, G, dim);
    if (lay.with_c00) x.c00() += G[0];
    auto v = x.values();
    for (int i = 0; i < lay.n; ++i) v[i] += G[i + lay.off()];
  }
  out.x = std::move(x);
  return out;
}

}  // namespace

NewtonResult newton_solve(const AugmentedSystem& sys, const SymCoeffs<double>& guess,
                          const NewtonOptions& opt) {
  const Symbol<double> s = make_symbol(sys.params);
  const ExtraRow row{
      [&](const SymCoeffs<double>& x) { return energy(x, s) - sys.energy_target; },
      [&](const SymCoeffs<double>& x, double* r) {
        const EnergyGradient<double> g = energy_gradient(x, s);
        r[0] = g.d_c00;
        std::copy(g.d_x.values().begin(), g.d_x.values().end(), r + 1);
      }};
  return newton_core(sys.params, guess, opt, &row);
}

NewtonResult newton_solve_fixed_mean(const Params& p, const SymCoeffs<double>& guess,
                                     const NewtonOptions& opt) {
  return newton_core(p, guess, opt, nullptr);
}

NewtonResult newton_solve_pinned(const Params& p, MultiIndex mode, double amplitude,
                                 const SymCoeffs<double>& guess, const NewtonOptions& opt) {
  if (!p.m.contains(mode)) throw std::invalid_argument("pinned mode outside F_m");
  const int col = 1 + p.m.flat(mode);
  const ExtraRow row{[&](const SymCoeffs<double>& x) { return x[mode] - amplitude; },
                     [&](const SymCoeffs<double>&, double* r) { r[col] = 1.0; }};
  return newton_core(p, guess, opt, &row);
}

SymCoeffs<double> seed_branch(MultiIndex mode, const Params& p, double amplitude) {
  p.validate();
  if (!p.m.contains(mode)) throw std::invalid_argument("seed mode outside F_m");
  const Symbol<double> s = make_symbol(p);
  SymCoeffs<double> x(p.m, 0.0);
  if (amplitude == 0.0) return x;

  const double mu0 = s.mu(mode);
  x.c00() = 0.5 * mu0;
  x[mode] = amplitude;
  // Second-order harmonics: (mu_q - 2 c00) x_q = (c^2)_q from the single mode.
  const SymCoeffs<double> single = x;
  const EvenGrid<double> sq = conv_square(single);
  for (const MultiIndex& q : {MultiIndex{2 * mode.k1, 2 * mode.k2}, MultiIndex{0, 2 * mode.k2}}) {
    if (!p.m.contains(q) || q == mode) continue;
    const double d = s.mu(q) - 2.0 * x.c00();
    if (std::fabs(d) > 1e-8) x[q] = sq.at(q) / d;
  }
  try {
    NewtonOptions o;
    o.max_iter = 40;
    return newton_solve_pinned(p, mode, amplitude, x, o).x;
  } catch (const std::runtime_error&) {
    return x;
  }
}

BranchPoint make_branch_point(const Params& p, const SymCoeffs<double>& x, double energy_target,
                              int iterations) {
  BranchPoint b;
  b.params = p;
  b.x = x;
  b.energy_target = energy_target;
  b.energy = energy(x, p);
  b.norm_nu = norm_nu(x, p.nu);
  const ResidualVector<double> f = residual(x, p, p.m);
  b.residual = 0;
  for (double v : f.values()) b.residual = std::max(b.residual, std::fabs(v));
  b.iterations = iterations;
  return b;
}

namespace {

NewtonResult solve_with_policy(const Params& p, const SymCoeffs<double>& guess,
                               double energy_target, Policy policy, const NewtonOptions& opt) {
  if (policy == Policy::Energy) return newton_solve({p, energy_target}, guess, opt);
  return newton_solve_fixed_mean(p, guess, opt);
}

}  // namespace

Branch continue_branch(const BranchPoint& start, const ContinuationOptions& opt) {
  if (!(opt.step > 0) || !(opt.step_min > 0))
    throw std::invalid_argument("continuation steps must be positive");
  Branch br;
  br.points.push_back(start);
  const double end = opt.lambda_end;
  double lam = start.params.lambda;
  if (lam == end) return br;
  const double dir = end > lam ? 1.0 : -1.0;

  std::vector<double> targets;
  for (double t : opt.stops)
    if ((t - lam) * dir > 0 && (end - t) * dir > 0) targets.push_back(t);
  targets.push_back(end);
  std::sort(targets.begin(), targets.end(), [dir](double a, double b) { return a * dir < b * dir; });

  double h = opt.step;
  std::size_t next = 0;
  int steps = 0;
  while (lam != end) {
    if (++steps > opt.max_steps)
      throw StepUnderflow("continuation exceeded " + std::to_string(opt.max_steps) + " steps", br);
    double lam_new = lam + dir * h;
    if ((lam_new - targets[next]) * dir >= 0) lam_new = targets[next];

    const BranchPoint& last = br.points.back();
    SymCoeffs<double> pred = last.x;
    if (br.points.size() >= 2) {
      const BranchPoint& prev = br.points[br.points.size() - 2];
      const double t = (lam_new - lam) / (lam - prev.params.lambda);
      auto pv = pred.values();
      auto qv = prev.x.values();
      for (std::size_t i = 0; i < pv.size(); ++i) pv[i] += t * (pv[i] - qv[i]);
      if (opt.policy == Policy::Energy) pred.c00() += t * (pred.c00() - prev.x.c00());
    }

    Params p = last.params;
    p.lambda = lam_new;
    bool ok = false;
    try {
      NewtonResult res = solve_with_policy(p, pred, last.energy_target, opt.policy, opt.newton);
      BranchPoint bp = make_branch_point(p, res.x, last.energy_target, res.report.iterations);
      const bool collapsed = last.norm_nu > 0 && bp.norm_nu < opt.collapse_ratio * last.norm_nu;
      if (!collapsed) {
        ok = true;
        br.points.push_back(std::move(bp));
        lam = lam_new;
        if (lam == targets[next] && next + 1 < targets.size()) ++next;
        if (res.report.iterations <= 3) h = std::min(h * 1.5, std::max(opt.step_max, opt.step));
      }
    } catch (const NoConvergence&) {
    } catch (const SingularJacobian&) {
    }
    if (!ok) {
      h *= 0.5;
      if (h < opt.step_min) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "continuation step fell below %g at lambda = %.10g",
                      opt.step_min, lam);
        throw StepUnderflow(msg, br);
      }
    }
  }
  return br;
}

Matrix<double> approx_inverse(const Matrix<double>& J) {
  if (J.rows() != J.cols()) throw ShapeError("approx_inverse needs a square matrix");
  const auto n = static_cast<Eigen::Index>(J.rows());
  if (n == 0) return J;
  const Eigen::PartialPivLU<RowMat> lu(Eigen::Map<const RowMat>(J.data(), n, n));
  if (!pivots_nonzero(lu.matrixLU())) throw SingularJacobian("Jacobian block is singular");
  Matrix<double> A(J.rows(), J.cols());
  Eigen::Map<RowMat>(A.data(), n, n) = lu.inverse();
  for (double v : A.storage())
    if (!std::isfinite(v)) throw SingularJacobian("approximate inverse is not finite");
  return A;
}

double trailing_mass(const SymCoeffs<double>& x) {
  const Truncation m = x.truncation();
  double edge = 0, total = 0;
  for (const MultiIndex& k : m.indices()) {
    const double a = std::fabs(x[k]);
    total += a;
    if (k.k1 == m.m1 - 1 || k.k2 == m.m2 - 1) edge += a;
  }
  return total > 0 ? edge / total : 0.0;
}

BranchPoint ensure_resolution(const BranchPoint& pt, Policy policy, const NewtonOptions& opt,
                              double threshold, int m_cap) {
  BranchPoint cur = pt;
  while (trailing_mass(cur.x) > threshold) {
    const Truncation m = cur.params.m;
    const Truncation grown{(m.m1 * 5 + 3) / 4, (m.m2 * 5 + 3) / 4};
    if (grown.m1 > m_cap || grown.m2 > m_cap) break;
    Params p = cur.params;
    p.m = grown;
    NewtonResult res = solve_with_policy(p, cur.x.resized(grown), cur.energy_target, policy, opt);
    cur = make_branch_point(p, res.x, cur.energy_target, res.report.iterations);
  }
  return cur;
}

}  // namespace bouss
