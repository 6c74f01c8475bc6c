#include "bouss/interval.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace bouss {

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi) {
  if (std::isnan(lo) || std::isnan(hi)) throw DomainError("NaN interval endpoint");
  if (lo > hi) throw DomainError("interval with lo > hi");
}

double Interval::mid() const noexcept {
  if (std::isinf(lo_) || std::isinf(hi_)) {
    if (std::isfinite(lo_)) return lo_;
    if (std::isfinite(hi_)) return hi_;
    return 0.0;
  }
  return 0.5 * lo_ + 0.5 * hi_;
}

double Interval::rad() const noexcept {
  const double m = mid();
  return std::fmax(rnd::sub_up(m, lo_), rnd::sub_up(hi_, m));
}

double Interval::mig() const noexcept {
  if (contains_zero()) return 0.0;
  return std::fmin(std::fabs(lo_), std::fabs(hi_));
}

Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains_zero()) throw DomainError("interval division by an interval containing 0");
  if (a.lo_ == a.hi_ && b.lo_ == b.hi_)
    return Interval::make(rnd::div_down(a.lo_, b.lo_), rnd::div_up(a.lo_, b.lo_));
  const double al[2] = {a.lo_, a.hi_};
  const double bl[2] = {b.lo_, b.hi_};
  double lo = rnd::kInf, hi = -rnd::kInf;
  for (double x : al)
    for (double y : bl) {
      lo = std::fmin(lo, rnd::div_down(x, y));
      hi = std::fmax(hi, rnd::div_up(x, y));
    }
  return Interval::make(lo, hi);
}

Interval hull(const Interval& a, const Interval& b) {
  return Interval(std::fmin(a.lo(), b.lo()), std::fmax(a.hi(), b.hi()));
}

Interval max(const Interval& a, const Interval& b) {
  return Interval(std::fmax(a.lo(), b.lo()), std::fmax(a.hi(), b.hi()));
}

Interval min(const Interval& a, const Interval& b) {
  return Interval(std::fmin(a.lo(), b.lo()), std::fmin(a.hi(), b.hi()));
}

Interval abs(const Interval& a) {
  if (a.lo() >= 0) return a;
  if (a.hi() <= 0) return -a;
  return Interval(0.0, std::fmax(-a.lo(), a.hi()));
}

Interval sqrt(const Interval& a) {
  if (a.lo() < 0) throw DomainError("sqrt of an interval with negative members");
  return Interval(rnd::sqrt_down(a.lo()), rnd::sqrt_up(a.hi()));
}

Interval square(const Interval& a) { return pow_int(a, 2); }

namespace {

// [down(v^n), up(v^n)] for v >= 0 by binary powering of the point interval.
Interval pow_nonneg_point(double v, int n) {
  Interval base(v), acc(1.0);
  while (n > 0) {
    if (n & 1) acc *= base;
    n >>= 1;
    if (n) base *= base;
  }
  return acc;
}

}  // namespace

Interval pow_int(const Interval& a, int n) {
  if (n < 0) return Interval(1.0) / pow_int(a, -n);
  if (n == 0) return Interval(1.0);
  if (n % 2 == 0) {
    const Interval m = abs(a);
    return Interval(pow_nonneg_point(m.lo(), n).lo(), pow_nonneg_point(m.hi(), n).hi());
  }
  // Odd powers are increasing.
  auto lower = [n](double v) {
    return v >= 0 ? pow_nonneg_point(v, n).lo() : -pow_nonneg_point(-v, n).hi();
  };
  auto upper = [n](double v) {
    return v >= 0 ? pow_nonneg_point(v, n).hi() : -pow_nonneg_point(-v, n).lo();
  };
  return Interval(lower(a.lo()), upper(a.hi()));
}

Interval pi_interval() {
  // 0x1.921fb54442d18p+1 is the double just below pi.
  constexpr double pi_lo = 0x1.921fb54442d18p+1;
  return Interval(pi_lo, rnd::next_up(pi_lo));
}

std::ostream& operator<<(std::ostream& os, const Interval& a) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17) << '[' << a.lo() << ", " << a.hi() << ']';
  os.flags(flags);
  os.precision(prec);
  return os;
}

MidRad to_midrad(const Interval& a) { return {a.mid(), a.rad()}; }

Interval to_interval(const MidRad& a) {
  return Interval(rnd::sub_down(a.mid, a.rad), rnd::add_up(a.mid, a.rad));
}

MidRadMatrix to_midrad(const IntervalMatrix& a) {
  MidRadMatrix r(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const MidRad mr = to_midrad(a.data()[i]);
    r.mid.data()[i] = mr.mid;
    r.rad.data()[i] = mr.rad;
  }
  return r;
}

MidRadMatrix to_midrad(const Matrix<double>& a) {
  MidRadMatrix r;
  r.mid = a;
  r.rad = Matrix<double>(a.rows(), a.cols(), 0.0);
  return r;
}

IntervalMatrix to_interval(const MidRadMatrix& a) {
  IntervalMatrix r(a.rows(), a.cols());
  for (std::size_t i = 0; i < r.size(); ++i)
    r.data()[i] = to_interval(MidRad{a.mid.data()[i], a.rad.data()[i]});
  return r;
}

namespace {

void gemm(const Matrix<double>& a, const Matrix<double>& b, Matrix<double>& c) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto m = static_cast<Eigen::Index>(a.rows());
  const auto n = static_cast<Eigen::Index>(b.cols());
  const auto k = static_cast<Eigen::Index>(a.cols());
  c = Matrix<double>(a.rows(), b.cols(), 0.0);
  if (m == 0 || n == 0 || k == 0) return;
  Eigen::Map<RowMat>(c.data(), m, n).noalias() =
      Eigen::Map<const RowMat>(a.data(), m, k) * Eigen::Map<const RowMat>(b.data(), k, n);
}

bool all_zero(const Matrix<double>& a) {
  return std::all_of(a.storage().begin(), a.storage().end(), [](double v) { return v == 0.0; });
}

Matrix<double> abs_of(const Matrix<double>& a) {
  Matrix<double> r(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = std::fabs(a.data()[i]);
  return r;
}

}  // namespace

// With u = 2^-53, g = n u / (1 - n u) and eta the smallest subnormal, any
// floating-point dot product of length n satisfies
//   |fl(x.y) - x.y| <= g |x|.|y| + n eta,
// and for nonnegative data fl(x.y) >= (1 - g) x.y - n eta.
MidRadMatrix mat_mul_verified(const MidRadMatrix& a, const MidRadMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("mat_mul_verified: inner dimensions differ");
  const std::size_t n = a.cols();
  constexpr double u = 0x1p-53;
  constexpr double eta = std::numeric_limits<double>::denorm_min();
  const double nu = rnd::mul_up(static_cast<double>(n), u);
  if (nu >= 0.5) throw ShapeError("mat_mul_verified: inner dimension too large");
  const double gamma = rnd::div_up(nu, rnd::sub_down(1.0, nu));
  const double inflate = rnd::div_up(1.0, rnd::sub_down(1.0, gamma));
  const double floor_err = rnd::mul_up(static_cast<double>(n), eta);

  MidRadMatrix c;
  gemm(a.mid, b.mid, c.mid);

  // W = g |Bm| + Br, so that |Am| W bounds both the midpoint rounding error
  // and the contribution of B's radius.
  Matrix<double> w(b.rows(), b.cols());
  for (std::size_t i = 0; i < w.size(); ++i)
    w.data()[i] = rnd::add_up(rnd::mul_up(gamma, std::fabs(b.mid.data()[i])), b.rad.data()[i]);
  Matrix<double> p;
  gemm(abs_of(a.mid), w, p);

  Matrix<double> q;
  const bool a_has_rad = !all_zero(a.rad);
  if (a_has_rad) {
    Matrix<double> bm(b.rows(), b.cols());
    for (std::size_t i = 0; i < bm.size(); ++i)
      bm.data()[i] = rnd::add_up(std::fabs(b.mid.data()[i]), b.rad.data()[i]);
    gemm(a.rad, bm, q);
  }

  c.rad = Matrix<double>(c.mid.rows(), c.mid.cols());
  for (std::size_t i = 0; i < c.rad.size(); ++i) {
    // Underflow floors of the three products, each at most 2 n eta after
    // inflation; the gamma part of the midpoint error is folded into W.
    double r = rnd::add_up(rnd::mul_up(p.data()[i], inflate), 6 * floor_err);
    if (a_has_rad) r = rnd::add_up(r, rnd::mul_up(q.data()[i], inflate));
    if (!std::isfinite(r) || !std::isfinite(c.mid.data()[i]))
      throw DomainError("mat_mul_verified: overflow");
    c.rad.data()[i] = r;
  }
  return c;
}

IntervalMatrix mat_mul_verified(const IntervalMatrix& a, const IntervalMatrix& b) {
  return to_interval(mat_mul_verified(to_midrad(a), to_midrad(b)));
}

}  // namespace bouss
