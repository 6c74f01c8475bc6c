#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bouss/matrix.hpp"

namespace bouss {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Directed scalar operations. Each result is the correctly rounded value,
// pushed one ulp outward only when an error-free transformation shows the
// exact result lies beyond it. Near the underflow/overflow limits where the
// transformations stop being exact we step unconditionally.
namespace rnd {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kMax = std::numeric_limits<double>::max();
inline constexpr double kTiny = 0x1p-960;
inline constexpr double kHuge = 0x1p+960;

inline double next_up(double x) noexcept { return std::nextafter(x, kInf); }
inline double next_down(double x) noexcept { return std::nextafter(x, -kInf); }

// Sign of the rounding error (exact - computed) of s = a + b, assuming s finite.
inline double two_sum_err(double a, double b, double s) noexcept {
  const double bb = s - a;
  return (a - (s - bb)) + (b - bb);
}

inline double add_up(double a, double b) noexcept {
  const double s = a + b;
  if (!std::isfinite(s)) {
    if (s == -kInf && std::isfinite(a) && std::isfinite(b)) return -kMax;
    return s;
  }
  return two_sum_err(a, b, s) > 0 ? next_up(s) : s;
}

inline double add_down(double a, double b) noexcept {
  const double s = a + b;
  if (!std::isfinite(s)) {
    if (s == kInf && std::isfinite(a) && std::isfinite(b)) return kMax;
    return s;
  }
  return two_sum_err(a, b, s) < 0 ? next_down(s) : s;
}

inline double sub_up(double a, double b) noexcept { return add_up(a, -b); }
inline double sub_down(double a, double b) noexcept { return add_down(a, -b); }

inline double mul_up(double a, double b) noexcept {
  if (a == 0 || b == 0) return 0;
  const double p = a * b;
  if (!std::isfinite(p)) {
    if (p == -kInf && std::isfinite(a) && std::isfinite(b)) return -kMax;
    return p;
  }
  if (std::fabs(p) < kTiny) return next_up(p);
  return std::fma(a, b, -p) > 0 ? next_up(p) : p;
}

inline double mul_down(double a, double b) noexcept {
  if (a == 0 || b == 0) return 0;
  const double p = a * b;
  if (!std::isfinite(p)) {
    if (p == kInf && std::isfinite(a) && std::isfinite(b)) return kMax;
    return p;
  }
  if (std::fabs(p) < kTiny) return next_down(p);
  return std::fma(a, b, -p) < 0 ? next_down(p) : p;
}

// Sign of a/b - q for q = fl(a/b); 2 means "unknown, step anyway".
inline int div_err_sign(double a, double b, double q) noexcept {
  if (std::fabs(a) < kTiny || std::fabs(q) < kTiny || std::fabs(q) > kHuge ||
      std::fabs(b) > kHuge)
    return 2;
  const double r = std::fma(-q, b, a);
  if (r == 0) return 0;
  return ((r > 0) == (b > 0)) ? 1 : -1;
}

inline double div_up(double a, double b) noexcept {
  if (a == 0) return 0;
  const double q = a / b;
  if (std::isinf(a) || std::isinf(b)) return q;
  if (!std::isfinite(q)) return q == -kInf ? -kMax : q;
  const int s = div_err_sign(a, b, q);
  return (s == 1 || s == 2) ? next_up(q) : q;
}

inline double div_down(double a, double b) noexcept {
  if (a == 0) return 0;
  const double q = a / b;
  if (std::isinf(a) || std::isinf(b)) return q;
  if (!std::isfinite(q)) return q == kInf ? kMax : q;
  const int s = div_err_sign(a, b, q);
  return (s == -1 || s == 2) ? next_down(q) : q;
}

inline double sqrt_up(double a) noexcept {
  const double s = std::sqrt(a);
  if (a == 0 || std::isinf(a)) return s;
  if (a < kTiny) return next_up(s);
  return std::fma(-s, s, a) > 0 ? next_up(s) : s;
}

inline double sqrt_down(double a) noexcept {
  const double s = std::sqrt(a);
  if (a == 0 || std::isinf(a)) return s;
  if (a < kTiny) return next_down(s);
  return std::fma(-s, s, a) < 0 ? next_down(s) : s;
}

}  // namespace rnd

class Interval {
 public:
  Interval() noexcept = default;
  // Implicit on purpose: exact constants and float data lift as points.
  Interval(double v);
  Interval(double lo, double hi);

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double mid() const noexcept;
  // Upper bounds on the radius / width.
  double rad() const noexcept;
  double width() const noexcept { return rnd::sub_up(hi_, lo_); }
  // max |t| and min |t| over the interval.
  double mag() const noexcept { return std::fmax(std::fabs(lo_), std::fabs(hi_)); }
  double mig() const noexcept;

  bool is_point() const noexcept { return lo_ == hi_; }
  bool contains(double v) const noexcept { return lo_ <= v && v <= hi_; }
  bool contains(const Interval& o) const noexcept { return lo_ <= o.lo_ && o.hi_ <= hi_; }
  bool contains_zero() const noexcept { return lo_ <= 0 && 0 <= hi_; }

  Interval& operator+=(const Interval& o);
  Interval& operator-=(const Interval& o);
  Interval& operator*=(const Interval& o);
  Interval& operator/=(const Interval& o);

  friend Interval operator-(const Interval& a) noexcept { return make(-a.hi_, -a.lo_); }
  friend Interval operator+(const Interval& a, const Interval& b);
  friend Interval operator-(const Interval& a, const Interval& b);
  friend Interval operator*(const Interval& a, const Interval& b);
  friend Interval operator/(const Interval& a, const Interval& b);

  friend bool operator==(const Interval& a, const Interval& b) noexcept {
    return a.lo_ == b.lo_ && a.hi_ == b.hi_;
  }

 private:
  // Trusted construction from already-checked endpoints.
  static Interval make(double lo, double hi);

  double lo_ = 0.0;
  double hi_ = 0.0;
};

inline Interval Interval::make(double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi)) throw DomainError("interval operation produced NaN");
  Interval r;
  r.lo_ = lo;
  r.hi_ = hi;
  return r;
}

inline Interval::Interval(double v) : lo_(v), hi_(v) {
  if (std::isnan(v)) throw DomainError("NaN interval endpoint");
}

inline Interval operator+(const Interval& a, const Interval& b) {
  return Interval::make(rnd::add_down(a.lo_, b.lo_), rnd::add_up(a.hi_, b.hi_));
}

inline Interval operator-(const Interval& a, const Interval& b) {
  return Interval::make(rnd::sub_down(a.lo_, b.hi_), rnd::sub_up(a.hi_, b.lo_));
}

inline Interval operator*(const Interval& a, const Interval& b) {
  if (a.lo_ >= 0 && b.lo_ >= 0)
    return Interval::make(rnd::mul_down(a.lo_, b.lo_), rnd::mul_up(a.hi_, b.hi_));
  if (a.lo_ == a.hi_ && b.lo_ == b.hi_)
    return Interval::make(rnd::mul_down(a.lo_, b.lo_), rnd::mul_up(a.lo_, b.lo_));
  const double al[2] = {a.lo_, a.hi_};
  const double bl[2] = {b.lo_, b.hi_};
  double lo = rnd::kInf, hi = -rnd::kInf;
  for (double x : al)
    for (double y : bl) {
      lo = std::fmin(lo, rnd::mul_down(x, y));
      hi = std::fmax(hi, rnd::mul_up(x, y));
    }
  return Interval::make(lo, hi);
}

inline Interval& Interval::operator+=(const Interval& o) { return *this = *this + o; }
inline Interval& Interval::operator-=(const Interval& o) { return *this = *this - o; }
inline Interval& Interval::operator*=(const Interval& o) { return *this = *this * o; }
inline Interval& Interval::operator/=(const Interval& o) { return *this = *this / o; }

Interval hull(const Interval& a, const Interval& b);
// Enclosures of max/min over all pairs of members.
Interval max(const Interval& a, const Interval& b);
Interval min(const Interval& a, const Interval& b);
Interval abs(const Interval& a);
Interval sqrt(const Interval& a);
Interval square(const Interval& a);
Interval pow_int(const Interval& a, int n);
Interval pi_interval();

std::ostream& operator<<(std::ostream& os, const Interval& a);

struct MidRad {
  double mid = 0.0;
  double rad = 0.0;
};

MidRad to_midrad(const Interval& a);
Interval to_interval(const MidRad& a);

using IntervalMatrix = Matrix<Interval>;

struct MidRadMatrix {
  Matrix<double> mid;
  Matrix<double> rad;

  MidRadMatrix() = default;
  MidRadMatrix(std::size_t rows, std::size_t cols) : mid(rows, cols), rad(rows, cols) {}
  std::size_t rows() const noexcept { return mid.rows(); }
  std::size_t cols() const noexcept { return mid.cols(); }
  Interval at(std::size_t i, std::size_t j) const { return to_interval(MidRad{mid(i, j), rad(i, j)}); }
  // Upper bound of |entry|.
  double mag(std::size_t i, std::size_t j) const noexcept {
    return rnd::add_up(std::fabs(mid(i, j)), rad(i, j));
  }
};

MidRadMatrix to_midrad(const IntervalMatrix& a);
IntervalMatrix to_interval(const MidRadMatrix& a);
// Point matrix with zero radius.
MidRadMatrix to_midrad(const Matrix<double>& a);

// Entrywise enclosure of the exact product. Uses BLAS on midpoints and
// magnitudes with an a-priori bound on the floating-point error.
MidRadMatrix mat_mul_verified(const MidRadMatrix& a, const MidRadMatrix& b);
IntervalMatrix mat_mul_verified(const IntervalMatrix& a, const IntervalMatrix& b);

}  // namespace bouss
