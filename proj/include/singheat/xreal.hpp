#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace singheat {

// Real number with a double mantissa and a 64-bit binary exponent.
// Weight quantities such as exp(lambda*psi) leave the double range long
// before they stop being meaningful, so they are carried in this form.
class XReal {
public:
  XReal() = default;
  XReal(double v) { set(v, 0); } // NOLINT(implicit)

  static XReal from_parts(double m, std::int64_t e) {
    XReal r;
    r.set(m, e);
    return r;
  }

  // e^y for any finite y.
  static XReal exp(double y);

  double mantissa() const { return m_; }
  std::int64_t exponent() const { return e_; }

  bool is_zero() const { return m_ == 0.0; }
  int sign() const { return (m_ > 0.0) - (m_ < 0.0); }

  // Natural log of |x|; -inf for zero.
  double log_abs() const;
  double log10_abs() const { return log_abs() / std::log(10.0); }

  // Clamps to +-inf / 0 outside the double range.
  double to_double() const { return std::ldexp(m_, static_cast<int>(clamp_exp(e_))); }

  XReal abs() const { return from_parts(std::fabs(m_), e_); }
  XReal operator-() const { return from_parts(-m_, e_); }

  XReal& operator+=(const XReal& o);
  XReal& operator-=(const XReal& o) { return *this += -o; }
  XReal& operator*=(const XReal& o) {
    set(m_ * o.m_, e_ + o.e_);
    return *this;
  }
  XReal& operator/=(const XReal& o);

  friend XReal operator+(XReal a, const XReal& b) { return a += b; }
  friend XReal operator-(XReal a, const XReal& b) { return a -= b; }
  friend XReal operator*(XReal a, const XReal& b) { return a *= b; }
  friend XReal operator/(XReal a, const XReal& b) { return a /= b; }

  friend bool operator<(const XReal& a, const XReal& b) { return compare(a, b) < 0; }
  friend bool operator>(const XReal& a, const XReal& b) { return compare(a, b) > 0; }
  friend bool operator<=(const XReal& a, const XReal& b) { return compare(a, b) <= 0; }
  friend bool operator>=(const XReal& a, const XReal& b) { return compare(a, b) >= 0; }
  friend bool operator==(const XReal& a, const XReal& b) { return compare(a, b) == 0; }

  static int compare(const XReal& a, const XReal& b);

  // a/b as a double; both may be astronomically large.
  static double ratio(const XReal& a, const XReal& b) { return (a / b).to_double(); }

  // Decimal scientific notation with 17 significant digits, exact exponent.
  std::string str() const;

private:
  static std::int64_t clamp_exp(std::int64_t e) {
    return e > 4000 ? 4000 : (e < -4000 ? -4000 : e);
  }
  void set(double m, std::int64_t e);

  double m_ = 0.0;      // 0 or 0.5 <= |m| < 1
  std::int64_t e_ = 0;
};

inline XReal max(const XReal& a, const XReal& b) { return a < b ? b : a; }
inline XReal min(const XReal& a, const XReal& b) { return a < b ? a : b; }

} // namespace singheat
