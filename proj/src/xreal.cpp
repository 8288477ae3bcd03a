#include "singheat/xreal.hpp"

#include <charconv>
#include <limits>
#include <stdexcept>

namespace singheat {

void XReal::set(double m, std::int64_t e) {
  if (m == 0.0 || !std::isfinite(m)) {
    if (!std::isfinite(m)) throw std::domain_error("XReal: non-finite mantissa");
    m_ = 0.0;
    e_ = 0;
    return;
  }
  int k = 0;
  m_ = std::frexp(m, &k);
  e_ = e + k;
}

XReal XReal::exp(double y) {
  if (!std::isfinite(y)) {
    if (y < 0) return XReal(0.0);
    throw std::domain_error("XReal::exp of non-finite argument");
  }
  const double ln2 = std::log(2.0);
  const double k = std::floor(y / ln2);
  const double f = y - k * ln2;
  return from_parts(std::exp(f), static_cast<std::int64_t>(k));
}

double XReal::log_abs() const {
  if (m_ == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(std::fabs(m_)) + static_cast<double>(e_) * std::log(2.0);
}

XReal& XReal::operator+=(const XReal& o) {
  if (o.m_ == 0.0) return *this;
  if (m_ == 0.0) {
    *this = o;
    return *this;
  }
  const std::int64_t d = e_ - o.e_;
  if (d > 64) return *this;
  if (d < -64) {
    *this = o;
    return *this;
  }
  if (d >= 0)
    set(m_ + std::ldexp(o.m_, static_cast<int>(-d)), e_);
  else
    set(std::ldexp(m_, static_cast<int>(d)) + o.m_, o.e_);
  return *this;
}

XReal& XReal::operator/=(const XReal& o) {
  if (o.m_ == 0.0) throw std::domain_error("XReal: division by zero");
  set(m_ / o.m_, e_ - o.e_);
  return *this;
}

int XReal::compare(const XReal& a, const XReal& b) {
  const int sa = a.sign(), sb = b.sign();
  if (sa != sb) return sa < sb ? -1 : 1;
  if (sa == 0) return 0;
  int mag = 0;
  if (a.e_ != b.e_)
    mag = a.e_ < b.e_ ? -1 : 1;
  else if (std::fabs(a.m_) != std::fabs(b.m_))
    mag = std::fabs(a.m_) < std::fabs(b.m_) ? -1 : 1;
  return sa > 0 ? mag : -mag;
}

std::string XReal::str() const {
  if (m_ == 0.0) return "0";
  const double l10 = log10_abs();
  auto k = static_cast<std::int64_t>(std::floor(l10));
  double mant = std::pow(10.0, l10 - static_cast<double>(k));
  if (mant >= 10.0) {
    mant /= 10.0;
    ++k;
  }
  if (m_ < 0) mant = -mant;
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), mant, std::chars_format::fixed, 15);
  std::string out(buf, res.ptr);
  out += 'e';
  out += std::to_string(k);
  return out;
}

} // namespace singheat
