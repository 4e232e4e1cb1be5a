#include "synergy/extended_real.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace synergy {

ExtendedNonneg::ExtendedNonneg(double v) {
  if (std::isinf(v) && v > 0) {
    infinite_ = true;
    return;
  }
  if (!(v >= 0.0)) throw std::invalid_argument("ExtendedNonneg requires a nonnegative value");
  value_ = v;
}

ExtendedNonneg operator+(ExtendedNonneg a, ExtendedNonneg b) {
  if (a.infinite_ || b.infinite_) return ExtendedNonneg::infinity();
  return ExtendedNonneg(a.value_ + b.value_);
}

ExtendedNonneg excess(ExtendedNonneg a, ExtendedNonneg b) {
  if (a.is_infinite()) {
    if (b.is_infinite()) throw std::domain_error("excess of two infinite values");
    return ExtendedNonneg::infinity();
  }
  if (b.is_infinite()) throw std::domain_error("excess of a finite value over infinity");
  const double d = a.value() - b.value();
  return ExtendedNonneg(d > 0.0 ? d : 0.0);
}

std::ostream& operator<<(std::ostream& os, ExtendedNonneg v) {
  if (v.is_infinite()) return os << "+inf";
  return os << v.value();
}

}  // namespace synergy
