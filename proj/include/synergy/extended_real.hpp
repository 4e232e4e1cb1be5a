#pragma once

#include <compare>
#include <iosfwd>
#include <limits>

namespace synergy {

/// Nonnegative real number or +infinity. Used as the codomain of potentials
/// that blow up outside the domain of a chart.
class ExtendedNonneg {
 public:
  constexpr ExtendedNonneg() = default;
  explicit ExtendedNonneg(double v);

  static constexpr ExtendedNonneg infinity() { return ExtendedNonneg(Inf{}); }

  constexpr bool is_finite() const { return !infinite_; }
  constexpr bool is_infinite() const { return infinite_; }

  /// Finite value; +inf as a double when infinite.
  constexpr double value() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  /// Scalar handed to event locators: +inf maps to a large finite sentinel.
  constexpr double finite_or(double sentinel) const { return infinite_ ? sentinel : value_; }

  friend ExtendedNonneg operator+(ExtendedNonneg a, ExtendedNonneg b);
  friend constexpr bool operator==(ExtendedNonneg a, ExtendedNonneg b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }
  friend constexpr std::partial_ordering operator<=>(ExtendedNonneg a, ExtendedNonneg b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ <=> b.infinite_;
    return a.value_ <=> b.value_;
  }

 private:
  struct Inf {};
  constexpr explicit ExtendedNonneg(Inf) : infinite_(true) {}

  double value_ = 0.0;
  bool infinite_ = false;
};

/// a - b for a >= b. Infinite minus finite is infinite; the difference of two
/// infinities is undefined and throws. Negative differences clamp to zero.
ExtendedNonneg excess(ExtendedNonneg a, ExtendedNonneg b);

std::ostream& operator<<(std::ostream& os, ExtendedNonneg v);

}  // namespace synergy
