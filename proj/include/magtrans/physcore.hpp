#pragma once

/// \file
/// Physical constants, unit conversion and the digamma function used by the
/// magnetoconductance models.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace magtrans {

/// Raised when a function is evaluated outside its mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for malformed user input (files, configuration, unit tags).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool condition, const char* what) {
  if (!condition) throw DomainError(what);
}
inline bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }
}  // namespace detail

// CODATA 2018 exact and recommended SI values.
struct Constants {
  static constexpr double e = 1.602176634e-19;         // C
  static constexpr double h_planck = 6.62607015e-34;   // J s
  static constexpr double hbar = h_planck / (2.0 * std::numbers::pi);
  static constexpr double k_B = 1.380649e-23;          // J/K
  static constexpr double mu_B = 9.2740100783e-24;     // J/T
  static constexpr double G0 = e * e / h_planck;       // S
  static constexpr double g_factor = 2.0;
};

inline constexpr double kEulerGamma = 0.57721566490153286060651209;

enum class Unit {
  // SI
  Meter,
  Tesla,
  Kelvin,
  SiemensPerSquare,
  PerSquareMeter,
  SquareMeterPerVoltSecond,
  // practical input units
  PerSquareCentimeter,
  Nanometer,
  Micrometer,
  Millikelvin,
  SquareCentimeterPerVoltSecond,
};

struct Quantity {
  double value = 0.0;
  Unit unit = Unit::Meter;
};

namespace detail {
// A practical unit is `si = value * mul / div` with exact power-of-ten factors,
// so that one of the two operations is always a single correctly rounded op.
struct UnitScale {
  Unit si;
  double mul;
  double div;
};

inline UnitScale unit_scale(Unit u) {
  switch (u) {
    case Unit::Meter:
    case Unit::Tesla:
    case Unit::Kelvin:
    case Unit::SiemensPerSquare:
    case Unit::PerSquareMeter:
    case Unit::SquareMeterPerVoltSecond:
      return {u, 1.0, 1.0};
    case Unit::PerSquareCentimeter:
      return {Unit::PerSquareMeter, 1e4, 1.0};
    case Unit::Nanometer:
      return {Unit::Meter, 1.0, 1e9};
    case Unit::Micrometer:
      return {Unit::Meter, 1.0, 1e6};
    case Unit::Millikelvin:
      return {Unit::Kelvin, 1.0, 1e3};
    case Unit::SquareCentimeterPerVoltSecond:
      return {Unit::SquareMeterPerVoltSecond, 1.0, 1e4};
  }
  throw InputError("unknown unit tag " + std::to_string(static_cast<int>(u)));
}
}  // namespace detail

inline Quantity to_si(Quantity q) {
  const auto s = detail::unit_scale(q.unit);
  return {q.value * s.mul / s.div, s.si};
}

/// Inverse of to_si; `target` must share the SI base of `q`.
inline Quantity from_si(Quantity q, Unit target) {
  const auto s = detail::unit_scale(target);
  if (q.unit != s.si)
    throw InputError("from_si: quantity is not in the SI base of the target unit");
  return {q.value * s.div / s.mul, target};
}

inline Unit parse_unit(std::string_view tag) {
  static constexpr std::array<std::pair<std::string_view, Unit>, 11> table{{
      {"m", Unit::Meter},
      {"T", Unit::Tesla},
      {"K", Unit::Kelvin},
      {"S", Unit::SiemensPerSquare},
      {"m^-2", Unit::PerSquareMeter},
      {"m^2/Vs", Unit::SquareMeterPerVoltSecond},
      {"cm^-2", Unit::PerSquareCentimeter},
      {"nm", Unit::Nanometer},
      {"um", Unit::Micrometer},
      {"mK", Unit::Millikelvin},
      {"cm^2/Vs", Unit::SquareCentimeterPerVoltSecond},
  }};
  for (const auto& [name, unit] : table)
    if (name == tag) return unit;
  throw InputError("unknown unit tag '" + std::string(tag) + "'");
}

/// Digamma function psi(x) for real x > 0.
///
/// Upward recurrence psi(x) = psi(x + 1) - 1/x until x >= 10, then the
/// asymptotic expansion with six Bernoulli terms. Absolute error is below
/// 1e-12 on [0.5, 1e6].
inline double digamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) throw DomainError("digamma: argument must be positive and finite");
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // B_2k / (2k) for k = 1..6
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760))))));
  return shift + std::log(x) - 0.5 * inv - series;
}

}  // namespace magtrans
