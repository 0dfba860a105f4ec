#ifndef REGEN_SRS_SCALAR_HPP
#define REGEN_SRS_SCALAR_HPP

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <concepts>
#include <cstdio>
#include <string>
#include <string_view>
#include <type_traits>

#include "regen_srs/errors.hpp"

namespace regen_srs {

/// Exact backend. Arbitrary precision so long cycle products never overflow.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// The two numeric backends every distribution-level type is instantiated with.
template <typename S>
concept Scalar = std::same_as<S, double> || std::same_as<S, Rational>;

template <typename S>
inline constexpr bool is_exact_v = std::is_same_v<S, Rational>;

/// Tolerance used when a float sum must equal one; zero in exact mode.
template <Scalar S>
constexpr double unit_sum_tolerance() {
  return is_exact_v<S> ? 0.0 : 1e-12;
}

template <Scalar S>
double to_double(const S& x) {
  if constexpr (is_exact_v<S>) {
    return x.template convert_to<double>();
  } else {
    return x;
  }
}

/// Every finite double is a dyadic rational, so this conversion is exact.
template <Scalar S>
S from_double(double x) {
  if constexpr (is_exact_v<S>) {
    if (!std::isfinite(x)) throw ValidationError("non-finite value cannot become a rational");
    return Rational(x);
  } else {
    return x;
  }
}

template <Scalar S>
bool is_unit_sum(const S& total) {
  if constexpr (is_exact_v<S>) {
    return total == 1;
  } else {
    return std::abs(total - 1.0) <= unit_sum_tolerance<S>();
  }
}

/// Decimal rendering with 17 significant digits (round-trips binary64).
inline std::string format_decimal(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// "p/q" for rationals (just "p" when integral); 17-digit decimal for floats.
template <Scalar S>
std::string format_exact(const S& x) {
  if constexpr (is_exact_v<S>) {
    const BigInt num = boost::multiprecision::numerator(x);
    const BigInt den = boost::multiprecision::denominator(x);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
  } else {
    return format_decimal(x);
  }
}

/// Parses "p/q", an integer, or a decimal literal. Decimals are taken exactly
/// in rational mode ("0.1" becomes 1/10, not the nearest double).
template <Scalar S>
S parse_scalar(std::string_view text) {
  const std::string s(text);
  if (s.empty()) throw ValidationError("empty numeric literal");
  try {
    if constexpr (is_exact_v<S>) {
      if (auto slash = s.find('/'); slash != std::string::npos) {
        BigInt num(s.substr(0, slash));
        BigInt den(s.substr(slash + 1));
        if (den == 0) throw ValidationError("zero denominator in '" + s + "'");
        return Rational(num, den);
      }
      std::string mantissa = s;
      long exponent = 0;
      if (auto e = mantissa.find_first_of("eE"); e != std::string::npos) {
        exponent = std::stol(mantissa.substr(e + 1));
        mantissa = mantissa.substr(0, e);
      }
      bool negative = false;
      if (!mantissa.empty() && (mantissa[0] == '-' || mantissa[0] == '+')) {
        negative = mantissa[0] == '-';
        mantissa = mantissa.substr(1);
      }
      if (auto dot = mantissa.find('.'); dot != std::string::npos) {
        exponent -= static_cast<long>(mantissa.size() - dot - 1);
        mantissa.erase(dot, 1);
      }
      if (mantissa.empty() || mantissa.find_first_not_of("0123456789") != std::string::npos) {
        throw ValidationError("malformed numeric literal '" + s + "'");
      }
      Rational value{BigInt(mantissa)};
      const BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::labs(exponent)));
      value = exponent >= 0 ? value * Rational(scale) : value / Rational(scale);
      return negative ? Rational(-value) : value;
    } else {
      if (auto slash = s.find('/'); slash != std::string::npos) {
        const double num = std::stod(s.substr(0, slash));
        const double den = std::stod(s.substr(slash + 1));
        if (den == 0) throw ValidationError("zero denominator in '" + s + "'");
        return num / den;
      }
      std::size_t used = 0;
      const double value = std::stod(s, &used);
      if (used != s.size()) throw ValidationError("malformed numeric literal '" + s + "'");
      return value;
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("malformed numeric literal '" + s + "'");
  }
}

}  // namespace regen_srs

#endif  // REGEN_SRS_SCALAR_HPP
