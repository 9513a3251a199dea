#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "zikq/error.hpp"
#include "zikq/normal.hpp"

namespace zikq {

enum class Kernel { Epanechnikov, Gaussian };  // Gaussian is truncated at +-4 sd

inline std::string_view to_string(Kernel k) {
  return k == Kernel::Epanechnikov ? "epanechnikov" : "gaussian";
}

inline Kernel parse_kernel(std::string_view name) {
  if (name == "epanechnikov") return Kernel::Epanechnikov;
  if (name == "gaussian") return Kernel::Gaussian;
  fail(ErrorKind::InvalidParameter, "unknown kernel '" + std::string(name) + "'");
}

namespace kernel {

inline constexpr double gaussian_cut = 4.0;

/// Half-width of the support in units of the bandwidth.
inline double support(Kernel k) { return k == Kernel::Epanechnikov ? 1.0 : gaussian_cut; }

inline double gaussian_mass() { return normal::cdf(gaussian_cut) - normal::cdf(-gaussian_cut); }

/// Standardized kernel K(u).
inline double density(Kernel k, double u) {
  const double a = std::abs(u);
  if (k == Kernel::Epanechnikov) return a < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  return a <= gaussian_cut ? normal::pdf(u) / gaussian_mass() : 0.0;
}

/// K_h(x) = K(x / h) / h
inline double weight(Kernel k, double x, double h) { return density(k, x / h) / h; }

/// Roughness R(K) = int K^2.
inline double roughness(Kernel k) {
  if (k == Kernel::Epanechnikov) return 0.6;
  const double c = gaussian_cut * std::numbers::sqrt2;
  const double z = gaussian_mass();
  return (normal::cdf(c) - normal::cdf(-c)) / (2.0 * std::sqrt(std::numbers::pi) * z * z);
}

/// Second moment mu_2(K) = int u^2 K(u) du.
inline double second_moment(Kernel k) {
  if (k == Kernel::Epanechnikov) return 0.2;
  return 1.0 - 2.0 * gaussian_cut * normal::pdf(gaussian_cut) / gaussian_mass();
}

/// R(K) / mu_2(K)^2, the constant in the local-linear AMISE bandwidth.
inline double amise_constant(Kernel k) {
  const double m2 = second_moment(k);
  return roughness(k) / (m2 * m2);
}

}  // namespace kernel
}  // namespace zikq
