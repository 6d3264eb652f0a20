#include "statknn/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace statknn::normal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTailSwitch = 8.0;

// Mills ratio R(x) = sf(x) / pdf(x) via its continued fraction
// R = 1 / (x + 1 / (x + 2 / (x + 3 / ...))), evaluated bottom-up.
double mills_ratio(double x) {
  double t = x;
  for (int k = 120; k >= 1; --k) t = x + k / t;
  return 1.0 / t;
}

// log(exp(la) - exp(lb)) for la >= lb
double log_sub(double la, double lb) {
  if (lb == -kInf) return la;
  if (lb >= la) return -kInf;
  return la + std::log1p(-std::exp(lb - la));
}

}  // namespace

double sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double log_sf(double x) {
  if (x == kInf) return -kInf;
  if (x == -kInf) return 0.0;
  if (x < 0.0) return std::log1p(-0.5 * std::erfc(-x / std::numbers::sqrt2));
  if (x < kTailSwitch) return std::log(sf(x));
  const double log_pdf = -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
  return log_pdf + std::log(mills_ratio(x));
}

double log_mass(double lo, double hi) {
  if (!(lo < hi)) return -kInf;
  if (lo >= 0.0) return log_sub(log_sf(lo), log_sf(hi));
  if (hi <= 0.0) return log_mass(-hi, -lo);
  // straddles zero: both halves are at least moderately sized, erf is exact enough
  const double left = std::isinf(lo) ? 0.5 : 0.5 * std::erf(-lo / std::numbers::sqrt2);
  const double right = std::isinf(hi) ? 0.5 : 0.5 * std::erf(hi / std::numbers::sqrt2);
  return std::log(left + right);
}

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace statknn::normal
