#pragma once

// Standard normal tail probabilities that stay accurate far into the tails.

namespace statknn::normal {

/// P(W >= x), W ~ N(0, 1).
double sf(double x);

/// log P(W >= x). Switches from erfc to a continued-fraction Mills ratio
/// beyond x = 8, so it stays finite where erfc underflows.
double log_sf(double x);

/// log P(lo <= W <= hi); -infinity when lo >= hi.
double log_mass(double lo, double hi);

/// log(exp(a) + exp(b)) without overflow.
double log_add(double a, double b);

}  // namespace statknn::normal
