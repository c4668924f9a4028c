#pragma once

#include <span>

namespace lqconic {

/// ∫ f dt from samples on a uniform grid of spacing h: composite Simpson,
/// with a 3/8-rule tail when the number of intervals is odd.  Falls back to
/// the trapezoid rule for a single interval.
double integrate_samples(std::span<const double> f, double h);

}  // namespace lqconic
