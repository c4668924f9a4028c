#include "lqconic/quadrature.h"

#include <cstddef>

namespace lqconic {

double integrate_samples(std::span<const double> f, double h) {
  const std::size_t intervals = f.size() < 2 ? 0 : f.size() - 1;
  if (intervals == 0) return 0.0;
  if (intervals == 1) return 0.5 * h * (f[0] + f[1]);

  // Simpson on an even prefix, 3/8 rule on the last three intervals if odd.
  const std::size_t simpson_end = intervals % 2 == 0 ? intervals : intervals - 3;
  double sum = 0.0;
  for (std::size_t k = 0; k + 2 <= simpson_end; k += 2) {
    sum += h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
  }
  if (simpson_end != intervals) {
    const std::size_t k = simpson_end;
    sum += 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]);
  }
  return sum;
}

}  // namespace lqconic
