#include "kernels.hpp"

#include <cmath>

namespace poreflow::detail {

void decay(const double* integral, std::size_t n, double scale, double c0, double* out) {
  for (std::size_t k = 0; k < n; ++k) out[k] = c0 * std::exp(-scale * integral[k]);
}

}  // namespace poreflow::detail
