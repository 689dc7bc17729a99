#pragma once

#include <cstddef>

namespace poreflow::detail {

// out[k] = c0 * exp(-scale * integral[k])
void decay(const double* integral, std::size_t n, double scale, double c0, double* out);

}  // namespace poreflow::detail
