#include "kernels_impl.hpp"

namespace regretstream::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void standardize_scalar(double* x, const double* mean, const double* inv_scale, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] - mean[i]) * inv_scale[i];
}

}  // namespace regretstream::simd::detail
