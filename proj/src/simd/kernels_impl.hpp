#pragma once

#include <cstddef>

namespace regretstream::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
double squared_distance_scalar(const double* a, const double* b, std::size_t n);
void standardize_scalar(double* x, const double* mean, const double* inv_scale, std::size_t n);

#if defined(REGRETSTREAM_HAVE_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
double squared_distance_avx2(const double* a, const double* b, std::size_t n);
void standardize_avx2(double* x, const double* mean, const double* inv_scale, std::size_t n);
#endif

#if defined(REGRETSTREAM_HAVE_NEON)
double dot_neon(const double* a, const double* b, std::size_t n);
double squared_distance_neon(const double* a, const double* b, std::size_t n);
void standardize_neon(double* x, const double* mean, const double* inv_scale, std::size_t n);
#endif

}  // namespace regretstream::simd::detail
