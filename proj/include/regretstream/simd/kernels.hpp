#pragma once

// Dense double-precision kernels used by the scaler, the RBF-SVM kernel rows
// and TF-IDF normalisation. Every kernel has a scalar reference and, where
// the target supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The
// variant is picked once at startup from CPUID; REGRETSTREAM_SIMD=scalar
// forces the reference path.
//
// Variants agree to rounding, not bit-for-bit: the vector paths reassociate
// sums. Results are reproducible for a fixed ISA.

#include <cstddef>
#include <span>
#include <string_view>

namespace regretstream::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// True when `isa` was compiled in and the running CPU supports it.
bool isa_available(Isa isa);

/// ISA currently used by the dispatching entry points below.
Isa active_isa();

/// Overrides the runtime choice (tests and benchmarks). Throws
/// std::invalid_argument if the ISA is not available.
void set_active_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// x[i] = (x[i] - mean[i]) * inv_scale[i]
void standardize(std::span<double> x, std::span<const double> mean,
                 std::span<const double> inv_scale);

/// out[r] = exp(-gamma * |query - rows[r]|^2) for a row-major matrix with
/// out.size() rows of query.size() columns.
void rbf_row(std::span<const double> query, std::span<const double> rows, double gamma,
             std::span<double> out);

// Per-ISA entry points, exposed so equivalence tests can compare them
// directly. Calling an unavailable ISA's kernel is undefined.
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*standardize)(double*, const double*, const double*, std::size_t);
};

const KernelTable& kernels_for(Isa isa);

}  // namespace regretstream::simd
