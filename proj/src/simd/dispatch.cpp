#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"
#include "regretstream/simd/kernels.hpp"

namespace regretstream::simd {
namespace {

constexpr KernelTable kScalar{detail::dot_scalar, detail::squared_distance_scalar,
                              detail::standardize_scalar};
#if defined(REGRETSTREAM_HAVE_AVX2)
constexpr KernelTable kAvx2{detail::dot_avx2, detail::squared_distance_avx2,
                            detail::standardize_avx2};
#endif
#if defined(REGRETSTREAM_HAVE_NEON)
constexpr KernelTable kNeon{detail::dot_neon, detail::squared_distance_neon,
                            detail::standardize_neon};
#endif

Isa detect() {
  if (const char* env = std::getenv("REGRETSTREAM_SIMD"); env != nullptr) {
    const std::string want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && isa_available(Isa::avx2)) return Isa::avx2;
    if (want == "neon" && isa_available(Isa::neon)) return Isa::neon;
  }
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("simd kernel: length mismatch");
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(REGRETSTREAM_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(REGRETSTREAM_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("SIMD variant not available: " + std::string(isa_name(isa)));
  }
  active().store(isa, std::memory_order_relaxed);
}

const KernelTable& kernels_for(Isa isa) {
  switch (isa) {
#if defined(REGRETSTREAM_HAVE_AVX2)
    case Isa::avx2: return kAvx2;
#endif
#if defined(REGRETSTREAM_HAVE_NEON)
    case Isa::neon: return kNeon;
#endif
    default: return kScalar;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return kernels_for(active_isa()).dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return kernels_for(active_isa()).squared_distance(a.data(), b.data(), a.size());
}

void standardize(std::span<double> x, std::span<const double> mean,
                 std::span<const double> inv_scale) {
  check_sizes(x.size(), mean.size());
  check_sizes(x.size(), inv_scale.size());
  kernels_for(active_isa()).standardize(x.data(), mean.data(), inv_scale.data(), x.size());
}

void rbf_row(std::span<const double> query, std::span<const double> rows, double gamma,
             std::span<double> out) {
  const std::size_t dim = query.size();
  check_sizes(rows.size(), dim * out.size());
  const auto& k = kernels_for(active_isa());
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = std::exp(-gamma * k.squared_distance(query.data(), rows.data() + r * dim, dim));
  }
}

}  // namespace regretstream::simd
