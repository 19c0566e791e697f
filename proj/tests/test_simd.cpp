#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "regretstream/rng.hpp"
#include "regretstream/simd/kernels.hpp"

using namespace regretstream;
namespace simd = regretstream::simd;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * 3.0;
  return v;
}

double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

double naive_sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i] - b[i]) * (a[i] - b[i]);
  return static_cast<double>(s);
}

// Tolerance scaled by the magnitude of the summed terms.
double tol(const std::vector<double>& a, const std::vector<double>& b) {
  long double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m += std::abs(a[i] * b[i]) + a[i] * a[i] + b[i] * b[i];
  return 1e-13 * static_cast<double>(m) + 1e-300;
}

struct IsaGuard {
  simd::Isa saved = simd::active_isa();
  ~IsaGuard() { simd::set_active_isa(saved); }
};

}  // namespace

TEST_CASE("scalar reference kernels match long double sums") {
  Rng rng(71);
  const auto& k = simd::kernels_for(simd::Isa::scalar);
  for (std::size_t n = 0; n < 70; ++n) {
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    CHECK(std::abs(k.dot(a.data(), b.data(), n) - naive_dot(a, b)) <= tol(a, b));
    CHECK(std::abs(k.squared_distance(a.data(), b.data(), n) - naive_sqdist(a, b)) <= tol(a, b));
  }
}

TEST_CASE("every available isa agrees with the scalar reference") {
  Rng rng(73);
  const auto& ref = simd::kernels_for(simd::Isa::scalar);
  for (auto isa : {simd::Isa::avx2, simd::Isa::neon}) {
    if (!simd::isa_available(isa)) {
      MESSAGE(std::string(simd::isa_name(isa)) << " not available on this machine");
      continue;
    }
    const auto& k = simd::kernels_for(isa);
    // Lengths around the vector width and unroll factor exercise the tails.
    for (std::size_t n = 0; n < 140; ++n) {
      const auto a = random_vec(rng, n), b = random_vec(rng, n);
      CHECK(std::abs(k.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol(a, b));
      CHECK(std::abs(k.squared_distance(a.data(), b.data(), n) - ref.squared_distance(a.data(), b.data(), n)) <=
            tol(a, b));
      auto x1 = random_vec(rng, n);
      auto x2 = x1;
      const auto mean = random_vec(rng, n), inv = random_vec(rng, n);
      ref.standardize(x1.data(), mean.data(), inv.data(), n);
      k.standardize(x2.data(), mean.data(), inv.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(x2[i] == doctest::Approx(x1[i]).epsilon(1e-14));
    }
    // Misaligned starting addresses.
    const auto a = random_vec(rng, 101), b = random_vec(rng, 101);
    CHECK(k.dot(a.data() + 1, b.data() + 3, 97) == doctest::Approx(ref.dot(a.data() + 1, b.data() + 3, 97)));
  }
}

TEST_CASE("dispatch honours the selected isa") {
  IsaGuard guard;
  CHECK(simd::isa_available(simd::Isa::scalar));
  CHECK(simd::isa_name(simd::Isa::scalar) == "scalar");
  simd::set_active_isa(simd::Isa::scalar);
  CHECK(simd::active_isa() == simd::Isa::scalar);
  for (auto isa : {simd::Isa::avx2, simd::Isa::neon}) {
    if (!simd::isa_available(isa)) CHECK_THROWS_AS(simd::set_active_isa(isa), std::invalid_argument);
  }

  Rng rng(79);
  const auto a = random_vec(rng, 33), b = random_vec(rng, 33);
  const double scalar = simd::dot(a, b);
  CHECK(scalar == simd::kernels_for(simd::Isa::scalar).dot(a.data(), b.data(), 33));
  for (auto isa : {simd::Isa::avx2, simd::Isa::neon}) {
    if (!simd::isa_available(isa)) continue;
    simd::set_active_isa(isa);
    CHECK(simd::dot(a, b) == doctest::Approx(scalar));
  }
}

TEST_CASE("span wrappers check lengths") {
  const std::vector<double> a(4, 1.0), b(5, 1.0);
  CHECK_THROWS_AS(simd::dot(a, b), std::invalid_argument);
  CHECK_THROWS_AS(simd::squared_distance(a, b), std::invalid_argument);
  std::vector<double> x(4, 1.0);
  CHECK_THROWS_AS(simd::standardize(x, a, b), std::invalid_argument);
  std::vector<double> out(3);
  CHECK_THROWS_AS(simd::rbf_row(a, b, 1.0, out), std::invalid_argument);
}

TEST_CASE("rbf rows") {
  IsaGuard guard;
  Rng rng(83);
  const std::size_t d = 13, rows = 9;
  const auto q = random_vec(rng, d);
  const auto m = random_vec(rng, d * rows);
  std::vector<double> out(rows);
  for (auto isa : {simd::Isa::scalar, simd::Isa::avx2, simd::Isa::neon}) {
    if (!simd::isa_available(isa)) continue;
    simd::set_active_isa(isa);
    simd::rbf_row(q, m, 0.01, out);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) s += (q[j] - m[r * d + j]) * (q[j] - m[r * d + j]);
      CHECK(out[r] == doctest::Approx(std::exp(-0.01 * s)).epsilon(1e-12));
    }
  }
}
