#pragma once

#include <cstdint>
#include <span>

#include <nlohmann/json_fwd.hpp>

namespace regretstream::stats {

/// Rows are groups, columns are attribute present / absent:
///
///             present  absent
///   group 1      a        b
///   group 2      c        d
struct Contingency2x2 {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;

  friend bool operator==(const Contingency2x2&, const Contingency2x2&) = default;
};

struct TestResult {
  double statistic = 0.0;    // odds ratio (Fisher) or U (Mann-Whitney)
  double p_two_sided = 1.0;  // in [0,1]
  double effect = 0.0;       // odds ratio (Fisher) or rank-biserial correlation
  bool significant = false;  // p_two_sided < alpha
};

nlohmann::json to_json(const TestResult& r);

/// Conditional odds ratio estimate (a*d)/(b*c): +inf when only b*c is zero,
/// NaN when both products are zero.
double odds_ratio(const Contingency2x2& t);

/// Fisher's exact test. The two-sided p-value sums the hypergeometric
/// probabilities of every same-margin table no more likely than the observed
/// one (relative slack 1e-7 for floating ties). Throws ValidationError when a
/// row is empty.
TestResult fisher_exact(const Contingency2x2& t, double alpha = 0.05);

/// log P(X = k) for X ~ Hypergeometric(draws = row1, successes = col1, N).
double hypergeometric_log_pmf(std::uint64_t k, std::uint64_t row1, std::uint64_t col1, std::uint64_t total);

enum class MwuMethod {
  automatic,   // exact when |xs| + |ys| <= kExactMwuMaxTotal
  exact,       // full null distribution of U (ties handled with midranks)
  asymptotic,  // normal approximation, tie- and continuity-corrected
};

inline constexpr std::size_t kExactMwuMaxTotal = 16;

/// Mann-Whitney U with U = #{(x,y): x > y} + 0.5 #{x == y}. effect is the
/// rank-biserial correlation 2U/(nm) - 1 (positive when xs tend larger).
/// Throws ValidationError for an empty sample.
TestResult mann_whitney_u(std::span<const double> xs, std::span<const double> ys, double alpha = 0.05,
                          MwuMethod method = MwuMethod::automatic);

/// Median of a non-empty sample (mean of the middle pair for even sizes).
double median(std::span<const double> values);

}  // namespace regretstream::stats
