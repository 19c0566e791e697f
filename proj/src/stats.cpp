#include "regretstream/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <vector>

#include "regretstream/error.hpp"

namespace regretstream::stats {
namespace {

double log_choose(std::uint64_t n, std::uint64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

nlohmann::json finite_or_string(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

// Pooled midranks, doubled so they stay integral.
std::vector<std::int64_t> doubled_midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<std::int64_t> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // positions i..j (0-based) share rank ((i+1)+(j+1))/2
    const auto doubled = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = doubled;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

nlohmann::json to_json(const TestResult& r) {
  return {{"statistic", finite_or_string(r.statistic)},
          {"p_two_sided", r.p_two_sided},
          {"effect", finite_or_string(r.effect)},
          {"significant", r.significant}};
}

double odds_ratio(const Contingency2x2& t) {
  const double ad = static_cast<double>(t.a) * static_cast<double>(t.d);
  const double bc = static_cast<double>(t.b) * static_cast<double>(t.c);
  if (bc == 0.0) return ad == 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
  return ad / bc;
}

double hypergeometric_log_pmf(std::uint64_t k, std::uint64_t row1, std::uint64_t col1, std::uint64_t total) {
  return log_choose(row1, k) + log_choose(total - row1, col1 - k) - log_choose(total, col1);
}

TestResult fisher_exact(const Contingency2x2& t, double alpha) {
  const std::uint64_t row1 = t.a + t.b, row2 = t.c + t.d;
  if (row1 == 0 || row2 == 0) {
    throw ValidationError("fisher_exact: both rows of the 2x2 table need at least one count");
  }
  const std::uint64_t col1 = t.a + t.c;
  const std::uint64_t total = row1 + row2;
  const std::uint64_t lo = col1 > row2 ? col1 - row2 : 0;
  const std::uint64_t hi = std::min(row1, col1);

  const double log_obs = hypergeometric_log_pmf(t.a, row1, col1, total);
  const double cutoff = log_obs + std::log1p(1e-7);
  double p = 0.0;
  for (std::uint64_t k = lo; k <= hi; ++k) {
    const double lp = hypergeometric_log_pmf(k, row1, col1, total);
    if (lp <= cutoff) p += std::exp(lp);
  }
  p = std::clamp(p, 0.0, 1.0);

  TestResult r;
  r.statistic = odds_ratio(t);
  r.effect = r.statistic;
  r.p_two_sided = p;
  r.significant = p < alpha;
  return r;
}

TestResult mann_whitney_u(std::span<const double> xs, std::span<const double> ys, double alpha, MwuMethod method) {
  if (xs.empty() || ys.empty()) throw ValidationError("mann_whitney_u: both samples must be non-empty");
  const std::size_t n = xs.size(), m = ys.size(), total = n + m;

  std::vector<double> pooled(xs.begin(), xs.end());
  pooled.insert(pooled.end(), ys.begin(), ys.end());
  for (double v : pooled) {
    if (std::isnan(v)) throw ValidationError("mann_whitney_u: NaN in sample");
  }
  const auto ranks = doubled_midranks(pooled);
  std::int64_t rank_sum_x2 = 0;
  for (std::size_t i = 0; i < n; ++i) rank_sum_x2 += ranks[i];
  // 2U = 2R - n(n+1)
  const std::int64_t u_x2 = rank_sum_x2 - static_cast<std::int64_t>(n * (n + 1));
  const std::int64_t center_x2 = static_cast<std::int64_t>(n * m);  // 2 * E[U]
  const std::int64_t dev_obs = std::llabs(u_x2 - center_x2);

  const bool exact = method == MwuMethod::exact || (method == MwuMethod::automatic && total <= kExactMwuMaxTotal);
  double p;
  if (exact) {
    // ways[j][s]: subsets of size j with doubled rank sum s.
    std::int64_t max_sum = 0;
    for (auto r : ranks) max_sum += r;
    std::vector<std::vector<double>> ways(n + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < total; ++i) {
      const auto r = static_cast<std::size_t>(ranks[i]);
      for (std::size_t j = std::min(n, i + 1); j >= 1; --j) {
        auto& dst = ways[j];
        const auto& src = ways[j - 1];
        for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s) dst[s] += src[s - r];
      }
    }
    double tail = 0.0, all = 0.0;
    for (std::size_t s = 0; s < ways[n].size(); ++s) {
      const double w = ways[n][s];
      if (w == 0.0) continue;
      all += w;
      const std::int64_t u2 = static_cast<std::int64_t>(s) - static_cast<std::int64_t>(n * (n + 1));
      if (std::llabs(u2 - center_x2) >= dev_obs) tail += w;
    }
    p = tail / all;
  } else {
    // Tie correction: sum over tie groups of (t^3 - t).
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double tcount = static_cast<double>(j - i);
      tie_term += tcount * tcount * tcount - tcount;
      i = j;
    }
    const double nd = static_cast<double>(n), md = static_cast<double>(m), N = static_cast<double>(total);
    const double var = nd * md / 12.0 * ((N + 1.0) - tie_term / (N * (N - 1.0)));
    if (var <= 0.0) {
      p = 1.0;
    } else {
      const double dev = static_cast<double>(dev_obs) / 2.0;
      const double z = std::max(0.0, dev - 0.5) / std::sqrt(var);
      p = std::erfc(z / std::sqrt(2.0));
    }
  }

  TestResult res;
  res.statistic = static_cast<double>(u_x2) / 2.0;
  res.effect = 2.0 * res.statistic / (static_cast<double>(n) * static_cast<double>(m)) - 1.0;
  res.p_two_sided = std::clamp(p, 0.0, 1.0);
  res.significant = res.p_two_sided < alpha;
  return res;
}

double median(std::span<const double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + (upper - lower) / 2.0;
}

}  // namespace regretstream::stats
