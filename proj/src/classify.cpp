#include "regretstream/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "regretstream/error.hpp"
#include "regretstream/parallel.hpp"
#include "regretstream/rng.hpp"
#include "regretstream/simd/kernels.hpp"

namespace regretstream {
namespace {

using json = nlohmann::json;

// Rng stream indices.
constexpr std::uint64_t kStreamSample = 1;
constexpr std::uint64_t kStreamSplit = 2;
constexpr std::uint64_t kStreamCvFolds = 3;
constexpr std::uint64_t kStreamFinalFit = 4;
constexpr std::uint64_t kStreamStage1Folds = 11;
constexpr std::uint64_t kStreamStage1Fit = 12;
constexpr std::uint64_t kStreamCvCell = 100;

std::array<std::size_t, 2> class_counts(std::span<const std::uint8_t> y) {
  std::array<std::size_t, 2> c{};
  for (auto v : y) {
    if (v > 1) throw ValidationError("labels must be 0 or 1");
    ++c[v];
  }
  return c;
}

void require_two_classes(std::span<const std::uint8_t> y, const char* who) {
  const auto c = class_counts(y);
  if (c[0] == 0 || c[1] == 0) throw ValidationError(std::string(who) + ": training data must contain both classes");
}

double sign_of(std::uint8_t label) { return label ? 1.0 : -1.0; }

}  // namespace

// ---------------------------------------------------------------------------

EvalMetrics evaluate(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) throw ValidationError("evaluate: prediction and label counts differ");
  EvalMetrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) ++m.tp;
    if (p && !t) ++m.fp;
    if (!p && t) ++m.fn;
    if (!p && !t) ++m.tn;
  }
  m.precision = m.tp + m.fp == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  m.recall = m.tp + m.fn == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

EvalMetrics mean_metrics(std::span<const EvalMetrics> folds) {
  EvalMetrics m;
  if (folds.empty()) return m;
  for (const auto& f : folds) {
    m.precision += f.precision;
    m.recall += f.recall;
    m.f1 += f.f1;
    m.tp += f.tp;
    m.fp += f.fp;
    m.fn += f.fn;
    m.tn += f.tn;
  }
  const double n = static_cast<double>(folds.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

json to_json(const EvalMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn},
          {"tn", m.tn}};
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> balanced_sample(const Corpus& corpus, std::size_t n_per_class, std::uint64_t seed,
                                         const std::function<bool(const TweetRecord&)>& eligible) {
  std::map<UserId, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> users;
  for (std::size_t i = 0; i < corpus.tweets.size(); ++i) {
    const auto& r = corpus.tweets[i];
    if (eligible && !eligible(r)) continue;
    auto& u = users[r.tweet.user_id];
    (r.deleted ? u.first : u.second).push_back(i);
  }
  std::vector<UserId> order;
  std::size_t available = 0;
  for (const auto& [id, u] : users) {
    const auto pairs = std::min(u.first.size(), u.second.size());
    if (pairs == 0) continue;
    order.push_back(id);
    available += pairs;
  }
  if (n_per_class == 0) n_per_class = available;
  if (available == 0 || n_per_class > available) {
    throw ValidationError("balanced_sample: requested " + std::to_string(n_per_class) +
                          " per class but only " + std::to_string(available) + " same-user pairs exist");
  }
  Rng rng(seed);
  rng.shuffle(std::span<UserId>(order));
  std::vector<std::size_t> out;
  out.reserve(2 * n_per_class);
  std::size_t taken = 0;
  for (UserId id : order) {
    if (taken == n_per_class) break;
    auto del = users[id].first;
    auto keep = users[id].second;
    rng.shuffle(std::span<std::size_t>(del));
    rng.shuffle(std::span<std::size_t>(keep));
    const auto k = std::min({del.size(), keep.size(), n_per_class - taken});
    for (std::size_t j = 0; j < k; ++j) {
      out.push_back(del[j]);
      out.push_back(keep[j]);
    }
    taken += k;
  }
  return out;
}

std::vector<std::size_t> stratified_folds(std::span<const std::uint8_t> y, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("stratified_folds: need at least 2 folds");
  const auto counts = class_counts(y);
  if (counts[0] < k || counts[1] < k) {
    throw ValidationError("stratified_folds: each class needs at least " + std::to_string(k) + " rows");
  }
  Rng rng(seed);
  std::vector<std::size_t> fold(y.size());
  for (std::uint8_t c : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) idx.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t j = 0; j < idx.size(); ++j) fold[idx[j]] = j % k;
  }
  return fold;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const std::uint8_t> y,
                                                                               double test_fraction,
                                                                               std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must be in (0,1)");
  Rng rng(seed);
  std::vector<std::uint8_t> is_test(y.size(), 0);
  for (std::uint8_t c : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) idx.push_back(i);
    }
    if (idx.size() < 2) throw ValidationError("stratified_split: each class needs at least 2 rows");
    rng.shuffle(std::span<std::size_t>(idx));
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    for (std::size_t j = 0; j < n_test; ++j) is_test[idx[j]] = 1;
  }
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < y.size(); ++i) (is_test[i] ? test : train).push_back(i);
  return {train, test};
}

// ---------------------------------------------------------------------------

std::string_view stage1_name(Stage1Algorithm a) {
  return a == Stage1Algorithm::multinomial_nb ? "multinomial_nb" : "linear_svm";
}

Stage1Algorithm parse_stage1(std::string_view name) {
  if (name == "multinomial_nb") return Stage1Algorithm::multinomial_nb;
  if (name == "linear_svm") return Stage1Algorithm::linear_svm;
  throw ConfigError("unknown stage-1 algorithm '" + std::string(name) + "'");
}

std::string_view stage2_name(Stage2Algorithm a) { return a == Stage2Algorithm::rbf_svm ? "rbf_svm" : "adaboost"; }

Stage2Algorithm parse_stage2(std::string_view name) {
  if (name == "rbf_svm") return Stage2Algorithm::rbf_svm;
  if (name == "adaboost") return Stage2Algorithm::adaboost;
  throw ConfigError("unknown stage-2 algorithm '" + std::string(name) + "'");
}

double Stage1Model::decision(const SparseVector& x) const {
  if (algorithm == Stage1Algorithm::linear_svm) return x.dot(w) + b;
  double s = log_prior[1] - log_prior[0];
  for (const auto& [j, v] : x.entries) {
    if (j < dim) s += v * (log_likelihood[1][j] - log_likelihood[0][j]);
  }
  return s;
}

std::array<double, 2> Stage1Model::log_posterior(const SparseVector& x) const {
  if (algorithm != Stage1Algorithm::multinomial_nb) throw ValidationError("log_posterior needs a naive Bayes model");
  std::array<double, 2> joint = log_prior;
  for (int c = 0; c < 2; ++c) {
    for (const auto& [j, v] : x.entries) {
      if (j < dim) joint[c] += v * log_likelihood[c][j];
    }
  }
  const double m = std::max(joint[0], joint[1]);
  const double lse = m + std::log(std::exp(joint[0] - m) + std::exp(joint[1] - m));
  return {joint[0] - lse, joint[1] - lse};
}

Stage1Model train_stage1(std::span<const SparseVector> x, std::span<const std::uint8_t> y, std::size_t dim,
                         Stage1Algorithm algorithm, const Stage1Hyper& hyper, std::uint64_t seed) {
  if (x.size() != y.size()) throw ValidationError("train_stage1: row and label counts differ");
  require_two_classes(y, "train_stage1");
  for (const auto& row : x) {
    if (!row.entries.empty() && row.entries.back().first >= dim) {
      throw ValidationError("train_stage1: sparse index outside the vocabulary");
    }
  }
  Stage1Model m;
  m.algorithm = algorithm;
  m.dim = dim;
  const std::size_t n = x.size();

  if (algorithm == Stage1Algorithm::multinomial_nb) {
    if (!(hyper.nb_alpha > 0.0)) throw ValidationError("naive Bayes smoothing alpha must be > 0");
    m.alpha = hyper.nb_alpha;
    const auto counts = class_counts(y);
    std::vector<double> fc[2] = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& [j, v] : x[i].entries) fc[y[i]][j] += v;
    }
    for (int c = 0; c < 2; ++c) {
      m.log_prior[c] = std::log(static_cast<double>(counts[c]) / static_cast<double>(n));
      const double total = std::accumulate(fc[c].begin(), fc[c].end(), 0.0) + m.alpha * static_cast<double>(dim);
      const double log_total = std::log(total);
      m.log_likelihood[c].resize(dim);
      for (std::size_t j = 0; j < dim; ++j) m.log_likelihood[c][j] = std::log(fc[c][j] + m.alpha) - log_total;
    }
    return m;
  }

  if (!(hyper.svm_c > 0.0)) throw ValidationError("linear SVM C must be > 0");
  if (hyper.svm_epochs == 0) throw ValidationError("linear SVM needs at least one epoch");
  m.c = hyper.svm_c;
  const double lambda = 1.0 / (hyper.svm_c * static_cast<double>(n));
  // w = scale * (v, vb); the bias is the weight of a constant feature 1.
  std::vector<double> v(dim, 0.0);
  double vb = 0.0, scale = 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < hyper.svm_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double yi = sign_of(y[i]);
      const double margin = yi * scale * (x[i].dot(v) + vb);
      const double shrink = 1.0 - eta * lambda;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        vb = 0.0;
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (margin < 1.0) {
        const double step = eta * yi / scale;
        for (const auto& [j, val] : x[i].entries) v[j] += step * val;
        vb += step;
      }
      if (scale < 1e-100) {
        for (auto& e : v) e *= scale;
        vb *= scale;
        scale = 1.0;
      }
    }
  }
  m.w.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) m.w[j] = scale * v[j];
  m.b = scale * vb;
  return m;
}

double derived_feature(const Stage1Model& m, const SparseVector& x) {
  if (m.algorithm == Stage1Algorithm::multinomial_nb) return m.decision(x);
  const double norm = std::sqrt(std::inner_product(m.w.begin(), m.w.end(), m.w.begin(), 0.0));
  if (norm == 0.0) throw ValidationError("derived_feature: linear SVM weight vector is zero");
  return m.decision(x) / norm;
}

// ---------------------------------------------------------------------------

Scaler Scaler::fit(std::span<const std::vector<double>> rows, std::span<const std::uint8_t> active) {
  const std::size_t d = active.size();
  Scaler s;
  s.mean.assign(d, 0.0);
  s.inv_scale.assign(d, 0.0);
  if (rows.empty()) return s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < d; ++j) {
    if (!active[j]) continue;
    double mu = 0.0;
    for (const auto& r : rows) mu += r[j];
    mu /= n;
    double var = 0.0;
    for (const auto& r : rows) var += (r[j] - mu) * (r[j] - mu);
    var /= n;
    s.mean[j] = mu;
    s.inv_scale[j] = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  }
  return s;
}

void Scaler::apply(std::span<double> x) const { simd::standardize(x, mean, inv_scale); }

double RbfSvmModel::decision(std::span<const double> x) const {
  const std::size_t n = coef.size();
  std::vector<double> k(n);
  if (n > 0) simd::rbf_row(x, support, gamma, k);
  double s = -rho;
  for (std::size_t i = 0; i < n; ++i) s += coef[i] * k[i];
  return s;
}

namespace {

// LRU cache of kernel rows K(x_i, .).
class KernelCache {
 public:
  KernelCache(const std::vector<double>& flat, std::size_t n, std::size_t d, double gamma, std::size_t budget_bytes)
      : flat_(flat), n_(n), d_(d), gamma_(gamma) {
    capacity_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(1, n * sizeof(double)));
  }

  const std::vector<double>& row(std::size_t i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    lru_.emplace_front(i, std::vector<double>(n_));
    simd::rbf_row(std::span<const double>(flat_.data() + i * d_, d_), flat_, gamma_, lru_.front().second);
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  using Entry = std::pair<std::size_t, std::vector<double>>;
  const std::vector<double>& flat_;
  std::size_t n_, d_;
  double gamma_;
  std::size_t capacity_;
  std::list<Entry> lru_;
  std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
};

}  // namespace

RbfSvmModel train_rbf_svm(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y, double c,
                          double gamma, double tolerance) {
  const std::size_t n = x.size();
  if (n != y.size()) throw ValidationError("train_rbf_svm: row and label counts differ");
  if (n > kRbfMaxRows) {
    throw ConfigError("RBF-SVM is limited to " + std::to_string(kRbfMaxRows) + " training rows (got " +
                      std::to_string(n) + "); use stage2 = adaboost for larger samples");
  }
  if (!(c > 0.0) || !(gamma > 0.0)) throw ConfigError("RBF-SVM needs C > 0 and gamma > 0");
  require_two_classes(y, "train_rbf_svm");
  const std::size_t d = x.front().size();
  std::vector<double> flat;
  flat.reserve(n * d);
  for (const auto& r : x) {
    if (r.size() != d) throw ValidationError("train_rbf_svm: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }

  std::vector<double> ys(n), alpha(n, 0.0), grad(n, -1.0);
  for (std::size_t i = 0; i < n; ++i) ys[i] = sign_of(y[i]);
  KernelCache cache(flat, n, d, gamma, std::size_t{256} << 20);
  constexpr double tau = 1e-12;
  auto is_upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  const std::size_t max_iter = std::max<std::size_t>(10'000'000, 100 * n);
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    // First index: maximal violating -y G among I_up.
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (ys[t] > 0 ? !is_upper(t) : !is_lower(t)) {
        const double v = -ys[t] * grad[t];
        if (v >= gmax) {
          gmax = v;
          i_sel = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    if (i_sel < 0) break;
    const auto i = static_cast<std::size_t>(i_sel);
    const auto& ki = cache.row(i);

    // Second index: largest second-order objective decrease among I_low.
    double gmin_neg = -std::numeric_limits<double>::infinity();  // max of y G over I_low
    double best_obj = std::numeric_limits<double>::infinity();
    std::ptrdiff_t j_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (ys[t] > 0 ? is_lower(t) : is_upper(t)) continue;
      const double ygt = ys[t] * grad[t];
      gmin_neg = std::max(gmin_neg, ygt);
      const double diff = gmax + ygt;
      if (diff > 0.0) {
        double quad = 2.0 - 2.0 * ki[t];
        if (quad <= 0.0) quad = tau;
        const double obj = -(diff * diff) / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j_sel = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    if (gmax + gmin_neg < tolerance || j_sel < 0) break;
    const auto j = static_cast<std::size_t>(j_sel);
    const auto& kj = cache.row(j);

    const double old_ai = alpha[i], old_aj = alpha[j];
    const double qij = ys[i] * ys[j] * ki[j];
    if (ys[i] != ys[j]) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += ys[t] * (ys[i] * ki[t] * dai + ys[j] * kj[t] * daj);
    }
  }

  // rho: average over free vectors, else midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = ys[t] * grad[t];
    if (is_upper(t)) {
      if (ys[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (ys[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  RbfSvmModel m;
  m.dim = d;
  m.gamma = gamma;
  m.c = c;
  m.iterations = iter;
  m.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      m.coef.push_back(alpha[t] * ys[t]);
      m.support.insert(m.support.end(), x[t].begin(), x[t].end());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

double DecisionTree::predict(std::span<const double> x) const {
  std::size_t k = 0;
  while (nodes[k].feature >= 0) {
    const auto& nd = nodes[k];
    k = static_cast<std::size_t>(x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
  }
  return nodes[k].value;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    best = std::max(best, d[k]);
    if (nodes[k].feature >= 0) {
      d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
    }
  }
  return best;
}

namespace {

using SortedLists = std::vector<std::vector<std::uint32_t>>;

SortedLists presort(std::span<const std::vector<double>> x) {
  const std::size_t n = x.size(), d = n ? x.front().size() : 0;
  SortedLists lists(d, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < d; ++f) {
    auto& l = lists[f];
    std::iota(l.begin(), l.end(), 0u);
    std::stable_sort(l.begin(), l.end(), [&](std::uint32_t a, std::uint32_t b) { return x[a][f] < x[b][f]; });
  }
  return lists;
}

double weighted_gini(double p, double q) {
  const double s = p + q;
  return s > 0.0 ? s - (p * p + q * q) / s : 0.0;
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y, std::span<const double> w,
              std::size_t max_depth)
      : x_(x), y_(y), w_(w), max_depth_(max_depth), side_(x.size(), 0) {}

  DecisionTree build(SortedLists lists) {
    DecisionTree t;
    grow(t, std::move(lists), 0);
    return t;
  }

 private:
  std::int32_t grow(DecisionTree& t, SortedLists lists, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(t.nodes.size());
    t.nodes.emplace_back();
    double wp = 0.0, wn = 0.0;
    for (auto i : lists.front()) (y_[i] ? wp : wn) += w_[i];
    t.nodes[static_cast<std::size_t>(id)].value = wp >= wn ? 1.0 : -1.0;
    if (depth >= max_depth_ || wp == 0.0 || wn == 0.0) return id;

    double best = std::numeric_limits<double>::infinity();
    std::ptrdiff_t best_f = -1;
    double best_thr = 0.0;
    for (std::size_t f = 0; f < lists.size(); ++f) {
      const auto& l = lists[f];
      double lp = 0.0, ln = 0.0;
      for (std::size_t k = 0; k + 1 < l.size(); ++k) {
        (y_[l[k]] ? lp : ln) += w_[l[k]];
        const double a = x_[l[k]][f], b = x_[l[k + 1]][f];
        if (!(a < b)) continue;
        const double imp = weighted_gini(lp, ln) + weighted_gini(wp - lp, wn - ln);
        if (imp < best) {
          best = imp;
          best_f = static_cast<std::ptrdiff_t>(f);
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          best_thr = mid;
        }
      }
    }
    if (best_f < 0) return id;

    const auto f = static_cast<std::size_t>(best_f);
    for (auto i : lists[f]) side_[i] = x_[i][f] <= best_thr ? 1 : 2;
    SortedLists left(lists.size()), right(lists.size());
    for (std::size_t g = 0; g < lists.size(); ++g) {
      for (auto i : lists[g]) (side_[i] == 1 ? left[g] : right[g]).push_back(i);
    }
    lists.clear();
    lists.shrink_to_fit();
    auto& nd = t.nodes[static_cast<std::size_t>(id)];
    nd.feature = static_cast<std::int32_t>(f);
    nd.threshold = best_thr;
    const auto l = grow(t, std::move(left), depth + 1);
    const auto r = grow(t, std::move(right), depth + 1);
    t.nodes[static_cast<std::size_t>(id)].left = l;
    t.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  std::span<const std::vector<double>> x_;
  std::span<const std::uint8_t> y_;
  std::span<const double> w_;
  std::size_t max_depth_;
  std::vector<std::uint8_t> side_;
};

}  // namespace

DecisionTree fit_tree(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y,
                      std::span<const double> weights, std::size_t max_depth) {
  if (x.empty() || x.size() != y.size() || y.size() != weights.size()) {
    throw ValidationError("fit_tree: rows, labels and weights must be non-empty and aligned");
  }
  if (x.front().empty()) {
    DecisionTree t;
    double wp = 0.0, wn = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? wp : wn) += weights[i];
    t.nodes.push_back(TreeNode{-1, 0.0, -1, -1, wp >= wn ? 1.0 : -1.0});
    return t;
  }
  return TreeBuilder(x, y, weights, max_depth).build(presort(x));
}

double AdaBoostModel::decision(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t t = 0; t < trees.size(); ++t) s += alphas[t] * trees[t].predict(x);
  return s;
}

AdaBoostModel train_adaboost(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y,
                             std::size_t max_depth, std::size_t rounds) {
  if (x.size() != y.size() || x.empty()) throw ValidationError("train_adaboost: rows and labels must be aligned");
  if (max_depth == 0) throw ConfigError("AdaBoost max_depth must be >= 1");
  if (rounds == 0) throw ConfigError("AdaBoost needs at least one round");
  require_two_classes(y, "train_adaboost");
  const std::size_t n = x.size();
  AdaBoostModel m;
  m.max_depth = max_depth;
  m.rounds = rounds;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  const auto sorted = x.front().empty() ? SortedLists{} : presort(x);
  std::vector<double> h(n);

  for (std::size_t t = 0; t < rounds; ++t) {
    DecisionTree tree;
    if (sorted.empty()) {
      tree = fit_tree(x, y, w, max_depth);
    } else {
      tree = TreeBuilder(x, y, w, max_depth).build(sorted);
    }
    double eps = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = tree.predict(x[i]);
      if (h[i] != sign_of(y[i])) eps += w[i];
    }
    if (eps >= 0.5) {
      m.stop_reason = "round " + std::to_string(t + 1) + ": weighted error >= 0.5";
      break;
    }
    const bool perfect = eps <= 0.0;
    const double alpha = perfect ? kAdaBoostMaxAlpha : std::min(kAdaBoostMaxAlpha, 0.5 * std::log((1.0 - eps) / eps));
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::exp(-alpha * sign_of(y[i]) * h[i]);
      z += w[i];
    }
    for (auto& wi : w) wi /= z;
    m.bound *= z;
    m.trees.push_back(std::move(tree));
    m.alphas.push_back(alpha);
    m.errors.push_back(eps);
    if (perfect) {
      m.stop_reason = "round " + std::to_string(t + 1) + ": zero weighted error";
      break;
    }
  }

  std::size_t wrong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((m.decision(x[i]) > 0.0 ? 1 : 0) != y[i]) ++wrong;
  }
  m.training_error = static_cast<double>(wrong) / static_cast<double>(n);
  if (m.training_error > m.bound * (1.0 + 1e-9) + 1e-12) {
    throw std::logic_error("AdaBoost training error exceeds the product of normalizers");
  }
  return m;
}

double Stage2Model::decision(std::span<const double> raw) const {
  if (algorithm == Stage2Algorithm::adaboost) return boost.decision(raw);
  std::vector<double> z(raw.begin(), raw.end());
  scaler.apply(z);
  return svm.decision(z);
}

Stage2Model train_stage2(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y,
                         std::span<const std::uint8_t> active, Stage2Algorithm algorithm, const Stage2Hyper& hyper) {
  Stage2Model m;
  m.algorithm = algorithm;
  if (algorithm == Stage2Algorithm::adaboost) {
    m.boost = train_adaboost(x, y, hyper.max_depth, hyper.rounds);
    return m;
  }
  if (x.size() > kRbfMaxRows) {
    throw ConfigError("RBF-SVM is limited to " + std::to_string(kRbfMaxRows) + " training rows (got " +
                      std::to_string(x.size()) + "); use stage2 = adaboost for larger samples");
  }
  m.scaler = Scaler::fit(x, active);
  std::vector<std::vector<double>> z(x.begin(), x.end());
  for (auto& r : z) m.scaler.apply(r);
  m.svm = train_rbf_svm(z, y, hyper.rbf_c, hyper.rbf_gamma, hyper.smo_tolerance);
  return m;
}

// ---------------------------------------------------------------------------

json to_json(const GridCell& c) {
  return {{"stage1", {{"nb_alpha", c.stage1.nb_alpha}, {"svm_c", c.stage1.svm_c}, {"svm_epochs", c.stage1.svm_epochs}}},
          {"stage2",
           {{"rbf_c", c.stage2.rbf_c},
            {"rbf_gamma", c.stage2.rbf_gamma},
            {"smo_tolerance", c.stage2.smo_tolerance},
            {"max_depth", c.stage2.max_depth},
            {"rounds", c.stage2.rounds}}}};
}

void TrainConfig::validate() const {
  if (grid.empty()) throw ConfigError("training grid is empty");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (stage1_folds < 2) throw ConfigError("stage1_folds must be >= 2");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0,1)");
  for (const auto& c : grid) {
    if (!(c.stage1.nb_alpha > 0.0)) throw ConfigError("nb_alpha must be > 0");
    if (!(c.stage1.svm_c > 0.0)) throw ConfigError("svm_c must be > 0");
    if (c.stage1.svm_epochs == 0) throw ConfigError("svm_epochs must be >= 1");
    if (!(c.stage2.rbf_c > 0.0) || !(c.stage2.rbf_gamma > 0.0)) throw ConfigError("rbf_c and rbf_gamma must be > 0");
    if (c.stage2.max_depth == 0 || c.stage2.rounds == 0) throw ConfigError("max_depth and rounds must be >= 1");
  }
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig cfg;
  try {
    if (j.contains("stage1")) cfg.stage1 = parse_stage1(j["stage1"].get<std::string>());
    if (j.contains("stage2")) cfg.stage2 = parse_stage2(j["stage2"].get<std::string>());
    cfg.folds = j.value("folds", cfg.folds);
    cfg.stage1_folds = j.value("stage1_folds", cfg.stage1_folds);
    cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    cfg.n_per_class = j.value("n_per_class", cfg.n_per_class);
    cfg.with_responses = j.value("with_responses", cfg.with_responses);
    if (j.contains("masked")) {
      for (const auto& g : j["masked"]) cfg.masked.push_back(parse_group(g.get<std::string>()));
    }
    if (j.contains("grid")) {
      cfg.grid.clear();
      for (const auto& e : j["grid"]) {
        GridCell c;
        if (e.contains("stage1")) {
          const auto& s = e["stage1"];
          c.stage1.nb_alpha = s.value("nb_alpha", c.stage1.nb_alpha);
          c.stage1.svm_c = s.value("svm_c", c.stage1.svm_c);
          c.stage1.svm_epochs = s.value("svm_epochs", c.stage1.svm_epochs);
        }
        if (e.contains("stage2")) {
          const auto& s = e["stage2"];
          c.stage2.rbf_c = s.value("rbf_c", c.stage2.rbf_c);
          c.stage2.rbf_gamma = s.value("rbf_gamma", c.stage2.rbf_gamma);
          c.stage2.smo_tolerance = s.value("smo_tolerance", c.stage2.smo_tolerance);
          c.stage2.max_depth = s.value("max_depth", c.stage2.max_depth);
          c.stage2.rounds = s.value("rounds", c.stage2.rounds);
        }
        cfg.grid.push_back(c);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json TrainConfig::to_json() const {
  json g = json::array();
  for (const auto& c : grid) g.push_back(regretstream::to_json(c));
  json masked_names = json::array();
  for (auto m : masked) masked_names.push_back(group_name(m));
  return {{"stage1", stage1_name(stage1)},
          {"stage2", stage2_name(stage2)},
          {"grid", g},
          {"folds", folds},
          {"stage1_folds", stage1_folds},
          {"test_fraction", test_fraction},
          {"n_per_class", n_per_class},
          {"with_responses", with_responses},
          {"masked", masked_names}};
}

std::vector<std::uint8_t> active_slots(const TrainConfig& cfg, std::size_t dim) {
  std::vector<std::uint8_t> a(dim, 1);
  for (auto g : cfg.masked) {
    const auto [lo, hi] = group_slots(g);
    for (std::size_t k = lo; k < hi && k < dim; ++k) a[k] = 0;
  }
  return a;
}

double PipelineModel::decision(const SparseVector& sparse, std::span<const double> dense) const {
  if (dense.size() != active.size()) throw ValidationError("dense row width does not match the model");
  std::vector<double> row(dense.begin(), dense.end());
  row[slot::derived] = uses_stage1 ? derived_feature(stage1, sparse) : 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (!active[k]) row[k] = 0.0;
  }
  return stage2.decision(row);
}

TrainingRows TrainingRows::subset(std::span<const std::size_t> idx) const {
  TrainingRows r;
  r.vocab_size = vocab_size;
  r.sparse.reserve(idx.size());
  r.dense.reserve(idx.size());
  r.y.reserve(idx.size());
  for (auto i : idx) {
    r.sparse.push_back(sparse[i]);
    r.dense.push_back(dense[i]);
    r.y.push_back(y[i]);
  }
  return r;
}

PipelineModel fit_pipeline(const TrainingRows& rows, const TrainConfig& cfg, const GridCell& cell,
                           std::uint64_t seed) {
  if (rows.y.empty()) throw ValidationError("fit_pipeline: no training rows");
  require_two_classes(rows.y, "fit_pipeline");
  const std::size_t dim = rows.dense.front().size();
  PipelineModel m;
  m.active = active_slots(cfg, dim);
  m.uses_stage1 = m.active[slot::derived] != 0;
  std::vector<std::vector<double>> dense = rows.dense;

  if (m.uses_stage1) {
    const auto counts = class_counts(rows.y);
    const std::size_t k = std::min({cfg.stage1_folds, counts[0], counts[1]});
    if (k < 2) throw ValidationError("fit_pipeline: each class needs at least 2 rows for out-of-fold stage 1");
    const auto fold = stratified_folds(rows.y, k, Rng::derive(seed, kStreamStage1Folds).next_u64());
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<std::size_t> in, out;
      for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? out : in).push_back(i);
      const auto part = rows.subset(in);
      const auto s1 = train_stage1(part.sparse, part.y, rows.vocab_size, cfg.stage1, cell.stage1,
                                   Rng::derive(seed, kStreamStage1Fit + f + 1).next_u64());
      for (auto i : out) dense[i][slot::derived] = derived_feature(s1, rows.sparse[i]);
    }
    m.stage1 = train_stage1(rows.sparse, rows.y, rows.vocab_size, cfg.stage1, cell.stage1,
                            Rng::derive(seed, kStreamStage1Fit).next_u64());
  } else {
    for (auto& r : dense) r[slot::derived] = 0.0;
  }
  for (auto& r : dense) {
    for (std::size_t k = 0; k < dim; ++k) {
      if (!m.active[k]) r[k] = 0.0;
    }
  }
  m.stage2 = train_stage2(dense, rows.y, m.active, cfg.stage2, cell.stage2);
  return m;
}

EvalMetrics evaluate_pipeline(const PipelineModel& m, const TrainingRows& rows) {
  std::vector<std::uint8_t> pred(rows.y.size());
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = m.predict(rows.sparse[i], rows.dense[i]);
  return evaluate(pred, rows.y);
}

GridResult grid_search_cv(const TrainingRows& rows, const TrainConfig& cfg, std::uint64_t seed, unsigned threads) {
  if (cfg.grid.empty()) throw ValidationError("grid_search_cv: empty grid");
  const std::size_t k = cfg.folds;
  const auto fold = stratified_folds(rows.y, k, Rng::derive(seed, kStreamCvFolds).next_u64());
  const std::size_t cells = cfg.grid.size();
  std::vector<EvalMetrics> results(cells * k);
  parallel_for(cells * k, threads, [&](std::size_t task) {
    const std::size_t cell = task / k, f = task % k;
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? out : in).push_back(i);
    const auto model = fit_pipeline(rows.subset(in), cfg, cfg.grid[cell],
                                    Rng::derive(seed, kStreamCvCell + task).next_u64());
    results[task] = evaluate_pipeline(model, rows.subset(out));
  });
  GridResult g;
  for (std::size_t c = 0; c < cells; ++c) {
    g.cell_means.push_back(mean_metrics(std::span<const EvalMetrics>(results.data() + c * k, k)));
    if (g.cell_means[c].f1 > g.cell_means[g.best].f1) g.best = c;
  }
  return g;
}

// ---------------------------------------------------------------------------

PreparedData prepare_data(const Corpus& corpus, const TrainConfig& cfg, const TextResources& res, std::uint64_t seed,
                          unsigned threads) {
  cfg.validate();
  if (corpus.tweets.empty()) throw ValidationError("cannot train on an empty corpus");
  PreparedData d;
  std::function<bool(const TweetRecord&)> eligible;
  if (cfg.with_responses) eligible = [](const TweetRecord& r) { return !r.reply_ids.empty(); };
  d.corpus_rows = balanced_sample(corpus, cfg.n_per_class, Rng::derive(seed, kStreamSample).next_u64(), eligible);
  const std::size_t n = d.corpus_rows.size();
  d.rows.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.rows.y[i] = corpus.tweets[d.corpus_rows[i]].deleted ? 1 : 0;
  std::tie(d.train, d.test) = stratified_split(d.rows.y, cfg.test_fraction, Rng::derive(seed, kStreamSplit).next_u64());

  std::vector<TextProfile> profiles(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& t = corpus.tweets[d.corpus_rows[i]].tweet;
    profiles[i] = profile_text(t.id, t.text, res);
  });
  std::vector<TokenList> train_docs;
  train_docs.reserve(d.train.size());
  for (auto i : d.train) train_docs.push_back(profiles[i].tokens);
  d.vocab = build_vocab(train_docs);
  d.rows.vocab_size = d.vocab.size();

  d.rows.sparse.resize(n);
  d.rows.dense.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& rec = corpus.tweets[d.corpus_rows[i]];
    d.rows.sparse[i] = open_text_vector(profiles[i].tokens, d.vocab);
    const auto dense = dense_features(rec, profiles[i], corpus.window.post_end);
    auto& row = d.rows.dense[i];
    row.assign(dense.begin(), dense.end());
    if (cfg.with_responses) {
      const auto resp = response_features(rec, responses_of(corpus, rec), res);
      row.insert(row.end(), resp.begin(), resp.end());
    }
  });
  return d;
}

TrainReport train_prepared(const PreparedData& data, const TrainConfig& cfg, std::uint64_t seed, unsigned threads) {
  cfg.validate();
  const auto train_rows = data.rows.subset(data.train);
  const auto test_rows = data.rows.subset(data.test);
  TrainReport r;
  r.vocab = data.vocab;
  r.grid = grid_search_cv(train_rows, cfg, seed, threads);
  r.cv_mean = r.grid.cell_means[r.grid.best];
  r.model = fit_pipeline(train_rows, cfg, cfg.grid[r.grid.best], Rng::derive(seed, kStreamFinalFit).next_u64());
  r.test = evaluate_pipeline(r.model, test_rows);
  r.train_rows = train_rows.y.size();
  r.test_rows = test_rows.y.size();
  return r;
}

TrainReport two_stage_train(const Corpus& corpus, const TrainConfig& cfg, const TextResources& res,
                            std::uint64_t seed, unsigned threads) {
  return train_prepared(prepare_data(corpus, cfg, res, seed, threads), cfg, seed, threads);
}

json to_json(const TrainReport& r, const TrainConfig& cfg, std::uint64_t seed) {
  json cells = json::array();
  for (std::size_t c = 0; c < r.grid.cell_means.size(); ++c) {
    cells.push_back({{"cell", to_json(cfg.grid[c])}, {"cv_mean", to_json(r.grid.cell_means[c])}});
  }
  json j = {{"seed", seed},
            {"config", cfg.to_json()},
            {"train_rows", r.train_rows},
            {"test_rows", r.test_rows},
            {"vocab_size", r.vocab.size()},
            {"best_cell", r.grid.best},
            {"grid", cells},
            {"cv_mean", to_json(r.cv_mean)},
            {"test", to_json(r.test)}};
  if (cfg.stage2 == Stage2Algorithm::adaboost) {
    const auto& b = r.model.stage2.boost;
    j["adaboost"] = {{"rounds_used", b.trees.size()},
                     {"stop_reason", b.stop_reason},
                     {"training_error", b.training_error},
                     {"error_bound", b.bound}};
  } else {
    j["rbf_svm"] = {{"support_vectors", r.model.stage2.svm.coef.size()},
                    {"iterations", r.model.stage2.svm.iterations}};
  }
  return j;
}

AblationReport ablate(const Corpus& corpus, const TrainConfig& cfg, std::span<const FeatureGroup> groups,
                      const TextResources& res, std::uint64_t seed, unsigned threads) {
  const auto data = prepare_data(corpus, cfg, res, seed, threads);
  AblationReport rep;
  const auto base = train_prepared(data, cfg, seed, threads);
  rep.rows.push_back({std::nullopt, base.cv_mean, base.test, 0.0, 0.0});
  for (auto g : groups) {
    TrainConfig c = cfg;
    if (std::find(c.masked.begin(), c.masked.end(), g) == c.masked.end()) c.masked.push_back(g);
    const auto r = train_prepared(data, c, seed, threads);
    AblationRow row{g, r.cv_mean, r.test, r.cv_mean.f1 - base.cv_mean.f1, 0.0};
    row.f1_relative = base.cv_mean.f1 > 0.0 ? row.f1_delta / base.cv_mean.f1 : 0.0;
    rep.rows.push_back(row);
  }
  return rep;
}

json to_json(const AblationReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"group", row.group ? json(group_name(*row.group)) : json("all")},
                    {"cv_mean", to_json(row.cv_mean)},
                    {"test", to_json(row.test)},
                    {"f1_delta", row.f1_delta},
                    {"f1_relative", row.f1_relative}});
  }
  return {{"rows", rows}};
}

std::string to_csv(const AblationReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "dropped_group,cv_precision,cv_recall,cv_f1,test_precision,test_recall,test_f1,f1_delta,f1_relative\n";
  for (const auto& row : r.rows) {
    os << (row.group ? std::string(group_name(*row.group)) : "none") << ',' << row.cv_mean.precision << ','
       << row.cv_mean.recall << ',' << row.cv_mean.f1 << ',' << row.test.precision << ',' << row.test.recall << ','
       << row.test.f1 << ',' << row.f1_delta << ',' << row.f1_relative << '\n';
  }
  return os.str();
}

ResponseModeComparison compare_response_modes(const Corpus& corpus, const TrainConfig& cfg, const TextResources& res,
                                              std::uint64_t seed, unsigned threads) {
  TrainConfig with = cfg;
  with.with_responses = true;
  const auto data = prepare_data(corpus, with, res, seed, threads);
  PreparedData post = data;
  for (auto& row : post.rows.dense) row.resize(kDenseDim);
  TrainConfig without = cfg;
  without.with_responses = false;
  ResponseModeComparison c;
  c.rows = data.corpus_rows.size();
  c.post_time = train_prepared(post, without, seed, threads);
  c.with_responses = train_prepared(data, with, seed, threads);
  return c;
}

}  // namespace regretstream
