#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "regretstream/classify.hpp"
#include "regretstream/error.hpp"
#include "regretstream/rng.hpp"
#include "test_support.hpp"

using namespace regretstream;
using namespace regretstream::testing;

namespace {

SparseVector sv(std::vector<std::pair<std::uint32_t, double>> e) { return SparseVector{std::move(e)}; }

// Labels follow sparse term 0 vs 1; dense slots are noise except one weak slot.
TrainingRows synthetic_rows(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  TrainingRows r;
  r.vocab_size = 6;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = i % 2 == 0 ? 1 : 0;
    const std::uint32_t key = rng.bernoulli(0.9) ? (y ? 0u : 1u) : (y ? 1u : 0u);
    r.sparse.push_back(sv({{key, 0.8}, {static_cast<std::uint32_t>(2 + rng.below(4)), 0.6}}));
    std::vector<double> d(kDenseDim);
    for (auto& v : d) v = rng.normal();
    d[slot::followers] += y ? 0.5 : -0.5;
    r.dense.push_back(std::move(d));
    r.y.push_back(y);
  }
  return r;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.folds = 3;
  cfg.stage1_folds = 3;
  cfg.grid[0].stage2.rounds = 10;
  cfg.grid[0].stage2.max_depth = 2;
  cfg.grid[0].stage1.svm_c = 1.0;
  return cfg;
}

// Best root split by exhaustive search: lowest total weighted Gini, first
// feature then lowest threshold on ties.
std::pair<int, double> best_root_split(const std::vector<std::vector<double>>& x, const std::vector<std::uint8_t>& y,
                                       const std::vector<double>& w) {
  auto gini = [](double p, double q) { return p + q > 0 ? p + q - (p * p + q * q) / (p + q) : 0.0; };
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, double> out{-1, 0.0};
  for (std::size_t f = 0; f < x.front().size(); ++f) {
    std::vector<double> vals;
    for (const auto& r : x) vals.push_back(r[f]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double thr = (vals[k] + vals[k + 1]) / 2.0;
      double lp = 0, ln = 0, rp = 0, rn = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i][f] <= thr) {
          (y[i] ? lp : ln) += w[i];
        } else {
          (y[i] ? rp : rn) += w[i];
        }
      }
      const double imp = gini(lp, ln) + gini(rp, rn);
      if (imp < best) {
        best = imp;
        out = {static_cast<int>(f), thr};
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("evaluation metrics") {
  const std::vector<std::uint8_t> pred = {1, 1, 0, 0, 1}, truth = {1, 0, 1, 0, 1};
  const auto m = evaluate(pred, truth);
  CHECK(m.tp == 2);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.tn == 1);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
  const std::vector<std::uint8_t> none = {0, 0}, some = {1, 0};
  CHECK(evaluate(none, some).precision == 0.0);
  CHECK(evaluate(none, some).f1 == 0.0);
  CHECK_THROWS_AS(evaluate(none, truth), ValidationError);

  const std::vector<EvalMetrics> folds = {m, evaluate(some, some)};
  const auto mean = mean_metrics(folds);
  CHECK(mean.f1 == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
  CHECK(mean.tp == 3);
  CHECK(to_json(mean)["tp"] == 3);
}

TEST_CASE("balanced sample pairs tweets of the same user") {
  const Timestamp t0 = from_civil(2015, 8, 3);
  std::vector<TweetRecord> rs;
  TweetId id = 1;
  auto add = [&](UserId u, int dels, int keeps) {
    for (int i = 0; i < dels; ++i) rs.push_back(record(id++, u, t0.plus(static_cast<std::int64_t>(id)), "d", true));
    for (int i = 0; i < keeps; ++i) rs.push_back(record(id++, u, t0.plus(static_cast<std::int64_t>(id)), "k"));
  };
  add(1, 3, 1);
  add(2, 2, 5);
  add(3, 0, 4);
  const auto c = corpus_of(rs);
  const auto all = balanced_sample(c, 0, 7);
  REQUIRE(all.size() == 6);
  for (std::size_t i = 0; i < all.size(); i += 2) {
    CHECK(c.tweets[all[i]].deleted);
    CHECK_FALSE(c.tweets[all[i + 1]].deleted);
    CHECK(c.tweets[all[i]].tweet.user_id == c.tweets[all[i + 1]].tweet.user_id);
  }
  std::set<std::size_t> unique(all.begin(), all.end());
  CHECK(unique.size() == all.size());
  CHECK(balanced_sample(c, 2, 7).size() == 4);
  CHECK(balanced_sample(c, 0, 7) == all);
  CHECK_THROWS_AS(balanced_sample(c, 4, 7), ValidationError);
  const auto only_user2 = balanced_sample(c, 0, 7, [](const TweetRecord& r) { return r.tweet.user_id == 2; });
  CHECK(only_user2.size() == 4);
}

TEST_CASE("stratified folds and split") {
  std::vector<std::uint8_t> y(20, 0);
  for (std::size_t i = 0; i < 7; ++i) y[i * 2] = 1;
  const auto fold = stratified_folds(y, 3, 5);
  for (std::uint8_t c : {0, 1}) {
    std::array<int, 3> per{};
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) ++per[fold[i]];
    }
    CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
  }
  CHECK_THROWS_AS(stratified_folds(y, 1, 5), ValidationError);
  CHECK_THROWS_AS(stratified_folds(y, 8, 5), ValidationError);

  const auto [train, test] = stratified_split(y, 0.3, 5);
  CHECK(std::is_sorted(train.begin(), train.end()));
  CHECK(std::is_sorted(test.begin(), test.end()));
  CHECK(train.size() + test.size() == y.size());
  std::vector<std::size_t> both = train;
  both.insert(both.end(), test.begin(), test.end());
  std::sort(both.begin(), both.end());
  CHECK(std::adjacent_find(both.begin(), both.end()) == both.end());
  std::size_t pos = 0;
  for (auto i : test) pos += y[i];
  CHECK(pos >= 2);
  CHECK(pos <= 3);
  CHECK_THROWS_AS(stratified_split(y, 1.0, 5), ValidationError);
}

TEST_CASE("multinomial naive bayes against hand computation") {
  const std::vector<SparseVector> x = {sv({{0, 1}, {1, 1}}), sv({{0, 2}}), sv({{1, 1}, {2, 1}}), sv({{2, 2}})};
  const std::vector<std::uint8_t> y = {1, 1, 0, 0};
  Stage1Hyper h;
  h.nb_alpha = 1.0;
  const auto m = train_stage1(x, y, 3, Stage1Algorithm::multinomial_nb, h, 1);
  CHECK(m.log_prior[0] == doctest::Approx(std::log(0.5)));
  CHECK(m.log_likelihood[1][0] == doctest::Approx(std::log(4.0 / 7.0)));
  CHECK(m.log_likelihood[1][2] == doctest::Approx(std::log(1.0 / 7.0)));
  CHECK(m.log_likelihood[0][2] == doctest::Approx(std::log(4.0 / 7.0)));
  const auto q = sv({{0, 1}});
  CHECK(m.decision(q) == doctest::Approx(std::log(4.0)));
  const auto post = m.log_posterior(q);
  CHECK(std::exp(post[1]) == doctest::Approx(0.8));
  CHECK(std::exp(post[0]) + std::exp(post[1]) == doctest::Approx(1.0));
  CHECK(derived_feature(m, q) == doctest::Approx(std::log(4.0)));
  h.nb_alpha = 0.0;
  CHECK_THROWS_AS(train_stage1(x, y, 3, Stage1Algorithm::multinomial_nb, h, 1), ValidationError);
  const std::vector<std::uint8_t> one_class = {1, 1, 1, 1};
  CHECK_THROWS_AS(train_stage1(x, one_class, 3, Stage1Algorithm::multinomial_nb, {}, 1), ValidationError);
  CHECK_THROWS_AS(train_stage1(x, y, 2, Stage1Algorithm::multinomial_nb, {}, 1), ValidationError);
}

TEST_CASE("linear svm separates separable data") {
  Rng rng(3);
  std::vector<SparseVector> x;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 60; ++i) {
    const std::uint8_t label = i % 2;
    const double a = 1.0 + rng.uniform(), b = 0.5 * rng.uniform();  // margin >= 0.5
    x.push_back(label ? sv({{0, a}, {1, b}}) : sv({{0, b}, {1, a}}));
    y.push_back(label);
  }
  Stage1Hyper h;
  h.svm_c = 10.0;
  h.svm_epochs = 100;
  const auto m = train_stage1(x, y, 2, Stage1Algorithm::linear_svm, h, 11);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(m.predict(x[i]) == y[i]);
  const double norm = std::hypot(m.w[0], m.w[1]);
  CHECK(derived_feature(m, x[0]) == doctest::Approx(m.decision(x[0]) / norm));
  CHECK(train_stage1(x, y, 2, Stage1Algorithm::linear_svm, h, 11).w == m.w);
  h.svm_c = 0.0;
  CHECK_THROWS_AS(train_stage1(x, y, 2, Stage1Algorithm::linear_svm, h, 11), ValidationError);
}

TEST_CASE("decision tree root split matches exhaustive search") {
  Rng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 6 + rng.below(15), d = 1 + rng.below(4);
    std::vector<std::vector<double>> x(n, std::vector<double>(d));
    std::vector<std::uint8_t> y(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = static_cast<double>(rng.below(6));
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
      w[i] = static_cast<double>(1 + rng.below(3));  // integral: sums are exact
    }
    y[0] = 1;
    y[1] = 0;
    const auto tree = fit_tree(x, y, w, 1);
    const auto [f, thr] = best_root_split(x, y, w);
    CHECK(tree.nodes[0].feature == f);
    if (f >= 0) {
      CHECK(tree.nodes[0].threshold == thr);
      CHECK(tree.depth() == 1);
    }
  }
}

TEST_CASE("decision trees fit xor at depth 2") {
  const std::vector<std::vector<double>> x = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const std::vector<std::uint8_t> y = {0, 1, 1, 0};
  const std::vector<double> w(4, 0.25);
  const auto deep = fit_tree(x, y, w, 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(deep.predict(x[i]) == (y[i] ? 1.0 : -1.0));
  CHECK(deep.depth() == 2);
  CHECK_THROWS_AS(fit_tree({}, {}, {}, 2), ValidationError);
}

TEST_CASE("adaboost stopping rules") {
  const std::vector<std::vector<double>> x = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const std::vector<std::uint8_t> y = {0, 1, 1, 0};
  const auto stumps = train_adaboost(x, y, 1, 50);
  CHECK(stumps.trees.empty());
  CHECK(stumps.stop_reason.find("0.5") != std::string::npos);

  const auto deep = train_adaboost(x, y, 2, 50);
  CHECK(deep.trees.size() == 1);
  CHECK(deep.alphas[0] == kAdaBoostMaxAlpha);
  CHECK(deep.training_error == 0.0);
  CHECK_THROWS_AS(train_adaboost(x, y, 0, 5), ConfigError);
  CHECK_THROWS_AS(train_adaboost(x, y, 1, 0), ConfigError);
}

TEST_CASE("adaboost training error stays under the normalizer product") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> x(80, std::vector<double>(3));
    std::vector<std::uint8_t> y(80);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (auto& v : x[i]) v = rng.normal();
      y[i] = (x[i][0] + 0.5 * x[i][1] * x[i][2] + 0.7 * rng.normal()) > 0 ? 1 : 0;
    }
    const auto m = train_adaboost(x, y, 1 + rng.below(3), 30);
    CHECK(m.training_error <= m.bound + 1e-12);
    for (double e : m.errors) CHECK(e < 0.5);
    double z = 1.0;
    for (double e : m.errors) z *= e > 0 ? 2.0 * std::sqrt(e * (1.0 - e)) : 1.0;
    CHECK(m.bound <= z + 1e-9);
  }
}

TEST_CASE("rbf svm on xor") {
  std::vector<std::vector<double>> x;
  std::vector<std::uint8_t> y;
  Rng rng(19);
  for (int i = 0; i < 80; ++i) {
    const double a = rng.uniform() * 2 - 1, b = rng.uniform() * 2 - 1;
    if (std::abs(a) < 0.15 || std::abs(b) < 0.15) continue;
    x.push_back({a, b});
    y.push_back(a * b > 0 ? 1 : 0);
  }
  const auto m = train_rbf_svm(x, y, 10.0, 2.0);
  std::size_t right = 0;
  for (std::size_t i = 0; i < x.size(); ++i) right += (m.decision(x[i]) > 0.0 ? 1 : 0) == y[i];
  CHECK(right == x.size());
  double sum = 0.0;
  for (double c : m.coef) {
    CHECK(std::abs(c) <= 10.0 + 1e-9);
    sum += c;
  }
  CHECK(std::abs(sum) < 1e-6);  // sum alpha_i y_i = 0
  std::vector<std::vector<double>> big(kRbfMaxRows + 1, std::vector<double>(1));
  std::vector<std::uint8_t> by(kRbfMaxRows + 1, 0);
  by[0] = 1;
  const std::vector<std::uint8_t> active(1, 1);
  CHECK_THROWS_AS(train_stage2(big, by, active, Stage2Algorithm::rbf_svm, {}), ConfigError);
}

TEST_CASE("scaler masks inactive and constant slots") {
  const std::vector<std::vector<double>> rows = {{1, 5, 2}, {3, 5, 4}};
  const std::vector<std::uint8_t> active = {1, 1, 0};
  const auto s = Scaler::fit(rows, active);
  std::vector<double> z = {3, 5, 4};
  s.apply(z);
  CHECK(z[0] == doctest::Approx(1.0));
  CHECK(z[1] == 0.0);
  CHECK(z[2] == 0.0);
}

TEST_CASE("config parsing and validation") {
  const auto cfg = TrainConfig::from_json(nlohmann::json::parse(R"({"stage1":"multinomial_nb","stage2":"rbf_svm",
      "folds":4,"masked":["user"],"grid":[{"stage2":{"rbf_gamma":0.01}},{"stage1":{"nb_alpha":0.5}}]})"));
  CHECK(cfg.stage1 == Stage1Algorithm::multinomial_nb);
  CHECK(cfg.grid.size() == 2);
  CHECK(cfg.grid[0].stage2.rbf_gamma == 0.01);
  CHECK(cfg.masked == std::vector<FeatureGroup>{FeatureGroup::user});
  CHECK(TrainConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  const auto active = active_slots(cfg, kDenseDim);
  CHECK(active[slot::followers] == 0);
  CHECK(active[slot::hour] == 1);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json::parse(R"({"folds":1})")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json::parse(R"({"stage1":"forest"})")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json::parse(R"({"grid":[]})")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json::parse(R"({"masked":["nope"]})")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json::parse("[]")), ConfigError);
}

TEST_CASE("pipeline learns through the derived feature") {
  const auto rows = synthetic_rows(200, 23);
  auto cfg = small_config();
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < rows.y.size(); ++i) (i < 150 ? train : test).push_back(i);
  const auto m = fit_pipeline(rows.subset(train), cfg, cfg.grid[0], 5);
  CHECK(m.uses_stage1);
  CHECK(evaluate_pipeline(m, rows.subset(test)).f1 > 0.8);

  cfg.masked = {FeatureGroup::derived_open_text};
  const auto blind = fit_pipeline(rows.subset(train), cfg, cfg.grid[0], 5);
  CHECK_FALSE(blind.uses_stage1);
  CHECK(evaluate_pipeline(blind, rows.subset(test)).f1 < evaluate_pipeline(m, rows.subset(test)).f1);

  std::vector<double> short_row(5);
  CHECK_THROWS_AS(m.decision(rows.sparse[0], short_row), ValidationError);
}

TEST_CASE("grid search picks the best mean f1 and is thread independent") {
  const auto rows = synthetic_rows(120, 29);
  auto cfg = small_config();
  GridCell weak = cfg.grid[0];
  weak.stage1.svm_epochs = 1;
  weak.stage1.svm_c = 1e-9;
  weak.stage2.rounds = 1;
  weak.stage2.max_depth = 1;
  cfg.grid = {weak, cfg.grid[0]};
  const auto g1 = grid_search_cv(rows, cfg, 31, 1);
  const auto g3 = grid_search_cv(rows, cfg, 31, 3);
  REQUIRE(g1.cell_means.size() == 2);
  CHECK(g1.cell_means == g3.cell_means);
  CHECK(g1.best == g3.best);
  const auto best = std::max_element(g1.cell_means.begin(), g1.cell_means.end(),
                                     [](const EvalMetrics& a, const EvalMetrics& b) { return a.f1 < b.f1; });
  CHECK(g1.best == static_cast<std::size_t>(best - g1.cell_means.begin()));
  cfg.grid.clear();
  CHECK_THROWS_AS(grid_search_cv(rows, cfg, 31), ValidationError);
}
