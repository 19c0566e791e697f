// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "regretstream/analytics.hpp"
#include "regretstream/classify.hpp"
#include "regretstream/cleanup.hpp"
#include "regretstream/error.hpp"
#include "regretstream/ingest.hpp"
#include "regretstream/rng.hpp"
#include "regretstream/stats.hpp"
#include "regretstream/synth.hpp"
#include "test_support.hpp"

using namespace regretstream;
using namespace regretstream::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kOddsRatio = 0.335, kOddsRatioTol = 0.005;
constexpr double kFisherP = 0.04, kFisherPTol = 0.01;
constexpr double kOracleTol = 1e-9;
constexpr double kIdentityTol = 1e-12;
constexpr double kMinF1 = 0.75;
constexpr double kResponseGain = 0.01;
constexpr double kTrainingAccuracy = 1.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures without stopping at the first one.
struct Check {
  Outcome out;
  std::size_t failures = 0;
  std::string first;

  void operator()(bool ok, const std::string& what) {
    if (ok) return;
    out.pass = false;
    if (failures++ == 0) first = what;
  }
  Outcome done(std::string detail) {
    if (!out.pass) detail = std::to_string(failures) + " failure(s), first: " + first + "; " + detail;
    out.detail = std::move(detail);
    return out;
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << std::fixed << v;
  return ss.str();
}

std::string sci(double v) {
  std::ostringstream ss;
  ss.precision(2);
  ss << std::scientific << v;
  return ss.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome fisher_anchor() {
  Check check;
  const auto r = stats::fisher_exact({6, 94, 16, 84});
  check(std::abs(r.statistic - kOddsRatio) <= kOddsRatioTol, "odds ratio " + fmt(r.statistic));
  check(std::abs(r.p_two_sided - kFisherP) <= kFisherPTol, "p " + fmt(r.p_two_sided));
  return check.done("OR=" + fmt(r.statistic) + " p=" + fmt(r.p_two_sided));
}

Outcome fisher_oracle() {
  Check check;
  std::size_t tables = 0, full = 0;
  double worst = 0.0;
  for (std::uint64_t a = 0; a <= 12; ++a)
    for (std::uint64_t b = 0; a + b <= 12; ++b)
      for (std::uint64_t c = 0; a + b + c <= 12; ++c)
        for (std::uint64_t d = 0; a + b + c + d <= 12; ++d) {
          if (a + b + c + d == 12) ++full;
          if (a + b == 0 || c + d == 0) continue;
          const stats::Contingency2x2 t{a, b, c, d};
          const double diff = std::abs(stats::fisher_exact(t).p_two_sided - oracle::fisher_p(t));
          worst = std::max(worst, diff);
          ++tables;
          check(diff < kOracleTol, "table " + std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(c) +
                                       "," + std::to_string(d));
        }
  check(full == 455, "tables with total 12: " + std::to_string(full));
  return check.done(std::to_string(tables) + " tables (" + std::to_string(full) + " with total 12), max |dp|=" +
                    sci(worst));
}

Outcome mwu_oracle() {
  Check check;
  Rng rng(2024);
  double worst = 0.0;
  std::set<std::pair<std::size_t, std::size_t>> sizes;
  for (int i = 0; i < 200; ++i) {
    // Cycle through all 64 size pairs; every third instance is rounded so ties occur.
    const std::size_t n = 1 + i % 8, m = 1 + (i / 8) % 8;
    sizes.insert({n, m});
    std::vector<double> xs(n), ys(m);
    for (auto& v : xs) v = rng.normal();
    for (auto& v : ys) v = rng.normal() + 0.3;
    if (i % 3 == 0) {
      for (auto& v : xs) v = std::round(v * 2.0) / 2.0;
      for (auto& v : ys) v = std::round(v * 2.0) / 2.0;
    }
    const double p = stats::mann_whitney_u(xs, ys, 0.05, stats::MwuMethod::exact).p_two_sided;
    const double diff = std::abs(p - oracle::mwu_permutation_p(xs, ys));
    worst = std::max(worst, diff);
    check(diff < kOracleTol, "instance " + std::to_string(i));
  }
  check(sizes.size() == 64, "size pairs covered: " + std::to_string(sizes.size()));
  return check.done("200 instances over " + std::to_string(sizes.size()) + " size pairs, max |dp|=" + sci(worst));
}

Outcome superficial_golden() {
  Check check;
  std::ifstream in(kTestDir / "fixtures" / "superficial_golden.json");
  const auto j = nlohmann::json::parse(in);
  CleanupConfig cfg;
  cfg.client_whitelist = load_whitelist(kDataDir / "whitelist.txt");
  const Timestamp t0 = from_civil(2015, 8, 3, 9);
  std::size_t n = 0;
  for (const auto& c : j["cases"]) {
    const auto deleted = record(1, 1, t0, c["deleted"].get<std::string>(), true);
    std::vector<TweetRecord> follow;
    TweetId id = 2;
    for (const auto& f : c["followups"]) {
      follow.push_back(record(id, 1, t0.plus(60 * static_cast<std::int64_t>(id)), f.get<std::string>()));
      ++id;
    }
    std::vector<const TweetRecord*> ptrs;
    for (const auto& f : follow) ptrs.push_back(&f);
    check(detect_superficial(deleted, ptrs, cfg) == c["superficial"].get<bool>(), c["name"].get<std::string>());
    ++n;
  }
  check(n == 20, "fixture has " + std::to_string(n) + " cases");
  return check.done(std::to_string(n) + " cases");
}

Outcome cleanup_closure() {
  Check check;
  auto cfg = SynthConfig::load(kDataDir / "synth_default.json");
  check(cfg.seed == 42 && cfg.n_tweets == 20000, "default config is not seed 42 / 20k tweets");
  const auto out = generate_synthetic(cfg, SynthResources::load(cfg));
  const Corpus corpus = build_corpus(out.events, out.window);
  check(corpus.stats == out.expected_ingest, "ingest tallies differ from the ledger");
  CleanupConfig cc;
  cc.client_whitelist = load_whitelist(kDataDir / "whitelist.txt");
  auto [cleaned, rep] = run_cleanup(corpus, cc);
  rep.superficial_passes = 0;
  check(rep == out.expected_cleanup, "cleanup tallies differ from the ledger");
  const double analyzable = static_cast<double>(rep.superficial.deleted + rep.retained.deleted);
  const double share = static_cast<double>(rep.superficial.deleted) / analyzable;
  check(std::abs(share - cfg.superficial_fraction) <= 1.0 / analyzable + kIdentityTol, "superficial share " + fmt(share));
  return check.done("retained " + std::to_string(cleaned.tweets.size()) + " tweets, superficial share " +
                    fmt(100.0 * share, 2) + "%");
}

Outcome ntd_nud_identities() {
  Check check;
  Rng rng(6);
  auto direct = [](double del, double nondel) { return (del - nondel) / nondel * 100.0; };
  auto close = [](double got, double want) {
    return std::abs(got - want) <= kIdentityTol * std::max(1.0, std::abs(want));
  };
  for (int i = 0; i < 1000; ++i) {
    // (deleted tweet fraction, non-deleted tweet fraction, deleted user fraction, non-deleted user fraction)
    const double q[4] = {rng.uniform(), rng.uniform() + 1e-3, rng.uniform(), rng.uniform() + 1e-3};
    check(close(normalized_difference(q[0], q[1]), direct(q[0], q[1])), "ntd quadruple " + std::to_string(i));
    check(close(normalized_difference(q[2], q[3]), direct(q[2], q[3])), "nud quadruple " + std::to_string(i));

    NudResult r;
    r.eligible = 1 + rng.below(200);
    r.higher_in_deleted = rng.below(r.eligible + 1);
    r.higher_in_non_deleted = rng.below(r.eligible - r.higher_in_deleted + 1);
    const double e = static_cast<double>(r.eligible);
    check(close(r.del_user_frac(), static_cast<double>(r.higher_in_deleted) / e), "del_user_frac");
    check(close(r.nondel_user_frac(), static_cast<double>(r.higher_in_non_deleted) / e), "nondel_user_frac");
  }

  // The metrics end to end on tweet sets, including undefined denominators.
  const auto hashtag =
      binary_attribute("hashtag", [](const TweetView& v) { return !v.record->tweet.hashtags.empty(); });
  const Timestamp t0 = from_civil(2015, 8, 3, 9);
  std::size_t undefined = 0;
  for (int i = 0; i < 200; ++i) {
    const stats::Contingency2x2 t{rng.below(15), rng.below(15) + 1, rng.below(4), rng.below(15) + 1};
    std::vector<TweetRecord> rs;
    TweetId id = 1;
    auto add = [&](std::uint64_t n, bool deleted, bool tag) {
      for (std::uint64_t k = 0; k < n; ++k) {
        auto r = record(id, deleted ? 1 : 2, t0.plus(static_cast<std::int64_t>(id)), "x", deleted);
        if (tag) r.tweet.hashtags = {"h"};
        rs.push_back(std::move(r));
        ++id;
      }
    };
    add(t.a, true, true);
    add(t.b, true, false);
    add(t.c, false, true);
    add(t.d, false, false);
    std::vector<TweetView> del, nondel;
    for (const auto& r : rs) (r.deleted ? del : nondel).push_back({&r, nullptr});
    const double fd = static_cast<double>(t.a) / static_cast<double>(t.a + t.b);
    const double fn = static_cast<double>(t.c) / static_cast<double>(t.c + t.d);
    if (t.c == 0) {
      bool threw = false;
      try {
        (void)ntd(hashtag, del, nondel);
      } catch (const UndefinedMetricError&) {
        threw = true;
      }
      check(threw, "ntd with zero non-deleted fraction returned a value");
      ++undefined;
    } else {
      check(close(ntd(hashtag, del, nondel).value, direct(fd, fn)), "ntd on table " + std::to_string(i));
    }
  }
  bool threw = false;
  try {
    (void)normalized_difference(0.4, 0.0);
  } catch (const UndefinedMetricError&) {
    threw = true;
  }
  check(threw, "normalized_difference(x, 0) returned a value");
  // A user needs kNudMinTweets of each label; nobody qualifies here.
  std::vector<TweetRecord> few = {record(1, 1, t0, "x", true), record(2, 1, t0.plus(1), "x")};
  std::vector<TweetView> views;
  for (const auto& r : few) views.push_back({&r, nullptr});
  threw = false;
  try {
    (void)nud(hashtag, views);
  } catch (const UndefinedMetricError&) {
    threw = true;
  }
  check(threw, "nud without eligible users returned a value");
  return check.done("1000 quadruples, 200 tweet tables (" + std::to_string(undefined) + " undefined)");
}

Outcome classifier_oracles() {
  Check check;
  auto sv = [](std::vector<std::pair<std::uint32_t, double>> e) { return SparseVector{std::move(e)}; };

  // Multinomial NB with Laplace smoothing; hand-computed likelihoods over 3 terms.
  const std::vector<SparseVector> docs = {sv({{0, 1}, {1, 1}}), sv({{0, 2}}), sv({{1, 1}, {2, 1}}), sv({{2, 2}})};
  const std::vector<std::uint8_t> labels = {1, 1, 0, 0};
  Stage1Hyper h;
  h.nb_alpha = 1.0;
  const auto nb = train_stage1(docs, labels, 3, Stage1Algorithm::multinomial_nb, h, 1);
  const auto post = nb.log_posterior(sv({{0, 1}}));
  // P(t0|1) = 4/7, P(t0|0) = 1/7, equal priors.
  check(std::abs(std::exp(post[1]) - 0.8) < kOracleTol, "NB posterior " + fmt(std::exp(post[1]), 12));
  check(std::abs(std::exp(post[0]) - 0.2) < kOracleTol, "NB posterior of class 0");
  check(std::abs(nb.log_likelihood[1][0] - std::log(4.0 / 7.0)) < kOracleTol, "NB likelihood");

  // Linearly separable with margin.
  Rng rng(3);
  std::vector<SparseVector> x;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 60; ++i) {
    const std::uint8_t label = i % 2;
    const double a = 1.0 + rng.uniform(), b = 0.5 * rng.uniform();
    x.push_back(label ? sv({{0, a}, {1, b}}) : sv({{0, b}, {1, a}}));
    y.push_back(label);
  }
  Stage1Hyper sh;
  sh.svm_c = 10.0;
  sh.svm_epochs = 100;
  const auto svm = train_stage1(x, y, 2, Stage1Algorithm::linear_svm, sh, 11);
  std::size_t right = 0;
  for (std::size_t i = 0; i < x.size(); ++i) right += svm.predict(x[i]) == y[i];
  const double svm_acc = static_cast<double>(right) / static_cast<double>(x.size());
  check(svm_acc >= kTrainingAccuracy, "SVM training accuracy " + fmt(svm_acc));

  // AdaBoost error bound on seeded noisy runs.
  std::size_t runs = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng r(seed);
    std::vector<std::vector<double>> dx(100, std::vector<double>(3));
    std::vector<std::uint8_t> dy(100);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      for (auto& v : dx[i]) v = r.normal();
      dy[i] = (dx[i][0] + 0.5 * dx[i][1] * dx[i][2] + 0.7 * r.normal()) > 0 ? 1 : 0;
    }
    const auto m = train_adaboost(dx, dy, 1 + seed % 3, 40);
    double z = 1.0;
    for (double e : m.errors) z *= 2.0 * std::sqrt(e * (1.0 - e));
    check(m.training_error <= z + kOracleTol, "AdaBoost bound, seed " + std::to_string(seed));
    ++runs;
  }

  // XOR needs depth-2 trees.
  const std::vector<std::vector<double>> xor_x = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const std::vector<std::uint8_t> xor_y = {0, 1, 1, 0};
  const auto boost = train_adaboost(xor_x, xor_y, 2, 50);
  right = 0;
  for (std::size_t i = 0; i < 4; ++i) right += (boost.decision(xor_x[i]) > 0.0 ? 1 : 0) == xor_y[i];
  check(right == 4, "AdaBoost XOR accuracy " + std::to_string(right) + "/4");
  check(boost.trees.size() <= 50, "AdaBoost XOR rounds");
  return check.done("NB posterior " + fmt(std::exp(post[1]), 9) + ", SVM acc " + fmt(svm_acc, 2) + ", bound held on " +
                    std::to_string(runs) + " runs, XOR " + std::to_string(right) + "/4 in " +
                    std::to_string(boost.trees.size()) + " rounds");
}

TextResources text_resources() {
  TextResources res;
  res.lexicon = Lexicon::load(kDataDir / "lexicon.json");
  res.valence = ValenceTable::load(kDataDir / "valence.json");
  return res;
}

Corpus cleaned_synth(const fs::path& config) {
  const auto cfg = SynthConfig::load(config);
  const auto out = generate_synthetic(cfg, SynthResources::load(cfg));
  CleanupConfig cc;
  cc.client_whitelist = load_whitelist(kDataDir / "whitelist.txt");
  return run_cleanup(build_corpus(out.events, out.window), cc).first;
}

Outcome end_to_end() {
  Check check;
  const auto t0 = Clock::now();
  const auto res = text_resources();
  const auto tc = TrainConfig::from_json(read_json(kDataDir / "train_default.json"));
  const auto scfg = SynthConfig::load(kDataDir / "synth_default.json");
  const auto planted = generate_synthetic(scfg, SynthResources::load(scfg)).planted;
  const std::string strongest = planted["strongest_group"].get<std::string>();
  const Corpus corpus = cleaned_synth(kDataDir / "synth_default.json");

  const auto report = two_stage_train(corpus, tc, res, 42);
  check(report.test.f1 >= kMinF1, "held-out F1 " + fmt(report.test.f1));

  const std::vector<FeatureGroup> groups = {FeatureGroup::user,      FeatureGroup::derived_open_text,
                                            FeatureGroup::tweet,     FeatureGroup::sentiment,
                                            FeatureGroup::pos,       FeatureGroup::lexicon};
  const auto abl = ablate(corpus, tc, groups, res, 42);
  std::string largest;
  double worst = 0.0;
  for (const auto& row : abl.rows) {
    if (!row.group) continue;
    if (largest.empty() || row.f1_delta < worst) {
      worst = row.f1_delta;
      largest = std::string(group_name(*row.group));
    }
  }
  check(largest == strongest, "largest ablation drop is " + largest + ", planted strongest is " + strongest);

  const Corpus replies = cleaned_synth(kDataDir / "synth_reply_coupled.json");
  const auto modes = compare_response_modes(replies, tc, res, 42);
  const double gain = modes.with_responses.test.f1 - modes.post_time.test.f1;
  check(gain >= kResponseGain, "response gain " + fmt(gain));

  const double secs = seconds_since(t0);
  check(secs < 300.0, "runtime " + fmt(secs, 1) + " s");
  return check.done("F1 " + fmt(report.test.f1) + "; largest drop " + largest + " (" + fmt(worst) +
                    "); responses " + fmt(modes.post_time.test.f1) + " -> " + fmt(modes.with_responses.test.f1) +
                    "; " + fmt(secs, 1) + " s");
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = "'" + std::string(REGRETSTREAM_CLI) + "' " + args + " >>'" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Check check;
  ::unsetenv("REGRETSTREAM_THREADS");
  const auto dir = scratch_dir("acceptance_determinism");
  const auto log = dir / "log.txt";
  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  auto j = read_json(kDataDir / "synth_default.json");
  j["n_tweets"] = 8000;
  j["lexicon"] = (kDataDir / "lexicon.json").string();
  j["background"] = (kDataDir / "background.txt").string();
  write_json(j, dir / "synth.json");
  check(run_cli("synth --config " + q(dir / "synth.json") + " --out-events " + q(dir / "ev.jsonl") + " --out-ledger " +
                    q(dir / "ledger.json"),
                log) == 0,
        "synth failed");
  check(run_cli("ingest --events " + q(dir / "ev.jsonl") +
                    " --window 2015-08-01T00:00:00Z 2015-08-08T00:00:00Z 2015-08-15T00:00:00Z --out " +
                    q(dir / "corpus.jsonl"),
                log) == 0,
        "ingest failed");
  check(run_cli("clean --corpus " + q(dir / "corpus.jsonl") + " --out " + q(dir / "clean.jsonl"), log) == 0,
        "clean failed");
  const std::vector<unsigned> threads = {1, 2, 4};
  for (unsigned t : threads) {
    const auto out = dir / ("model_" + std::to_string(t) + ".rsb");
    check(run_cli("--threads " + std::to_string(t) + " train --corpus " + q(dir / "clean.jsonl") + " --config " +
                      q(kDataDir / "train_default.json") + " --seed 7 --out " + q(out),
                  log) == 0,
          "train failed with --threads " + std::to_string(t));
  }
  const auto ref_bundle = slurp(dir / "model_1.rsb");
  const auto ref_metrics = slurp(dir / "model_1.rsb.metrics.json");
  check(!ref_bundle.empty() && !ref_metrics.empty(), "no reference outputs");
  for (unsigned t : threads) {
    const auto base = dir / ("model_" + std::to_string(t) + ".rsb");
    check(slurp(base) == ref_bundle, "bundle differs with --threads " + std::to_string(t));
    check(slurp(base.string() + ".metrics.json") == ref_metrics, "metrics differ with --threads " + std::to_string(t));
  }
  return check.done("train with --threads 1/2/4: bundle " + std::to_string(ref_bundle.size()) + " bytes, identical");
}

Outcome trait_anchor() {
  Check check;
  const auto map = TraitMap::load(kDataDir / "trait_map.json");
  const auto medians = reference_medians(map);
  const auto tally = trait_tally(medians, map);
  auto count = [&](const char* k) {
    const auto it = tally.counts.find(k);
    return it == tally.counts.end() ? 0 : it->second;
  };
  check(count("C_bar") == 10, "C_bar = " + std::to_string(count("C_bar")));
  check(count("C") == 1, "C = " + std::to_string(count("C")));
  return check.done("C_bar=" + std::to_string(count("C_bar")) + " C=" + std::to_string(count("C")));
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no separate budget
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "fisher anchor", 1.0, fisher_anchor},
      {2, "fisher vs enumeration oracle", 10.0, fisher_oracle},
      {3, "mann-whitney vs permutation oracle", 30.0, mwu_oracle},
      {4, "superficial golden fixture", 0.0, superficial_golden},
      {5, "cleanup closure against synth ledger", 60.0, cleanup_closure},
      {6, "ntd/nud identities", 0.0, ntd_nud_identities},
      {7, "classifier oracles", 0.0, classifier_oracles},
      {8, "end-to-end synthetic reproduction", 300.0, end_to_end},
      {9, "train determinism across --threads", 0.0, determinism},
      {10, "trait tally anchor", 0.0, trait_anchor},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; over budget " + fmt(c.budget_s, 0) + " s";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(secs, 2) << " s]" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
