#include <doctest.h>

#include <cmath>
#include <map>

#include "regretstream/cleanup.hpp"
#include "regretstream/error.hpp"
#include "regretstream/ingest.hpp"
#include "regretstream/synth.hpp"
#include "test_support.hpp"

using namespace regretstream;
using namespace regretstream::testing;

namespace {

SynthConfig small_config(std::size_t n_tweets = 4000) {
  auto cfg = SynthConfig::load(kDataDir / "synth_default.json");
  cfg.n_tweets = n_tweets;
  cfg.n_users = 120;
  return cfg;
}

CleanupConfig cleanup_config() {
  CleanupConfig c;
  c.client_whitelist = load_whitelist(kDataDir / "whitelist.txt");
  return c;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto cfg = small_config(1500);
  const auto res = SynthResources::load(cfg);
  const auto a = generate_synthetic(cfg, res);
  const auto b = generate_synthetic(cfg, res);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) CHECK(to_wire(a.events[i]) == to_wire(b.events[i]));
  CHECK(a.ledger(cfg) == b.ledger(cfg));
  auto other = cfg;
  other.seed = cfg.seed + 1;
  CHECK(generate_synthetic(other, res).ledger(other) != a.ledger(cfg));
}

TEST_CASE("ledger closes against ingest and cleanup") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto cfg = small_config();
    cfg.seed = seed;
    const auto out = generate_synthetic(cfg, SynthResources::load(cfg));
    const Corpus corpus = build_corpus(out.events, out.window);
    CHECK(corpus.stats == out.expected_ingest);
    auto [cleaned, rep] = run_cleanup(corpus, cleanup_config());
    CHECK(rep.superficial_passes >= 1);
    rep.superficial_passes = 0;
    CHECK(rep == out.expected_cleanup);

    std::size_t in_window = 0;
    for (const auto& t : out.truth) {
      if (t.filter == SynthFilter::outside_window) {
        CHECK(corpus.find(t.id) == nullptr);
        continue;
      }
      ++in_window;
      const auto* r = corpus.find(t.id);
      REQUIRE(r);
      CHECK(r->deleted == t.deleted);
      const auto* kept = cleaned.find(t.id);
      CHECK((kept != nullptr) == (t.filter == SynthFilter::retained));
      if (t.filter == SynthFilter::superficial) CHECK(t.deleted);
      if (t.late_delete) CHECK_FALSE(t.deleted);
    }
    CHECK(in_window == cfg.n_tweets);
  }
}

TEST_CASE("superficial share follows the configured fraction") {
  const auto cfg = small_config(20000);
  const auto out = generate_synthetic(cfg, SynthResources::load(cfg));
  const auto& c = out.expected_cleanup;
  const double analyzable_deleted = static_cast<double>(c.superficial.deleted + c.retained.deleted);
  const double share = static_cast<double>(c.superficial.deleted) / analyzable_deleted;
  // Quota planting keeps the share within one tweet of the target.
  CHECK(std::abs(share - cfg.superficial_fraction) <= 1.0 / analyzable_deleted + 1e-12);

  auto none = small_config(2000);
  none.superficial_fraction = 0.0;
  const auto quiet = generate_synthetic(none, SynthResources::load(none));
  CHECK(quiet.expected_cleanup.superficial.tweets == 0);
  for (const auto& t : quiet.truth) CHECK_FALSE(t.corrects);
}

TEST_CASE("deletion rate stays inside a binomial band") {
  auto cfg = small_config(20000);
  cfg.late_delete_fraction = 0.0;
  cfg.n_users = 400;
  const auto out = generate_synthetic(cfg, SynthResources::load(cfg));
  std::size_t n = 0, deleted = 0;
  for (const auto& t : out.truth) {
    if (t.filter == SynthFilter::outside_window || t.corrects) continue;  // corrections are never labelled
    ++n;
    deleted += t.deleted;
    CHECK_FALSE(t.late_delete);
  }
  const double p = cfg.deletion_rate;
  const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  const double rate = static_cast<double>(deleted) / static_cast<double>(n);
  CHECK_MESSAGE(std::abs(rate - p) <= 5.0 * sd, "rate " << rate);
  CHECK(out.expected_ingest.late_deletes == 0);
}

TEST_CASE("planted user signal: deletions concentrate in exposed phases") {
  const auto cfg = small_config(20000);
  const auto out = generate_synthetic(cfg, SynthResources::load(cfg));
  std::size_t del_exposed = 0, del_total = 0;
  for (const auto& t : out.truth) {
    if (t.filter != SynthFilter::retained || t.corrects) continue;
    if (t.deleted) {
      ++del_total;
      del_exposed += t.exposed;
    }
  }
  REQUIRE(del_total > 100);
  CHECK(static_cast<double>(del_exposed) / static_cast<double>(del_total) > 0.85);
  CHECK(out.planted["strength"]["user"].get<double>() > 0.0);
}

TEST_CASE("config validation") {
  auto cfg = small_config();
  cfg.validate();
  auto bad = cfg;
  bad.deletion_rate = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.non_english_fraction = 0.6;
  bad.retweet_fraction = 0.6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.window_days = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.n_tweets = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.exposure_share = 1.0;
  bad.exposure_fraction = 0.05;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const auto j = cfg.to_json();
  CHECK(SynthConfig::from_json(j).to_json() == j);
  auto typo = j;
  typo["deletion_rate"] = "high";
  CHECK_THROWS_AS(SynthConfig::from_json(typo), ConfigError);
  CHECK_THROWS_AS(SynthConfig::load("/nonexistent/synth.json"), IoError);
}

TEST_CASE("event and ledger files") {
  const auto cfg = small_config(500);
  const auto out = generate_synthetic(cfg, SynthResources::load(cfg));
  const auto dir = scratch_dir("synth");
  write_events(out.events, dir / "events.jsonl");
  write_json(out.ledger(cfg), dir / "ledger.json");
  const auto back = read_events(dir / "events.jsonl");
  REQUIRE(back.size() == out.events.size());
  CHECK(to_wire(back.front()) == to_wire(out.events.front()));
  const auto ledger = read_json(dir / "ledger.json");
  CHECK(ledger == out.ledger(cfg));
  CHECK(ledger.contains("tweets"));
}
