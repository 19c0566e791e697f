#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "regretstream/cleanup.hpp"
#include "regretstream/error.hpp"
#include "regretstream/rng.hpp"
#include "test_support.hpp"

using namespace regretstream;
using namespace regretstream::testing;

namespace {

const Timestamp kT0 = from_civil(2015, 8, 3, 9);

CleanupConfig default_config() {
  CleanupConfig cfg;
  cfg.client_whitelist = load_whitelist(kDataDir / "whitelist.txt");
  return cfg;
}

TweetRecord with(TweetRecord r, std::string lang, std::string source, bool retweet = false) {
  r.tweet.lang = std::move(lang);
  r.tweet.source = std::move(source);
  if (retweet) r.tweet.retweet_of_id = 1;
  return r;
}

}  // namespace

TEST_CASE("whitelist file") {
  const auto wl = load_whitelist(kDataDir / "whitelist.txt");
  CHECK(wl.contains("Twitter Web Client"));
  CHECK_FALSE(wl.contains("IFTTT"));
  CHECK_THROWS_AS(load_whitelist("/nonexistent/whitelist.txt"), IoError);
}

TEST_CASE("config validation") {
  CleanupConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // empty whitelist
  cfg.client_whitelist = {"web"};
  cfg.validate();
  cfg.superficial_lookahead = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.superficial_lookahead = 3;
  cfg.cosine_min = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  const auto j = nlohmann::json{{"superficial_lookahead", 5}, {"cosine_min", 0.7}};
  const auto over = CleanupConfig::from_json(j, default_config());
  CHECK(over.superficial_lookahead == 5);
  CHECK(over.cosine_min == 0.7);
  CHECK(over.client_whitelist == default_config().client_whitelist);
  CHECK_THROWS_AS(CleanupConfig::from_json(nlohmann::json{{"cosine_min", "high"}}), ConfigError);
}

TEST_CASE("golden superficial fixture") {
  std::ifstream in(kTestDir / "fixtures" / "superficial_golden.json");
  REQUIRE(in);
  const auto j = nlohmann::json::parse(in);
  const auto& cases = j["cases"];
  REQUIRE(cases.size() == 20);
  const CleanupConfig cfg = default_config();
  for (const auto& c : cases) {
    const auto deleted = record(1, 1, kT0, c["deleted"].get<std::string>(), true);
    std::vector<TweetRecord> follow;
    TweetId id = 2;
    for (const auto& f : c["followups"]) follow.push_back(record(id++, 1, kT0.plus(60 * id), f.get<std::string>()));
    std::vector<const TweetRecord*> ptrs;
    for (const auto& f : follow) ptrs.push_back(&f);
    CHECK_MESSAGE(detect_superficial(deleted, ptrs, cfg) == c["superficial"].get<bool>(),
                  c["name"].get<std::string>());
  }
}

TEST_CASE("thresholds are configurable") {
  CleanupConfig cfg = default_config();
  const auto d = record(1, 1, kT0, "abcdefghij", true);
  const auto f = record(2, 1, kT0.plus(5), "abcdevwxyz");  // distance 5
  const TweetRecord* p[] = {&f};
  CHECK_FALSE(detect_superficial(d, p, cfg));
  cfg.edit_distance_max = 6;
  CHECK(detect_superficial(d, p, cfg));
}

TEST_CASE("ten-tweet cascade") {
  const auto cfg = default_config();
  std::vector<TweetRecord> rs;
  rs.push_back(with(record(1, 1, kT0, "hola amigos que tal"), "es", "Twitter Web Client"));
  rs.push_back(with(record(2, 2, kT0.plus(10), "bonjour tout le monde", true), "fr", "Twitter for iPhone"));
  rs.push_back(with(record(3, 3, kT0.plus(20), "daily horoscope for leo"), "en", "Twittascope"));
  rs.push_back(with(record(4, 1, kT0.plus(30), "RT @a: big news today"), "en", "Twitter Web Client", true));
  rs.push_back(with(record(5, 2, kT0.plus(40), "RT @b: look at this"), "en", "TweetDeck", true));
  rs.push_back(with(record(6, 4, kT0.plus(50), "RT @c: wow", true), "en", "Twitter for Android", true));
  rs.push_back(with(record(7, 4, kT0.plus(60), "see you at the libary tonight", true), "en", "Twitter Web Client"));
  rs.push_back(with(record(8, 4, kT0.plus(90), "see you at the library tonight"), "en", "Twitter Web Client"));
  rs.push_back(with(record(9, 5, kT0.plus(100), "long day at work finally home"), "en", "Twitter for iPhone"));
  rs.push_back(with(record(10, 5, kT0.plus(200), "pizza for dinner again", true), "en", "TweetDeck"));
  const auto [out, rep] = run_cleanup(corpus_of(rs), cfg);
  CHECK(rep.non_english.tweets == 2);
  CHECK(rep.automated.tweets == 1);
  CHECK(rep.retweets.tweets == 3);
  CHECK(rep.superficial.tweets == 1);
  CHECK(rep.retained.tweets == 3);
  CHECK(out.tweets.size() == 3);
  CHECK(rep.input.tweets == 10);
  CHECK(rep.input.deleted == 4);
  CHECK(rep.non_english.deleted == 1);
  CHECK(rep.retweets.deleted == 1);
  CHECK(rep.superficial.deleted == 1);
  CHECK(rep.retained.deleted == 1);
  CHECK(rep.retained.users == 2);
  CHECK(rep.retained.deleter_users == 1);
  CHECK(out.find(7) == nullptr);
  CHECK(out.find(10)->deleted);
  const std::string table = render_table(rep);
  CHECK(table.find("Superficial deletions") != std::string::npos);
}

TEST_CASE("superficial detection uses the filtered timeline and the lookahead") {
  const auto cfg = default_config();
  std::vector<TweetRecord> rs;
  rs.push_back(record(1, 1, kT0, "heading to the gym now", true));
  // A retweet in between is filtered first, so it does not use up lookahead.
  rs.push_back(with(record(2, 1, kT0.plus(10), "RT @x: unrelated"), "en", "Twitter Web Client", true));
  rs.push_back(record(3, 1, kT0.plus(20), "what a morning"));
  rs.push_back(record(4, 1, kT0.plus(30), "coffee first"));
  rs.push_back(record(5, 1, kT0.plus(40), "heading to the gym now!"));
  auto [out, rep] = run_cleanup(corpus_of(rs), cfg);
  CHECK(rep.superficial.tweets == 1);

  // Four tweets later is outside the window of three.
  rs.push_back(record(6, 1, kT0.plus(25), "emails all day"));
  std::tie(out, rep) = run_cleanup(corpus_of(rs), cfg);
  CHECK(rep.superficial.tweets == 0);

  // Other users' tweets do not count.
  rs.push_back(record(7, 2, kT0.plus(5), "heading to the gym now"));
  std::tie(out, rep) = run_cleanup(corpus_of(rs), cfg);
  CHECK(rep.superficial.tweets == 0);
}

TEST_CASE("earlier tweets and kept tweets are never superficial") {
  const auto cfg = default_config();
  std::vector<TweetRecord> rs = {record(1, 1, kT0, "same words here"), record(2, 1, kT0.plus(5), "same words here", true)};
  const auto [out, rep] = run_cleanup(corpus_of(rs), cfg);
  CHECK(rep.superficial.tweets == 0);  // the deletion is last; the similar tweet precedes it
}

TEST_CASE("fixed point: chains resolve over passes and cleanup is idempotent") {
  const auto cfg = default_config();
  // Deletion 1 matches tweet 5, four places later, until deletion 2 (a
  // typo-fix of tweet 3) is removed in the first pass.
  std::vector<TweetRecord> rs = {
      record(1, 1, kT0, "alpha words for the chain", true), record(2, 1, kT0.plus(10), "breakfast was late", true),
      record(3, 1, kT0.plus(20), "breakfast was late!"),     record(4, 1, kT0.plus(30), "train delayed again"),
      record(5, 1, kT0.plus(40), "alpha words for the chain")};
  const auto [out, rep] = run_cleanup(corpus_of(rs), cfg);
  CHECK(rep.superficial.tweets == 2);
  CHECK(rep.superficial_passes == 3);
  const auto [again, rep2] = run_cleanup(out, cfg);
  CHECK(again == out);
  CHECK(rep2.superficial.tweets == 0);
  CHECK(rep2.superficial_passes == 1);
}

TEST_CASE("first three filters are pointwise predicates") {
  const auto cfg = default_config();
  Rng rng(9);
  const std::vector<std::string> langs = {"en", "es"};
  const std::vector<std::string> sources = {"Twitter Web Client", "IFTTT"};
  std::vector<TweetRecord> rs;
  for (TweetId id = 1; id <= 200; ++id) {
    auto r = record(id, 1 + rng.below(20), kT0.plus(static_cast<std::int64_t>(id) * 97),
                    "word" + std::to_string(id) + " text" + std::to_string(id * 7), rng.bernoulli(0.3));
    rs.push_back(with(r, langs[rng.below(2)], sources[rng.below(2)], rng.bernoulli(0.4)));
  }
  const auto [out, rep] = run_cleanup(corpus_of(rs), cfg);
  std::size_t expect = 0;
  for (const auto& r : rs) {
    expect += r.tweet.lang == "en" && r.tweet.source == "Twitter Web Client" && !r.tweet.retweet_of_id;
  }
  CHECK(out.tweets.size() + rep.superficial.tweets == expect);
  CHECK(rep.input.tweets ==
        rep.non_english.tweets + rep.automated.tweets + rep.retweets.tweets + rep.superficial.tweets + rep.retained.tweets);
  CHECK(rep.input.deleted == rep.non_english.deleted + rep.automated.deleted + rep.retweets.deleted +
                                 rep.superficial.deleted + rep.retained.deleted);
}

TEST_CASE("response pool is carried over") {
  auto c = corpus_of({record(1, 1, kT0, "a b c")});
  c.response_pool.push_back(record(2, 2, kT0.plus(1), "reply"));
  const auto [out, rep] = run_cleanup(c, default_config());
  CHECK(out.response_pool == c.response_pool);
  CHECK(to_json(rep)["retained"]["tweets"] == 1);
}
