#include <doctest.h>

#include <cmath>
#include <set>

#include "regretstream/error.hpp"
#include "regretstream/features.hpp"
#include "regretstream/ingest.hpp"
#include "test_support.hpp"

using namespace regretstream;
using namespace regretstream::testing;

namespace {

const Timestamp kT0 = from_civil(2015, 8, 5, 23, 10);  // Wednesday

TextResources resources() {
  TextResources res;
  res.lexicon = Lexicon({{"posemo", {"good", "happ*"}}, {"negemo", {"bad", "hate"}}});
  res.valence = ValenceTable({{"good", 1.9}, {"bad", -2.5}});
  return res;
}

}  // namespace

TEST_CASE("group layout covers every dense slot exactly once") {
  std::vector<int> owner(kDenseDim, 0);
  for (auto g : {FeatureGroup::user, FeatureGroup::derived_open_text, FeatureGroup::tweet, FeatureGroup::sentiment,
                 FeatureGroup::pos, FeatureGroup::lexicon}) {
    const auto [lo, hi] = group_slots(g);
    CHECK(lo < hi);
    for (std::size_t s = lo; s < hi; ++s) ++owner[s];
    CHECK(parse_group(group_name(g)) == g);
  }
  for (std::size_t s = 0; s < kDenseDim; ++s) CHECK_MESSAGE(owner[s] == 1, s);
  CHECK(group_slots(FeatureGroup::user) == std::pair<std::size_t, std::size_t>{99, 111});
  CHECK(group_slots(FeatureGroup::tweet) == std::pair<std::size_t, std::size_t>{90, 99});
  CHECK_THROWS_AS(parse_group("emoji"), ValidationError);
}

TEST_CASE("vocabulary and idf") {
  const std::vector<TokenList> docs = {tokenize("the cat sat"), tokenize("the dog @sam http://t.co/x"),
                                       tokenize("The the")};
  const Vocabulary v = build_vocab(docs);
  CHECK(v.terms() == std::vector<std::string>{"cat", "dog", "sat", "the"});
  CHECK(v.df() == std::vector<std::uint32_t>{1, 1, 1, 3});
  CHECK(v.documents() == 3);
  CHECK(v.idf(*v.index_of("the")) == doctest::Approx(1.0));
  CHECK(v.idf(*v.index_of("cat")) == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
  CHECK_FALSE(v.index_of("@sam"));
  CHECK_THROWS_AS(build_vocab(std::span<const TokenList>{}), ValidationError);
  CHECK_THROWS_AS(Vocabulary({"b", "a"}, {1, 1}, 2), ValidationError);
  CHECK_THROWS_AS(Vocabulary({"a"}, {3}, 2), ValidationError);
}

TEST_CASE("tf-idf vectors are l2 normalized with oov terms dropped") {
  const std::vector<TokenList> docs = {tokenize("a b"), tokenize("a c"), tokenize("a")};
  const Vocabulary v = build_vocab(docs);
  const auto x = open_text_vector(tokenize("b b a zzz"), v);
  REQUIRE(x.entries.size() == 2);
  CHECK(x.squared_norm() == doctest::Approx(1.0));
  const double wa = 1.0 * v.idf(*v.index_of("a"));
  const double wb = 2.0 * v.idf(*v.index_of("b"));
  const double norm = std::sqrt(wa * wa + wb * wb);
  CHECK(x.entries[0].first == *v.index_of("a"));
  CHECK(x.entries[0].second == doctest::Approx(wa / norm));
  CHECK(x.entries[1].second == doctest::Approx(wb / norm));
  CHECK(open_text_vector(tokenize("zzz"), v).entries.empty());
}

TEST_CASE("dense post-time features") {
  auto r = record(7, 3, kT0, "@amy good day #fun http://t.co/q");
  r.tweet.mentions = {"amy"};
  r.tweet.hashtags = {"fun"};
  r.tweet.urls = {"http://t.co/q"};
  r.tweet.in_reply_to_id = 5;
  r.tweet.has_geo = true;
  r.tweet.user->timezone_offset_min = -300;
  r.tweet.user->geo_enabled = true;
  r.tweet.user->bio_length = 42;
  const auto res = resources();
  const Timestamp now = from_civil(2015, 8, 8);
  const auto v = dense_features(r, res, now);
  // words: good, day -> posemo 50%
  CHECK(v[slot::lexicon + *res.lexicon.index_of("posemo")] == doctest::Approx(50.0));
  CHECK(v[slot::sentiment] == doctest::Approx(1.9 / std::sqrt(1.9 * 1.9 + 15.0)));
  double pos_total = 0.0;
  for (std::size_t k = 0; k < kPosTagCount; ++k) pos_total += v[slot::pos + k];
  CHECK(pos_total == doctest::Approx(5.0));
  CHECK(v[slot::hour] == 23.0);
  CHECK(v[slot::weekday] == 2.0);
  CHECK(v[slot::timezone] == -300.0);
  CHECK(v[slot::is_reply] == 1.0);
  CHECK(v[slot::is_quote] == 0.0);
  CHECK(v[slot::n_urls] == 1.0);
  CHECK(v[slot::n_mentions] == 1.0);
  CHECK(v[slot::n_hashtags] == 1.0);
  CHECK(v[slot::has_geo] == 1.0);
  CHECK(v[slot::account_age_days] == doctest::Approx(static_cast<double>(now - from_civil(2013, 1, 1)) / 86400.0));
  CHECK(v[slot::geo_enabled] == 1.0);
  CHECK(v[slot::bio_length] == 42.0);
  CHECK(v[slot::followers] == 100.0);
  CHECK(v[slot::statuses] == 1000.0);
  CHECK(v[slot::derived] == 0.0);

  r.tweet.user.reset();
  CHECK_THROWS_AS(dense_features(r, res, now), ValidationError);
}

TEST_CASE("response block") {
  const auto res = resources();
  auto target = record(10, 1, kT0, "original");
  auto reply1 = record(11, 2, kT0.plus(60), "good stuff");
  reply1.tweet.in_reply_to_id = 10;
  auto reply2 = record(12, 3, kT0.plus(90), "bad take, hate it");
  reply2.tweet.in_reply_to_id = 10;
  reply2.tweet.quoted_id = 10;  // counts as both
  auto rt = record(13, 4, kT0.plus(120), "RT original");
  rt.tweet.retweet_of_id = 10;
  const TweetRecord* responses[] = {&reply1, &reply2, &rt};
  const auto v = response_features(target, responses, res);
  CHECK(v[rslot::retweets] == 1.0);
  CHECK(v[rslot::quotes] == 1.0);
  CHECK(v[rslot::replies] == 2.0);
  const auto neg = *res.lexicon.index_of("negemo");
  CHECK(v[rslot::lexicon + neg] == doctest::Approx(2.0 / 4.0 * 100.0));
  const double s1 = 1.9 / std::sqrt(1.9 * 1.9 + 15.0), s2 = -2.5 / std::sqrt(2.5 * 2.5 + 15.0);
  CHECK(v[rslot::sentiment] == doctest::Approx(s1 + s2));
  const auto none = response_features(target, {}, res);
  for (double x : none) CHECK(x == 0.0);
}

TEST_CASE("corpus featurization and rsf1 round trip") {
  std::vector<Event> ev;
  ev.push_back(Event{tweet(1, 1, kT0, "good morning all")});
  ev.push_back(Event{tweet(2, 2, kT0.plus(60), "@u1 bad morning")});
  std::get<Tweet>(ev.back().payload).in_reply_to_id = 1;
  ev.push_back(Event{tweet(3, 1, kT0.plus(90), "coffee time")});
  ev.push_back(del(3, 1, kT0.plus(400)));
  const Corpus c = build_corpus(ev, week_window());
  const auto res = resources();
  const auto m = featurize_corpus(c, res, true, 2);
  CHECK(m.rows() == 3);
  CHECK(m.labels == std::vector<std::uint8_t>{0, 0, 1});
  CHECK(m.response[0][rslot::replies] == 1.0);
  CHECK(m.vocab.documents() == 3);
  CHECK(featurize_corpus(c, res, true, 1) == m);

  const auto bytes = encode_rsf1(m);
  CHECK(std::string_view(bytes.data(), 4) == "RSF1");
  CHECK(decode_rsf1(bytes) == m);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_rsf1(truncated), ValidationError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_rsf1(trailing), ValidationError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_rsf1(magic), ValidationError);

  const auto dir = scratch_dir("features");
  write_rsf1(m, dir / "m.rsf1");
  CHECK(read_rsf1(dir / "m.rsf1") == m);
  CHECK_THROWS_AS(read_rsf1(dir / "missing.rsf1"), IoError);

  const auto post_only = featurize_corpus(c, res, false);
  CHECK(post_only.response.empty());
  CHECK(decode_rsf1(encode_rsf1(post_only)) == post_only);
}
