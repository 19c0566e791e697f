#include <doctest.h>

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "regretstream/error.hpp"
#include "regretstream/ingest.hpp"
#include "regretstream/rng.hpp"
#include "test_support.hpp"

using namespace regretstream;
using namespace regretstream::testing;

namespace {

const Timestamp kT0 = from_civil(2015, 8, 3, 12);

std::vector<Event> small_stream() {
  std::vector<Event> ev;
  ev.push_back(Event{tweet(10, 1, kT0, "first post")});
  ev.push_back(Event{tweet(11, 2, kT0.plus(60), "@u1 reply to you")});
  std::get<Tweet>(ev.back().payload).in_reply_to_id = 10;
  ev.push_back(Event{tweet(12, 3, kT0.plus(120), "RT @u1: first post")});
  std::get<Tweet>(ev.back().payload).retweet_of_id = 10;
  ev.push_back(Event{tweet(13, 1, from_civil(2015, 7, 31), "too early")});
  ev.push_back(del(10, 1, kT0.plus(3600)));
  ev.push_back(del(10, 1, kT0.plus(7200)));            // repeated
  ev.push_back(del(99, 1, kT0));                       // orphan
  ev.push_back(del(11, 2, from_civil(2015, 8, 16)));   // late
  ev.push_back(del(13, 1, kT0));                       // targets an out-of-window tweet
  return ev;
}

}  // namespace

TEST_CASE("parse a tweet line") {
  const auto e = parse_event(
      R"({"kind":"tweet","id":5,"user_id":7,"created_at":"2015-08-02T10:00:00Z","text":"hi #x @y http://t.co/z",)"
      R"("lang":"en","source":"TweetDeck","extra":123,)"
      R"("user":{"user_id":7,"account_created_at":"2014-01-01T00:00:00Z","followers_count":3,"timezone_offset_min":-300}})");
  REQUIRE(e.kind() == EventKind::tweet);
  const Tweet& t = e.tweet();
  CHECK(t.id == 5);
  CHECK(t.hashtags == std::vector<std::string>{"x"});
  CHECK(t.mentions == std::vector<std::string>{"y"});
  CHECK(t.urls == std::vector<std::string>{"http://t.co/z"});
  REQUIRE(t.user);
  CHECK(t.user->followers_count == 3);
  CHECK(t.user->timezone_offset_min == -300);
  CHECK_FALSE(t.in_reply_to_id);
}

TEST_CASE("explicit entity lists win over extraction") {
  const auto e = parse_event(
      R"({"kind":"tweet","id":5,"user_id":7,"created_at":"2015-08-02T10:00:00Z","text":"#a","hashtags":[],"urls":[],"mentions":["z"]})");
  CHECK(e.tweet().hashtags.empty());
  CHECK(e.tweet().mentions == std::vector<std::string>{"z"});
}

TEST_CASE("parse a delete line") {
  const auto e = parse_event(R"({"kind":"delete","id":5,"user_id":7,"observed_at":"2015-08-02T10:00:00Z"})");
  REQUIRE(e.kind() == EventKind::del);
  CHECK(e.deletion().id == 5);
}

TEST_CASE("malformed and invalid lines") {
  CHECK_THROWS_AS(parse_event("{not json", 3), ParseError);
  try {
    parse_event("[1,2]", 4);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  auto field_of = [](std::string_view line) {
    try {
      parse_event(line);
    } catch (const SchemaError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"kind":"tweet","user_id":7,"created_at":"2015-08-02T10:00:00Z","text":""})") == "id");
  CHECK(field_of(R"({"kind":"tweet","id":0,"user_id":7,"created_at":"2015-08-02T10:00:00Z","text":""})") == "id");
  CHECK(field_of(R"({"kind":"tweet","id":-4,"user_id":7,"created_at":"2015-08-02T10:00:00Z","text":""})") == "id");
  CHECK(field_of(R"({"kind":"tweet","id":1,"user_id":7,"created_at":"yesterday","text":""})") == "created_at");
  CHECK(field_of(R"({"kind":"tweet","id":1,"user_id":7,"created_at":"2015-08-02T10:00:00Z"})") == "text");
  CHECK(field_of(R"({"kind":"tweet","id":1,"user_id":7,"created_at":"2015-08-02T10:00:00Z","text":"","has_geo":1})") ==
        "has_geo");
  CHECK(field_of(R"({"kind":"retweet","id":1})") == "kind");
  CHECK(field_of(R"({"id":1})") == "kind");
  CHECK(field_of(R"({"kind":"delete","id":1,"user_id":2})") == "observed_at");
  CHECK(field_of(R"({"kind":"tweet","id":1,"user_id":7,"created_at":"2015-08-02T10:00:00Z","text":"",)"
                 R"("user":{"user_id":7,"account_created_at":"2014-01-01T00:00:00Z","followers_count":-1}})") ==
        "followers_count");
}

TEST_CASE("wire format round trip") {
  for (const auto& e : small_stream()) {
    const auto back = parse_event(to_wire(e));
    CHECK(back.kind() == e.kind());
    if (e.kind() == EventKind::tweet) {
      CHECK(back.tweet() == e.tweet());
    } else {
      CHECK(back.deletion() == e.deletion());
    }
  }
}

TEST_CASE("read_events skips blank lines and reports line numbers") {
  std::istringstream in(to_wire(small_stream()[0]) + "\n\n  \n" + to_wire(small_stream()[4]) + "\n");
  CHECK(read_events(in).size() == 2);
  std::istringstream bad(to_wire(small_stream()[0]) + "\n\n{oops\n");
  try {
    read_events(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("join labels and statistics") {
  const Corpus c = build_corpus(small_stream(), week_window());
  CHECK(c.tweets.size() == 3);
  const auto* t10 = c.find(10);
  REQUIRE(t10);
  CHECK(t10->deleted);
  CHECK(t10->deletion_lag_sec == 3600);
  CHECK(t10->reply_ids == std::vector<TweetId>{11});
  CHECK(t10->retweet_ids == std::vector<TweetId>{12});
  CHECK_FALSE(c.find(11)->deleted);
  CHECK_FALSE(c.find(11)->deletion_lag_sec);
  CHECK(c.find(13) == nullptr);
  CHECK(c.response_pool.size() == 2);
  CHECK(c.replies_to(*t10).size() == 1);

  const IngestStats& s = c.stats;
  CHECK(s.tweets_in == 4);
  CHECK(s.retained == 3);
  CHECK(s.outside_window == 1);
  CHECK(s.deletes_in == 5);
  CHECK(s.matched_deletes == 1);
  CHECK(s.repeated_deletes == 1);
  CHECK(s.late_deletes == 1);
  CHECK(s.orphan_deletes == 2);
  CHECK(s.deletes_in == s.matched_deletes + s.repeated_deletes + s.late_deletes + s.orphan_deletes);
}

TEST_CASE("window edges are inclusive") {
  const auto w = week_window();
  std::vector<Event> ev = {Event{tweet(1, 1, w.post_start, "a")}, Event{tweet(2, 1, w.post_end, "b")},
                           Event{tweet(3, 1, w.post_end.plus(1), "c")}, del(2, 1, w.delete_end),
                           del(1, 1, w.delete_end.plus(1))};
  const Corpus c = build_corpus(ev, w);
  CHECK(c.tweets.size() == 2);
  CHECK(c.find(2)->deleted);
  CHECK_FALSE(c.find(1)->deleted);
  CHECK(c.stats.late_deletes == 1);
}

TEST_CASE("notice before creation clamps the lag") {
  std::vector<Event> ev = {Event{tweet(1, 1, kT0, "a")}, del(1, 1, kT0.plus(-30))};
  const Corpus c = build_corpus(ev, week_window());
  CHECK(c.find(1)->deletion_lag_sec == 0);
  CHECK(c.stats.clamped_lags == 1);
}

TEST_CASE("duplicate policy") {
  std::vector<Event> ev = {Event{tweet(1, 1, kT0, "a")}, Event{tweet(1, 1, kT0, "a")}};
  CHECK_THROWS_AS(build_corpus(ev, week_window()), DuplicateIdError);
  const Corpus c = build_corpus(ev, week_window(), DuplicatePolicy::skip);
  CHECK(c.tweets.size() == 1);
  CHECK(c.stats.duplicates == 1);
}

TEST_CASE("invalid window") {
  CollectionWindow w{from_civil(2015, 8, 2), from_civil(2015, 8, 1), from_civil(2015, 8, 3)};
  CHECK_THROWS_AS(build_corpus({}, w), ConfigError);
  w = {from_civil(2015, 8, 1), from_civil(2015, 8, 3), from_civil(2015, 8, 2)};
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("join is independent of arrival order") {
  auto base = small_stream();
  // Conflicting duplicate copies under skip: the canonical pick must not
  // depend on which arrives first.
  base.push_back(Event{tweet(11, 2, kT0.plus(60), "@u1 reply to you, edited")});
  std::get<Tweet>(base.back().payload).in_reply_to_id = 10;
  const Corpus ref = build_corpus(base, week_window(), DuplicatePolicy::skip);
  Rng rng(5);
  for (int n = 0; n < 50; ++n) {
    auto ev = base;
    rng.shuffle(std::span<Event>(ev));
    CHECK(build_corpus(ev, week_window(), DuplicatePolicy::skip) == ref);
  }
}

TEST_CASE("corpus file round trip") {
  const Corpus c = build_corpus(small_stream(), week_window());
  std::stringstream buf;
  write_corpus(c, buf);
  CHECK(read_corpus(buf) == c);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_corpus(empty), ParseError);
  std::istringstream wrong(R"({"format":"other","version":1})");
  CHECK_THROWS_AS(read_corpus(wrong), ParseError);
}

TEST_CASE("missing files are io errors") {
  CHECK_THROWS_AS(read_events(std::filesystem::path("/nonexistent/ev.jsonl")), IoError);
  CHECK_THROWS_AS(read_corpus(std::filesystem::path("/nonexistent/c.jsonl")), IoError);
}
