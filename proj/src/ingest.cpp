#include "regretstream/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <unordered_map>

#include "regretstream/error.hpp"
#include "regretstream/textkit.hpp"

namespace regretstream {
namespace {

using nlohmann::json;

const json& require(const json& j, const char* field, const std::string& ctx) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    throw SchemaError(field, ctx + "missing required field \"" + field + "\"");
  }
  return *it;
}

std::uint64_t require_id(const json& j, const char* field, const std::string& ctx) {
  const json& v = require(j, field, ctx);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
    throw SchemaError(field, ctx + "field \"" + field + "\" must be a positive integer");
  }
  return v.get<std::uint64_t>();
}

std::optional<std::uint64_t> optional_id(const json& j, const char* field, const std::string& ctx) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned() || it->get<std::uint64_t>() == 0) {
    throw SchemaError(field, ctx + "field \"" + field + "\" must be a positive integer or null");
  }
  return it->get<std::uint64_t>();
}

Timestamp require_time(const json& j, const char* field, const std::string& ctx) {
  const json& v = require(j, field, ctx);
  if (!v.is_string()) throw SchemaError(field, ctx + "field \"" + field + "\" must be an RFC 3339 string");
  auto t = parse_rfc3339(v.get<std::string>());
  if (!t) throw SchemaError(field, ctx + "field \"" + field + "\" is not a valid RFC 3339 timestamp");
  return *t;
}

std::string require_string(const json& j, const char* field, const std::string& ctx) {
  const json& v = require(j, field, ctx);
  if (!v.is_string()) throw SchemaError(field, ctx + "field \"" + field + "\" must be a string");
  return v.get<std::string>();
}

std::string optional_string(const json& j, const char* field, const std::string& ctx) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw SchemaError(field, ctx + "field \"" + field + "\" must be a string");
  return it->get<std::string>();
}

bool optional_bool(const json& j, const char* field, const std::string& ctx) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return false;
  if (!it->is_boolean()) throw SchemaError(field, ctx + "field \"" + field + "\" must be a boolean");
  return it->get<bool>();
}

std::int64_t optional_count(const json& j, const char* field, const std::string& ctx) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return 0;
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    throw SchemaError(field, ctx + "field \"" + field + "\" must be a non-negative integer");
  }
  return it->get<std::int64_t>();
}

std::optional<std::vector<std::string>> optional_strings(const json& j, const char* field,
                                                         const std::string& ctx) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) throw SchemaError(field, ctx + "field \"" + field + "\" must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw SchemaError(field, ctx + "field \"" + field + "\" must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

UserProfile parse_profile(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw SchemaError("user", ctx + "field \"user\" must be an object");
  const std::string uctx = ctx + "user: ";
  UserProfile u;
  u.user_id = require_id(j, "user_id", uctx);
  u.account_created_at = require_time(j, "account_created_at", uctx);
  u.profile_customized = optional_bool(j, "profile_customized", uctx);
  u.custom_image = optional_bool(j, "custom_image", uctx);
  u.bio_length = optional_count(j, "bio_length", uctx);
  u.geo_enabled = optional_bool(j, "geo_enabled", uctx);
  u.has_location = optional_bool(j, "has_location", uctx);
  u.has_profile_url = optional_bool(j, "has_profile_url", uctx);
  u.favourites_count = optional_count(j, "favourites_count", uctx);
  u.followees_count = optional_count(j, "followees_count", uctx);
  u.followers_count = optional_count(j, "followers_count", uctx);
  u.listed_count = optional_count(j, "listed_count", uctx);
  u.statuses_count = optional_count(j, "statuses_count", uctx);
  if (auto it = j.find("timezone_offset_min"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw SchemaError("timezone_offset_min", uctx + "field \"timezone_offset_min\" must be an integer or null");
    u.timezone_offset_min = it->get<std::int32_t>();
  }
  return u;
}

Tweet parse_tweet(const json& j, const std::string& ctx) {
  Tweet t;
  t.id = require_id(j, "id", ctx);
  t.user_id = require_id(j, "user_id", ctx);
  t.created_at = require_time(j, "created_at", ctx);
  t.text = require_string(j, "text", ctx);
  t.lang = optional_string(j, "lang", ctx);
  t.source = optional_string(j, "source", ctx);
  t.in_reply_to_id = optional_id(j, "in_reply_to_id", ctx);
  t.quoted_id = optional_id(j, "quoted_id", ctx);
  t.retweet_of_id = optional_id(j, "retweet_of_id", ctx);
  t.has_geo = optional_bool(j, "has_geo", ctx);

  auto hashtags = optional_strings(j, "hashtags", ctx);
  auto urls = optional_strings(j, "urls", ctx);
  auto mentions = optional_strings(j, "mentions", ctx);
  if (!hashtags || !urls || !mentions) {
    const TokenList tokens = tokenize(t.text);
    std::vector<std::string> h, u, m;
    for (const auto& tok : tokens) {
      if (tok.cls == TokenClass::hashtag) h.push_back(tok.surface.substr(1));
      if (tok.cls == TokenClass::url) u.push_back(tok.surface);
      if (tok.cls == TokenClass::mention) m.push_back(tok.surface.substr(1));
    }
    if (!hashtags) hashtags = std::move(h);
    if (!urls) urls = std::move(u);
    if (!mentions) mentions = std::move(m);
  }
  t.hashtags = std::move(*hashtags);
  t.urls = std::move(*urls);
  t.mentions = std::move(*mentions);

  if (auto it = j.find("user"); it != j.end() && !it->is_null()) t.user = parse_profile(*it, ctx);
  return t;
}

json optional_to_json(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

Event parse_event(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
  const std::string ctx = "line " + std::to_string(line_no) + ": ";
  if (!j.is_object()) throw ParseError(line_no, "event is not a JSON object");
  const std::string kind = require_string(j, "kind", ctx);
  if (kind == "tweet") return Event{parse_tweet(j, ctx)};
  if (kind == "delete") {
    DeleteNotice d;
    d.id = require_id(j, "id", ctx);
    d.user_id = require_id(j, "user_id", ctx);
    d.observed_at = require_time(j, "observed_at", ctx);
    return Event{d};
  }
  throw SchemaError("kind", ctx + "unknown event kind \"" + kind + "\"");
}

json to_json(const UserProfile& u) {
  return json{{"user_id", u.user_id},
              {"account_created_at", format_rfc3339(u.account_created_at)},
              {"profile_customized", u.profile_customized},
              {"custom_image", u.custom_image},
              {"bio_length", u.bio_length},
              {"geo_enabled", u.geo_enabled},
              {"has_location", u.has_location},
              {"has_profile_url", u.has_profile_url},
              {"favourites_count", u.favourites_count},
              {"followees_count", u.followees_count},
              {"followers_count", u.followers_count},
              {"listed_count", u.listed_count},
              {"statuses_count", u.statuses_count},
              {"timezone_offset_min", u.timezone_offset_min ? json(*u.timezone_offset_min) : json(nullptr)}};
}

UserProfile profile_from_json(const json& j) { return parse_profile(j, ""); }

json to_json(const Tweet& t) {
  return json{{"kind", "tweet"},
              {"id", t.id},
              {"user_id", t.user_id},
              {"created_at", format_rfc3339(t.created_at)},
              {"text", t.text},
              {"lang", t.lang},
              {"source", t.source},
              {"in_reply_to_id", optional_to_json(t.in_reply_to_id)},
              {"quoted_id", optional_to_json(t.quoted_id)},
              {"retweet_of_id", optional_to_json(t.retweet_of_id)},
              {"hashtags", t.hashtags},
              {"urls", t.urls},
              {"mentions", t.mentions},
              {"has_geo", t.has_geo},
              {"user", t.user ? to_json(*t.user) : json(nullptr)}};
}

json to_json(const DeleteNotice& d) {
  return json{{"kind", "delete"}, {"id", d.id}, {"user_id", d.user_id},
              {"observed_at", format_rfc3339(d.observed_at)}};
}

std::string to_wire(const Event& e) {
  return e.kind() == EventKind::tweet ? to_json(e.tweet()).dump() : to_json(e.deletion()).dump();
}

std::vector<Event> read_events(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    events.push_back(parse_event(line, line_no));
  }
  if (in.bad()) throw IoError("error reading event stream");
  return events;
}

std::vector<Event> read_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event stream " + path.string());
  return read_events(in);
}

void CollectionWindow::validate() const {
  if (!(post_start < post_end) || !(post_end <= delete_end)) {
    throw ConfigError("collection window requires post_start < post_end <= delete_end");
  }
}

const TweetRecord* Corpus::find(TweetId id) const {
  auto it = std::lower_bound(tweets.begin(), tweets.end(), id,
                             [](const TweetRecord& r, TweetId v) { return r.tweet.id < v; });
  return (it != tweets.end() && it->tweet.id == id) ? &*it : nullptr;
}

const TweetRecord* Corpus::find_response(TweetId id) const {
  auto it = std::lower_bound(response_pool.begin(), response_pool.end(), id,
                             [](const TweetRecord& r, TweetId v) { return r.tweet.id < v; });
  return (it != response_pool.end() && it->tweet.id == id) ? &*it : nullptr;
}

std::vector<const TweetRecord*> Corpus::replies_to(const TweetRecord& r) const {
  std::vector<const TweetRecord*> out;
  for (TweetId id : r.reply_ids) {
    if (const auto* p = find_response(id)) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const TweetRecord* a, const TweetRecord* b) {
    return std::tie(a->tweet.created_at, a->tweet.id) < std::tie(b->tweet.created_at, b->tweet.id);
  });
  return out;
}

Corpus build_corpus(std::vector<Event> events, const CollectionWindow& window, DuplicatePolicy duplicates) {
  window.validate();
  Corpus corpus;
  corpus.window = window;
  IngestStats& st = corpus.stats;

  std::map<TweetId, std::vector<Tweet>> by_id;
  std::vector<DeleteNotice> deletes;
  for (auto& e : events) {
    if (e.kind() == EventKind::tweet) {
      ++st.tweets_in;
      Tweet& t = std::get<Tweet>(e.payload);
      auto& bucket = by_id[t.id];
      if (!bucket.empty() && duplicates == DuplicatePolicy::reject) {
        throw DuplicateIdError("duplicate tweet id " + std::to_string(t.id));
      }
      bucket.push_back(std::move(t));
    } else {
      ++st.deletes_in;
      deletes.push_back(e.deletion());
    }
  }

  for (auto& [id, copies] : by_id) {
    // Canonical copy: smallest wire form, independent of arrival order.
    auto best = std::min_element(copies.begin(), copies.end(), [](const Tweet& a, const Tweet& b) {
      return to_json(a).dump() < to_json(b).dump();
    });
    st.duplicates += copies.size() - 1;
    if (!window.in_post_window(best->created_at)) {
      ++st.outside_window;
      continue;
    }
    TweetRecord r;
    r.tweet = std::move(*best);
    corpus.tweets.push_back(std::move(r));
  }
  st.retained = corpus.tweets.size();

  std::sort(deletes.begin(), deletes.end(), [](const DeleteNotice& a, const DeleteNotice& b) {
    return std::tie(a.id, a.observed_at, a.user_id) < std::tie(b.id, b.observed_at, b.user_id);
  });
  for (const auto& d : deletes) {
    auto it = std::lower_bound(corpus.tweets.begin(), corpus.tweets.end(), d.id,
                               [](const TweetRecord& r, TweetId v) { return r.tweet.id < v; });
    if (it == corpus.tweets.end() || it->tweet.id != d.id) {
      ++st.orphan_deletes;
      continue;
    }
    if (d.observed_at > window.delete_end) {
      ++st.late_deletes;
      continue;
    }
    if (it->deleted) {
      ++st.repeated_deletes;
      continue;
    }
    ++st.matched_deletes;
    it->deleted = true;
    std::int64_t lag = d.observed_at - it->tweet.created_at;
    if (lag < 0) {
      ++st.clamped_lags;
      lag = 0;
    }
    it->deletion_lag_sec = lag;
  }

  std::unordered_map<TweetId, std::size_t> index;
  for (std::size_t i = 0; i < corpus.tweets.size(); ++i) index.emplace(corpus.tweets[i].tweet.id, i);
  std::vector<std::size_t> responders;
  for (std::size_t i = 0; i < corpus.tweets.size(); ++i) {
    const Tweet& t = corpus.tweets[i].tweet;
    bool links = false;
    auto link = [&](const std::optional<TweetId>& target, std::vector<TweetId> TweetRecord::*list) {
      if (!target || *target == t.id) return;
      if (auto hit = index.find(*target); hit != index.end()) {
        (corpus.tweets[hit->second].*list).push_back(t.id);
        links = true;
      }
    };
    link(t.in_reply_to_id, &TweetRecord::reply_ids);
    link(t.quoted_id, &TweetRecord::quote_ids);
    link(t.retweet_of_id, &TweetRecord::retweet_ids);
    if (links) responders.push_back(i);
  }
  // Records were visited in id order, so every link list is already ascending.
  for (std::size_t i : responders) corpus.response_pool.push_back(corpus.tweets[i]);
  return corpus;
}

json to_json(const TweetRecord& r) {
  json j = to_json(r.tweet);
  j.erase("kind");
  j["deleted"] = r.deleted;
  j["deletion_lag_sec"] = r.deletion_lag_sec ? json(*r.deletion_lag_sec) : json(nullptr);
  j["reply_ids"] = r.reply_ids;
  j["retweet_ids"] = r.retweet_ids;
  j["quote_ids"] = r.quote_ids;
  return j;
}

TweetRecord record_from_json(const json& j) {
  TweetRecord r;
  r.tweet = parse_tweet(j, "corpus record: ");
  r.deleted = j.value("deleted", false);
  if (auto it = j.find("deletion_lag_sec"); it != j.end() && !it->is_null()) {
    r.deletion_lag_sec = it->get<std::int64_t>();
  }
  if (r.deleted != r.deletion_lag_sec.has_value()) {
    throw SchemaError("deletion_lag_sec", "corpus record " + std::to_string(r.tweet.id) +
                                              ": deleted flag and deletion lag disagree");
  }
  r.reply_ids = j.value("reply_ids", std::vector<TweetId>{});
  r.retweet_ids = j.value("retweet_ids", std::vector<TweetId>{});
  r.quote_ids = j.value("quote_ids", std::vector<TweetId>{});
  return r;
}

json to_json(const CollectionWindow& w) {
  return json{{"post_start", format_rfc3339(w.post_start)},
              {"post_end", format_rfc3339(w.post_end)},
              {"delete_end", format_rfc3339(w.delete_end)}};
}

json to_json(const IngestStats& s) {
  return json{{"tweets_in", s.tweets_in},           {"retained", s.retained},
              {"outside_window", s.outside_window}, {"duplicates", s.duplicates},
              {"deletes_in", s.deletes_in},         {"matched_deletes", s.matched_deletes},
              {"orphan_deletes", s.orphan_deletes}, {"late_deletes", s.late_deletes},
              {"repeated_deletes", s.repeated_deletes}, {"clamped_lags", s.clamped_lags}};
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  out << json{{"format", "regretstream-corpus"},
              {"version", 1},
              {"window", to_json(corpus.window)},
              {"stats", to_json(corpus.stats)}}
             .dump()
      << '\n';
  for (const auto& r : corpus.tweets) out << json{{"record", to_json(r)}}.dump() << '\n';
  for (const auto& r : corpus.response_pool) out << json{{"response", to_json(r)}}.dump() << '\n';
  if (!out) throw IoError("error writing corpus");
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create corpus file " + path.string());
  write_corpus(corpus, out);
}

Corpus read_corpus(std::istream& in) {
  Corpus c;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed corpus line: ") + e.what());
    }
    if (!have_header) {
      if (j.value("format", "") != "regretstream-corpus") throw ParseError(line_no, "not a corpus file");
      if (j.value("version", 0) != 1) throw ParseError(line_no, "unsupported corpus version");
      const auto& w = require(j, "window", "corpus header: ");
      c.window.post_start = require_time(w, "post_start", "corpus window: ");
      c.window.post_end = require_time(w, "post_end", "corpus window: ");
      c.window.delete_end = require_time(w, "delete_end", "corpus window: ");
      const auto& s = require(j, "stats", "corpus header: ");
      auto get = [&](const char* k) { return s.value(k, std::size_t{0}); };
      c.stats = IngestStats{get("tweets_in"),      get("retained"),      get("outside_window"),
                            get("duplicates"),     get("deletes_in"),    get("matched_deletes"),
                            get("orphan_deletes"), get("late_deletes"),  get("repeated_deletes"),
                            get("clamped_lags")};
      have_header = true;
      continue;
    }
    if (j.contains("record")) {
      c.tweets.push_back(record_from_json(j["record"]));
    } else if (j.contains("response")) {
      c.response_pool.push_back(record_from_json(j["response"]));
    } else {
      throw ParseError(line_no, "expected \"record\" or \"response\"");
    }
  }
  if (!have_header) throw ParseError(line_no, "empty corpus file");
  auto by_id = [](const TweetRecord& a, const TweetRecord& b) { return a.tweet.id < b.tweet.id; };
  std::sort(c.tweets.begin(), c.tweets.end(), by_id);
  std::sort(c.response_pool.begin(), c.response_pool.end(), by_id);
  for (std::size_t i = 1; i < c.tweets.size(); ++i) {
    if (c.tweets[i].tweet.id == c.tweets[i - 1].tweet.id) {
      throw DuplicateIdError("corpus file repeats tweet id " + std::to_string(c.tweets[i].tweet.id));
    }
  }
  return c;
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  return read_corpus(in);
}

}  // namespace regretstream
