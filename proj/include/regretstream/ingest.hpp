#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "regretstream/timeutil.hpp"

namespace regretstream {

using TweetId = std::uint64_t;
using UserId = std::uint64_t;

/// Author snapshot carried on every tweet.
struct UserProfile {
  UserId user_id = 0;
  Timestamp account_created_at;
  bool profile_customized = false;
  bool custom_image = false;
  std::int64_t bio_length = 0;
  bool geo_enabled = false;
  bool has_location = false;
  bool has_profile_url = false;
  std::int64_t favourites_count = 0;
  std::int64_t followees_count = 0;
  std::int64_t followers_count = 0;
  std::int64_t listed_count = 0;
  std::int64_t statuses_count = 0;
  std::optional<std::int32_t> timezone_offset_min;

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct Tweet {
  TweetId id = 0;
  UserId user_id = 0;
  Timestamp created_at;
  std::string text;
  std::string lang;
  std::string source;
  std::optional<TweetId> in_reply_to_id;
  std::optional<TweetId> quoted_id;
  std::optional<TweetId> retweet_of_id;
  std::vector<std::string> hashtags;
  std::vector<std::string> urls;
  std::vector<std::string> mentions;
  bool has_geo = false;
  std::optional<UserProfile> user;

  friend bool operator==(const Tweet&, const Tweet&) = default;
};

struct DeleteNotice {
  TweetId id = 0;
  UserId user_id = 0;
  Timestamp observed_at;

  friend bool operator==(const DeleteNotice&, const DeleteNotice&) = default;
};

enum class EventKind { tweet, del };

struct Event {
  std::variant<Tweet, DeleteNotice> payload;

  EventKind kind() const { return payload.index() == 0 ? EventKind::tweet : EventKind::del; }
  const Tweet& tweet() const { return std::get<Tweet>(payload); }
  const DeleteNotice& deletion() const { return std::get<DeleteNotice>(payload); }
};

/// Parses one JSONL line. Unknown fields are ignored. Throws ParseError for
/// malformed JSON and SchemaError (naming the field) for missing or invalid
/// required fields. Entity lists absent from the payload are extracted from
/// the text.
Event parse_event(std::string_view line, std::size_t line_no = 1);

nlohmann::json to_json(const UserProfile& u);
nlohmann::json to_json(const Tweet& t);
nlohmann::json to_json(const DeleteNotice& d);
UserProfile profile_from_json(const nlohmann::json& j);

/// One event per line, wire format.
std::string to_wire(const Event& e);

/// Reads a whole event stream; blank lines are skipped.
std::vector<Event> read_events(std::istream& in);
std::vector<Event> read_events(const std::filesystem::path& path);

struct CollectionWindow {
  Timestamp post_start;
  Timestamp post_end;
  Timestamp delete_end;

  /// Throws ConfigError unless post_start < post_end <= delete_end.
  void validate() const;
  bool in_post_window(Timestamp t) const { return t >= post_start && t <= post_end; }
  double post_days() const { return static_cast<double>(post_end - post_start) / 86400.0; }

  friend bool operator==(const CollectionWindow&, const CollectionWindow&) = default;
};

struct TweetRecord {
  Tweet tweet;
  bool deleted = false;
  std::optional<std::int64_t> deletion_lag_sec;  // present iff deleted
  std::vector<TweetId> reply_ids;    // responses targeting this tweet, ascending
  std::vector<TweetId> retweet_ids;
  std::vector<TweetId> quote_ids;

  friend bool operator==(const TweetRecord&, const TweetRecord&) = default;
};

struct IngestStats {
  std::size_t tweets_in = 0;
  std::size_t retained = 0;
  std::size_t outside_window = 0;
  std::size_t duplicates = 0;
  std::size_t deletes_in = 0;
  std::size_t matched_deletes = 0;   // notices that labeled a retained tweet
  std::size_t orphan_deletes = 0;    // no retained tweet with that id
  std::size_t late_deletes = 0;      // matched an id but observed after delete_end
  std::size_t repeated_deletes = 0;  // extra notices for an already-labeled id
  std::size_t clamped_lags = 0;      // observed before created_at; lag set to 0

  friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

struct Corpus {
  CollectionWindow window;
  std::vector<TweetRecord> tweets;         // ascending id, ids unique
  std::vector<TweetRecord> response_pool;  // every ingested tweet that replies to,
                                           // quotes or retweets a corpus tweet
  IngestStats stats;

  const TweetRecord* find(TweetId id) const;
  const TweetRecord* find_response(TweetId id) const;
  /// Reply records for `r`, ordered by (created_at, id).
  std::vector<const TweetRecord*> replies_to(const TweetRecord& r) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

enum class DuplicatePolicy {
  reject,  // DuplicateIdError on the first repeated tweet id
  skip,    // keep one canonical copy, count the rest as duplicates
};

/// Joins tweets and deletion notices. All events are buffered so the result
/// does not depend on arrival order.
Corpus build_corpus(std::vector<Event> events, const CollectionWindow& window,
                    DuplicatePolicy duplicates = DuplicatePolicy::reject);

// Corpus file: JSONL. First line {"format":"regretstream-corpus","version":1,
// "window":{...},"stats":{...}}, then {"record":{...}} lines for corpus
// tweets and {"response":{...}} lines for the response pool.
void write_corpus(const Corpus& corpus, std::ostream& out);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus(std::istream& in);
Corpus read_corpus(const std::filesystem::path& path);

nlohmann::json to_json(const TweetRecord& r);
TweetRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CollectionWindow& w);
nlohmann::json to_json(const IngestStats& s);

}  // namespace regretstream
