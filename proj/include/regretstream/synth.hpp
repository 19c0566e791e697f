#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regretstream/cleanup.hpp"
#include "regretstream/ingest.hpp"
#include "regretstream/textkit.hpp"

namespace regretstream {

/// Knobs of the seeded generator. Composition fractions refer to in-window
/// tweets and are exclusive: a tweet is non-English, automated, a retweet or
/// analyzable. `superficial_fraction` is the share of analyzable deletions
/// planted as typo-fix deletions.
struct SynthConfig {
  std::uint64_t seed = 42;
  std::size_t n_users = 400;
  std::size_t n_tweets = 20000;  // in-window tweet events, corrections and replies included
  Timestamp window_start = from_civil(2015, 8, 1);
  std::int64_t window_days = 7;
  std::int64_t delete_window_days = 7;
  double tweet_rate_min = 0.5;  // tweets per day, per-user rate drawn uniformly
  double tweet_rate_max = 20.0;

  double deleter_fraction = 0.3;   // users of the deletion-prone latent type
  double deletion_rate = 0.1111;   // expected deleted share of tweets
  double prone_share = 0.9;        // share of deletions authored by prone users
  double superficial_fraction = 0.1445;
  double non_english_fraction = 0.2062;
  double automated_fraction = 0.0540;
  double retweet_fraction = 0.4392;
  double outside_window_fraction = 0.01;  // extra tweets posted outside the window
  double orphan_delete_fraction = 0.005;  // extra notices for ids never posted
  double late_delete_fraction = 0.02;     // deletions observed after delete_end

  // Planted signals.
  double user_skew = 1.0;  // shift of the prone type's profile distributions
  // Each user alternates between exposed and quiet profile phases. Exposed
  // phases switch geolocation on and concentrate the user's deletions.
  double exposure_fraction = 0.35;  // chance a phase is exposed
  double exposure_share = 0.95;     // share of a user's deletions in exposed phases
  double exposed_geo_rate = 0.9;    // geo_enabled in an exposed phase
  double quiet_geo_rate = 0.05;
  std::vector<std::string> tone_categories = {"negemo", "anger", "swear", "sad"};
  std::size_t tone_words = 2;
  double tone_rate_deleted = 0.6;
  double tone_rate_kept = 0.15;
  std::string marker_term = "tbh";
  double marker_rate_deleted = 0.5;
  double marker_rate_kept = 0.1;
  double reply_rate_deleted = 0.1;  // chance a post draws replies
  double reply_rate_kept = 0.1;
  std::size_t max_replies = 3;
  double reply_negative_deleted = 0.3;  // chance a reply is negative in tone
  double reply_negative_kept = 0.3;
  std::vector<std::string> whitelisted_sources = {"Twitter Web Client", "Twitter for iPhone",
                                                  "Twitter for Android", "TweetDeck", "HootSuite"};
  std::vector<std::string> automated_sources = {"RoundTeam", "IFTTT", "Buffer", "twittbot.net", "fllwrs",
                                                "Crowdfire", "Twittascope", "Ask.fm", "WordPress.com"};

  // Resource files, resolved against the config file's directory by load().
  std::filesystem::path lexicon_path = "lexicon.json";
  std::filesystem::path background_path = "background.txt";

  /// Throws ConfigError for fractions outside [0,1], negative rates, an empty
  /// window or exclusive fractions summing above 1.
  void validate() const;
  static SynthConfig from_json(const nlohmann::json& j);
  static SynthConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct SynthResources {
  Lexicon lexicon;
  std::vector<std::string> background;  // Zipf-ranked, most frequent first

  static SynthResources load(const SynthConfig& cfg);
};

enum class SynthFilter { non_english, automated, retweet, superficial, retained, outside_window };

std::string_view filter_name(SynthFilter f);

struct SynthTruth {
  TweetId id = 0;
  UserId user_id = 0;
  SynthFilter filter = SynthFilter::retained;
  bool deleted = false;       // label the join must produce
  bool late_delete = false;   // a notice exists but arrives after delete_end
  bool negative_tone = false;
  bool marker = false;
  bool exposed = false;  // posted during an exposed profile phase
  std::optional<TweetId> corrects;  // set on the follow-up of a superficial deletion
  std::optional<TweetId> reply_to;
  std::optional<bool> reply_negative;  // tone coupled to the parent's label
};

struct SynthUser {
  UserId id = 0;
  bool prone = false;
};

struct SynthOutput {
  CollectionWindow window;
  std::vector<Event> events;  // arrival order
  std::vector<SynthUser> users;
  std::vector<SynthTruth> truth;  // one per tweet event, ascending id
  std::vector<TweetId> orphan_delete_ids;
  IngestStats expected_ingest;
  CleanupReport expected_cleanup;  // superficial_passes left at 0
  nlohmann::json planted;          // signal strengths per feature group

  nlohmann::json ledger(const SynthConfig& cfg) const;
};

/// Deterministic for a given (cfg, resources).
SynthOutput generate_synthetic(const SynthConfig& cfg, const SynthResources& res);

void write_events(const std::vector<Event>& events, const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace regretstream
