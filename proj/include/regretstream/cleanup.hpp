#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "regretstream/ingest.hpp"

namespace regretstream {

struct CleanupConfig {
  std::string language_tag = "en";
  std::set<std::string> client_whitelist;
  std::size_t superficial_lookahead = 3;
  std::size_t edit_distance_max = 5;  // similar iff distance < this
  double cosine_min = 0.6;            // similar iff cosine > this

  /// Throws ConfigError on an empty whitelist, lookahead 0 or cosine_min
  /// outside [0,1].
  void validate() const;

  /// Reads the optional overrides {"language_tag","superficial_lookahead",
  /// "edit_distance_max","cosine_min","client_whitelist"}.
  static CleanupConfig from_json(const nlohmann::json& j, CleanupConfig base);
  static CleanupConfig from_json(const nlohmann::json& j);
};

/// One client name per line; blank lines ignored, no trimming beyond the
/// line terminator.
std::set<std::string> load_whitelist(const std::filesystem::path& path);

/// True iff some followup is within edit distance (strictly below
/// cfg.edit_distance_max) or term cosine (strictly above cfg.cosine_min) of
/// the deleted tweet's text.
bool detect_superficial(const TweetRecord& deleted, std::span<const TweetRecord* const> followups,
                        const CleanupConfig& cfg);

struct StageTally {
  std::size_t tweets = 0;
  std::size_t deleted = 0;
  std::size_t users = 0;          // distinct authors among `tweets`
  std::size_t deleter_users = 0;  // distinct authors among deleted tweets

  friend bool operator==(const StageTally&, const StageTally&) = default;
};

struct CleanupReport {
  StageTally input;
  StageTally non_english;
  StageTally automated;
  StageTally retweets;
  StageTally superficial;
  StageTally retained;
  std::size_t superficial_passes = 0;  // timeline passes until no deletion was superficial

  friend bool operator==(const CleanupReport&, const CleanupReport&) = default;
};

/// Removes, in order: tweets whose lang differs from the configured tag,
/// tweets from non-whitelisted clients, retweets, and superficially deleted
/// tweets. Superficial detection looks at each user's timeline after the
/// first three filters and is repeated until no further deletion qualifies,
/// so the result is idempotent. The response pool is carried over unchanged.
std::pair<Corpus, CleanupReport> run_cleanup(const Corpus& corpus, const CleanupConfig& cfg);

nlohmann::json to_json(const CleanupReport& r);
/// Plain-text table with one block per removal stage.
std::string render_table(const CleanupReport& r);

}  // namespace regretstream
