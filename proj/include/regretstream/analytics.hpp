#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "regretstream/features.hpp"
#include "regretstream/ingest.hpp"
#include "regretstream/stats.hpp"
#include "regretstream/textkit.hpp"

namespace regretstream {

// ---------------------------------------------------------------------------
// Deleter partition

struct UserPartition {
  std::set<UserId> deleters;      // >= 1 deleted tweet in the cleaned corpus
  std::set<UserId> non_deleters;  // >= 1 tweet, none deleted
};

UserPartition partition_users(const Corpus& corpus);

/// Corpus tweets paired with their text measurements.
struct TweetView {
  const TweetRecord* record = nullptr;
  const TextProfile* text = nullptr;
};

struct ProfiledCorpus {
  const Corpus* corpus = nullptr;
  std::vector<TextProfile> profiles;  // aligned with corpus->tweets

  std::vector<TweetView> views() const;
};

ProfiledCorpus profile_corpus(const Corpus& corpus, const TextResources& res, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Attributes

enum class AttributeKind {
  binary,       // tweet has / has not; fraction of tweets
  scalar,       // per-tweet real; medians and Mann-Whitney
  token_share,  // matching tokens / tokens; pooled over tweets
};

std::string_view attribute_kind_name(AttributeKind k);

struct AttributeExtractor {
  std::string name;
  AttributeKind kind = AttributeKind::binary;
  std::function<bool(const TweetView&)> has;                                        // binary
  std::function<std::optional<double>(const TweetView&)> value;                     // scalar; nullopt = skip
  std::function<std::pair<std::uint64_t, std::uint64_t>(const TweetView&)> share;  // token_share: (hits, total)
};

AttributeExtractor binary_attribute(std::string name, std::function<bool(const TweetView&)> has);
AttributeExtractor scalar_attribute(std::string name, std::function<std::optional<double>(const TweetView&)> value);
AttributeExtractor share_attribute(std::string name,
                                   std::function<std::pair<std::uint64_t, std::uint64_t>(const TweetView&)> share);

/// Hashtags, urls, mentions and replies (binary); the five content POS tags
/// and emoticons (token share); lexical density and dictionary words
/// (scalar); one token-share attribute per named lexicon category.
std::vector<AttributeExtractor> default_attributes(const Lexicon& lexicon, const Wordlist& wordlist);

// ---------------------------------------------------------------------------
// NTD / NUD

/// (del - nondel) / nondel * 100. Throws UndefinedMetricError when nondel is 0.
double normalized_difference(double del, double nondel);

struct NtdResult {
  double value = 0.0;
  double del_stat = 0.0;     // fraction, pooled share or median
  double nondel_stat = 0.0;
  stats::TestResult test;    // Fisher (binary, token_share) or Mann-Whitney (scalar)
};

/// Throws ValidationError when either set is empty and UndefinedMetricError
/// when the non-deleted statistic is 0.
NtdResult ntd(const AttributeExtractor& attr, std::span<const TweetView> deleted,
              std::span<const TweetView> non_deleted, double alpha = 0.05);

struct NudUser {
  UserId user = 0;
  double del_stat = 0.0;
  double nondel_stat = 0.0;
  stats::TestResult test;
  int direction = 0;  // +1 significantly higher in deleted, -1 in non-deleted
};

struct NudResult {
  double value = 0.0;
  std::size_t eligible = 0;
  std::size_t higher_in_deleted = 0;
  std::size_t higher_in_non_deleted = 0;
  std::vector<NudUser> users;

  double del_user_frac() const;
  double nondel_user_frac() const;
};

inline constexpr std::size_t kNudMinTweets = 10;

/// Per-user test of deleted vs non-deleted tweets for users with at least
/// `min_each` of both. Throws UndefinedMetricError when no user is eligible
/// or no user is significantly higher in non-deleted tweets.
NudResult nud(const AttributeExtractor& attr, std::span<const TweetView> tweets, double alpha = 0.05,
              std::size_t min_each = kNudMinTweets);

struct AttributeComparison {
  std::string name;
  AttributeKind kind = AttributeKind::binary;
  std::optional<NtdResult> ntd;
  std::string ntd_error;  // set when ntd is undefined
  NudResult nud;  // per-user counts are kept even when the value is undefined
  bool nud_defined = false;
  std::string nud_error;
};

struct GroupComparisonReport {
  std::vector<AttributeComparison> attributes;
};

GroupComparisonReport compare_attributes(std::span<const AttributeExtractor> attrs, std::span<const TweetView> tweets,
                                         double alpha = 0.05, bool with_nud = true, unsigned threads = 1);

// ---------------------------------------------------------------------------
// User attributes

struct CcdfPoint {
  double value = 0.0;
  double fraction = 0.0;  // share of the group with metric >= value
};

std::vector<CcdfPoint> ccdf(std::span<const double> values);

struct UserGroupComparison {
  std::string metric;
  double deleter_median = 0.0;
  double non_deleter_median = 0.0;
  stats::TestResult test;  // Mann-Whitney, deleters vs non-deleters
  std::vector<CcdfPoint> deleter_ccdf;
  std::vector<CcdfPoint> non_deleter_ccdf;
};

/// Throws ValidationError when a group is empty.
UserGroupComparison user_group_compare(std::string metric, std::span<const double> deleters,
                                       std::span<const double> non_deleters, double alpha = 0.05);

/// Followers, followees, listed count (latest snapshot per user) and tweet
/// rate (observed tweets per window day).
std::vector<UserGroupComparison> compare_user_groups(const Corpus& corpus, const UserPartition& partition,
                                                     double alpha = 0.05);

/// "508 vs 375" style rendering of a median pair.
std::string format_median_pair(double deleters, double non_deleters);

// ---------------------------------------------------------------------------
// Trait tally

struct TraitRow {
  std::string name;       // display name
  std::string attribute;  // key matched against AttributeMedians
  bool deleter_higher = true;  // direction the listed traits were read for
  std::vector<std::string> traits;
  std::optional<double> non_deleter_median;  // reference values, if shipped
  std::optional<double> deleter_median;
};

class TraitMap {
 public:
  TraitMap() = default;
  /// Throws ConfigError for trait symbols outside O C E A N and their _bar forms.
  explicit TraitMap(std::vector<TraitRow> rows);
  static TraitMap from_json(const nlohmann::json& j);
  static TraitMap load(const std::filesystem::path& path);

  const std::vector<TraitRow>& rows() const { return rows_; }

 private:
  std::vector<TraitRow> rows_;
};

/// "C" <-> "C_bar".
std::string conjugate_trait(std::string_view symbol);

struct AttributeMedians {
  std::string attribute;
  double non_deleter = 0.0;
  double deleter = 0.0;
};

struct TraitTally {
  std::map<std::string, int> counts;  // signed symbol -> rows predicting it
  std::vector<std::string> unmapped;  // medians with no map row
  std::vector<std::string> missing;   // map rows with no medians
  std::vector<std::string> tied;      // equal medians, no prediction
};

/// For each mapped attribute: when the observed direction matches the
/// row's direction the listed traits are counted, when it is reversed their
/// conjugates are.
TraitTally trait_tally(std::span<const AttributeMedians> medians, const TraitMap& map);

/// The reference medians shipped in the map itself.
std::vector<AttributeMedians> reference_medians(const TraitMap& map);

/// Per-user medians: pooled word share of every named lexicon category and
/// the share of tweets with positive / negative sentiment, hashtags and urls
/// (keys tweets_with_positive_sentiment, tweets_with_negative_sentiment,
/// tweets_with_hashtags, tweets_with_urls).
std::vector<AttributeMedians> user_category_medians(const ProfiledCorpus& pc, const UserPartition& partition,
                                                    const Lexicon& lexicon);

// ---------------------------------------------------------------------------
// Temporal

using HourHistogram = std::array<double, 24>;

/// Percentage of timestamps in each UTC hour. Throws ValidationError when empty.
HourHistogram hourly_percentages(std::span<const Timestamp> times);

struct TemporalReport {
  HourHistogram deleted{};
  HourHistogram non_deleted{};
};

TemporalReport temporal_histogram(const Corpus& corpus);

// ---------------------------------------------------------------------------
// Responses

struct ResponseGroupStats {
  std::size_t tweets = 0;
  double pct_with_reply = 0.0;
  double pct_with_retweet = 0.0;
  double pct_with_quote = 0.0;
  std::optional<double> median_first_reply_sec;
};

struct ResponseReport {
  ResponseGroupStats deleted;
  ResponseGroupStats non_deleted;
  std::optional<double> median_deletion_lag_sec;
  std::optional<double> median_deletion_lag_replied_sec;  // deleted tweets with >= 1 reply
};

ResponseReport response_report(const Corpus& corpus);

struct SentimentSplit {
  std::size_t tweets_with_reply = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t neutral = 0;  // first reply scored exactly 0
  double pct_positive = 0.0;
  double pct_negative = 0.0;
};

struct ReplySentimentReport {
  SentimentSplit deleted;
  SentimentSplit non_deleted;
};

/// Sentiment of the earliest reply of every replied-to tweet.
ReplySentimentReport reply_sentiment_split(const Corpus& corpus, const ValenceTable& valence);

/// "63.13% / 36.86%".
std::string format_split(const SentimentSplit& s);

// ---------------------------------------------------------------------------
// Annotations

enum class Answer { yes, no, cant_say };

struct AnnotationItem {
  std::string id;
  bool deleted = false;
  std::map<std::string, std::array<Answer, 3>> answers;  // question -> three answers
};

inline constexpr std::string_view kRegretQuestion = "regret";

/// JSONL: {"id":..,"deleted":bool,"answers":{"<question>":["yes","no","cant_say"],..}}.
/// Every question needs exactly three answers; a "regret" question is required.
std::vector<AnnotationItem> read_annotations(std::istream& in);
std::vector<AnnotationItem> read_annotations(const std::filesystem::path& path);

struct CategoryCount {
  std::size_t deleted = 0;
  std::size_t non_deleted = 0;
  std::size_t unclassified = 0;  // no yes/no majority
};

struct AnnotationSummary {
  std::map<std::string, CategoryCount> categories;  // assigned when >= 2 yes
  std::size_t questions = 0;
  double unanimous_rate = 0.0;  // all three answers equal
  double majority_rate = 0.0;   // some answer given by >= 2 annotators
  std::size_t deleted_items = 0;
  std::size_t non_deleted_items = 0;
  stats::Contingency2x2 regret_table;  // rows (non-deleted, deleted) x (regret yes, not)
  stats::TestResult regret_test;
};

AnnotationSummary aggregate_annotations(std::span<const AnnotationItem> items, double alpha = 0.05);

// ---------------------------------------------------------------------------
// Emitters

nlohmann::json to_json(const UserPartition& p);
nlohmann::json to_json(const GroupComparisonReport& r);
nlohmann::json to_json(const UserGroupComparison& c);
nlohmann::json to_json(const TraitTally& t);
nlohmann::json to_json(const TemporalReport& t);
nlohmann::json to_json(const ResponseReport& r);
nlohmann::json to_json(const ReplySentimentReport& r);
nlohmann::json to_json(const AnnotationSummary& s);

std::string to_csv(const GroupComparisonReport& r);
std::string to_csv(const TemporalReport& t);
/// Long format: metric,group,value,fraction.
std::string ccdf_csv(std::span<const UserGroupComparison> comparisons);

}  // namespace regretstream
