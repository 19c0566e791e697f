#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "regretstream/ingest.hpp"
#include "regretstream/textkit.hpp"

namespace regretstream {

// Dense post-time layout. Indices are part of the RSF1/RSB1 file formats.
inline constexpr std::size_t kDenseDim = 112;
inline constexpr std::size_t kResponseDim = 93;

namespace slot {
inline constexpr std::size_t lexicon = 0;  // 64 category percentages
inline constexpr std::size_t sentiment = 64;
inline constexpr std::size_t pos = 65;  // 25 tag counts
inline constexpr std::size_t hour = 90;
inline constexpr std::size_t weekday = 91;
inline constexpr std::size_t timezone = 92;
inline constexpr std::size_t is_reply = 93;
inline constexpr std::size_t is_quote = 94;
inline constexpr std::size_t n_urls = 95;
inline constexpr std::size_t n_mentions = 96;
inline constexpr std::size_t n_hashtags = 97;
inline constexpr std::size_t has_geo = 98;
inline constexpr std::size_t account_age_days = 99;
inline constexpr std::size_t profile_customized = 100;
inline constexpr std::size_t custom_image = 101;
inline constexpr std::size_t bio_length = 102;
inline constexpr std::size_t geo_enabled = 103;
inline constexpr std::size_t has_location = 104;
inline constexpr std::size_t has_profile_url = 105;
inline constexpr std::size_t favourites = 106;
inline constexpr std::size_t followees = 107;
inline constexpr std::size_t followers = 108;
inline constexpr std::size_t listed = 109;
inline constexpr std::size_t statuses = 110;
inline constexpr std::size_t derived = 111;
}  // namespace slot

// Response block layout.
namespace rslot {
inline constexpr std::size_t retweets = 0;
inline constexpr std::size_t quotes = 1;
inline constexpr std::size_t replies = 2;
inline constexpr std::size_t lexicon = 3;  // 64
inline constexpr std::size_t pos = 67;     // 25
inline constexpr std::size_t sentiment = 92;
}  // namespace rslot

using DenseVector = std::array<double, kDenseDim>;
using ResponseVector = std::array<double, kResponseDim>;

enum class FeatureGroup { user, derived_open_text, tweet, sentiment, pos, lexicon };

std::string_view group_name(FeatureGroup g);
/// Throws ValidationError for names outside
/// {user, derived_open_text, tweet, sentiment, pos, lexicon}.
FeatureGroup parse_group(std::string_view name);
/// Half-open slot range [first, second) of a group in the dense layout.
std::pair<std::size_t, std::size_t> group_slots(FeatureGroup g);

// ---------------------------------------------------------------------------
// Sparse open-text block

class Vocabulary {
 public:
  Vocabulary() = default;
  /// terms must be sorted and unique, df aligned with them.
  Vocabulary(std::vector<std::string> terms, std::vector<std::uint32_t> df, std::uint64_t documents);

  std::size_t size() const { return terms_.size(); }
  std::uint64_t documents() const { return documents_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::uint32_t>& df() const { return df_; }
  std::optional<std::uint32_t> index_of(std::string_view term) const;
  double idf(std::uint32_t index) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.terms_ == b.terms_ && a.df_ == b.df_ && a.documents_ == b.documents_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::uint32_t> df_;
  std::uint64_t documents_ = 0;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Open-text terms of a tweet: normalized tokens minus mentions and urls.
std::vector<std::string_view> open_text_terms(const TokenList& tokens);

/// Document frequencies over the given token lists, terms in lexicographic
/// order. Throws ValidationError when there are no documents.
Vocabulary build_vocab(std::span<const TokenList> documents);
Vocabulary build_vocab(const Corpus& corpus);

struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;  // strictly increasing index

  double dot(std::span<const double> dense) const;
  double squared_norm() const;
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// tf * (ln((1+N)/(1+df)) + 1), L2-normalized; out-of-vocabulary terms dropped.
SparseVector open_text_vector(const TokenList& tokens, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Dense blocks

/// Lexicon, valence table and tagger shared by every featurization call.
struct TextResources {
  Lexicon lexicon;
  ValenceTable valence;
  std::shared_ptr<const PosTagger> tagger = std::make_shared<FallbackTagger>();
};

/// Per-tweet text measurements reused by features and analytics.
struct TextProfile {
  TokenList tokens;
  std::vector<PosTag> tags;
  LexiconScores lexicon{};
  double sentiment = 0.0;
  PosCounts pos{};
};

TextProfile profile_text(TweetId id, std::string_view text, const TextResources& res);

/// Post-time dense vector. Slot 111 (derived open-text feature) is left at 0
/// for the two-stage pipeline to fill. `now` is the reference instant for the
/// account age. Throws ValidationError when the tweet has no user snapshot.
DenseVector dense_features(const TweetRecord& record, const TextResources& res, Timestamp now);
DenseVector dense_features(const TweetRecord& record, const TextProfile& text, Timestamp now);

/// Response-time block. Responses are classified by how they link to
/// `record`; a tweet that both quotes and replies counts in both.
ResponseVector response_features(const TweetRecord& record, std::span<const TweetRecord* const> responses,
                                 const TextResources& res);

/// Responses for a corpus tweet: its reply, quote and retweet links resolved
/// against the response pool.
std::vector<const TweetRecord*> responses_of(const Corpus& corpus, const TweetRecord& record);

// ---------------------------------------------------------------------------
// Feature matrix file ("RSF1", little-endian):
//   magic "RSF1" | u32 version (1) | u64 rows | u32 dense_dim | u32 response_dim
//   | u64 vocab_size | vocab_size x (str term, u32 df) | u64 vocab_documents
//   | u8 has_sparse
//   | rows x (u64 id, u8 label, dense_dim f64, response_dim f64,
//             [u32 nnz, nnz x (u32 index, f64 weight)])
// response_dim is 0 when the matrix has no response block. Strings are u32
// length + UTF-8 bytes.

struct FeatureMatrix {
  std::vector<TweetId> ids;
  std::vector<std::uint8_t> labels;  // 1 = deleted
  std::vector<DenseVector> dense;
  std::vector<ResponseVector> response;  // empty or one per row
  std::vector<SparseVector> sparse;      // empty or one per row
  Vocabulary vocab;

  std::size_t rows() const { return ids.size(); }
  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

std::vector<char> encode_rsf1(const FeatureMatrix& m);
FeatureMatrix decode_rsf1(std::span<const char> bytes);
void write_rsf1(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_rsf1(const std::filesystem::path& path);

/// Whole-corpus featurization: vocabulary over the corpus, TF-IDF rows,
/// dense rows and (when requested) response rows.
FeatureMatrix featurize_corpus(const Corpus& corpus, const TextResources& res, bool with_responses,
                               unsigned threads = 1);

}  // namespace regretstream
