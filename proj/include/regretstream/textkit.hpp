#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace regretstream {

// ---------------------------------------------------------------------------
// Tokens

enum class TokenClass : std::uint8_t { word, mention, hashtag, url, emoticon, punct, number };

std::string_view token_class_name(TokenClass c);

struct Token {
  std::string surface;
  TokenClass cls = TokenClass::word;
  std::string norm;  // lowercased for words, mentions and hashtags

  friend bool operator==(const Token&, const Token&) = default;
};

using TokenList = std::vector<Token>;

/// Splits tweet text into mentions, hashtags, urls, emoticons, numbers,
/// words and punctuation. Pure and deterministic.
TokenList tokenize(std::string_view text);

/// Token surfaces joined by single spaces.
std::string joined_surface(const TokenList& tokens);

/// Shipped emoticon list, longest entries first.
std::span<const std::string_view> emoticons();

/// Decodes UTF-8 into scalar values. Invalid bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view text);

/// Levenshtein distance over Unicode scalar values.
std::size_t edit_distance(std::string_view a, std::string_view b);
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);

/// Cosine of lowercased term-frequency vectors. Punctuation tokens are not
/// terms. 0 when either side has no terms.
double term_cosine(std::string_view a, std::string_view b);
double term_cosine(const TokenList& a, const TokenList& b);

// ---------------------------------------------------------------------------
// Closed-vocabulary lexicon (LIWC-style): 64 categories of literal words and
// trailing-star prefix patterns.

class Lexicon {
 public:
  static constexpr std::size_t kCategories = 64;
  using Mask = std::bitset<kCategories>;

  struct Category {
    std::string name;
    std::vector<std::string> patterns;
  };

  Lexicon() = default;
  /// Fewer than 64 categories are padded with empty ones; more is an error.
  explicit Lexicon(std::vector<Category> categories);

  static Lexicon from_json(const nlohmann::json& j);
  static Lexicon load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::vector<Category>& categories() const { return categories_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Categories matched by a lowercased word.
  Mask match(std::string_view word) const;

 private:
  std::vector<Category> categories_;
  std::unordered_map<std::string, Mask> literals_;
  std::unordered_map<std::string, Mask> prefixes_;
  std::size_t max_prefix_ = 0;
};

using LexiconScores = std::array<double, Lexicon::kCategories>;

/// Percentage of word tokens matching each category (word tokens only).
LexiconScores lexicon_score(const TokenList& tokens, const Lexicon& lex);

// ---------------------------------------------------------------------------
// Valence sentiment

class ValenceTable {
 public:
  ValenceTable() = default;
  explicit ValenceTable(std::unordered_map<std::string, double> scores);

  static ValenceTable from_json(const nlohmann::json& j);
  static ValenceTable load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  std::optional<double> lookup(std::string_view word) const;
  /// Copy with every valence negated.
  ValenceTable negated() const;
  std::size_t size() const { return scores_.size(); }

 private:
  std::unordered_map<std::string, double> scores_;
};

bool is_negation(std::string_view norm);

/// Sum of token valences (sign flipped when the previous token is a
/// negation), squashed with s / sqrt(s^2 + 15). 0 for no valenced tokens.
double sentiment_score(const TokenList& tokens, const ValenceTable& valence);

// ---------------------------------------------------------------------------
// Part-of-speech tags: the 25-tag Twitter tagset.

enum class PosTag : std::uint8_t {
  common_noun,          // N
  pronoun,              // O
  proper_noun,          // ^
  nominal_possessive,   // S
  proper_possessive,    // Z
  verb,                 // V
  nominal_verbal,       // L
  proper_verbal,        // M
  adjective,            // A
  adverb,               // R
  interjection,         // !
  determiner,           // D
  preposition,          // P
  conjunction,          // &
  particle,             // T
  existential,          // X
  existential_verbal,   // Y
  hashtag,              // #
  mention,              // @
  discourse,            // ~
  url,                  // U
  emoticon,             // E
  numeral,              // $
  punctuation,          // ,
  other,                // G
};

inline constexpr std::size_t kPosTagCount = 25;
inline constexpr std::array<std::string_view, kPosTagCount> kPosTagSymbols = {
    "N", "O", "^", "S", "Z", "V", "L", "M", "A", "R", "!", "D", "P",
    "&", "T", "X", "Y", "#", "@", "~", "U", "E", "$", ",", "G"};

std::string_view pos_symbol(PosTag tag);
std::optional<PosTag> parse_pos_symbol(std::string_view symbol);

/// Tagger interface. Implementations return one tag symbol per token.
class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<std::string> tag(std::uint64_t tweet_id, const TokenList& tokens) const = 0;
};

/// Rule-based tagger: token classes map straight to structural tags, small
/// closed-class word lists, then suffix heuristics for content words.
class FallbackTagger final : public PosTagger {
 public:
  std::vector<std::string> tag(std::uint64_t tweet_id, const TokenList& tokens) const override;
};

/// Tags read from JSONL {"id":u64,"tags":[str]}. Tweets absent from the file
/// go to `fallback` when given, else raise ContractError.
class PreTaggedTagger final : public PosTagger {
 public:
  explicit PreTaggedTagger(std::unordered_map<std::uint64_t, std::vector<std::string>> tags,
                           std::shared_ptr<const PosTagger> fallback = nullptr);
  static PreTaggedTagger load(const std::filesystem::path& path,
                              std::shared_ptr<const PosTagger> fallback = nullptr);

  std::vector<std::string> tag(std::uint64_t tweet_id, const TokenList& tokens) const override;

 private:
  std::unordered_map<std::uint64_t, std::vector<std::string>> tags_;
  std::shared_ptr<const PosTagger> fallback_;
};

/// Runs the tagger and validates its output against the tagset.
std::vector<PosTag> pos_tag(const TokenList& tokens, const PosTagger& tagger,
                            std::uint64_t tweet_id = 0);

using PosCounts = std::array<double, kPosTagCount>;
PosCounts pos_counts(std::span<const PosTag> tags);

// ---------------------------------------------------------------------------
// Dictionary words and lexical density

class Wordlist {
 public:
  Wordlist() = default;
  explicit Wordlist(std::unordered_set<std::string> words) : words_(std::move(words)) {}
  static Wordlist load(const std::filesystem::path& path);
  bool contains(std::string_view lowercase_word) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

struct TextStats {
  double lexical_density = 0.0;      // content-tagged word tokens / word tokens
  double dictionary_fraction = 0.0;  // word tokens in the wordlist / word tokens
};

bool is_content_tag(PosTag tag);

TextStats text_stats(const TokenList& tokens, std::span<const PosTag> tags,
                     const Wordlist& wordlist);

}  // namespace regretstream
