#include "regretstream/textkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "regretstream/error.hpp"

namespace regretstream {
namespace {

constexpr std::array<std::string_view, 34> kEmoticons = {
    ">:-(", ">:(", ":'-(", ":'(", ":-)", ":-(", ":-D", ":-P", ":-p", ":-/", ":-|", ";-)", ":-*",
    "^_^", "-_-", "^^", ":)", ":(", ":D", ":P", ":p", ":/", ":|", ";)", ":*", ":o", ":O", "=)",
    "=(", "<3", "(:", ";(", "xD", "XD"};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_ascii_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
// Non-ASCII bytes are treated as letters so accented and non-Latin words stay
// in one token.
bool is_word_char(unsigned char c) { return is_ascii_alpha(c) || is_digit(c) || c == '_' || c >= 0x80; }
bool is_word_start(unsigned char c) { return is_ascii_alpha(c) || c >= 0x80; }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

// Length of a URL starting at s[0], or 0.
std::size_t match_url(std::string_view s) {
  std::size_t body = 0;
  std::size_t scheme = 0;
  while (scheme < s.size() && (is_ascii_alpha(s[scheme]) || (scheme > 0 && (is_digit(s[scheme]) || s[scheme] == '+' || s[scheme] == '.' || s[scheme] == '-')))) {
    ++scheme;
  }
  if (scheme > 0 && s.substr(scheme, 3) == "://") {
    body = scheme + 3;
  } else if (istarts_with(s, "www.") || istarts_with(s, "t.co/")) {
    body = 4;
  } else {
    return 0;
  }
  std::size_t end = body;
  while (end < s.size() && !is_space(static_cast<unsigned char>(s[end]))) ++end;
  // Trailing sentence punctuation is not part of the link.
  while (end > body && std::string_view(".,!?;:)]}\"'").find(s[end - 1]) != std::string_view::npos) --end;
  return end > body ? end : 0;
}

std::size_t match_emoticon(std::string_view s, bool at_boundary) {
  for (std::string_view e : kEmoticons) {
    if (s.substr(0, e.size()) != e) continue;
    if (is_ascii_alpha(e[0]) && !at_boundary) continue;
    if (e.size() < s.size() && is_word_char(static_cast<unsigned char>(s[e.size()]))) continue;
    return e.size();
  }
  return 0;
}

}  // namespace

std::string_view token_class_name(TokenClass c) {
  switch (c) {
    case TokenClass::word: return "word";
    case TokenClass::mention: return "mention";
    case TokenClass::hashtag: return "hashtag";
    case TokenClass::url: return "url";
    case TokenClass::emoticon: return "emoticon";
    case TokenClass::punct: return "punct";
    case TokenClass::number: return "number";
  }
  return "unknown";
}

std::span<const std::string_view> emoticons() { return kEmoticons; }

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto push = [&](std::size_t len, TokenClass cls) {
    Token t;
    t.surface = std::string(text.substr(i, len));
    t.cls = cls;
    t.norm = (cls == TokenClass::word || cls == TokenClass::mention || cls == TokenClass::hashtag)
                 ? ascii_lower(t.surface)
                 : t.surface;
    out.push_back(std::move(t));
    i += len;
  };

  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    const bool boundary = i == 0 || is_space(static_cast<unsigned char>(text[i - 1]));
    const std::string_view rest = text.substr(i);

    if (boundary || !is_word_char(static_cast<unsigned char>(text[i - 1]))) {
      if (std::size_t len = match_url(rest)) {
        push(len, TokenClass::url);
        continue;
      }
    }
    if (std::size_t len = match_emoticon(rest, boundary)) {
      push(len, TokenClass::emoticon);
      continue;
    }
    if ((c == '@' || c == '#') && rest.size() > 1) {
      std::size_t len = 1;
      if (c == '@') {
        while (len < rest.size() && (is_ascii_alpha(rest[len]) || is_digit(rest[len]) || rest[len] == '_')) ++len;
      } else {
        while (len < rest.size() && is_word_char(static_cast<unsigned char>(rest[len]))) ++len;
      }
      if (len > 1) {
        push(len, c == '@' ? TokenClass::mention : TokenClass::hashtag);
        continue;
      }
    }
    if (is_digit(c)) {
      std::size_t len = 1;
      while (len < rest.size()) {
        if (is_digit(rest[len])) {
          ++len;
        } else if ((rest[len] == '.' || rest[len] == ',' || rest[len] == ':') && len + 1 < rest.size() && is_digit(rest[len + 1])) {
          len += 2;
        } else {
          break;
        }
      }
      if (len < rest.size() && is_word_start(static_cast<unsigned char>(rest[len]))) {
        // "3rd", "2nite": alphanumeric run is a word
        while (len < rest.size() && is_word_char(static_cast<unsigned char>(rest[len]))) ++len;
        push(len, TokenClass::word);
      } else {
        push(len, TokenClass::number);
      }
      continue;
    }
    if (is_word_start(c) || c == '_') {
      std::size_t len = 1;
      while (len < rest.size()) {
        const auto d = static_cast<unsigned char>(rest[len]);
        if (is_word_char(d)) {
          ++len;
        } else if ((d == '\'' || d == '-') && len + 1 < rest.size() && is_word_start(static_cast<unsigned char>(rest[len + 1]))) {
          len += 2;
        } else {
          break;
        }
      }
      push(len, TokenClass::word);
      continue;
    }
    // Punctuation: runs of one repeated character ("!!!") form one token.
    std::size_t len = 1;
    while (len < rest.size() && rest[len] == rest[0]) ++len;
    push(len, TokenClass::punct);
  }
  return out;
}

std::string joined_surface(const TokenList& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t.surface;
  }
  return out;
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int extra;
    char32_t cp;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(extra) >= s.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (!ok || cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  return edit_distance(std::u32string_view(decode_utf8(a)), std::u32string_view(decode_utf8(b)));
}

double term_cosine(const TokenList& a, const TokenList& b) {
  std::map<std::string_view, std::pair<double, double>> tf;
  for (const auto& t : a) {
    if (t.cls != TokenClass::punct) tf[t.norm].first += 1.0;
  }
  for (const auto& t : b) {
    if (t.cls != TokenClass::punct) tf[t.norm].second += 1.0;
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [term, counts] : tf) {
    dot += counts.first * counts.second;
    na += counts.first * counts.first;
    nb += counts.second * counts.second;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

double term_cosine(std::string_view a, std::string_view b) {
  return term_cosine(tokenize(a), tokenize(b));
}

// ---------------------------------------------------------------------------

Lexicon::Lexicon(std::vector<Category> categories) : categories_(std::move(categories)) {
  if (categories_.size() > kCategories) {
    throw ConfigError("lexicon has " + std::to_string(categories_.size()) +
                      " categories; at most 64 are supported");
  }
  while (categories_.size() < kCategories) {
    categories_.push_back({"unused_" + std::to_string(categories_.size()), {}});
  }
  for (std::size_t c = 0; c < categories_.size(); ++c) {
    for (auto& p : categories_[c].patterns) {
      p = ascii_lower(p);
      if (p.empty() || p == "*") throw ConfigError("empty lexicon pattern in " + categories_[c].name);
      if (p.back() == '*') {
        std::string stem = p.substr(0, p.size() - 1);
        max_prefix_ = std::max(max_prefix_, stem.size());
        prefixes_[stem].set(c);
      } else {
        literals_[p].set(c);
      }
    }
  }
}

Lexicon Lexicon::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("categories") || !j["categories"].is_array()) {
    throw SchemaError("categories", "lexicon: missing \"categories\" array");
  }
  std::vector<Category> cats;
  for (const auto& c : j["categories"]) {
    if (!c.contains("name") || !c["name"].is_string()) throw SchemaError("name", "lexicon: category without name");
    Category cat{c["name"].get<std::string>(), {}};
    if (c.contains("patterns")) cat.patterns = c["patterns"].get<std::vector<std::string>>();
    cats.push_back(std::move(cat));
  }
  return Lexicon(std::move(cats));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("lexicon " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json Lexicon::to_json() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categories_) cats.push_back({{"name", c.name}, {"patterns", c.patterns}});
  return {{"categories", cats}};
}

std::optional<std::size_t> Lexicon::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i].name == name) return i;
  }
  return std::nullopt;
}

Lexicon::Mask Lexicon::match(std::string_view word) const {
  Mask m;
  if (auto it = literals_.find(std::string(word)); it != literals_.end()) m |= it->second;
  if (!prefixes_.empty()) {
    std::string key;
    const std::size_t upto = std::min(max_prefix_, word.size());
    for (std::size_t len = 1; len <= upto; ++len) {
      key.assign(word.substr(0, len));
      if (auto it = prefixes_.find(key); it != prefixes_.end()) m |= it->second;
    }
  }
  return m;
}

LexiconScores lexicon_score(const TokenList& tokens, const Lexicon& lex) {
  LexiconScores scores{};
  std::array<std::size_t, Lexicon::kCategories> hits{};
  std::size_t words = 0;
  for (const auto& t : tokens) {
    if (t.cls != TokenClass::word) continue;
    ++words;
    const auto m = lex.match(t.norm);
    if (m.none()) continue;
    for (std::size_t c = 0; c < Lexicon::kCategories; ++c) {
      if (m.test(c)) ++hits[c];
    }
  }
  if (words == 0) return scores;
  for (std::size_t c = 0; c < Lexicon::kCategories; ++c) {
    scores[c] = 100.0 * static_cast<double>(hits[c]) / static_cast<double>(words);
  }
  return scores;
}

// ---------------------------------------------------------------------------

ValenceTable::ValenceTable(std::unordered_map<std::string, double> scores) {
  for (auto& [w, s] : scores) scores_.emplace(ascii_lower(w), s);
}

ValenceTable ValenceTable::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("valence", "valence table must be a JSON object");
  std::unordered_map<std::string, double> m;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw SchemaError(k, "valence for \"" + k + "\" is not a number");
    m.emplace(k, v.get<double>());
  }
  return ValenceTable(std::move(m));
}

ValenceTable ValenceTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open valence table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("valence " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ValenceTable::to_json() const {
  // std::map gives a stable key order in the serialized form.
  std::map<std::string, double> sorted(scores_.begin(), scores_.end());
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : sorted) j[k] = v;
  return j;
}

std::optional<double> ValenceTable::lookup(std::string_view word) const {
  if (auto it = scores_.find(std::string(word)); it != scores_.end()) return it->second;
  return std::nullopt;
}

ValenceTable ValenceTable::negated() const {
  ValenceTable out;
  for (const auto& [w, s] : scores_) out.scores_.emplace(w, -s);
  return out;
}

bool is_negation(std::string_view norm) {
  if (norm == "no" || norm == "not" || norm == "never" || norm == "n't") return true;
  return norm.size() > 3 && (norm.ends_with("n't") || norm.ends_with("n\xE2\x80\x99t"));
}

double sentiment_score(const TokenList& tokens, const ValenceTable& valence) {
  double sum = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.cls != TokenClass::word && t.cls != TokenClass::emoticon) continue;
    const auto v = valence.lookup(t.norm);
    if (!v) continue;
    const bool negated = i > 0 && tokens[i - 1].cls == TokenClass::word && is_negation(tokens[i - 1].norm);
    sum += negated ? -*v : *v;
  }
  if (sum == 0.0) return 0.0;
  return sum / std::sqrt(sum * sum + 15.0);
}

// ---------------------------------------------------------------------------

std::string_view pos_symbol(PosTag tag) { return kPosTagSymbols[static_cast<std::size_t>(tag)]; }

std::optional<PosTag> parse_pos_symbol(std::string_view symbol) {
  for (std::size_t i = 0; i < kPosTagCount; ++i) {
    if (kPosTagSymbols[i] == symbol) return static_cast<PosTag>(i);
  }
  return std::nullopt;
}

namespace {

const std::unordered_map<std::string_view, PosTag>& closed_class_words() {
  static const auto* table = [] {
    auto* m = new std::unordered_map<std::string_view, PosTag>;
    auto add = [&](PosTag t, std::initializer_list<std::string_view> ws) {
      for (auto w : ws) m->emplace(w, t);
    };
    add(PosTag::pronoun, {"i", "me", "my", "mine", "you", "your", "yours", "u", "ur", "he", "him",
                          "his", "she", "her", "hers", "it", "its", "we", "us", "our", "ours",
                          "they", "them", "their", "theirs", "myself", "yourself", "himself",
                          "herself", "itself", "ourselves", "themselves", "who", "whom", "what",
                          "someone", "something", "everyone", "everything", "nobody", "nothing"});
    add(PosTag::nominal_verbal, {"i'm", "im", "you're", "youre", "he's", "she's", "it's", "we're",
                                 "they're", "i've", "you've", "we've", "they've", "i'll", "you'll",
                                 "he'll", "she'll", "we'll", "they'll", "i'd", "you'd", "that's",
                                 "what's", "who's", "let's"});
    add(PosTag::existential_verbal, {"there's", "theres"});
    add(PosTag::existential, {"there"});
    add(PosTag::determiner, {"a", "an", "the", "this", "that", "these", "those", "every", "each",
                             "some", "any", "all", "both", "either", "neither", "another"});
    add(PosTag::preposition, {"in", "on", "at", "to", "for", "of", "with", "from", "by", "about",
                              "into", "over", "under", "after", "before", "between", "through",
                              "during", "without", "against", "among", "around", "like", "than"});
    add(PosTag::conjunction, {"and", "or", "but", "nor", "yet", "&"});
    add(PosTag::interjection, {"lol", "omg", "wow", "oh", "haha", "hahaha", "yeah", "yes", "hey",
                               "ugh", "lmao", "hmm", "ok", "okay", "yay", "please", "thanks",
                               "ah", "oops", "damn", "wtf", "smh"});
    add(PosTag::discourse, {"rt", "via"});
    add(PosTag::particle, {"up", "down", "off", "out", "away"});
    add(PosTag::verb, {"is", "am", "are", "was", "were", "be", "been", "being", "have", "has",
                       "had", "do", "does", "did", "will", "would", "can", "could", "should",
                       "may", "might", "must", "shall", "go", "get", "got", "make", "made",
                       "know", "think", "say", "said", "see", "saw", "want", "need", "love",
                       "hate", "feel", "felt", "come", "came", "take", "took", "give", "gave",
                       "tell", "told", "let", "keep", "leave", "put", "try", "call", "look",
                       "don't", "can't", "won't", "didn't", "isn't", "wasn't", "aren't",
                       "doesn't", "couldn't", "wouldn't", "shouldn't", "dont", "cant"});
    add(PosTag::adverb, {"not", "never", "very", "too", "just", "really", "always", "also", "now",
                         "then", "here", "again", "still", "even", "so", "soon", "often",
                         "maybe", "almost", "already", "ever", "n't", "much", "well"});
    add(PosTag::numeral, {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
                          "ten", "hundred", "thousand", "million"});
    return m;
  }();
  return *table;
}

std::vector<std::string> with_suffix_rules(const TokenList& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  const auto& closed = closed_class_words();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    PosTag tag = PosTag::other;
    switch (t.cls) {
      case TokenClass::mention: tag = PosTag::mention; break;
      case TokenClass::hashtag: tag = PosTag::hashtag; break;
      case TokenClass::url: tag = PosTag::url; break;
      case TokenClass::emoticon: tag = PosTag::emoticon; break;
      case TokenClass::number: tag = PosTag::numeral; break;
      case TokenClass::punct: tag = PosTag::punctuation; break;
      case TokenClass::word: {
        const std::string_view w = t.norm;
        if (auto it = closed.find(w); it != closed.end()) {
          tag = it->second;
        } else if (i > 0 && t.surface[0] >= 'A' && t.surface[0] <= 'Z') {
          tag = (w.ends_with("'s")) ? PosTag::proper_possessive : PosTag::proper_noun;
        } else if (w.ends_with("'s")) {
          tag = PosTag::nominal_possessive;
        } else if (w.size() > 3 && w.ends_with("ly")) {
          tag = PosTag::adverb;
        } else if (w.size() > 4 && (w.ends_with("ing") || w.ends_with("ed"))) {
          tag = PosTag::verb;
        } else if (w.size() > 4 && (w.ends_with("ous") || w.ends_with("ful") || w.ends_with("able") ||
                                    w.ends_with("ible") || w.ends_with("ive") || w.ends_with("less") ||
                                    w.ends_with("ish") || w.ends_with("ic") || w.ends_with("al"))) {
          tag = PosTag::adjective;
        } else {
          tag = PosTag::common_noun;
        }
        break;
      }
    }
    out.emplace_back(pos_symbol(tag));
  }
  return out;
}

}  // namespace

std::vector<std::string> FallbackTagger::tag(std::uint64_t, const TokenList& tokens) const {
  return with_suffix_rules(tokens);
}

PreTaggedTagger::PreTaggedTagger(std::unordered_map<std::uint64_t, std::vector<std::string>> tags,
                                 std::shared_ptr<const PosTagger> fallback)
    : tags_(std::move(tags)), fallback_(std::move(fallback)) {}

PreTaggedTagger PreTaggedTagger::load(const std::filesystem::path& path,
                                      std::shared_ptr<const PosTagger> fallback) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tag file " + path.string());
  std::unordered_map<std::uint64_t, std::vector<std::string>> tags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!j.contains("id") || !j["id"].is_number_unsigned()) throw SchemaError("id", "tag file line " + std::to_string(line_no) + ": missing \"id\"");
    if (!j.contains("tags") || !j["tags"].is_array()) throw SchemaError("tags", "tag file line " + std::to_string(line_no) + ": missing \"tags\"");
    tags[j["id"].get<std::uint64_t>()] = j["tags"].get<std::vector<std::string>>();
  }
  return PreTaggedTagger(std::move(tags), std::move(fallback));
}

std::vector<std::string> PreTaggedTagger::tag(std::uint64_t tweet_id, const TokenList& tokens) const {
  if (auto it = tags_.find(tweet_id); it != tags_.end()) return it->second;
  if (fallback_) return fallback_->tag(tweet_id, tokens);
  throw ContractError("no pre-computed tags for tweet " + std::to_string(tweet_id));
}

std::vector<PosTag> pos_tag(const TokenList& tokens, const PosTagger& tagger, std::uint64_t tweet_id) {
  const auto raw = tagger.tag(tweet_id, tokens);
  if (raw.size() != tokens.size()) {
    throw ContractError("tagger returned " + std::to_string(raw.size()) + " tags for " +
                        std::to_string(tokens.size()) + " tokens");
  }
  std::vector<PosTag> out;
  out.reserve(raw.size());
  for (const auto& s : raw) {
    const auto t = parse_pos_symbol(s);
    if (!t) throw ContractError("tagger emitted unknown tag \"" + s + "\"");
    out.push_back(*t);
  }
  return out;
}

PosCounts pos_counts(std::span<const PosTag> tags) {
  PosCounts c{};
  for (PosTag t : tags) c[static_cast<std::size_t>(t)] += 1.0;
  return c;
}

// ---------------------------------------------------------------------------

Wordlist Wordlist::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open wordlist " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.insert(ascii_lower(line));
  }
  return Wordlist(std::move(words));
}

bool Wordlist::contains(std::string_view lowercase_word) const {
  return words_.contains(std::string(lowercase_word));
}

bool is_content_tag(PosTag tag) {
  return tag == PosTag::common_noun || tag == PosTag::proper_noun || tag == PosTag::verb ||
         tag == PosTag::adjective || tag == PosTag::adverb;
}

TextStats text_stats(const TokenList& tokens, std::span<const PosTag> tags, const Wordlist& wordlist) {
  if (tags.size() != tokens.size()) {
    throw ContractError("text_stats: " + std::to_string(tags.size()) + " tags for " +
                        std::to_string(tokens.size()) + " tokens");
  }
  std::size_t words = 0, content = 0, known = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].cls != TokenClass::word) continue;
    ++words;
    if (is_content_tag(tags[i])) ++content;
    if (wordlist.contains(tokens[i].norm)) ++known;
  }
  if (words == 0) return {};
  return {static_cast<double>(content) / static_cast<double>(words),
          static_cast<double>(known) / static_cast<double>(words)};
}

}  // namespace regretstream
