#include "regretstream/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "regretstream/binary_io.hpp"
#include "regretstream/error.hpp"
#include "regretstream/parallel.hpp"

namespace regretstream {
namespace {

constexpr std::string_view kRsf1Magic = "RSF1";
constexpr std::uint32_t kRsf1Version = 1;

double b(bool v) { return v ? 1.0 : 0.0; }
double d(std::int64_t v) { return static_cast<double>(v); }

}  // namespace

std::string_view group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::user: return "user";
    case FeatureGroup::derived_open_text: return "derived_open_text";
    case FeatureGroup::tweet: return "tweet";
    case FeatureGroup::sentiment: return "sentiment";
    case FeatureGroup::pos: return "pos";
    case FeatureGroup::lexicon: return "lexicon";
  }
  return "?";
}

FeatureGroup parse_group(std::string_view name) {
  for (auto g : {FeatureGroup::user, FeatureGroup::derived_open_text, FeatureGroup::tweet, FeatureGroup::sentiment,
                 FeatureGroup::pos, FeatureGroup::lexicon}) {
    if (group_name(g) == name) return g;
  }
  throw ValidationError("unknown feature group '" + std::string(name) + "'");
}

std::pair<std::size_t, std::size_t> group_slots(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::user: return {slot::account_age_days, slot::derived};
    case FeatureGroup::derived_open_text: return {slot::derived, slot::derived + 1};
    case FeatureGroup::tweet: return {slot::hour, slot::account_age_days};
    case FeatureGroup::sentiment: return {slot::sentiment, slot::sentiment + 1};
    case FeatureGroup::pos: return {slot::pos, slot::pos + kPosTagCount};
    case FeatureGroup::lexicon: return {slot::lexicon, slot::lexicon + Lexicon::kCategories};
  }
  return {0, 0};
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::uint32_t> df, std::uint64_t documents)
    : terms_(std::move(terms)), df_(std::move(df)), documents_(documents) {
  if (terms_.size() != df_.size()) throw ValidationError("vocabulary terms and df differ in length");
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (i > 0 && !(terms_[i - 1] < terms_[i])) throw ValidationError("vocabulary terms not sorted and unique");
    if (df_[i] == 0 || df_[i] > documents_) throw ValidationError("vocabulary df out of range for '" + terms_[i] + "'");
    index_.emplace(terms_[i], static_cast<std::uint32_t>(i));
  }
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::idf(std::uint32_t index) const {
  return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + static_cast<double>(df_.at(index)))) + 1.0;
}

std::vector<std::string_view> open_text_terms(const TokenList& tokens) {
  std::vector<std::string_view> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t.cls == TokenClass::mention || t.cls == TokenClass::url) continue;
    out.emplace_back(t.norm.empty() ? t.surface : t.norm);
  }
  return out;
}

Vocabulary build_vocab(std::span<const TokenList> documents) {
  if (documents.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::uint32_t, std::less<>> df;
  for (const auto& doc : documents) {
    auto terms = open_text_terms(doc);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    for (auto t : terms) {
      auto it = df.find(t);
      if (it == df.end()) {
        df.emplace(std::string(t), 1);
      } else {
        ++it->second;
      }
    }
  }
  std::vector<std::string> terms;
  std::vector<std::uint32_t> counts;
  terms.reserve(df.size());
  counts.reserve(df.size());
  for (auto& [t, c] : df) {
    terms.push_back(t);
    counts.push_back(c);
  }
  return Vocabulary(std::move(terms), std::move(counts), documents.size());
}

Vocabulary build_vocab(const Corpus& corpus) {
  std::vector<TokenList> docs;
  docs.reserve(corpus.tweets.size());
  for (const auto& r : corpus.tweets) docs.push_back(tokenize(r.tweet.text));
  return build_vocab(docs);
}

double SparseVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (const auto& [i, w] : entries) {
    if (i < dense.size()) s += w * dense[i];
  }
  return s;
}

double SparseVector::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.second * e.second;
  return s;
}

SparseVector open_text_vector(const TokenList& tokens, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> tf;
  for (auto t : open_text_terms(tokens)) {
    if (auto idx = vocab.index_of(t)) tf[*idx] += 1.0;
  }
  SparseVector v;
  v.entries.reserve(tf.size());
  double norm2 = 0.0;
  for (const auto& [idx, count] : tf) {
    const double w = count * vocab.idf(idx);
    v.entries.emplace_back(idx, w);
    norm2 += w * w;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& e : v.entries) e.second *= inv;
  }
  return v;
}

// ---------------------------------------------------------------------------

TextProfile profile_text(TweetId id, std::string_view text, const TextResources& res) {
  TextProfile p;
  p.tokens = tokenize(text);
  p.tags = pos_tag(p.tokens, *res.tagger, id);
  p.lexicon = lexicon_score(p.tokens, res.lexicon);
  p.sentiment = sentiment_score(p.tokens, res.valence);
  p.pos = pos_counts(p.tags);
  return p;
}

DenseVector dense_features(const TweetRecord& record, const TextResources& res, Timestamp now) {
  return dense_features(record, profile_text(record.tweet.id, record.tweet.text, res), now);
}

DenseVector dense_features(const TweetRecord& record, const TextProfile& text, Timestamp now) {
  const Tweet& t = record.tweet;
  if (!t.user) throw ValidationError("tweet " + std::to_string(t.id) + " has no user profile");
  const UserProfile& u = *t.user;

  DenseVector v{};
  std::copy(text.lexicon.begin(), text.lexicon.end(), v.begin() + slot::lexicon);
  v[slot::sentiment] = text.sentiment;
  std::copy(text.pos.begin(), text.pos.end(), v.begin() + slot::pos);

  v[slot::hour] = hour_of_day(t.created_at);
  v[slot::weekday] = day_of_week(t.created_at);
  v[slot::timezone] = u.timezone_offset_min.value_or(0);
  v[slot::is_reply] = b(t.in_reply_to_id.has_value());
  v[slot::is_quote] = b(t.quoted_id.has_value());
  v[slot::n_urls] = static_cast<double>(t.urls.size());
  v[slot::n_mentions] = static_cast<double>(t.mentions.size());
  v[slot::n_hashtags] = static_cast<double>(t.hashtags.size());
  v[slot::has_geo] = b(t.has_geo);

  v[slot::account_age_days] = static_cast<double>(now - u.account_created_at) / 86400.0;
  v[slot::profile_customized] = b(u.profile_customized);
  v[slot::custom_image] = b(u.custom_image);
  v[slot::bio_length] = d(u.bio_length);
  v[slot::geo_enabled] = b(u.geo_enabled);
  v[slot::has_location] = b(u.has_location);
  v[slot::has_profile_url] = b(u.has_profile_url);
  v[slot::favourites] = d(u.favourites_count);
  v[slot::followees] = d(u.followees_count);
  v[slot::followers] = d(u.followers_count);
  v[slot::listed] = d(u.listed_count);
  v[slot::statuses] = d(u.statuses_count);
  v[slot::derived] = 0.0;
  return v;
}

ResponseVector response_features(const TweetRecord& record, std::span<const TweetRecord* const> responses,
                                 const TextResources& res) {
  ResponseVector v{};
  const TweetId id = record.tweet.id;
  for (const auto* r : responses) {
    const Tweet& t = r->tweet;
    if (t.retweet_of_id == id) v[rslot::retweets] += 1.0;
    if (t.quoted_id == id) v[rslot::quotes] += 1.0;
    if (t.in_reply_to_id == id) {
      v[rslot::replies] += 1.0;
      const auto p = profile_text(t.id, t.text, res);
      for (std::size_t k = 0; k < Lexicon::kCategories; ++k) v[rslot::lexicon + k] += p.lexicon[k];
      for (std::size_t k = 0; k < kPosTagCount; ++k) v[rslot::pos + k] += p.pos[k];
      v[rslot::sentiment] += p.sentiment;
    }
  }
  return v;
}

std::vector<const TweetRecord*> responses_of(const Corpus& corpus, const TweetRecord& record) {
  std::set<TweetId> ids;
  ids.insert(record.reply_ids.begin(), record.reply_ids.end());
  ids.insert(record.quote_ids.begin(), record.quote_ids.end());
  ids.insert(record.retweet_ids.begin(), record.retweet_ids.end());
  std::vector<const TweetRecord*> out;
  out.reserve(ids.size());
  for (TweetId id : ids) {
    if (const auto* p = corpus.find_response(id)) out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<char> encode_rsf1(const FeatureMatrix& m) {
  const std::size_t n = m.rows();
  if (m.labels.size() != n || m.dense.size() != n || (!m.response.empty() && m.response.size() != n) ||
      (!m.sparse.empty() && m.sparse.size() != n)) {
    throw ValidationError("feature matrix columns have inconsistent row counts");
  }
  binio::Writer w;
  w.bytes(kRsf1Magic);
  w.u32(kRsf1Version);
  w.u64(n);
  w.u32(kDenseDim);
  w.u32(m.response.empty() ? 0 : kResponseDim);
  w.u64(m.vocab.size());
  for (std::size_t i = 0; i < m.vocab.size(); ++i) {
    w.str(m.vocab.terms()[i]);
    w.u32(m.vocab.df()[i]);
  }
  w.u64(m.vocab.documents());
  w.u8(m.sparse.empty() ? 0 : 1);
  for (std::size_t i = 0; i < n; ++i) {
    w.u64(m.ids[i]);
    w.u8(m.labels[i]);
    w.f64s(m.dense[i]);
    if (!m.response.empty()) w.f64s(m.response[i]);
    if (!m.sparse.empty()) {
      const auto& e = m.sparse[i].entries;
      w.u32(static_cast<std::uint32_t>(e.size()));
      for (const auto& [idx, weight] : e) {
        w.u32(idx);
        w.f64(weight);
      }
    }
  }
  return w.data();
}

FeatureMatrix decode_rsf1(std::span<const char> bytes) {
  binio::Reader r(bytes);
  if (r.bytes(4) != kRsf1Magic) throw ValidationError("not an RSF1 feature file");
  if (const auto v = r.u32(); v != kRsf1Version) {
    throw ValidationError("unsupported RSF1 version " + std::to_string(v));
  }
  const auto n = r.u64();
  if (r.u32() != kDenseDim) throw ValidationError("RSF1 dense dimension mismatch");
  const auto rdim = r.u32();
  if (rdim != 0 && rdim != kResponseDim) throw ValidationError("RSF1 response dimension mismatch");
  const auto vsize = r.u64();
  std::vector<std::string> terms;
  std::vector<std::uint32_t> df;
  for (std::uint64_t i = 0; i < vsize; ++i) {
    terms.push_back(r.str());
    df.push_back(r.u32());
  }
  const auto docs = r.u64();
  const bool has_sparse = r.u8() != 0;

  FeatureMatrix m;
  m.vocab = Vocabulary(std::move(terms), std::move(df), docs);
  // Guard against absurd row counts before reserving.
  if (n > r.remaining()) throw ValidationError("truncated binary container");
  m.ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    m.ids.push_back(r.u64());
    m.labels.push_back(r.u8());
    DenseVector dv;
    r.f64s(dv);
    m.dense.push_back(dv);
    if (rdim != 0) {
      ResponseVector rv;
      r.f64s(rv);
      m.response.push_back(rv);
    }
    if (has_sparse) {
      SparseVector sv;
      const auto nnz = r.u32();
      for (std::uint32_t k = 0; k < nnz; ++k) {
        const auto idx = r.u32();
        const double wt = r.f64();
        if (idx >= m.vocab.size() || (!sv.entries.empty() && idx <= sv.entries.back().first)) {
          throw ValidationError("RSF1 sparse indices must be increasing and inside the vocabulary");
        }
        sv.entries.emplace_back(idx, wt);
      }
      m.sparse.push_back(std::move(sv));
    }
  }
  if (!r.at_end()) throw ValidationError("trailing bytes after RSF1 payload");
  return m;
}

void write_rsf1(const FeatureMatrix& m, const std::filesystem::path& path) {
  const auto bytes = encode_rsf1(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureMatrix read_rsf1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_rsf1(bytes);
}

FeatureMatrix featurize_corpus(const Corpus& corpus, const TextResources& res, bool with_responses,
                               unsigned threads) {
  const std::size_t n = corpus.tweets.size();
  std::vector<TextProfile> profiles(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& t = corpus.tweets[i].tweet;
    profiles[i] = profile_text(t.id, t.text, res);
  });
  std::vector<TokenList> docs;
  docs.reserve(n);
  for (const auto& p : profiles) docs.push_back(p.tokens);

  FeatureMatrix m;
  m.vocab = build_vocab(docs);
  m.ids.resize(n);
  m.labels.resize(n);
  m.dense.resize(n);
  m.sparse.resize(n);
  if (with_responses) m.response.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& r = corpus.tweets[i];
    m.ids[i] = r.tweet.id;
    m.labels[i] = r.deleted ? 1 : 0;
    m.dense[i] = dense_features(r, profiles[i], corpus.window.post_end);
    m.sparse[i] = open_text_vector(profiles[i].tokens, m.vocab);
    if (with_responses) m.response[i] = response_features(r, responses_of(corpus, r), res);
  });
  return m;
}

}  // namespace regretstream
