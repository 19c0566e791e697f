#include "regretstream/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "regretstream/error.hpp"
#include "regretstream/parallel.hpp"

namespace regretstream {
namespace {

using json = nlohmann::json;

json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::size_t word_count(const TokenList& tokens) {
  return static_cast<std::size_t>(
      std::count_if(tokens.begin(), tokens.end(), [](const Token& t) { return t.cls == TokenClass::word; }));
}

std::uint64_t tag_count(const TextProfile& p, PosTag tag) {
  return static_cast<std::uint64_t>(std::count(p.tags.begin(), p.tags.end(), tag));
}

stats::Contingency2x2 binary_table(const AttributeExtractor& attr, std::span<const TweetView> del,
                                   std::span<const TweetView> nondel) {
  stats::Contingency2x2 t;
  for (const auto& v : del) (attr.has(v) ? t.a : t.b) += 1;
  for (const auto& v : nondel) (attr.has(v) ? t.c : t.d) += 1;
  return t;
}

stats::Contingency2x2 share_table(const AttributeExtractor& attr, std::span<const TweetView> del,
                                  std::span<const TweetView> nondel) {
  stats::Contingency2x2 t;
  for (const auto& v : del) {
    const auto [hits, total] = attr.share(v);
    t.a += hits;
    t.b += total - hits;
  }
  for (const auto& v : nondel) {
    const auto [hits, total] = attr.share(v);
    t.c += hits;
    t.d += total - hits;
  }
  return t;
}

std::vector<double> scalar_values(const AttributeExtractor& attr, std::span<const TweetView> views) {
  std::vector<double> out;
  out.reserve(views.size());
  for (const auto& v : views) {
    if (auto x = attr.value(v)) out.push_back(*x);
  }
  return out;
}

double row_fraction(std::uint64_t hit, std::uint64_t miss) {
  const auto n = hit + miss;
  return n == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(n);
}

// Both NTD and the per-user NUD test use the same statistics.
struct Compared {
  double del_stat = 0.0;
  double nondel_stat = 0.0;
  stats::TestResult test;
  bool testable = true;
};

Compared compare_sets(const AttributeExtractor& attr, std::span<const TweetView> del,
                      std::span<const TweetView> nondel, double alpha) {
  Compared c;
  switch (attr.kind) {
    case AttributeKind::binary:
    case AttributeKind::token_share: {
      const auto t = attr.kind == AttributeKind::binary ? binary_table(attr, del, nondel) : share_table(attr, del, nondel);
      c.del_stat = row_fraction(t.a, t.b);
      c.nondel_stat = row_fraction(t.c, t.d);
      if (t.a + t.b == 0 || t.c + t.d == 0) {
        c.testable = false;
      } else {
        c.test = stats::fisher_exact(t, alpha);
      }
      break;
    }
    case AttributeKind::scalar: {
      const auto xs = scalar_values(attr, del);
      const auto ys = scalar_values(attr, nondel);
      if (xs.empty() || ys.empty()) {
        c.testable = false;
        break;
      }
      c.del_stat = stats::median(xs);
      c.nondel_stat = stats::median(ys);
      c.test = stats::mann_whitney_u(xs, ys, alpha);
      break;
    }
  }
  return c;
}

NudResult nud_detail(const AttributeExtractor& attr, std::span<const TweetView> tweets, double alpha,
                     std::size_t min_each) {
  std::map<UserId, std::pair<std::vector<TweetView>, std::vector<TweetView>>> by_user;
  for (const auto& v : tweets) {
    auto& slot = by_user[v.record->tweet.user_id];
    (v.record->deleted ? slot.first : slot.second).push_back(v);
  }
  NudResult r;
  for (const auto& [user, sets] : by_user) {
    if (sets.first.size() < min_each || sets.second.size() < min_each) continue;
    ++r.eligible;
    const auto c = compare_sets(attr, sets.first, sets.second, alpha);
    NudUser u;
    u.user = user;
    u.del_stat = c.del_stat;
    u.nondel_stat = c.nondel_stat;
    u.test = c.test;
    if (c.testable && c.test.significant) {
      const bool higher = attr.kind == AttributeKind::scalar ? c.test.effect > 0.0 : c.del_stat > c.nondel_stat;
      const bool lower = attr.kind == AttributeKind::scalar ? c.test.effect < 0.0 : c.del_stat < c.nondel_stat;
      u.direction = higher ? 1 : (lower ? -1 : 0);
    }
    if (u.direction > 0) ++r.higher_in_deleted;
    if (u.direction < 0) ++r.higher_in_non_deleted;
    r.users.push_back(std::move(u));
  }
  r.value = std::numeric_limits<double>::quiet_NaN();
  return r;
}

void split_by_label(std::span<const TweetView> tweets, std::vector<TweetView>& del, std::vector<TweetView>& nondel) {
  for (const auto& v : tweets) (v.record->deleted ? del : nondel).push_back(v);
}

Answer parse_answer(const json& j) {
  if (!j.is_string()) throw SchemaError("answers", "annotation answer must be a string");
  const auto s = j.get<std::string>();
  if (s == "yes") return Answer::yes;
  if (s == "no") return Answer::no;
  if (s == "cant_say") return Answer::cant_say;
  throw SchemaError("answers", "annotation answer must be yes, no or cant_say, got '" + s + "'");
}

json to_json(const NtdResult& r) {
  return {{"value", number_or_null(r.value)},
          {"deleted", r.del_stat},
          {"non_deleted", r.nondel_stat},
          {"test", stats::to_json(r.test)}};
}

json to_json(const HourHistogram& h) { return json(std::vector<double>(h.begin(), h.end())); }

json to_json(const ResponseGroupStats& s) {
  return {{"tweets", s.tweets},
          {"pct_with_reply", s.pct_with_reply},
          {"pct_with_retweet", s.pct_with_retweet},
          {"pct_with_quote", s.pct_with_quote},
          {"median_first_reply_sec", optional_json(s.median_first_reply_sec)}};
}

json to_json(const SentimentSplit& s) {
  return {{"tweets_with_reply", s.tweets_with_reply},
          {"positive", s.positive},
          {"negative", s.negative},
          {"neutral", s.neutral},
          {"pct_positive", s.pct_positive},
          {"pct_negative", s.pct_negative},
          {"rendered", format_split(s)}};
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

UserPartition partition_users(const Corpus& corpus) {
  std::set<UserId> active;
  UserPartition p;
  for (const auto& r : corpus.tweets) {
    active.insert(r.tweet.user_id);
    if (r.deleted) p.deleters.insert(r.tweet.user_id);
  }
  std::set_difference(active.begin(), active.end(), p.deleters.begin(), p.deleters.end(),
                      std::inserter(p.non_deleters, p.non_deleters.end()));
  return p;
}

std::vector<TweetView> ProfiledCorpus::views() const {
  std::vector<TweetView> out;
  out.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) out.push_back({&corpus->tweets[i], &profiles[i]});
  return out;
}

ProfiledCorpus profile_corpus(const Corpus& corpus, const TextResources& res, unsigned threads) {
  ProfiledCorpus pc;
  pc.corpus = &corpus;
  pc.profiles.resize(corpus.tweets.size());
  parallel_for(corpus.tweets.size(), threads, [&](std::size_t i) {
    const auto& t = corpus.tweets[i].tweet;
    pc.profiles[i] = profile_text(t.id, t.text, res);
  });
  return pc;
}

std::string_view attribute_kind_name(AttributeKind k) {
  switch (k) {
    case AttributeKind::binary: return "binary";
    case AttributeKind::scalar: return "scalar";
    case AttributeKind::token_share: return "token_share";
  }
  return "?";
}

AttributeExtractor binary_attribute(std::string name, std::function<bool(const TweetView&)> has) {
  AttributeExtractor a;
  a.name = std::move(name);
  a.kind = AttributeKind::binary;
  a.has = std::move(has);
  return a;
}

AttributeExtractor scalar_attribute(std::string name, std::function<std::optional<double>(const TweetView&)> value) {
  AttributeExtractor a;
  a.name = std::move(name);
  a.kind = AttributeKind::scalar;
  a.value = std::move(value);
  return a;
}

AttributeExtractor share_attribute(std::string name,
                                   std::function<std::pair<std::uint64_t, std::uint64_t>(const TweetView&)> share) {
  AttributeExtractor a;
  a.name = std::move(name);
  a.kind = AttributeKind::token_share;
  a.share = std::move(share);
  return a;
}

std::vector<AttributeExtractor> default_attributes(const Lexicon& lexicon, const Wordlist& wordlist) {
  std::vector<AttributeExtractor> out;
  out.push_back(binary_attribute("tweets_with_hashtags", [](const TweetView& v) { return !v.record->tweet.hashtags.empty(); }));
  out.push_back(binary_attribute("tweets_with_urls", [](const TweetView& v) { return !v.record->tweet.urls.empty(); }));
  out.push_back(binary_attribute("tweets_with_mentions", [](const TweetView& v) { return !v.record->tweet.mentions.empty(); }));
  out.push_back(binary_attribute("replies", [](const TweetView& v) { return v.record->tweet.in_reply_to_id.has_value(); }));

  const std::pair<const char*, PosTag> pos_rows[] = {
      {"proper_noun", PosTag::proper_noun}, {"common_noun", PosTag::common_noun}, {"verb", PosTag::verb},
      {"adjective", PosTag::adjective},     {"adverb", PosTag::adverb},           {"emoticon", PosTag::emoticon}};
  for (const auto& [name, tag] : pos_rows) {
    out.push_back(share_attribute(name, [tag = tag](const TweetView& v) {
      return std::pair<std::uint64_t, std::uint64_t>{tag_count(*v.text, tag), v.text->tags.size()};
    }));
  }

  out.push_back(scalar_attribute("lexical_density", [wordlist](const TweetView& v) -> std::optional<double> {
    if (word_count(v.text->tokens) == 0) return std::nullopt;
    return text_stats(v.text->tokens, v.text->tags, wordlist).lexical_density;
  }));
  out.push_back(scalar_attribute("dictionary_words", [wordlist](const TweetView& v) -> std::optional<double> {
    if (word_count(v.text->tokens) == 0) return std::nullopt;
    return text_stats(v.text->tokens, v.text->tags, wordlist).dictionary_fraction;
  }));

  const auto& cats = lexicon.categories();
  for (std::size_t k = 0; k < cats.size(); ++k) {
    if (cats[k].patterns.empty()) continue;
    out.push_back(share_attribute(cats[k].name, [k](const TweetView& v) {
      const auto words = word_count(v.text->tokens);
      const auto hits = std::llround(v.text->lexicon[k] * static_cast<double>(words) / 100.0);
      return std::pair<std::uint64_t, std::uint64_t>{static_cast<std::uint64_t>(hits), words};
    }));
  }
  return out;
}

// ---------------------------------------------------------------------------

double normalized_difference(double del, double nondel) {
  if (nondel == 0.0) throw UndefinedMetricError("normalized difference undefined: non-deleted side is 0");
  return (del - nondel) / nondel * 100.0;
}

NtdResult ntd(const AttributeExtractor& attr, std::span<const TweetView> deleted,
              std::span<const TweetView> non_deleted, double alpha) {
  if (deleted.empty() || non_deleted.empty()) {
    throw ValidationError("ntd(" + attr.name + "): both tweet sets must be non-empty");
  }
  const auto c = compare_sets(attr, deleted, non_deleted, alpha);
  if (!c.testable) throw UndefinedMetricError("ntd(" + attr.name + "): no measurable tweets on one side");
  NtdResult r;
  r.del_stat = c.del_stat;
  r.nondel_stat = c.nondel_stat;
  r.test = c.test;
  try {
    r.value = normalized_difference(c.del_stat, c.nondel_stat);
  } catch (const UndefinedMetricError&) {
    throw UndefinedMetricError("ntd(" + attr.name + ") undefined: non-deleted statistic is 0");
  }
  return r;
}

double NudResult::del_user_frac() const {
  return eligible == 0 ? 0.0 : static_cast<double>(higher_in_deleted) / static_cast<double>(eligible);
}

double NudResult::nondel_user_frac() const {
  return eligible == 0 ? 0.0 : static_cast<double>(higher_in_non_deleted) / static_cast<double>(eligible);
}

NudResult nud(const AttributeExtractor& attr, std::span<const TweetView> tweets, double alpha, std::size_t min_each) {
  auto r = nud_detail(attr, tweets, alpha, min_each);
  if (r.eligible == 0) {
    throw UndefinedMetricError("nud(" + attr.name + ") undefined: no user has " + std::to_string(min_each) +
                               " deleted and non-deleted tweets");
  }
  if (r.higher_in_non_deleted == 0) {
    throw UndefinedMetricError("nud(" + attr.name + ") undefined: no user is significantly higher in non-deleted tweets");
  }
  r.value = normalized_difference(r.del_user_frac(), r.nondel_user_frac());
  return r;
}

GroupComparisonReport compare_attributes(std::span<const AttributeExtractor> attrs, std::span<const TweetView> tweets,
                                         double alpha, bool with_nud, unsigned threads) {
  std::vector<TweetView> del, nondel;
  split_by_label(tweets, del, nondel);
  GroupComparisonReport report;
  report.attributes.resize(attrs.size());
  parallel_for(attrs.size(), threads, [&](std::size_t i) {
    const auto& attr = attrs[i];
    auto& out = report.attributes[i];
    out.name = attr.name;
    out.kind = attr.kind;
    try {
      out.ntd = ntd(attr, del, nondel, alpha);
    } catch (const ValidationError& e) {
      out.ntd_error = e.what();
    }
    if (with_nud) {
      out.nud = nud_detail(attr, tweets, alpha, kNudMinTweets);
      try {
        out.nud = nud(attr, tweets, alpha);
        out.nud_defined = true;
      } catch (const UndefinedMetricError& e) {
        out.nud_error = e.what();
      }
    }
  });
  return report;
}

// ---------------------------------------------------------------------------

std::vector<CcdfPoint> ccdf(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<CcdfPoint> out;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    out.push_back({v[i], static_cast<double>(v.size() - i) / n});
    i = j;
  }
  return out;
}

UserGroupComparison user_group_compare(std::string metric, std::span<const double> deleters,
                                       std::span<const double> non_deleters, double alpha) {
  if (deleters.empty() || non_deleters.empty()) {
    throw ValidationError("user_group_compare(" + metric + "): both user groups must be non-empty");
  }
  UserGroupComparison c;
  c.metric = std::move(metric);
  c.deleter_median = stats::median(deleters);
  c.non_deleter_median = stats::median(non_deleters);
  c.test = stats::mann_whitney_u(deleters, non_deleters, alpha);
  c.deleter_ccdf = ccdf(deleters);
  c.non_deleter_ccdf = ccdf(non_deleters);
  return c;
}

std::vector<UserGroupComparison> compare_user_groups(const Corpus& corpus, const UserPartition& partition,
                                                     double alpha) {
  struct Seen {
    const TweetRecord* latest = nullptr;
    std::size_t tweets = 0;
  };
  std::map<UserId, Seen> users;
  for (const auto& r : corpus.tweets) {
    auto& s = users[r.tweet.user_id];
    ++s.tweets;
    if (r.tweet.user && (!s.latest || std::tie(s.latest->tweet.created_at, s.latest->tweet.id) <
                                          std::tie(r.tweet.created_at, r.tweet.id))) {
      s.latest = &r;
    }
  }
  const double days = corpus.window.post_days();
  const std::pair<const char*, std::function<double(const Seen&)>> metrics[] = {
      {"followers", [](const Seen& s) { return static_cast<double>(s.latest->tweet.user->followers_count); }},
      {"followees", [](const Seen& s) { return static_cast<double>(s.latest->tweet.user->followees_count); }},
      {"listed", [](const Seen& s) { return static_cast<double>(s.latest->tweet.user->listed_count); }},
      {"tweet_rate", [days](const Seen& s) { return static_cast<double>(s.tweets) / days; }},
  };
  std::vector<UserGroupComparison> out;
  for (const auto& [name, f] : metrics) {
    std::vector<double> del, nondel;
    for (const auto& [id, s] : users) {
      if (!s.latest) continue;
      if (partition.deleters.contains(id)) del.push_back(f(s));
      if (partition.non_deleters.contains(id)) nondel.push_back(f(s));
    }
    out.push_back(user_group_compare(name, del, nondel, alpha));
  }
  return out;
}

std::string format_median_pair(double deleters, double non_deleters) {
  auto one = [](double v) { return v == std::round(v) ? fmt("%.0f", v) : fmt("%.2f", v); };
  return one(deleters) + " vs " + one(non_deleters);
}

// ---------------------------------------------------------------------------

namespace {
bool valid_trait(std::string_view s) {
  static const std::set<std::string_view> ok = {"O", "C", "E", "A", "N", "O_bar", "C_bar", "E_bar", "A_bar", "N_bar"};
  return ok.contains(s);
}
}  // namespace

TraitMap::TraitMap(std::vector<TraitRow> rows) : rows_(std::move(rows)) {
  std::set<std::string> seen;
  for (const auto& r : rows_) {
    if (!seen.insert(r.attribute).second) throw ConfigError("trait map lists attribute '" + r.attribute + "' twice");
    for (const auto& t : r.traits) {
      if (!valid_trait(t)) throw ConfigError("trait map row '" + r.name + "': unknown trait symbol '" + t + "'");
    }
  }
}

TraitMap TraitMap::from_json(const json& j) {
  try {
    const auto& arr = j.is_object() ? j.at("rows") : j;
    if (!arr.is_array()) throw ConfigError("trait map must be an array of rows");
    std::vector<TraitRow> rows;
    for (const auto& e : arr) {
      TraitRow r;
      r.name = e.at("name").get<std::string>();
      r.attribute = e.value("attribute", r.name);
      const auto when = e.value("when", std::string("deleter_higher"));
      if (when != "deleter_higher" && when != "deleter_lower") {
        throw ConfigError("trait map row '" + r.name + "': when must be deleter_higher or deleter_lower");
      }
      r.deleter_higher = when == "deleter_higher";
      r.traits = e.value("traits", std::vector<std::string>{});
      if (e.contains("non_deleter_median")) r.non_deleter_median = e["non_deleter_median"].get<double>();
      if (e.contains("deleter_median")) r.deleter_median = e["deleter_median"].get<double>();
      rows.push_back(std::move(r));
    }
    return TraitMap(std::move(rows));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("trait map: ") + e.what());
  }
}

TraitMap TraitMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trait map " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("trait map " + path.string() + ": " + e.what());
  }
}

std::string conjugate_trait(std::string_view symbol) {
  constexpr std::string_view bar = "_bar";
  if (symbol.size() > bar.size() && symbol.substr(symbol.size() - bar.size()) == bar) {
    return std::string(symbol.substr(0, symbol.size() - bar.size()));
  }
  return std::string(symbol) + std::string(bar);
}

TraitTally trait_tally(std::span<const AttributeMedians> medians, const TraitMap& map) {
  TraitTally t;
  std::map<std::string, const AttributeMedians*> by_attr;
  for (const auto& m : medians) by_attr[m.attribute] = &m;
  std::set<std::string> mapped;
  for (const auto& row : map.rows()) {
    mapped.insert(row.attribute);
    auto it = by_attr.find(row.attribute);
    if (it == by_attr.end()) {
      t.missing.push_back(row.attribute);
      continue;
    }
    const auto& m = *it->second;
    if (m.deleter == m.non_deleter) {
      t.tied.push_back(row.attribute);
      continue;
    }
    const bool higher = m.deleter > m.non_deleter;
    for (const auto& sym : row.traits) {
      t.counts[higher == row.deleter_higher ? sym : conjugate_trait(sym)] += 1;
    }
  }
  for (const auto& m : medians) {
    if (!mapped.contains(m.attribute)) t.unmapped.push_back(m.attribute);
  }
  return t;
}

std::vector<AttributeMedians> reference_medians(const TraitMap& map) {
  std::vector<AttributeMedians> out;
  for (const auto& r : map.rows()) {
    if (r.deleter_median && r.non_deleter_median) out.push_back({r.attribute, *r.non_deleter_median, *r.deleter_median});
  }
  return out;
}

std::vector<AttributeMedians> user_category_medians(const ProfiledCorpus& pc, const UserPartition& partition,
                                                    const Lexicon& lexicon) {
  constexpr std::size_t K = Lexicon::kCategories;
  struct Acc {
    std::array<double, K> hits{};
    double words = 0;
    std::size_t tweets = 0, positive = 0, negative = 0, hashtags = 0, urls = 0;
  };
  std::map<UserId, Acc> users;
  const auto& tweets = pc.corpus->tweets;
  for (std::size_t i = 0; i < tweets.size(); ++i) {
    const auto& t = tweets[i].tweet;
    const auto& p = pc.profiles[i];
    auto& a = users[t.user_id];
    const double w = static_cast<double>(word_count(p.tokens));
    for (std::size_t k = 0; k < K; ++k) a.hits[k] += std::round(p.lexicon[k] * w / 100.0);
    a.words += w;
    ++a.tweets;
    a.positive += p.sentiment > 0.0;
    a.negative += p.sentiment < 0.0;
    a.hashtags += !t.hashtags.empty();
    a.urls += !t.urls.empty();
  }

  std::vector<AttributeMedians> out;
  auto add = [&](const std::string& name, const std::function<std::optional<double>(const Acc&)>& f) {
    std::vector<double> del, nondel;
    for (const auto& [id, a] : users) {
      const auto v = f(a);
      if (!v) continue;
      if (partition.deleters.contains(id)) del.push_back(*v);
      if (partition.non_deleters.contains(id)) nondel.push_back(*v);
    }
    if (del.empty() || nondel.empty()) return;
    out.push_back({name, stats::median(nondel), stats::median(del)});
  };
  const auto& cats = lexicon.categories();
  for (std::size_t k = 0; k < cats.size(); ++k) {
    if (cats[k].patterns.empty()) continue;
    add(cats[k].name, [k](const Acc& a) -> std::optional<double> {
      if (a.words == 0) return std::nullopt;
      return 100.0 * a.hits[k] / a.words;
    });
  }
  auto share = [](std::size_t Acc::*field) {
    return [field](const Acc& a) -> std::optional<double> {
      return 100.0 * static_cast<double>(a.*field) / static_cast<double>(a.tweets);
    };
  };
  add("tweets_with_positive_sentiment", share(&Acc::positive));
  add("tweets_with_negative_sentiment", share(&Acc::negative));
  add("tweets_with_hashtags", share(&Acc::hashtags));
  add("tweets_with_urls", share(&Acc::urls));
  return out;
}

// ---------------------------------------------------------------------------

HourHistogram hourly_percentages(std::span<const Timestamp> times) {
  if (times.empty()) throw ValidationError("hourly histogram of an empty tweet set");
  std::array<std::size_t, 24> counts{};
  for (auto t : times) ++counts[static_cast<std::size_t>(hour_of_day(t))];
  HourHistogram h{};
  for (std::size_t i = 0; i < 24; ++i) h[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(times.size());
  return h;
}

TemporalReport temporal_histogram(const Corpus& corpus) {
  std::vector<Timestamp> del, nondel;
  for (const auto& r : corpus.tweets) (r.deleted ? del : nondel).push_back(r.tweet.created_at);
  TemporalReport t;
  if (!del.empty()) t.deleted = hourly_percentages(del);
  if (!nondel.empty()) t.non_deleted = hourly_percentages(nondel);
  return t;
}

// ---------------------------------------------------------------------------

ResponseReport response_report(const Corpus& corpus) {
  struct Acc {
    std::size_t tweets = 0, replied = 0, retweeted = 0, quoted = 0;
    std::vector<double> first_reply;
  };
  Acc del, nondel;
  std::vector<double> lags, replied_lags;
  for (const auto& r : corpus.tweets) {
    auto& a = r.deleted ? del : nondel;
    ++a.tweets;
    a.retweeted += !r.retweet_ids.empty();
    a.quoted += !r.quote_ids.empty();
    const auto replies = corpus.replies_to(r);
    if (!replies.empty()) {
      ++a.replied;
      a.first_reply.push_back(static_cast<double>(std::max<std::int64_t>(0, replies.front()->tweet.created_at - r.tweet.created_at)));
    }
    if (r.deleted && r.deletion_lag_sec) {
      lags.push_back(static_cast<double>(*r.deletion_lag_sec));
      if (!replies.empty()) replied_lags.push_back(static_cast<double>(*r.deletion_lag_sec));
    }
  }
  auto finish = [](const Acc& a) {
    ResponseGroupStats s;
    s.tweets = a.tweets;
    if (a.tweets > 0) {
      const double n = static_cast<double>(a.tweets);
      s.pct_with_reply = 100.0 * static_cast<double>(a.replied) / n;
      s.pct_with_retweet = 100.0 * static_cast<double>(a.retweeted) / n;
      s.pct_with_quote = 100.0 * static_cast<double>(a.quoted) / n;
    }
    if (!a.first_reply.empty()) s.median_first_reply_sec = stats::median(a.first_reply);
    return s;
  };
  ResponseReport rep;
  rep.deleted = finish(del);
  rep.non_deleted = finish(nondel);
  if (!lags.empty()) rep.median_deletion_lag_sec = stats::median(lags);
  if (!replied_lags.empty()) rep.median_deletion_lag_replied_sec = stats::median(replied_lags);
  return rep;
}

ReplySentimentReport reply_sentiment_split(const Corpus& corpus, const ValenceTable& valence) {
  ReplySentimentReport rep;
  for (const auto& r : corpus.tweets) {
    const auto replies = corpus.replies_to(r);
    if (replies.empty()) continue;
    auto& s = r.deleted ? rep.deleted : rep.non_deleted;
    ++s.tweets_with_reply;
    const double score = sentiment_score(tokenize(replies.front()->tweet.text), valence);
    if (score > 0.0) {
      ++s.positive;
    } else if (score < 0.0) {
      ++s.negative;
    } else {
      ++s.neutral;
    }
  }
  for (auto* s : {&rep.deleted, &rep.non_deleted}) {
    if (s->tweets_with_reply == 0) continue;
    const double n = static_cast<double>(s->tweets_with_reply);
    s->pct_positive = 100.0 * static_cast<double>(s->positive) / n;
    s->pct_negative = 100.0 * static_cast<double>(s->negative) / n;
  }
  return rep;
}

std::string format_split(const SentimentSplit& s) {
  return fmt("%.2f%%", s.pct_positive) + " / " + fmt("%.2f%%", s.pct_negative);
}

// ---------------------------------------------------------------------------

std::vector<AnnotationItem> read_annotations(std::istream& in) {
  std::vector<AnnotationItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      AnnotationItem item;
      const auto& id = j.at("id");
      item.id = id.is_string() ? id.get<std::string>() : id.dump();
      item.deleted = j.at("deleted").get<bool>();
      const auto& answers = j.at("answers");
      if (!answers.is_object()) throw SchemaError("answers", "answers must be an object");
      for (const auto& [question, list] : answers.items()) {
        if (!list.is_array() || list.size() != 3) {
          throw SchemaError("answers", "question '" + question + "' needs exactly three answers");
        }
        item.answers[question] = {parse_answer(list[0]), parse_answer(list[1]), parse_answer(list[2])};
      }
      if (!item.answers.contains(std::string(kRegretQuestion))) {
        throw SchemaError("answers", "item " + item.id + " has no regret answer");
      }
      items.push_back(std::move(item));
    } catch (const SchemaError& e) {
      throw ParseError(line_no, e.what());
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return items;
}

std::vector<AnnotationItem> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations " + path.string());
  return read_annotations(in);
}

AnnotationSummary aggregate_annotations(std::span<const AnnotationItem> items, double alpha) {
  AnnotationSummary s;
  std::size_t unanimous = 0, majority = 0;
  std::uint64_t regret_del = 0, regret_nondel = 0;
  for (const auto& item : items) {
    (item.deleted ? s.deleted_items : s.non_deleted_items) += 1;
    for (const auto& [question, a] : item.answers) {
      ++s.questions;
      const auto yes = std::count(a.begin(), a.end(), Answer::yes);
      const auto no = std::count(a.begin(), a.end(), Answer::no);
      const auto cant = 3 - yes - no;
      unanimous += (yes == 3 || no == 3 || cant == 3);
      majority += (yes >= 2 || no >= 2 || cant >= 2);
      if (question == kRegretQuestion) {
        if (yes >= 2) (item.deleted ? regret_del : regret_nondel) += 1;
        continue;
      }
      auto& c = s.categories[question];
      if (yes >= 2) {
        (item.deleted ? c.deleted : c.non_deleted) += 1;
      } else if (no < 2) {
        ++c.unclassified;
      }
    }
  }
  if (s.questions > 0) {
    s.unanimous_rate = static_cast<double>(unanimous) / static_cast<double>(s.questions);
    s.majority_rate = static_cast<double>(majority) / static_cast<double>(s.questions);
  }
  s.regret_table = {regret_nondel, s.non_deleted_items - regret_nondel, regret_del, s.deleted_items - regret_del};
  s.regret_test = stats::fisher_exact(s.regret_table, alpha);
  return s;
}

// ---------------------------------------------------------------------------

json to_json(const UserPartition& p) {
  return {{"deleters", p.deleters.size()},
          {"non_deleters", p.non_deleters.size()},
          {"active", p.deleters.size() + p.non_deleters.size()}};
}

json to_json(const GroupComparisonReport& r) {
  json arr = json::array();
  for (const auto& a : r.attributes) {
    json e = {{"name", a.name}, {"kind", attribute_kind_name(a.kind)}};
    e["ntd"] = a.ntd ? to_json(*a.ntd) : json(nullptr);
    if (!a.ntd_error.empty()) e["ntd_error"] = a.ntd_error;
    e["nud"] = {{"value", a.nud_defined ? number_or_null(a.nud.value) : json(nullptr)},
                {"eligible_users", a.nud.eligible},
                {"higher_in_deleted", a.nud.higher_in_deleted},
                {"higher_in_non_deleted", a.nud.higher_in_non_deleted}};
    if (!a.nud_error.empty()) e["nud"]["error"] = a.nud_error;
    arr.push_back(std::move(e));
  }
  return {{"attributes", arr}};
}

json to_json(const UserGroupComparison& c) {
  return {{"metric", c.metric},
          {"deleter_median", c.deleter_median},
          {"non_deleter_median", c.non_deleter_median},
          {"rendered", format_median_pair(c.deleter_median, c.non_deleter_median)},
          {"test", stats::to_json(c.test)}};
}

json to_json(const TraitTally& t) {
  return {{"counts", t.counts}, {"unmapped", t.unmapped}, {"missing", t.missing}, {"tied", t.tied}};
}

json to_json(const TemporalReport& t) {
  return {{"deleted", to_json(t.deleted)}, {"non_deleted", to_json(t.non_deleted)}};
}

json to_json(const ResponseReport& r) {
  return {{"deleted", to_json(r.deleted)},
          {"non_deleted", to_json(r.non_deleted)},
          {"median_deletion_lag_sec", optional_json(r.median_deletion_lag_sec)},
          {"median_deletion_lag_replied_sec", optional_json(r.median_deletion_lag_replied_sec)}};
}

json to_json(const ReplySentimentReport& r) {
  return {{"deleted", to_json(r.deleted)}, {"non_deleted", to_json(r.non_deleted)}};
}

json to_json(const AnnotationSummary& s) {
  json cats = json::object();
  for (const auto& [q, c] : s.categories) {
    cats[q] = {{"deleted", c.deleted}, {"non_deleted", c.non_deleted}, {"unclassified", c.unclassified}};
  }
  const auto& t = s.regret_table;
  return {{"categories", cats},
          {"questions", s.questions},
          {"unanimous_rate", s.unanimous_rate},
          {"majority_rate", s.majority_rate},
          {"deleted_items", s.deleted_items},
          {"non_deleted_items", s.non_deleted_items},
          {"regret_table", {{t.a, t.b}, {t.c, t.d}}},
          {"regret_test", stats::to_json(s.regret_test)}};
}

std::string to_csv(const GroupComparisonReport& r) {
  std::ostringstream os;
  os << "attribute,kind,ntd,deleted_stat,non_deleted_stat,p_value,nud,eligible_users,higher_in_deleted,"
        "higher_in_non_deleted\n";
  for (const auto& a : r.attributes) {
    os << a.name << ',' << attribute_kind_name(a.kind) << ',';
    if (a.ntd) {
      os << csv_number(a.ntd->value) << ',' << csv_number(a.ntd->del_stat) << ',' << csv_number(a.ntd->nondel_stat)
         << ',' << csv_number(a.ntd->test.p_two_sided);
    } else {
      os << ",,,";
    }
    os << ',' << (a.nud_defined ? csv_number(a.nud.value) : "") << ',' << a.nud.eligible << ','
       << a.nud.higher_in_deleted << ',' << a.nud.higher_in_non_deleted << '\n';
  }
  return os.str();
}

std::string to_csv(const TemporalReport& t) {
  std::ostringstream os;
  os << "hour,deleted_pct,non_deleted_pct\n";
  for (std::size_t h = 0; h < 24; ++h) os << h << ',' << csv_number(t.deleted[h]) << ',' << csv_number(t.non_deleted[h]) << '\n';
  return os.str();
}

std::string ccdf_csv(std::span<const UserGroupComparison> comparisons) {
  std::ostringstream os;
  os << "metric,group,value,fraction\n";
  for (const auto& c : comparisons) {
    for (const auto& p : c.deleter_ccdf) os << c.metric << ",deleters," << csv_number(p.value) << ',' << csv_number(p.fraction) << '\n';
    for (const auto& p : c.non_deleter_ccdf) {
      os << c.metric << ",non_deleters," << csv_number(p.value) << ',' << csv_number(p.fraction) << '\n';
    }
  }
  return os.str();
}

}  // namespace regretstream
