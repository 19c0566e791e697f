#include "regretstream/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "regretstream/error.hpp"
#include "regretstream/rng.hpp"

namespace regretstream {
namespace {

using nlohmann::json;

constexpr std::int64_t kDay = 86400;
constexpr TweetId kFirstTweetId = 600000000000ULL;
constexpr TweetId kExternalId = 500000000000ULL;
constexpr TweetId kOrphanId = 700000000000ULL;
constexpr std::int64_t kCorrectionGapMax = 300;
constexpr int kTextAttempts = 500;

const std::vector<std::string> kForeignTags = {"es", "pt", "ja", "fr", "tr", "id"};
const std::vector<std::string_view> kFunctionCategories = {"i", "you", "article", "preps", "conj", "auxverb", "we"};

struct Draft {
  std::size_t user = 0;
  Timestamp t;
  SynthFilter filter = SynthFilter::retained;
  bool deleted = false;
  bool late = false;
  bool tone = false;
  bool marker = false;
  bool exposed = false;
  std::optional<bool> reply_negative;
  std::optional<std::size_t> corrects;  // draft index
  std::optional<std::size_t> reply_to;  // draft index
  std::int64_t lag = 0;
  Tweet tweet;
};

struct Prepared {
  std::u32string chars;
  TokenList tokens;
};

Prepared prepare(const std::string& text) { return {decode_utf8(text), tokenize(text)}; }

// Same thresholds as the cleanup defaults.
bool similar(const Prepared& a, const Prepared& b) {
  const CleanupConfig cfg;
  const std::size_t la = a.chars.size(), lb = b.chars.size();
  const std::size_t gap = la > lb ? la - lb : lb - la;
  if (gap < cfg.edit_distance_max && edit_distance(a.chars, b.chars) < cfg.edit_distance_max) return true;
  return term_cosine(a.tokens, b.tokens) > cfg.cosine_min;
}

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("synth config: ") + name + " must be in [0,1]");
}

std::string random_url(Rng& rng) {
  static constexpr std::string_view alnum = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::string s = "https://t.co/";
  for (int i = 0; i < 10; ++i) s += alnum[rng.below(alnum.size())];
  return s;
}

std::string stem_of(const std::string& pattern) {
  return !pattern.empty() && pattern.back() == '*' ? pattern.substr(0, pattern.size() - 1) : pattern;
}

class TextMaker {
 public:
  TextMaker(const SynthConfig& cfg, const SynthResources& res) : cfg_(cfg) {
    if (res.background.empty()) throw ConfigError("synth: background vocabulary is empty");
    double acc = 0.0;
    for (std::size_t r = 0; r < res.background.size(); ++r) {
      acc += 1.0 / static_cast<double>(r + 1);
      zipf_cdf_.push_back(acc);
    }
    background_ = res.background;
    auto pool = [&](std::string_view name) {
      std::vector<std::string> words;
      if (auto idx = res.lexicon.index_of(name)) {
        for (const auto& p : res.lexicon.categories()[*idx].patterns) words.push_back(stem_of(p));
      }
      return words;
    };
    for (const auto& c : cfg.tone_categories) {
      auto w = pool(c);
      if (w.empty()) throw ConfigError("synth: tone category \"" + c + "\" is missing or empty in the lexicon");
      negative_.insert(negative_.end(), w.begin(), w.end());
    }
    positive_ = pool("posemo");
    if (positive_.empty()) throw ConfigError("synth: lexicon has no posemo words");
    for (auto name : kFunctionCategories) {
      auto w = pool(name);
      function_.insert(function_.end(), w.begin(), w.end());
    }
  }

  std::string background_word(Rng& rng) const {
    const double u = rng.uniform() * zipf_cdf_.back();
    const auto it = std::upper_bound(zipf_cdf_.begin(), zipf_cdf_.end(), u);
    return background_[std::min<std::size_t>(it - zipf_cdf_.begin(), background_.size() - 1)];
  }

  // Fills text and entity lists.
  void fill(Tweet& t, const Draft& d, std::size_t n_users, Rng& rng) const {
    std::vector<std::string> words;
    const auto n_bg = rng.between(6, 11);
    for (std::int64_t i = 0; i < n_bg; ++i) words.push_back(background_word(rng));
    if (!function_.empty()) {
      const auto n_fn = rng.between(1, 3);
      for (std::int64_t i = 0; i < n_fn; ++i) words.push_back(function_[rng.below(function_.size())]);
    }
    if (d.tone) {
      for (std::size_t i = 0; i < cfg_.tone_words; ++i) words.push_back(negative_[rng.below(negative_.size())]);
    } else if (rng.bernoulli(0.3)) {
      words.push_back(positive_[rng.below(positive_.size())]);
    }
    if (d.reply_negative) {
      const auto& pool = *d.reply_negative ? negative_ : positive_;
      for (int i = 0; i < 2; ++i) words.push_back(pool[rng.below(pool.size())]);
    }
    if (d.marker) words.push_back(cfg_.marker_term);
    rng.shuffle(std::span<std::string>(words));

    if (rng.bernoulli(0.15)) {
      const std::string tag = background_word(rng);
      t.hashtags.push_back(tag);
      words.push_back("#" + tag);
    }
    if (rng.bernoulli(0.2) && n_users > 1) {
      const std::string m = "user" + std::to_string(1 + rng.below(n_users));
      t.mentions.push_back(m);
      words.insert(words.begin(), "@" + m);
    }
    if (rng.bernoulli(0.2)) {
      const std::string u = random_url(rng);
      t.urls.push_back(u);
      words.push_back(u);
    }
    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    t.text = std::move(text);
  }

  // One or two single-letter substitutions inside word characters.
  static std::string typo(const std::string& text, Rng& rng) {
    std::vector<std::size_t> letters;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] >= 'a' && text[i] <= 'z') letters.push_back(i);
    }
    std::string out = text;
    if (letters.empty()) return out + " x";
    const auto edits = rng.between(1, 2);
    for (std::int64_t e = 0; e < edits; ++e) {
      const std::size_t pos = letters[rng.below(letters.size())];
      char c;
      do {
        c = static_cast<char>('a' + rng.below(26));
      } while (c == text[pos]);
      out[pos] = c;
    }
    return out;
  }

 private:
  const SynthConfig& cfg_;
  std::vector<double> zipf_cdf_;
  std::vector<std::string> background_;
  std::vector<std::string> negative_;
  std::vector<std::string> positive_;
  std::vector<std::string> function_;
};

UserProfile draw_profile(UserId id, bool prone, double skew, Timestamp start, Rng& rng) {
  const double shift = prone ? skew : 0.0;
  const double bounded = std::min(shift, 1.0);
  auto lognormal = [&](double median, double spread, double delta) {
    return std::exp(std::log(median) + delta + spread * rng.normal());
  };
  UserProfile u;
  u.user_id = id;
  const double age_days = std::clamp(lognormal(900.0, 0.5, -1.1 * shift), 1.0, 3000.0);
  u.account_created_at = start.plus(-static_cast<std::int64_t>(age_days * kDay));
  u.profile_customized = rng.bernoulli(0.7 - 0.25 * bounded);
  u.custom_image = rng.bernoulli(0.9 - 0.3 * bounded);
  u.bio_length = rng.between(0, 160);
  u.geo_enabled = rng.bernoulli(0.3);
  u.has_location = rng.bernoulli(0.6);
  u.has_profile_url = rng.bernoulli(0.4);
  u.favourites_count = std::llround(lognormal(800.0, 1.0, 0.0));
  u.followees_count = std::llround(lognormal(300.0, 0.9, 0.0));
  u.followers_count = std::llround(lognormal(400.0, 0.8, -1.4 * shift));
  u.listed_count = std::llround(lognormal(6.0, 0.9, -1.2 * shift));
  u.statuses_count = std::llround(lognormal(4000.0, 0.9, 0.6 * shift));
  static constexpr std::array<int, 5> zones = {-480, -300, 0, 60, 330};
  const auto z = rng.below(zones.size() + 1);
  if (z < zones.size()) u.timezone_offset_min = zones[z];
  return u;
}

struct Phase {
  Timestamp start;
  bool exposed = false;
  bool geo = false;
};

// Consecutive phases of 12 to 48 hours covering [from, to].
std::vector<Phase> draw_phases(const SynthConfig& cfg, Timestamp from, Timestamp to, Rng& rng) {
  std::vector<Phase> phases;
  for (Timestamp t = from; t <= to; t = t.plus(rng.between(12 * 3600, 48 * 3600))) {
    Phase p;
    p.start = t;
    p.exposed = rng.bernoulli(cfg.exposure_fraction);
    p.geo = rng.bernoulli(p.exposed ? cfg.exposed_geo_rate : cfg.quiet_geo_rate);
    phases.push_back(p);
  }
  return phases;
}

const Phase& phase_at(const std::vector<Phase>& phases, Timestamp t) {
  auto it = std::upper_bound(phases.begin(), phases.end(), t, [](Timestamp x, const Phase& p) { return x < p.start; });
  return it == phases.begin() ? phases.front() : *(it - 1);
}

StageTally tally_of(const std::vector<const Draft*>& ds) {
  StageTally t;
  std::set<std::size_t> users, deleters;
  for (const auto* d : ds) {
    ++t.tweets;
    users.insert(d->user);
    if (d->deleted) {
      ++t.deleted;
      deleters.insert(d->user);
    }
  }
  t.users = users.size();
  t.deleter_users = deleters.size();
  return t;
}

json tally_json(const StageTally& t) {
  return {{"tweets", t.tweets}, {"deleted", t.deleted}, {"users", t.users}, {"deleter_users", t.deleter_users}};
}

}  // namespace

std::string_view filter_name(SynthFilter f) {
  switch (f) {
    case SynthFilter::non_english: return "non_english";
    case SynthFilter::automated: return "automated";
    case SynthFilter::retweet: return "retweet";
    case SynthFilter::superficial: return "superficial";
    case SynthFilter::retained: return "retained";
    case SynthFilter::outside_window: return "outside_window";
  }
  return "?";
}

void SynthConfig::validate() const {
  if (n_users < 2) throw ConfigError("synth config: n_users must be >= 2");
  if (n_tweets < 1) throw ConfigError("synth config: n_tweets must be >= 1");
  if (window_days < 1) throw ConfigError("synth config: window_days must be >= 1");
  if (delete_window_days < 0) throw ConfigError("synth config: delete_window_days must be >= 0");
  if (!(tweet_rate_min > 0.0) || !(tweet_rate_max >= tweet_rate_min)) {
    throw ConfigError("synth config: need 0 < tweet_rate_min <= tweet_rate_max");
  }
  check_fraction(deleter_fraction, "deleter_fraction");
  check_fraction(deletion_rate, "deletion_rate");
  check_fraction(prone_share, "prone_share");
  check_fraction(superficial_fraction, "superficial_fraction");
  check_fraction(non_english_fraction, "non_english_fraction");
  check_fraction(automated_fraction, "automated_fraction");
  check_fraction(retweet_fraction, "retweet_fraction");
  check_fraction(outside_window_fraction, "outside_window_fraction");
  check_fraction(orphan_delete_fraction, "orphan_delete_fraction");
  check_fraction(late_delete_fraction, "late_delete_fraction");
  check_fraction(exposure_fraction, "exposure_fraction");
  check_fraction(exposure_share, "exposure_share");
  check_fraction(exposed_geo_rate, "exposed_geo_rate");
  check_fraction(quiet_geo_rate, "quiet_geo_rate");
  check_fraction(tone_rate_deleted, "tone_rate_deleted");
  check_fraction(tone_rate_kept, "tone_rate_kept");
  check_fraction(marker_rate_deleted, "marker_rate_deleted");
  check_fraction(marker_rate_kept, "marker_rate_kept");
  check_fraction(reply_rate_deleted, "reply_rate_deleted");
  check_fraction(reply_rate_kept, "reply_rate_kept");
  check_fraction(reply_negative_deleted, "reply_negative_deleted");
  check_fraction(reply_negative_kept, "reply_negative_kept");
  if (!(user_skew >= 0.0)) throw ConfigError("synth config: user_skew must be >= 0");
  if (non_english_fraction + automated_fraction + retweet_fraction > 1.0) {
    throw ConfigError("synth config: non_english + automated + retweet fractions exceed 1");
  }
  if (tone_categories.empty()) throw ConfigError("synth config: tone_categories is empty");
  if (marker_term.empty() || tokenize(marker_term).size() != 1 ||
      tokenize(marker_term)[0].cls != TokenClass::word) {
    throw ConfigError("synth config: marker_term must be a single word");
  }
  if (whitelisted_sources.empty() || automated_sources.empty()) {
    throw ConfigError("synth config: source lists must be non-empty");
  }
  {
    // Tweet rates are drawn independently of the deleter type, so deleter_fraction is the expected
    // share of tweets written by prone users.
    double p_prone = deletion_rate, p_other = deletion_rate;
    if (deleter_fraction > 0.0 && deleter_fraction < 1.0) {
      p_prone = deletion_rate * prone_share / deleter_fraction;
      p_other = deletion_rate * (1.0 - prone_share) / (1.0 - deleter_fraction);
    }
    double m = 1.0;
    if (exposure_fraction > 0.0 && exposure_fraction < 1.0) {
      m = std::max(exposure_share / exposure_fraction, (1.0 - exposure_share) / (1.0 - exposure_fraction));
    }
    if (std::max(p_prone, p_other) * m > 1.0) {
      throw ConfigError(
          "synth config: deletion_rate, prone_share and exposure_share imply a per-tweet deletion probability above 1");
    }
  }
  for (const auto& s : automated_sources) {
    if (std::find(whitelisted_sources.begin(), whitelisted_sources.end(), s) != whitelisted_sources.end()) {
      throw ConfigError("synth config: source \"" + s + "\" is both whitelisted and automated");
    }
  }
}

SynthConfig SynthConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
  SynthConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("n_users", c.n_users);
    get("n_tweets", c.n_tweets);
    if (j.contains("window_start")) {
      auto t = parse_rfc3339(j["window_start"].get<std::string>());
      if (!t) throw ConfigError("synth config: window_start is not RFC 3339");
      c.window_start = *t;
    }
    get("window_days", c.window_days);
    get("delete_window_days", c.delete_window_days);
    get("tweet_rate_min", c.tweet_rate_min);
    get("tweet_rate_max", c.tweet_rate_max);
    get("deleter_fraction", c.deleter_fraction);
    get("deletion_rate", c.deletion_rate);
    get("prone_share", c.prone_share);
    get("superficial_fraction", c.superficial_fraction);
    get("non_english_fraction", c.non_english_fraction);
    get("automated_fraction", c.automated_fraction);
    get("retweet_fraction", c.retweet_fraction);
    get("outside_window_fraction", c.outside_window_fraction);
    get("orphan_delete_fraction", c.orphan_delete_fraction);
    get("late_delete_fraction", c.late_delete_fraction);
    get("user_skew", c.user_skew);
    get("exposure_fraction", c.exposure_fraction);
    get("exposure_share", c.exposure_share);
    get("exposed_geo_rate", c.exposed_geo_rate);
    get("quiet_geo_rate", c.quiet_geo_rate);
    get("tone_categories", c.tone_categories);
    get("tone_words", c.tone_words);
    get("tone_rate_deleted", c.tone_rate_deleted);
    get("tone_rate_kept", c.tone_rate_kept);
    get("marker_term", c.marker_term);
    get("marker_rate_deleted", c.marker_rate_deleted);
    get("marker_rate_kept", c.marker_rate_kept);
    get("reply_rate_deleted", c.reply_rate_deleted);
    get("reply_rate_kept", c.reply_rate_kept);
    get("max_replies", c.max_replies);
    get("reply_negative_deleted", c.reply_negative_deleted);
    get("reply_negative_kept", c.reply_negative_kept);
    get("whitelisted_sources", c.whitelisted_sources);
    get("automated_sources", c.automated_sources);
    if (j.contains("lexicon")) c.lexicon_path = j["lexicon"].get<std::string>();
    if (j.contains("background")) c.background_path = j["background"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SynthConfig SynthConfig::load(const std::filesystem::path& path) {
  SynthConfig c = from_json(read_json(path));
  const auto dir = path.parent_path();
  if (c.lexicon_path.is_relative()) c.lexicon_path = dir / c.lexicon_path;
  if (c.background_path.is_relative()) c.background_path = dir / c.background_path;
  return c;
}

json SynthConfig::to_json() const {
  return {{"seed", seed},
          {"n_users", n_users},
          {"n_tweets", n_tweets},
          {"window_start", format_rfc3339(window_start)},
          {"window_days", window_days},
          {"delete_window_days", delete_window_days},
          {"tweet_rate_min", tweet_rate_min},
          {"tweet_rate_max", tweet_rate_max},
          {"deleter_fraction", deleter_fraction},
          {"deletion_rate", deletion_rate},
          {"prone_share", prone_share},
          {"superficial_fraction", superficial_fraction},
          {"non_english_fraction", non_english_fraction},
          {"automated_fraction", automated_fraction},
          {"retweet_fraction", retweet_fraction},
          {"outside_window_fraction", outside_window_fraction},
          {"orphan_delete_fraction", orphan_delete_fraction},
          {"late_delete_fraction", late_delete_fraction},
          {"user_skew", user_skew},
          {"exposure_fraction", exposure_fraction},
          {"exposure_share", exposure_share},
          {"exposed_geo_rate", exposed_geo_rate},
          {"quiet_geo_rate", quiet_geo_rate},
          {"tone_categories", tone_categories},
          {"tone_words", tone_words},
          {"tone_rate_deleted", tone_rate_deleted},
          {"tone_rate_kept", tone_rate_kept},
          {"marker_term", marker_term},
          {"marker_rate_deleted", marker_rate_deleted},
          {"marker_rate_kept", marker_rate_kept},
          {"reply_rate_deleted", reply_rate_deleted},
          {"reply_rate_kept", reply_rate_kept},
          {"max_replies", max_replies},
          {"reply_negative_deleted", reply_negative_deleted},
          {"reply_negative_kept", reply_negative_kept},
          {"whitelisted_sources", whitelisted_sources},
          {"automated_sources", automated_sources},
          {"lexicon", lexicon_path.string()},
          {"background", background_path.string()}};
}

SynthResources SynthResources::load(const SynthConfig& cfg) {
  SynthResources r;
  r.lexicon = Lexicon::load(cfg.lexicon_path);
  std::ifstream in(cfg.background_path);
  if (!in) throw IoError("cannot open background vocabulary " + cfg.background_path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) r.background.push_back(line);
  }
  return r;
}

SynthOutput generate_synthetic(const SynthConfig& cfg, const SynthResources& res) {
  cfg.validate();
  for (const auto& w : res.background) {
    if (res.lexicon.match(w).any() || w == cfg.marker_term) {
      throw ConfigError("synth: background word \"" + w + "\" collides with the lexicon or the marker");
    }
  }
  if (res.lexicon.match(cfg.marker_term).any()) {
    throw ConfigError("synth: marker term \"" + cfg.marker_term + "\" is a lexicon word");
  }
  const TextMaker maker(cfg, res);
  Rng rng(cfg.seed);

  SynthOutput out;
  out.window.post_start = cfg.window_start;
  out.window.post_end = cfg.window_start.plus(cfg.window_days * kDay);
  out.window.delete_end = out.window.post_end.plus(cfg.delete_window_days * kDay);
  const CollectionWindow& w = out.window;

  // Users and their latent type.
  std::vector<UserProfile> profiles;
  std::vector<double> rate_cdf;
  double total_rate = 0.0, prone_rate = 0.0;
  for (std::size_t i = 0; i < cfg.n_users; ++i) {
    const bool prone = rng.bernoulli(cfg.deleter_fraction);
    const double rate = cfg.tweet_rate_min + (cfg.tweet_rate_max - cfg.tweet_rate_min) * rng.uniform();
    out.users.push_back({static_cast<UserId>(i + 1), prone});
    profiles.push_back(draw_profile(i + 1, prone, cfg.user_skew, cfg.window_start, rng));
    total_rate += rate;
    if (prone) prone_rate += rate;
    rate_cdf.push_back(total_rate);
  }
  std::vector<std::vector<Phase>> phases;
  for (std::size_t i = 0; i < cfg.n_users; ++i) {
    phases.push_back(draw_phases(cfg, w.post_start.plus(-3 * kDay), w.delete_end, rng));
  }
  const double prone_tweet_share = prone_rate / total_rate;
  double p_prone = 0.0, p_other = 0.0;
  if (prone_tweet_share <= 0.0) {
    p_other = cfg.deletion_rate;
  } else if (prone_tweet_share >= 1.0) {
    p_prone = cfg.deletion_rate;
  } else {
    p_prone = cfg.deletion_rate * cfg.prone_share / prone_tweet_share;
    p_other = cfg.deletion_rate * (1.0 - cfg.prone_share) / (1.0 - prone_tweet_share);
  }
  // Phase multipliers keep each user's expected deletion rate unchanged.
  double m_exposed = 1.0, m_quiet = 1.0;
  if (cfg.exposure_fraction > 0.0 && cfg.exposure_fraction < 1.0) {
    m_exposed = cfg.exposure_share / cfg.exposure_fraction;
    m_quiet = (1.0 - cfg.exposure_share) / (1.0 - cfg.exposure_fraction);
  }
  // validate() checks feasibility at the expected prone share; a small user sample can still overshoot.
  const double m_max = std::max(m_exposed, m_quiet);
  p_prone = std::min(p_prone, 1.0 / m_max);
  p_other = std::min(p_other, 1.0 / m_max);
  auto pick_user = [&] {
    const double u = rng.uniform() * total_rate;
    return std::min<std::size_t>(std::upper_bound(rate_cdf.begin(), rate_cdf.end(), u) - rate_cdf.begin(),
                                 cfg.n_users - 1);
  };
  auto delete_p = [&](const Draft& d) {
    return (out.users[d.user].prone ? p_prone : p_other) * (d.exposed ? m_exposed : m_quiet);
  };
  auto uniform_time = [&](Timestamp lo, Timestamp hi) { return lo.plus(rng.between(0, hi - lo)); };

  // Post skeletons. Every in-window tweet consumes one unit of the budget.
  std::vector<Draft> drafts;
  std::size_t remaining = cfg.n_tweets;
  const double c_ne = cfg.non_english_fraction;
  const double c_auto = c_ne + cfg.automated_fraction;
  const double c_rt = c_auto + cfg.retweet_fraction;
  // Superficial deletions follow a running quota over analyzable deletions,
  // so the planted share tracks superficial_fraction to within one tweet.
  std::size_t eligible = 0, planted = 0;
  auto label = [&](Draft& d) {
    d.exposed = phase_at(phases[d.user], d.t).exposed;
    d.deleted = rng.bernoulli(delete_p(d));
    if (d.deleted && rng.bernoulli(cfg.late_delete_fraction)) {
      d.deleted = false;
      d.late = true;
    }
  };
  auto push = [&](Draft d) {
    const bool analyzable = d.filter == SynthFilter::retained;
    bool plant = false;
    if (analyzable && d.deleted) {
      ++eligible;
      plant = remaining >= 2 && w.post_end - d.t >= 5 &&
              static_cast<double>(planted) < cfg.superficial_fraction * static_cast<double>(eligible) - 0.5;
    }
    if (plant) {
      d.filter = SynthFilter::superficial;
      d.tone = rng.bernoulli(cfg.tone_rate_kept);
      d.marker = rng.bernoulli(cfg.marker_rate_kept);
    } else {
      d.tone = rng.bernoulli(d.deleted ? cfg.tone_rate_deleted : cfg.tone_rate_kept);
      d.marker = rng.bernoulli(d.deleted ? cfg.marker_rate_deleted : cfg.marker_rate_kept);
    }
    const std::size_t index = drafts.size();
    drafts.push_back(d);
    --remaining;
    if (plant) {
      ++planted;
      Draft c;
      c.user = d.user;
      c.t = d.t.plus(rng.between(5, std::min<std::int64_t>(kCorrectionGapMax, w.post_end - d.t)));
      c.exposed = phase_at(phases[c.user], c.t).exposed;
      c.filter = SynthFilter::retained;
      c.corrects = index;
      c.reply_to = d.reply_to;
      c.reply_negative = d.reply_negative;
      drafts[index].lag = rng.between(1, c.t - d.t);
      drafts.push_back(c);
      --remaining;
    }
    return index;
  };

  while (remaining > 0) {
    Draft d;
    d.user = pick_user();
    const double u = rng.uniform();
    d.filter = u < c_ne     ? SynthFilter::non_english
               : u < c_auto ? SynthFilter::automated
               : u < c_rt   ? SynthFilter::retweet
                            : SynthFilter::retained;
    d.t = uniform_time(w.post_start, w.post_end);
    label(d);
    const std::size_t index = push(d);
    const Draft& parent = drafts[index];
    if (parent.filter != SynthFilter::retained ||
        !rng.bernoulli(parent.deleted ? cfg.reply_rate_deleted : cfg.reply_rate_kept)) {
      continue;
    }
    const bool parent_deleted = parent.deleted;
    const Timestamp parent_t = parent.t;
    const std::size_t parent_user = parent.user;
    const auto k = rng.between(1, static_cast<std::int64_t>(std::max<std::size_t>(cfg.max_replies, 1)));
    for (std::int64_t r = 0; r < k && remaining > 0; ++r) {
      const Timestamp t = parent_t.plus(rng.between(60, 6 * 3600));
      if (t > w.post_end) break;
      Draft reply;
      reply.user = pick_user();
      while (reply.user == parent_user) reply.user = pick_user();
      reply.t = t;
      reply.reply_to = index;
      label(reply);
      reply.reply_negative = rng.bernoulli(parent_deleted ? cfg.reply_negative_deleted : cfg.reply_negative_kept);
      push(reply);
    }
  }
  const std::size_t in_window = drafts.size();

  const auto n_outside = static_cast<std::size_t>(std::llround(cfg.outside_window_fraction * cfg.n_tweets));
  for (std::size_t i = 0; i < n_outside; ++i) {
    Draft d;
    d.user = pick_user();
    d.filter = SynthFilter::outside_window;
    d.t = rng.bernoulli(0.5) ? uniform_time(w.post_start.plus(-2 * kDay), w.post_start.plus(-1))
                             : uniform_time(w.post_end.plus(1), w.post_end.plus(2 * kDay));
    d.exposed = phase_at(phases[d.user], d.t).exposed;
    d.deleted = rng.bernoulli(delete_p(d));
    drafts.push_back(d);
  }

  // Ids follow posting time.
  std::vector<std::size_t> order(drafts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return drafts[a].t < drafts[b].t; });
  std::vector<TweetId> ids(drafts.size());
  for (std::size_t r = 0; r < order.size(); ++r) ids[order[r]] = kFirstTweetId + r;

  // Payloads. Analyzable texts of one user are kept pairwise dissimilar,
  // except a superficial deletion and its correction.
  std::vector<std::vector<std::pair<std::size_t, Prepared>>> analyzable(cfg.n_users);
  auto clashes = [&](std::size_t user, const Prepared& p, std::optional<std::size_t> except) {
    for (const auto& [idx, q] : analyzable[user]) {
      if (except && idx == *except) continue;
      if (similar(p, q)) return true;
    }
    return false;
  };
  std::size_t external = 0;
  for (std::size_t i = 0; i < in_window + n_outside; ++i) {
    Draft& d = drafts[i];
    Tweet& t = d.tweet;
    t.id = ids[i];
    t.user_id = out.users[d.user].id;
    t.created_at = d.t;
    t.lang = d.filter == SynthFilter::non_english ? kForeignTags[rng.below(kForeignTags.size())] : "en";
    t.source = d.filter == SynthFilter::automated
                   ? cfg.automated_sources[rng.below(cfg.automated_sources.size())]
                   : cfg.whitelisted_sources[rng.below(cfg.whitelisted_sources.size())];
    t.has_geo = rng.bernoulli(0.1);
    t.user = profiles[d.user];
    const bool geo = phase_at(phases[d.user], d.t).geo;
    t.user->geo_enabled = geo;
    t.user->has_location = geo || profiles[d.user].has_location;
    if (d.reply_to) t.in_reply_to_id = ids[*d.reply_to];
    if (d.filter == SynthFilter::retweet) t.retweet_of_id = kExternalId + external++;
    if (d.corrects) continue;  // written with its deletion

    const bool checked = d.filter == SynthFilter::retained || d.filter == SynthFilter::superficial;
    if (!checked) {
      maker.fill(t, d, cfg.n_users, rng);
      if (d.filter == SynthFilter::retweet) {
        const std::string who = "user" + std::to_string(1 + rng.below(cfg.n_users));
        t.text = "RT @" + who + ": " + t.text;
        t.mentions.insert(t.mentions.begin(), who);
      }
      continue;
    }
    // A correction is always the next draft after its deletion.
    Draft* corr = d.filter == SynthFilter::superficial ? &drafts[i + 1] : nullptr;
    bool placed = false;
    for (int attempt = 0; attempt < kTextAttempts && !placed; ++attempt) {
      Tweet trial = t;
      trial.hashtags.clear();
      trial.urls.clear();
      trial.mentions.clear();
      maker.fill(trial, d, cfg.n_users, rng);
      Prepared p = prepare(trial.text);
      if (clashes(d.user, p, std::nullopt)) continue;
      if (corr) {
        Tweet fix = corr->tweet;
        fix.text = TextMaker::typo(trial.text, rng);
        const auto fixed_tokens = tokenize(fix.text);
        for (const auto& tok : fixed_tokens) {
          if (tok.cls == TokenClass::hashtag) fix.hashtags.push_back(tok.surface.substr(1));
          if (tok.cls == TokenClass::url) fix.urls.push_back(tok.surface);
          if (tok.cls == TokenClass::mention) fix.mentions.push_back(tok.surface.substr(1));
        }
        Prepared q = prepare(fix.text);
        if (!similar(p, q) || clashes(d.user, q, std::nullopt)) continue;
        corr->tweet = std::move(fix);
        analyzable[d.user].emplace_back(i + 1, std::move(q));
      }
      t = std::move(trial);
      analyzable[d.user].emplace_back(i, std::move(p));
      placed = true;
    }
    if (!placed) throw std::logic_error("synth: could not draw a dissimilar text; background vocabulary too small");
  }

  // Corrections must sit within the lookahead of their deletion: at most two
  // other analyzable tweets of the user may fall between them.
  {
    std::map<std::size_t, std::vector<std::size_t>> timeline;
    for (std::size_t r : order) {
      const Draft& d = drafts[r];
      if (d.filter == SynthFilter::retained || d.filter == SynthFilter::superficial) timeline[d.user].push_back(r);
    }
    const std::size_t lookahead = CleanupConfig{}.superficial_lookahead;
    for (const auto& [user, tl] : timeline) {
      for (std::size_t k = 0; k < tl.size(); ++k) {
        if (drafts[tl[k]].filter != SynthFilter::superficial) continue;
        std::size_t j = k + 1;
        while (j < tl.size() && drafts[tl[j]].corrects != tl[k]) ++j;
        if (j == tl.size() || j - k > lookahead) {
          throw std::logic_error("synth: correction fell outside the superficial lookahead");
        }
      }
    }
  }

  // Deletion notices.
  struct Notice {
    DeleteNotice d;
    bool matched;
  };
  std::vector<Notice> notices;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const Draft& d = drafts[i];
    const Tweet& t = d.tweet;
    if (d.late) {
      notices.push_back({{t.id, t.user_id, w.delete_end.plus(rng.between(1, 2 * kDay))}, false});
    } else if (d.deleted) {
      std::int64_t lag = d.lag;
      if (d.filter != SynthFilter::superficial) {
        const std::int64_t cap = std::max<std::int64_t>(1, w.delete_end - t.created_at);
        lag = std::clamp<std::int64_t>(std::llround(std::exp(std::log(3600.0) + 1.5 * rng.normal())), 1, cap);
      }
      notices.push_back({{t.id, t.user_id, t.created_at.plus(lag)}, d.filter != SynthFilter::outside_window});
    }
  }
  const auto n_orphans = static_cast<std::size_t>(std::llround(cfg.orphan_delete_fraction * cfg.n_tweets));
  for (std::size_t k = 0; k < n_orphans; ++k) {
    const TweetId id = kOrphanId + k;
    out.orphan_delete_ids.push_back(id);
    notices.push_back({{id, out.users[pick_user()].id, uniform_time(w.post_start, w.delete_end)}, false});
  }

  // Arrival order: by instant, tweets before notices, then by id.
  struct Arrival {
    Timestamp at;
    int kind;
    TweetId id;
    std::size_t src;
  };
  std::vector<Arrival> arrivals;
  for (std::size_t i = 0; i < drafts.size(); ++i) arrivals.push_back({drafts[i].t, 0, drafts[i].tweet.id, i});
  for (std::size_t k = 0; k < notices.size(); ++k) arrivals.push_back({notices[k].d.observed_at, 1, notices[k].d.id, k});
  std::sort(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
    return std::tie(a.at, a.kind, a.id) < std::tie(b.at, b.kind, b.id);
  });
  out.events.reserve(arrivals.size());
  for (const auto& a : arrivals) {
    if (a.kind == 0) {
      out.events.push_back(Event{drafts[a.src].tweet});
    } else {
      out.events.push_back(Event{notices[a.src].d});
    }
  }

  // Ground truth and expected tallies.
  for (std::size_t r : order) {
    const Draft& d = drafts[r];
    SynthTruth s;
    s.id = d.tweet.id;
    s.user_id = d.tweet.user_id;
    s.filter = d.filter;
    s.deleted = d.filter != SynthFilter::outside_window && d.deleted;
    s.late_delete = d.late;
    s.negative_tone = d.tone;
    s.marker = d.marker;
    s.exposed = d.exposed;
    s.reply_negative = d.reply_negative;
    if (d.corrects) s.corrects = ids[*d.corrects];
    if (d.reply_to) s.reply_to = ids[*d.reply_to];
    out.truth.push_back(s);
  }

  IngestStats& is = out.expected_ingest;
  is.tweets_in = drafts.size();
  is.retained = in_window;
  is.outside_window = n_outside;
  is.deletes_in = notices.size();
  for (const auto& n : notices) {
    if (n.matched) ++is.matched_deletes;
  }
  for (const auto& d : drafts) {
    if (d.late) ++is.late_deletes;
  }
  is.orphan_deletes = is.deletes_in - is.matched_deletes - is.late_deletes;

  std::map<SynthFilter, std::vector<const Draft*>> by_filter;
  std::vector<const Draft*> all;
  for (std::size_t i = 0; i < in_window; ++i) {
    by_filter[drafts[i].filter].push_back(&drafts[i]);
    all.push_back(&drafts[i]);
  }
  CleanupReport& cr = out.expected_cleanup;
  cr.input = tally_of(all);
  cr.non_english = tally_of(by_filter[SynthFilter::non_english]);
  cr.automated = tally_of(by_filter[SynthFilter::automated]);
  cr.retweets = tally_of(by_filter[SynthFilter::retweet]);
  cr.superficial = tally_of(by_filter[SynthFilter::superficial]);
  cr.retained = tally_of(by_filter[SynthFilter::retained]);

  // Planted strength per feature group: total-variation distance of the
  // planted indicator between deleted and kept analyzable tweets.
  auto tv = [&](auto&& indicator) {
    double del = 0, kept = 0, del_on = 0, kept_on = 0;
    for (const auto* d : by_filter[SynthFilter::retained]) {
      const bool on = indicator(*d);
      if (d->deleted) {
        ++del;
        del_on += on;
      } else {
        ++kept;
        kept_on += on;
      }
    }
    return del > 0 && kept > 0 ? std::abs(del_on / del - kept_on / kept) : 0.0;
  };
  const double tone_tv = tv([](const Draft& d) { return d.tone; });
  json strength = {{"user", tv([](const Draft& d) { return d.tweet.user->geo_enabled; })},
                   {"lexicon", tone_tv},
                   {"sentiment", tone_tv},
                   {"derived_open_text", tv([](const Draft& d) { return d.marker; })},
                   {"tweet", 0.0},
                   {"pos", 0.0}};
  std::string strongest;
  double best = -1.0;
  for (const char* g : {"user", "derived_open_text", "tweet", "sentiment", "pos", "lexicon"}) {
    if (strength[g].get<double>() > best) {
      best = strength[g].get<double>();
      strongest = g;
    }
  }
  out.planted = {{"strength", strength},
                 {"strongest_group", strongest},
                 {"prone_tweet_share", prone_tweet_share},
                 {"deletion_probability", {{"prone", p_prone}, {"other", p_other}}}};
  return out;
}

json SynthOutput::ledger(const SynthConfig& cfg) const {
  json users_j = json::array();
  for (const auto& u : users) users_j.push_back({{"id", u.id}, {"prone", u.prone}});
  json tweets = json::array();
  for (const auto& s : truth) {
    json t = {{"id", s.id},
              {"user_id", s.user_id},
              {"filter", filter_name(s.filter)},
              {"deleted", s.deleted},
              {"late_delete", s.late_delete},
              {"negative_tone", s.negative_tone},
              {"marker", s.marker},
              {"exposed", s.exposed}};
    if (s.corrects) t["corrects"] = *s.corrects;
    if (s.reply_to) t["reply_to"] = *s.reply_to;
    if (s.reply_negative) t["reply_negative"] = *s.reply_negative;
    tweets.push_back(std::move(t));
  }
  return {{"format", "regretstream-synth-ledger"},
          {"version", 1},
          {"config", cfg.to_json()},
          {"window", regretstream::to_json(window)},
          {"users", users_j},
          {"tweets", tweets},
          {"orphan_delete_ids", orphan_delete_ids},
          {"ingest", regretstream::to_json(expected_ingest)},
          {"cleanup",
           {{"input", tally_json(expected_cleanup.input)},
            {"non_english", tally_json(expected_cleanup.non_english)},
            {"automated", tally_json(expected_cleanup.automated)},
            {"retweets", tally_json(expected_cleanup.retweets)},
            {"superficial", tally_json(expected_cleanup.superficial)},
            {"retained", tally_json(expected_cleanup.retained)}}},
          {"planted", planted}};
}

void write_events(const std::vector<Event>& events, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : events) out << to_wire(e) << '\n';
  if (!out) throw IoError("error writing " + path.string());
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("error writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace regretstream
