#include "regretstream/cleanup.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

#include "regretstream/error.hpp"
#include "regretstream/textkit.hpp"

namespace regretstream {
namespace {

struct Prepared {
  std::u32string chars;
  TokenList tokens;
};

Prepared prepare(const std::string& text) { return {decode_utf8(text), tokenize(text)}; }

bool similar(const Prepared& a, const Prepared& b, const CleanupConfig& cfg) {
  const std::size_t la = a.chars.size(), lb = b.chars.size();
  const std::size_t gap = la > lb ? la - lb : lb - la;
  // The length gap is a lower bound on the distance.
  if (gap < cfg.edit_distance_max && edit_distance(a.chars, b.chars) < cfg.edit_distance_max) return true;
  return term_cosine(a.tokens, b.tokens) > cfg.cosine_min;
}

StageTally tally(std::span<const TweetRecord* const> records) {
  StageTally t;
  std::unordered_set<UserId> users, deleters;
  for (const auto* r : records) {
    ++t.tweets;
    users.insert(r->tweet.user_id);
    if (r->deleted) {
      ++t.deleted;
      deleters.insert(r->tweet.user_id);
    }
  }
  t.users = users.size();
  t.deleter_users = deleters.size();
  return t;
}

nlohmann::json to_json(const StageTally& t) {
  return {{"tweets", t.tweets}, {"deleted", t.deleted}, {"users", t.users}, {"deleter_users", t.deleter_users}};
}

}  // namespace

void CleanupConfig::validate() const {
  if (client_whitelist.empty()) {
    throw ConfigError("client whitelist is empty; every tweet would be removed as automated");
  }
  if (superficial_lookahead < 1) throw ConfigError("superficial_lookahead must be >= 1");
  if (!(cosine_min >= 0.0 && cosine_min <= 1.0)) throw ConfigError("cosine_min must be in [0,1]");
}

CleanupConfig CleanupConfig::from_json(const nlohmann::json& j, CleanupConfig base) {
  if (!j.is_object()) throw ConfigError("cleanup config must be a JSON object");
  try {
    if (j.contains("language_tag")) base.language_tag = j["language_tag"].get<std::string>();
    if (j.contains("superficial_lookahead")) base.superficial_lookahead = j["superficial_lookahead"].get<std::size_t>();
    if (j.contains("edit_distance_max")) base.edit_distance_max = j["edit_distance_max"].get<std::size_t>();
    if (j.contains("cosine_min")) base.cosine_min = j["cosine_min"].get<double>();
    if (j.contains("client_whitelist")) {
      auto v = j["client_whitelist"].get<std::vector<std::string>>();
      base.client_whitelist = {v.begin(), v.end()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cleanup config: ") + e.what());
  }
  return base;
}

CleanupConfig CleanupConfig::from_json(const nlohmann::json& j) { return from_json(j, CleanupConfig{}); }

std::set<std::string> load_whitelist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open whitelist " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

bool detect_superficial(const TweetRecord& deleted, std::span<const TweetRecord* const> followups,
                        const CleanupConfig& cfg) {
  if (followups.empty()) return false;
  const Prepared d = prepare(deleted.tweet.text);
  for (const auto* f : followups) {
    if (similar(d, prepare(f->tweet.text), cfg)) return true;
  }
  return false;
}

std::pair<Corpus, CleanupReport> run_cleanup(const Corpus& corpus, const CleanupConfig& cfg) {
  cfg.validate();
  CleanupReport report;

  std::vector<const TweetRecord*> current;
  current.reserve(corpus.tweets.size());
  for (const auto& r : corpus.tweets) current.push_back(&r);
  report.input = tally(current);

  auto apply = [&](auto&& drop) {
    std::vector<const TweetRecord*> kept, removed;
    for (const auto* r : current) (drop(*r) ? removed : kept).push_back(r);
    current = std::move(kept);
    return tally(removed);
  };
  report.non_english = apply([&](const TweetRecord& r) { return r.tweet.lang != cfg.language_tag; });
  report.automated = apply([&](const TweetRecord& r) { return !cfg.client_whitelist.contains(r.tweet.source); });
  report.retweets = apply([&](const TweetRecord& r) { return r.tweet.retweet_of_id.has_value(); });

  // Per-user chronological timelines of the surviving tweets.
  std::map<UserId, std::vector<const TweetRecord*>> timelines;
  for (const auto* r : current) timelines[r->tweet.user_id].push_back(r);
  std::unordered_map<TweetId, Prepared> prepared;
  for (auto& [user, tl] : timelines) {
    std::sort(tl.begin(), tl.end(), [](const TweetRecord* a, const TweetRecord* b) {
      return std::tie(a->tweet.created_at, a->tweet.id) < std::tie(b->tweet.created_at, b->tweet.id);
    });
    for (const auto* r : tl) prepared.emplace(r->tweet.id, prepare(r->tweet.text));
  }

  std::vector<const TweetRecord*> superficial;
  for (;;) {
    ++report.superficial_passes;
    std::size_t found = 0;
    for (auto& [user, tl] : timelines) {
      std::vector<bool> drop(tl.size(), false);
      for (std::size_t i = 0; i < tl.size(); ++i) {
        if (!tl[i]->deleted) continue;
        const Prepared& d = prepared.at(tl[i]->tweet.id);
        const std::size_t end = std::min(tl.size(), i + 1 + cfg.superficial_lookahead);
        for (std::size_t k = i + 1; k < end; ++k) {
          if (similar(d, prepared.at(tl[k]->tweet.id), cfg)) {
            drop[i] = true;
            break;
          }
        }
      }
      std::vector<const TweetRecord*> kept;
      kept.reserve(tl.size());
      for (std::size_t i = 0; i < tl.size(); ++i) {
        if (drop[i]) {
          superficial.push_back(tl[i]);
          ++found;
        } else {
          kept.push_back(tl[i]);
        }
      }
      tl = std::move(kept);
    }
    if (found == 0) break;
  }
  report.superficial = tally(superficial);

  std::unordered_set<TweetId> removed;
  for (const auto* r : superficial) removed.insert(r->tweet.id);
  Corpus out;
  out.window = corpus.window;
  out.stats = corpus.stats;
  out.response_pool = corpus.response_pool;
  for (const auto* r : current) {
    if (!removed.contains(r->tweet.id)) out.tweets.push_back(*r);
  }
  std::vector<const TweetRecord*> kept_ptrs;
  for (const auto& r : out.tweets) kept_ptrs.push_back(&r);
  report.retained = tally(kept_ptrs);
  return {std::move(out), report};
}

nlohmann::json to_json(const CleanupReport& r) {
  return {{"input", to_json(r.input)},
          {"non_english", to_json(r.non_english)},
          {"automated", to_json(r.automated)},
          {"retweets", to_json(r.retweets)},
          {"superficial", to_json(r.superficial)},
          {"retained", to_json(r.retained)},
          {"superficial_passes", r.superficial_passes}};
}

std::string render_table(const CleanupReport& r) {
  std::ostringstream os;
  auto pct = [](std::size_t part, std::size_t whole) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " (%.2f%%)", whole ? 100.0 * part / whole : 0.0);
    return std::string(buf);
  };
  auto block = [&](const char* title, const StageTally& t, bool with_deleted) {
    os << title << '\n';
    os << "  # Tweets posted                       " << t.tweets << '\n';
    if (with_deleted) os << "  # Tweets deleted                      " << t.deleted << pct(t.deleted, t.tweets) << '\n';
    os << "  # Users who posted at-least 1 tweet   " << t.users << '\n';
    if (with_deleted) {
      os << "  # Users who deleted at-least 1 tweet  " << t.deleter_users << pct(t.deleter_users, t.users) << '\n';
    }
  };
  block("Dataset before cleanup", r.input, true);
  block("Non-english tweets", r.non_english, true);
  block("Automated tweets", r.automated, true);
  block("Retweets", r.retweets, true);
  block("Superficial deletions", r.superficial, false);
  block("Dataset after cleanup", r.retained, true);
  return os.str();
}

}  // namespace regretstream
