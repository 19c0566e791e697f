// regretstream command-line front end. One subcommand per pipeline stage;
// stages communicate through files.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "regretstream/analytics.hpp"
#include "regretstream/bundle.hpp"
#include "regretstream/classify.hpp"
#include "regretstream/cleanup.hpp"
#include "regretstream/error.hpp"
#include "regretstream/features.hpp"
#include "regretstream/ingest.hpp"
#include "regretstream/parallel.hpp"
#include "regretstream/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace regretstream;

namespace {

const fs::path kData = REGRETSTREAM_DATA_DIR;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error writing " + path.string());
}

Timestamp parse_time(const std::string& s, const char* what) {
  auto t = parse_rfc3339(s);
  if (!t) throw ValidationError(std::string(what) + ": not an RFC 3339 timestamp: " + s);
  return *t;
}

struct ResourcePaths {
  std::string lexicon = (kData / "lexicon.json").string();
  std::string valence = (kData / "valence.json").string();
  std::string tags;

  void add(CLI::App* cmd) {
    cmd->add_option("--lexicon", lexicon, "Lexicon JSON");
    cmd->add_option("--valence", valence, "Valence table JSON");
    cmd->add_option("--tags", tags, "Pre-computed POS tags (JSONL)");
  }

  TextResources load() const {
    TextResources r;
    r.lexicon = Lexicon::load(lexicon);
    r.valence = ValenceTable::load(valence);
    if (!tags.empty()) {
      auto fallback = std::make_shared<FallbackTagger>();
      r.tagger = std::make_shared<PreTaggedTagger>(PreTaggedTagger::load(tags, fallback));
    }
    return r;
  }
};

std::set<std::string> split_list(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  return TrainConfig::from_json(read_json(path));
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string events, out, duplicates = "reject";
  std::vector<std::string> window;
};

void run_ingest(const IngestArgs& a) {
  if (a.window.size() != 3) throw ValidationError("--window takes START END DELETE_END");
  CollectionWindow w{parse_time(a.window[0], "window start"), parse_time(a.window[1], "window end"),
                     parse_time(a.window[2], "delete end")};
  if (a.duplicates != "reject" && a.duplicates != "skip") {
    throw ValidationError("--duplicates must be reject or skip");
  }
  auto corpus = build_corpus(read_events(fs::path(a.events)), w,
                             a.duplicates == "skip" ? DuplicatePolicy::skip : DuplicatePolicy::reject);
  write_corpus(corpus, fs::path(a.out));
  std::cerr << to_json(corpus.stats).dump() << '\n';
}

struct CleanArgs {
  std::string corpus, whitelist = (kData / "whitelist.txt").string(), config, out, report;
};

void run_clean(const CleanArgs& a) {
  CleanupConfig cfg;
  if (!a.config.empty()) cfg = CleanupConfig::from_json(read_json(a.config));
  // The whitelist file wins over a list embedded in the config.
  if (!a.whitelist.empty()) cfg.client_whitelist = load_whitelist(a.whitelist);
  auto [cleaned, report] = run_cleanup(read_corpus(fs::path(a.corpus)), cfg);
  write_corpus(cleaned, fs::path(a.out));
  if (!a.report.empty()) {
    json j = to_json(report);
    j["table"] = render_table(report);
    write_json(j, a.report);
  }
  std::cout << render_table(report);
}

struct FeaturizeArgs {
  std::string corpus, wordlist = (kData / "wordlist.txt").string(), out;
  bool with_responses = false;
  ResourcePaths res;
};

void run_featurize(const FeaturizeArgs& a, unsigned threads) {
  const auto res = a.res.load();
  Wordlist::load(a.wordlist);  // validated here; the dense layout has no dictionary slot
  const auto corpus = read_corpus(fs::path(a.corpus));
  write_rsf1(featurize_corpus(corpus, res, a.with_responses, threads), a.out);
}

struct AnalyzeArgs {
  std::string corpus, metrics = "ntd,nud,users,temporal,response,traits", out;
  std::string wordlist = (kData / "wordlist.txt").string();
  std::string trait_map = (kData / "trait_map.json").string();
  double alpha = 0.05;
  ResourcePaths res;
};

void run_analyze(const AnalyzeArgs& a, unsigned threads) {
  static const std::set<std::string> known = {"ntd", "nud", "users", "temporal", "response", "traits"};
  const auto metrics = split_list(a.metrics);
  for (const auto& m : metrics) {
    if (!known.contains(m)) throw ValidationError("unknown metric '" + m + "'");
  }
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw ValidationError("--alpha must be in (0,1)");
  const fs::path dir = a.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const auto res = a.res.load();
  const auto corpus = read_corpus(fs::path(a.corpus));
  const auto partition = partition_users(corpus);
  write_json(to_json(partition), dir / "partition.json");

  const bool need_profiles = metrics.contains("ntd") || metrics.contains("nud") || metrics.contains("traits");
  ProfiledCorpus pc;
  if (need_profiles) pc = profile_corpus(corpus, res, threads);

  if (metrics.contains("ntd") || metrics.contains("nud")) {
    const auto attrs = default_attributes(res.lexicon, Wordlist::load(a.wordlist));
    const auto views = pc.views();
    const auto report = compare_attributes(attrs, views, a.alpha, metrics.contains("nud"), threads);
    write_json(to_json(report), dir / "attributes.json");
    write_text(dir / "attributes.csv", to_csv(report));
  }
  if (metrics.contains("users")) {
    const auto cmp = compare_user_groups(corpus, partition, a.alpha);
    json arr = json::array();
    for (const auto& c : cmp) arr.push_back(to_json(c));
    write_json(arr, dir / "users.json");
    write_text(dir / "users_ccdf.csv", ccdf_csv(cmp));
  }
  if (metrics.contains("temporal")) {
    const auto t = temporal_histogram(corpus);
    write_json(to_json(t), dir / "temporal.json");
    write_text(dir / "temporal.csv", to_csv(t));
  }
  if (metrics.contains("response")) {
    json j = to_json(response_report(corpus));
    j["reply_sentiment"] = to_json(reply_sentiment_split(corpus, res.valence));
    write_json(j, dir / "responses.json");
  }
  if (metrics.contains("traits")) {
    const auto map = TraitMap::load(a.trait_map);
    const auto observed = user_category_medians(pc, partition, res.lexicon);
    json medians = json::array();
    for (const auto& m : observed) {
      medians.push_back({{"attribute", m.attribute}, {"non_deleter", m.non_deleter}, {"deleter", m.deleter}});
    }
    write_json({{"observed", to_json(trait_tally(observed, map))},
                {"observed_medians", medians},
                {"reference", to_json(trait_tally(reference_medians(map), map))}},
               dir / "traits.json");
  }
}

struct AnnotateArgs {
  std::string annotations, out;
  double alpha = 0.05;
};

void run_annotate(const AnnotateArgs& a) {
  const auto items = read_annotations(fs::path(a.annotations));
  write_json(to_json(aggregate_annotations(items, a.alpha)), a.out);
}

struct TrainArgs {
  std::string corpus, config, out, metrics;
  std::uint64_t seed = 42;
  bool with_responses = false;
  ResourcePaths res;
};

void run_train(const TrainArgs& a, unsigned threads) {
  auto cfg = load_train_config(a.config);
  if (a.with_responses) cfg.with_responses = true;
  const auto res = a.res.load();
  const auto corpus = read_corpus(fs::path(a.corpus));
  auto report = two_stage_train(corpus, cfg, res, a.seed, threads);

  ModelBundle b;
  b.config = cfg;
  b.seed = a.seed;
  b.vocab = report.vocab;
  b.lexicon = res.lexicon;
  b.valence = res.valence;
  b.reference_now = corpus.window.post_end;
  b.model = report.model;
  save_bundle(b, a.out);

  const std::string metrics_path = a.metrics.empty() ? a.out + ".metrics.json" : a.metrics;
  const json m = to_json(report, cfg, a.seed);
  write_json(m, metrics_path);
  std::cout << "test " << to_json(report.test).dump() << '\n';
}

struct PredictArgs {
  std::string bundle, events, out;
};

void run_predict(const PredictArgs& a, unsigned threads) {
  const auto b = load_bundle(a.bundle);
  const auto events = read_events(fs::path(a.events));
  const auto preds = predict_events(b, events, threads);
  std::ostringstream os;
  for (const auto& p : preds) os << json{{"id", p.id}, {"score", p.score}, {"deleted", p.deleted}}.dump() << '\n';
  write_text(a.out, os.str());
}

struct AblateArgs {
  std::string corpus, config, groups = "user,derived_open_text,tweet,sentiment,pos,lexicon", out;
  std::uint64_t seed = 42;
  ResourcePaths res;
};

void run_ablate(const AblateArgs& a, unsigned threads) {
  const auto cfg = load_train_config(a.config);
  std::vector<FeatureGroup> groups;
  {
    std::stringstream ss(a.groups);
    std::string g;
    while (std::getline(ss, g, ',')) {
      if (!g.empty()) groups.push_back(parse_group(g));
    }
  }
  if (groups.empty()) throw ValidationError("--groups is empty");
  const auto res = a.res.load();
  const auto report = ablate(read_corpus(fs::path(a.corpus)), cfg, groups, res, a.seed, threads);
  if (fs::path(a.out).extension() == ".csv") {
    write_text(a.out, to_csv(report));
  } else {
    write_json(to_json(report), a.out);
  }
  std::cout << to_csv(report);
}

struct SynthArgs {
  std::string config = (kData / "synth_default.json").string(), out_events, out_ledger;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a) {
  auto cfg = SynthConfig::load(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const auto res = SynthResources::load(cfg);
  const auto out = generate_synthetic(cfg, res);
  write_events(out.events, a.out_events);
  write_json(out.ledger(cfg), a.out_ledger);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regretstream: tweet deletion analytics and prediction"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads (0 = all cores; REGRETSTREAM_THREADS overrides)");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Join an event stream into a labeled corpus");
  c_ingest->add_option("--events", ingest.events)->required();
  c_ingest->add_option("--window", ingest.window, "START END DELETE_END")->required()->expected(3);
  c_ingest->add_option("--out", ingest.out)->required();
  c_ingest->add_option("--duplicates", ingest.duplicates, "reject or skip");

  CleanArgs clean;
  auto* c_clean = app.add_subcommand("clean", "Remove non-English, automated, retweeted and superficially deleted tweets");
  c_clean->add_option("--corpus", clean.corpus)->required();
  c_clean->add_option("--whitelist", clean.whitelist);
  c_clean->add_option("--config", clean.config);
  c_clean->add_option("--out", clean.out)->required();
  c_clean->add_option("--report", clean.report);

  FeaturizeArgs feat;
  auto* c_feat = app.add_subcommand("featurize", "Write the RSF1 feature matrix of a corpus");
  c_feat->add_option("--corpus", feat.corpus)->required();
  c_feat->add_option("--wordlist", feat.wordlist);
  c_feat->add_option("--out", feat.out)->required();
  c_feat->add_flag("--with-responses", feat.with_responses);
  feat.res.add(c_feat);

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Deleted vs non-deleted comparisons");
  c_analyze->add_option("--corpus", analyze.corpus)->required();
  c_analyze->add_option("--metrics", analyze.metrics);
  c_analyze->add_option("--alpha", analyze.alpha);
  c_analyze->add_option("--out", analyze.out)->required();
  c_analyze->add_option("--wordlist", analyze.wordlist);
  c_analyze->add_option("--trait-map", analyze.trait_map);
  analyze.res.add(c_analyze);

  AnnotateArgs annotate;
  auto* c_annotate = app.add_subcommand("annotate-agg", "Aggregate three-way annotations");
  c_annotate->add_option("--annotations", annotate.annotations)->required();
  c_annotate->add_option("--out", annotate.out)->required();
  c_annotate->add_option("--alpha", annotate.alpha);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Two-stage training; writes a model bundle and metrics");
  c_train->add_option("--corpus", train.corpus)->required();
  c_train->add_option("--config", train.config);
  c_train->add_option("--seed", train.seed);
  c_train->add_option("--out", train.out)->required();
  c_train->add_option("--metrics", train.metrics, "Metrics JSON (default: BUNDLE.metrics.json)");
  c_train->add_flag("--with-responses", train.with_responses);
  train.res.add(c_train);

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Score tweet events with a bundle");
  c_predict->add_option("--bundle", predict.bundle)->required();
  c_predict->add_option("--events", predict.events)->required();
  c_predict->add_option("--out", predict.out)->required();

  AblateArgs abl;
  auto* c_ablate = app.add_subcommand("ablate", "Retrain with each feature group removed");
  c_ablate->add_option("--corpus", abl.corpus)->required();
  c_ablate->add_option("--config", abl.config);
  c_ablate->add_option("--groups", abl.groups);
  c_ablate->add_option("--seed", abl.seed);
  c_ablate->add_option("--out", abl.out)->required();
  abl.res.add(c_ablate);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a seeded synthetic event stream and its ledger");
  c_synth->add_option("--config", synth.config);
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--out-events", synth.out_events)->required();
  c_synth->add_option("--out-ledger", synth.out_ledger)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const unsigned threads = resolve_threads(threads_flag);
    if (c_ingest->parsed()) run_ingest(ingest);
    else if (c_clean->parsed()) run_clean(clean);
    else if (c_feat->parsed()) run_featurize(feat, threads);
    else if (c_analyze->parsed()) run_analyze(analyze, threads);
    else if (c_annotate->parsed()) run_annotate(annotate);
    else if (c_train->parsed()) run_train(train, threads);
    else if (c_predict->parsed()) run_predict(predict, threads);
    else if (c_ablate->parsed()) run_ablate(abl, threads);
    else if (c_synth->parsed()) run_synth(synth);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
