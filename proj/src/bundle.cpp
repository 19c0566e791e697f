#include "regretstream/bundle.hpp"

#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "regretstream/binary_io.hpp"
#include "regretstream/error.hpp"
#include "regretstream/parallel.hpp"

namespace regretstream {
namespace {

using json = nlohmann::json;

constexpr std::string_view kMagic = "RSB1";
constexpr std::uint32_t kVersion = 1;

class ArrayWriter {
 public:
  void add(std::string name, std::span<const double> values) {
    index_.push_back({{"name", name}, {"length", values.size()}});
    data_.insert(data_.end(), values.begin(), values.end());
  }
  void add(std::string name, double v) { add(std::move(name), std::span<const double>(&v, 1)); }
  const json& index() const { return index_; }
  const std::vector<double>& data() const { return data_; }

 private:
  json index_ = json::array();
  std::vector<double> data_;
};

class ArrayReader {
 public:
  ArrayReader(const json& index, binio::Reader& r) {
    for (const auto& e : index) {
      const auto name = e.at("name").get<std::string>();
      const auto len = e.at("length").get<std::size_t>();
      if (len > r.remaining() / 8) throw ValidationError("truncated binary container");
      std::vector<double> v(len);
      r.f64s(v);
      if (!arrays_.emplace(name, std::move(v)).second) throw ValidationError("RSB1: duplicate array " + name);
    }
  }
  const std::vector<double>& get(const std::string& name, std::optional<std::size_t> expect = std::nullopt) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw ValidationError("RSB1: missing array " + name);
    if (expect && it->second.size() != *expect) throw ValidationError("RSB1: array " + name + " has the wrong length");
    return it->second;
  }
  double scalar(const std::string& name) const { return get(name, 1).front(); }

 private:
  std::map<std::string, std::vector<double>> arrays_;
};

}  // namespace

std::vector<char> encode_bundle(const ModelBundle& b) {
  const auto& m = b.model;
  ArrayWriter arrays;
  json model = {{"uses_stage1", m.uses_stage1},
                {"active", m.active},
                {"stage2", {{"algorithm", stage2_name(m.stage2.algorithm)}}}};

  if (m.uses_stage1) {
    const auto& s1 = m.stage1;
    model["stage1"] = {{"algorithm", stage1_name(s1.algorithm)}, {"dim", s1.dim}};
    if (s1.algorithm == Stage1Algorithm::multinomial_nb) {
      arrays.add("stage1.log_prior", s1.log_prior);
      arrays.add("stage1.log_likelihood0", s1.log_likelihood[0]);
      arrays.add("stage1.log_likelihood1", s1.log_likelihood[1]);
      arrays.add("stage1.alpha", s1.alpha);
    } else {
      arrays.add("stage1.w", s1.w);
      arrays.add("stage1.b", s1.b);
      arrays.add("stage1.c", s1.c);
    }
  }

  const auto& s2 = m.stage2;
  if (s2.algorithm == Stage2Algorithm::rbf_svm) {
    model["stage2"]["dim"] = s2.svm.dim;
    model["stage2"]["support_vectors"] = s2.svm.coef.size();
    model["stage2"]["iterations"] = s2.svm.iterations;
    arrays.add("stage2.scaler.mean", s2.scaler.mean);
    arrays.add("stage2.scaler.inv_scale", s2.scaler.inv_scale);
    arrays.add("stage2.svm.support", s2.svm.support);
    arrays.add("stage2.svm.coef", s2.svm.coef);
    arrays.add("stage2.svm.rho", s2.svm.rho);
    arrays.add("stage2.svm.gamma", s2.svm.gamma);
    arrays.add("stage2.svm.c", s2.svm.c);
  } else {
    const auto& bo = s2.boost;
    json trees = json::array();
    for (std::size_t t = 0; t < bo.trees.size(); ++t) {
      json feats = json::array(), left = json::array(), right = json::array();
      std::vector<double> thr, val;
      for (const auto& nd : bo.trees[t].nodes) {
        feats.push_back(nd.feature);
        left.push_back(nd.left);
        right.push_back(nd.right);
        thr.push_back(nd.threshold);
        val.push_back(nd.value);
      }
      trees.push_back({{"feature", feats}, {"left", left}, {"right", right}});
      arrays.add("stage2.tree" + std::to_string(t) + ".threshold", thr);
      arrays.add("stage2.tree" + std::to_string(t) + ".value", val);
    }
    model["stage2"]["trees"] = trees;
    model["stage2"]["max_depth"] = bo.max_depth;
    model["stage2"]["rounds"] = bo.rounds;
    model["stage2"]["stop_reason"] = bo.stop_reason;
    arrays.add("stage2.alphas", bo.alphas);
    arrays.add("stage2.errors", bo.errors);
    arrays.add("stage2.bound", bo.bound);
    arrays.add("stage2.training_error", bo.training_error);
  }

  json manifest = {{"format", "regretstream-bundle"},
                   {"config", b.config.to_json()},
                   {"seed", b.seed},
                   {"reference_now", format_rfc3339(b.reference_now)},
                   {"vocab", {{"terms", b.vocab.terms()}, {"df", b.vocab.df()}, {"documents", b.vocab.documents()}}},
                   {"lexicon", b.lexicon.to_json()},
                   {"valence", b.valence.to_json()},
                   {"model", model},
                   {"arrays", arrays.index()}};
  const std::string text = manifest.dump();

  binio::Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u64(text.size());
  w.bytes(text);
  w.f64s(arrays.data());
  return w.data();
}

ModelBundle decode_bundle(std::span<const char> bytes) {
  binio::Reader r(bytes);
  if (r.bytes(4) != kMagic) throw ValidationError("not an RSB1 model bundle");
  if (const auto v = r.u32(); v != kVersion) throw ValidationError("unsupported RSB1 version " + std::to_string(v));
  const auto len = r.u64();
  if (len > r.remaining()) throw ValidationError("truncated binary container");
  json manifest;
  try {
    manifest = json::parse(r.bytes(len));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("RSB1 manifest: ") + e.what());
  }

  try {
    const ArrayReader arrays(manifest.at("arrays"), r);
    if (!r.at_end()) throw ValidationError("trailing bytes after RSB1 payload");

    ModelBundle b;
    b.config = TrainConfig::from_json(manifest.at("config"));
    b.seed = manifest.at("seed").get<std::uint64_t>();
    const auto now = parse_rfc3339(manifest.at("reference_now").get<std::string>());
    if (!now) throw ValidationError("RSB1: bad reference_now");
    b.reference_now = *now;
    const auto& v = manifest.at("vocab");
    b.vocab = Vocabulary(v.at("terms").get<std::vector<std::string>>(), v.at("df").get<std::vector<std::uint32_t>>(),
                         v.at("documents").get<std::uint64_t>());
    b.lexicon = Lexicon::from_json(manifest.at("lexicon"));
    b.valence = ValenceTable::from_json(manifest.at("valence"));

    const auto& mj = manifest.at("model");
    auto& m = b.model;
    m.uses_stage1 = mj.at("uses_stage1").get<bool>();
    m.active = mj.at("active").get<std::vector<std::uint8_t>>();
    if (m.uses_stage1) {
      auto& s1 = m.stage1;
      s1.algorithm = parse_stage1(mj.at("stage1").at("algorithm").get<std::string>());
      s1.dim = mj.at("stage1").at("dim").get<std::size_t>();
      if (s1.algorithm == Stage1Algorithm::multinomial_nb) {
        const auto& p = arrays.get("stage1.log_prior", 2);
        s1.log_prior = {p[0], p[1]};
        s1.log_likelihood[0] = arrays.get("stage1.log_likelihood0", s1.dim);
        s1.log_likelihood[1] = arrays.get("stage1.log_likelihood1", s1.dim);
        s1.alpha = arrays.scalar("stage1.alpha");
      } else {
        s1.w = arrays.get("stage1.w", s1.dim);
        s1.b = arrays.scalar("stage1.b");
        s1.c = arrays.scalar("stage1.c");
      }
    }
    const auto& s2j = mj.at("stage2");
    auto& s2 = m.stage2;
    s2.algorithm = parse_stage2(s2j.at("algorithm").get<std::string>());
    if (s2.algorithm == Stage2Algorithm::rbf_svm) {
      const auto d = s2j.at("dim").get<std::size_t>();
      const auto nsv = s2j.at("support_vectors").get<std::size_t>();
      s2.scaler.mean = arrays.get("stage2.scaler.mean", m.active.size());
      s2.scaler.inv_scale = arrays.get("stage2.scaler.inv_scale", m.active.size());
      s2.svm.dim = d;
      s2.svm.iterations = s2j.at("iterations").get<std::size_t>();
      s2.svm.support = arrays.get("stage2.svm.support", nsv * d);
      s2.svm.coef = arrays.get("stage2.svm.coef", nsv);
      s2.svm.rho = arrays.scalar("stage2.svm.rho");
      s2.svm.gamma = arrays.scalar("stage2.svm.gamma");
      s2.svm.c = arrays.scalar("stage2.svm.c");
    } else {
      auto& bo = s2.boost;
      bo.max_depth = s2j.at("max_depth").get<std::size_t>();
      bo.rounds = s2j.at("rounds").get<std::size_t>();
      bo.stop_reason = s2j.at("stop_reason").get<std::string>();
      const auto& trees = s2j.at("trees");
      bo.alphas = arrays.get("stage2.alphas", trees.size());
      bo.errors = arrays.get("stage2.errors", trees.size());
      bo.bound = arrays.scalar("stage2.bound");
      bo.training_error = arrays.scalar("stage2.training_error");
      for (std::size_t t = 0; t < trees.size(); ++t) {
        const auto feats = trees[t].at("feature").get<std::vector<std::int32_t>>();
        const auto left = trees[t].at("left").get<std::vector<std::int32_t>>();
        const auto right = trees[t].at("right").get<std::vector<std::int32_t>>();
        const auto n = feats.size();
        if (left.size() != n || right.size() != n || n == 0) throw ValidationError("RSB1: malformed tree");
        const auto& thr = arrays.get("stage2.tree" + std::to_string(t) + ".threshold", n);
        const auto& val = arrays.get("stage2.tree" + std::to_string(t) + ".value", n);
        DecisionTree tree;
        for (std::size_t k = 0; k < n; ++k) {
          const auto in_range = [&](std::int32_t c) { return c > static_cast<std::int32_t>(k) && c < static_cast<std::int32_t>(n); };
          if (feats[k] >= 0 && (!in_range(left[k]) || !in_range(right[k]) ||
                                static_cast<std::size_t>(feats[k]) >= m.active.size())) {
            throw ValidationError("RSB1: malformed tree");
          }
          tree.nodes.push_back(TreeNode{feats[k], thr[k], left[k], right[k], val[k]});
        }
        bo.trees.push_back(std::move(tree));
      }
    }
    if (m.active.size() <= slot::derived) throw ValidationError("RSB1: dense width too small");
    return b;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("RSB1 manifest: ") + e.what());
  }
}

void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  const auto bytes = encode_bundle(b);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_bundle(bytes);
}

std::vector<Prediction> predict_events(const ModelBundle& b, std::span<const Event> events, unsigned threads) {
  std::vector<TweetRecord> records;
  for (const auto& e : events) {
    if (e.kind() == EventKind::tweet) {
      TweetRecord r;
      r.tweet = e.tweet();
      records.push_back(std::move(r));
    }
  }
  TextResources res;
  res.lexicon = b.lexicon;
  res.valence = b.valence;

  const bool with_responses = b.model.active.size() > kDenseDim;
  std::unordered_map<TweetId, std::vector<const TweetRecord*>> responses;
  if (with_responses) {
    for (const auto& r : records) {
      std::set<TweetId> targets;
      for (const auto& link : {r.tweet.in_reply_to_id, r.tweet.quoted_id, r.tweet.retweet_of_id}) {
        if (link) targets.insert(*link);
      }
      for (auto t : targets) responses[t].push_back(&r);
    }
  }

  std::vector<Prediction> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto& rec = records[i];
    const auto text = profile_text(rec.tweet.id, rec.tweet.text, res);
    const auto dense = dense_features(rec, text, b.reference_now);
    std::vector<double> row(dense.begin(), dense.end());
    if (with_responses) {
      auto it = responses.find(rec.tweet.id);
      std::vector<const TweetRecord*> rs = it == responses.end() ? std::vector<const TweetRecord*>{} : it->second;
      const auto resp = response_features(rec, rs, res);
      row.insert(row.end(), resp.begin(), resp.end());
    }
    const auto sparse = open_text_vector(text.tokens, b.vocab);
    const double score = b.model.decision(sparse, row);
    out[i] = {rec.tweet.id, score, score > 0.0};
  });
  return out;
}

}  // namespace regretstream
