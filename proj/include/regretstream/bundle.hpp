#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "regretstream/classify.hpp"
#include "regretstream/features.hpp"
#include "regretstream/ingest.hpp"
#include "regretstream/textkit.hpp"

namespace regretstream {

/// Everything needed to score new tweets: the training configuration and
/// seed, the vocabulary, the lexicon and valence table the features were
/// computed with, the reference instant for account ages and the model.
struct ModelBundle {
  TrainConfig config;
  std::uint64_t seed = 0;
  Vocabulary vocab;
  Lexicon lexicon;
  ValenceTable valence;
  Timestamp reference_now;
  PipelineModel model;
};

// Container ("RSB1", little-endian):
//   magic "RSB1" | u32 version (1) | u64 manifest bytes | manifest JSON
//   | f64 arrays in the order listed under manifest["arrays"]
// The manifest holds the configuration, seed, vocabulary, lexicon, valence
// table, reference instant and model structure (tree topology, sizes); all
// real-valued parameters live in the arrays.
std::vector<char> encode_bundle(const ModelBundle& b);
ModelBundle decode_bundle(std::span<const char> bytes);
void save_bundle(const ModelBundle& b, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

struct Prediction {
  TweetId id = 0;
  double score = 0.0;
  bool deleted = false;
};

/// Scores every tweet event. For bundles trained with the response block,
/// responses are looked up among the same events.
std::vector<Prediction> predict_events(const ModelBundle& b, std::span<const Event> events, unsigned threads = 1);

}  // namespace regretstream
