#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "regretstream/features.hpp"
#include "regretstream/ingest.hpp"

namespace regretstream {

// ---------------------------------------------------------------------------
// Evaluation

struct EvalMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  friend bool operator==(const EvalMetrics&, const EvalMetrics&) = default;
};

/// Positive class is 1 (deleted). Precision is 0 without positive
/// predictions; F1 is 0 when P + R = 0. Throws ValidationError on a length
/// mismatch.
EvalMetrics evaluate(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

/// Element-wise mean of precision, recall and F1; confusion counts summed.
EvalMetrics mean_metrics(std::span<const EvalMetrics> folds);

nlohmann::json to_json(const EvalMetrics& m);

// ---------------------------------------------------------------------------
// Sampling and folds

/// Per user, up to min(#deleted, #non-deleted) pairs drawn uniformly; users
/// visited in seeded random order until n_per_class pairs are collected
/// (n_per_class = 0 takes every available pair). Returns indices into
/// corpus.tweets, deleted and non-deleted interleaved pair by pair. Only
/// tweets passing `eligible` are considered. Throws ValidationError when
/// fewer pairs exist than requested, naming the achievable maximum.
std::vector<std::size_t> balanced_sample(const Corpus& corpus, std::size_t n_per_class, std::uint64_t seed,
                                         const std::function<bool(const TweetRecord&)>& eligible = {});

/// Fold index per row, classes dealt round-robin after a seeded shuffle.
/// Throws ValidationError when k < 2 or a class has fewer than k rows.
std::vector<std::size_t> stratified_folds(std::span<const std::uint8_t> y, std::size_t k, std::uint64_t seed);

/// Stratified holdout: returns (train, test) row indices, both ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const std::uint8_t> y,
                                                                               double test_fraction,
                                                                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Stage 1: sparse open-text classifier

enum class Stage1Algorithm { multinomial_nb, linear_svm };
std::string_view stage1_name(Stage1Algorithm a);
Stage1Algorithm parse_stage1(std::string_view name);

struct Stage1Hyper {
  double nb_alpha = 0.1;
  double svm_c = 1e-6;
  std::size_t svm_epochs = 30;

  friend bool operator==(const Stage1Hyper&, const Stage1Hyper&) = default;
};

struct Stage1Model {
  Stage1Algorithm algorithm = Stage1Algorithm::linear_svm;
  std::size_t dim = 0;
  // Multinomial NB: log priors and per-term log likelihoods, class 0 then 1.
  std::array<double, 2> log_prior{};
  std::vector<double> log_likelihood[2];
  double alpha = 0.0;
  // Linear SVM: decision w.x + b.
  std::vector<double> w;
  double b = 0.0;
  double c = 0.0;

  /// SVM margin w.x + b, or NB log-odds log P(1|x) - log P(0|x).
  double decision(const SparseVector& x) const;
  std::uint8_t predict(const SparseVector& x) const { return decision(x) > 0.0 ? 1 : 0; }
  /// NB only: normalized log posteriors {log P(0|x), log P(1|x)}.
  std::array<double, 2> log_posterior(const SparseVector& x) const;
};

/// NB uses the TF-IDF weights as fractional counts. The SVM minimizes
/// lambda/2 |w|^2 + mean hinge loss with lambda = 1/(C n) by Pegasos steps
/// 1/(lambda t) over `svm_epochs` seeded shuffles; the bias is a constant
/// feature 1 and is regularized with w. Throws ValidationError for
/// single-class input or alpha <= 0.
Stage1Model train_stage1(std::span<const SparseVector> x, std::span<const std::uint8_t> y, std::size_t dim,
                         Stage1Algorithm algorithm, const Stage1Hyper& hyper, std::uint64_t seed);

/// (w.x + b)/|w| for the SVM (bias excluded from the norm); log-odds for NB.
/// Throws ValidationError for a zero weight vector.
double derived_feature(const Stage1Model& m, const SparseVector& x);

// ---------------------------------------------------------------------------
// Stage 2: dense classifier

enum class Stage2Algorithm { rbf_svm, adaboost };
std::string_view stage2_name(Stage2Algorithm a);
Stage2Algorithm parse_stage2(std::string_view name);

struct Stage2Hyper {
  double rbf_c = 0.1;
  double rbf_gamma = 0.001;
  double smo_tolerance = 1e-3;
  std::size_t max_depth = 5;
  std::size_t rounds = 100;

  friend bool operator==(const Stage2Hyper&, const Stage2Hyper&) = default;
};

inline constexpr std::size_t kRbfMaxRows = 20000;

/// z-score parameters. Slots with zero spread or masked out map to 0.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> inv_scale;

  static Scaler fit(std::span<const std::vector<double>> rows, std::span<const std::uint8_t> active);
  void apply(std::span<double> x) const;
};

struct RbfSvmModel {
  std::size_t dim = 0;
  std::vector<double> support;  // row-major support vectors (already scaled)
  std::vector<double> coef;     // alpha_i * y_i
  double rho = 0.0;             // decision = sum coef_i K(s_i, x) - rho
  double gamma = 0.0;
  double c = 0.0;
  std::size_t iterations = 0;

  double decision(std::span<const double> x) const;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 for leaves
  double threshold = 0.0;     // go left iff x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf output, +1 or -1
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(std::span<const double> x) const;
  std::size_t depth() const;
};

/// Weighted Gini tree. Splits at midpoints between consecutive distinct
/// values; ties go to the lowest feature and threshold. Nodes stop when pure,
/// at max_depth, or when no feature has two distinct values.
DecisionTree fit_tree(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y,
                      std::span<const double> weights, std::size_t max_depth);

struct AdaBoostModel {
  std::vector<DecisionTree> trees;
  std::vector<double> alphas;
  std::vector<double> errors;  // weighted error of each accepted round
  std::size_t max_depth = 0;
  std::size_t rounds = 0;
  std::string stop_reason;     // empty when all rounds ran
  double bound = 1.0;          // prod_t Z_t
  double training_error = 0.0;

  double decision(std::span<const double> x) const;
};

/// Largest stage weight, used when a round has zero weighted error.
inline constexpr double kAdaBoostMaxAlpha = 10.0;

/// Discrete two-class AdaBoost. A round with weighted error >= 0.5 is not
/// added and ends training; a round with error 0 is added with the capped
/// weight and ends training. Throws std::logic_error if the training error
/// exceeds prod_t Z_t.
AdaBoostModel train_adaboost(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y,
                             std::size_t max_depth, std::size_t rounds);

/// SMO with second-order working-set selection on the given (already
/// scaled) rows. Throws ConfigError beyond kRbfMaxRows rows.
RbfSvmModel train_rbf_svm(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y, double c,
                          double gamma, double tolerance = 1e-3);

struct Stage2Model {
  Stage2Algorithm algorithm = Stage2Algorithm::adaboost;
  Scaler scaler;  // used by the RBF-SVM only
  RbfSvmModel svm;
  AdaBoostModel boost;

  double decision(std::span<const double> raw) const;
};

Stage2Model train_stage2(std::span<const std::vector<double>> x, std::span<const std::uint8_t> y,
                         std::span<const std::uint8_t> active, Stage2Algorithm algorithm, const Stage2Hyper& hyper);

// ---------------------------------------------------------------------------
// Two-stage pipeline

struct GridCell {
  Stage1Hyper stage1;
  Stage2Hyper stage2;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

nlohmann::json to_json(const GridCell& c);

struct TrainConfig {
  Stage1Algorithm stage1 = Stage1Algorithm::linear_svm;
  Stage2Algorithm stage2 = Stage2Algorithm::adaboost;
  std::vector<GridCell> grid = {GridCell{}};
  std::size_t folds = 10;         // grid-search CV folds
  std::size_t stage1_folds = 10;  // out-of-fold derived feature inside each training set
  double test_fraction = 0.2;
  std::size_t n_per_class = 0;    // 0 = every available pair
  bool with_responses = false;
  std::vector<FeatureGroup> masked;

  /// Throws ConfigError for invalid values.
  void validate() const;
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Dense slots a stage-2 model may use: 1 except for masked groups.
std::vector<std::uint8_t> active_slots(const TrainConfig& cfg, std::size_t dim);

struct PipelineModel {
  bool uses_stage1 = true;
  Stage1Model stage1;
  Stage2Model stage2;
  std::vector<std::uint8_t> active;  // per dense slot

  /// Fills slot 111 from stage 1, zeroes masked slots, applies stage 2.
  double decision(const SparseVector& sparse, std::span<const double> dense) const;
  std::uint8_t predict(const SparseVector& sparse, std::span<const double> dense) const {
    return decision(sparse, dense) > 0.0 ? 1 : 0;
  }
};

/// Rows shared by the training entry points.
struct TrainingRows {
  std::vector<SparseVector> sparse;
  std::vector<std::vector<double>> dense;  // 112 or 112 + 93 slots
  std::vector<std::uint8_t> y;
  std::size_t vocab_size = 0;

  TrainingRows subset(std::span<const std::size_t> idx) const;
};

/// Stage 1 out-of-fold for slot 111 of the training rows, a final stage 1 on
/// all of them, then stage 2.
PipelineModel fit_pipeline(const TrainingRows& rows, const TrainConfig& cfg, const GridCell& cell,
                           std::uint64_t seed);

EvalMetrics evaluate_pipeline(const PipelineModel& m, const TrainingRows& rows);

struct GridResult {
  std::size_t best = 0;
  std::vector<EvalMetrics> cell_means;  // mean over folds, per cell
};

/// Stratified k-fold; each training fold runs the whole pipeline (so stage 1
/// never sees its validation fold). Best cell = highest mean F1, first on
/// ties. Throws ValidationError for an empty grid.
GridResult grid_search_cv(const TrainingRows& rows, const TrainConfig& cfg, std::uint64_t seed, unsigned threads = 1);

/// Balanced sample, holdout split and featurization with a vocabulary built
/// from the training split only.
struct PreparedData {
  std::vector<std::size_t> corpus_rows;  // indices into corpus.tweets
  TrainingRows rows;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  Vocabulary vocab;
};

PreparedData prepare_data(const Corpus& corpus, const TrainConfig& cfg, const TextResources& res, std::uint64_t seed,
                          unsigned threads = 1);

struct TrainReport {
  PipelineModel model;
  Vocabulary vocab;
  EvalMetrics test;
  EvalMetrics cv_mean;
  GridResult grid;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

TrainReport two_stage_train(const Corpus& corpus, const TrainConfig& cfg, const TextResources& res,
                            std::uint64_t seed, unsigned threads = 1);

/// Trains on an already prepared split (same sample for several configs).
TrainReport train_prepared(const PreparedData& data, const TrainConfig& cfg, std::uint64_t seed,
                           unsigned threads = 1);

nlohmann::json to_json(const TrainReport& r, const TrainConfig& cfg, std::uint64_t seed);

struct AblationRow {
  std::optional<FeatureGroup> group;  // nullopt = all features
  EvalMetrics cv_mean;
  EvalMetrics test;
  double f1_delta = 0.0;       // cv F1 minus baseline cv F1
  double f1_relative = 0.0;    // f1_delta / baseline cv F1
};

struct AblationReport {
  std::vector<AblationRow> rows;  // baseline first
};

/// Retrains with each group masked on the same sample and split.
AblationReport ablate(const Corpus& corpus, const TrainConfig& cfg, std::span<const FeatureGroup> groups,
                      const TextResources& res, std::uint64_t seed, unsigned threads = 1);

nlohmann::json to_json(const AblationReport& r);
std::string to_csv(const AblationReport& r);

struct ResponseModeComparison {
  std::size_t rows = 0;
  TrainReport post_time;
  TrainReport with_responses;
};

/// Same replied-to sample and split, with and without the response block.
ResponseModeComparison compare_response_modes(const Corpus& corpus, const TrainConfig& cfg, const TextResources& res,
                                              std::uint64_t seed, unsigned threads = 1);

}  // namespace regretstream
