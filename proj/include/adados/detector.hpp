#pragma once

// Binary attack classifiers over feature vectors. Two model families are
// provided: k-nearest-neighbours on z-scored features and a gradient-boosted
// ensemble of depth-2 regression trees with logistic loss. Models are
// immutable after training and safe to share across episodes.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adados/features.hpp"

namespace adados::detector {

struct LabeledExample {
  features::FeatureVector features;
  int label = 0;  // 0 benign, 1 attack
};

enum class ModelKind { knn, gbdt };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct Hyperparams {
  // knn
  int k = 5;
  // gbdt
  int rounds = 60;
  double learning_rate = 0.2;
  double l2_reg = 1.0;
  int min_samples_leaf = 4;
  // shared
  double threshold = 0.5;
};

struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double split = 0.0;     // go left when x[feature] <= split
  double value = 0.0;     // leaf weight
  int left = -1, right = -1;
};

struct BoostedTree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> x) const;
};

class DetectorModel {
 public:
  // default-constructed models are untrained and reject prediction
  DetectorModel() = default;

  // throws std::invalid_argument when only one class is present
  static DetectorModel train(std::span<const LabeledExample> examples, ModelKind kind,
                             const Hyperparams& hp = {});

  int predict(const features::FeatureVector& f) const;
  double predict_proba(const features::FeatureVector& f) const;

  ModelKind kind() const { return kind_; }
  double threshold() const { return hp_.threshold; }
  bool trained() const { return trained_; }

  // per-boosting-round training loss, recorded for gbdt models
  const std::vector<double>& training_losses() const { return round_losses_; }

  void save(const std::string& path) const;
  static DetectorModel load(const std::string& path);

 private:
  std::vector<double> zscore(std::span<const double> x) const;

  ModelKind kind_ = ModelKind::knn;
  Hyperparams hp_;
  bool trained_ = false;

  // z-scoring of inputs, shared by both families
  std::vector<double> feat_mean_, feat_std_;

  // knn state
  std::vector<std::vector<double>> points_;
  std::vector<int> labels_;

  // gbdt state
  double bias_ = 0.0;
  std::vector<BoostedTree> trees_;
  std::vector<double> round_losses_;

  friend struct ModelSerde;
};

struct DetectorReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double false_positive_rate = 0.0;
  int tp = 0, tn = 0, fp = 0, fn = 0;
};

DetectorReport evaluate(const DetectorModel& model, std::span<const LabeledExample> examples);

// One example per trailing window position, labelled 1 when any burst
// overlaps the window's covered time span. stride is in samples.
std::vector<LabeledExample> label_windows(std::span<const netsim::TrafficSample> samples,
                                          std::span<const netsim::AttackBurst> bursts,
                                          int window_len, int stride = 1,
                                          double peak_multiplier = 2.0);

// Heuristic extra: flags windows whose UDP series shows a strong repeating
// pulse (autocorrelation peak at lag >= 2). Not a learned model; provided
// as a rule-based point of comparison.
struct PeriodicityRule {
  double autocorr_threshold = 0.6;
  double min_std_mbit = 0.05;

  int predict(std::span<const netsim::TrafficSample> window) const;
};

void save_examples_csv(std::span<const LabeledExample> examples, const std::string& path);
std::vector<LabeledExample> load_examples_csv(const std::string& path);

}  // namespace adados::detector
