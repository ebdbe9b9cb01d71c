#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vvs/activations.hpp"
#include "vvs/data.hpp"
#include "vvs/pls.hpp"

namespace vvs {

struct PearsonResult {
  double r = 0.0;
  bool degenerate = false;  // a zero-variance input; r is then 0
};

PearsonResult pearson(std::span<const double> a, std::span<const double> b);
PearsonResult pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

inline constexpr double kCeilingFloor = 0.01;

struct NoiseCeiling {
  Eigen::VectorXd ceiling;       // Spearman-Brown corrected, clamped to [floor, 1]
  Eigen::VectorXd split_half_r;  // median raw split-half correlation
};

// Split-half reliability per neuron: random halves of the repetitions,
// Pearson between half-means over stimuli, Spearman-Brown 2r/(1+r), median
// over n_iterations splits.
NoiseCeiling noise_ceiling(const NeuralRecording& recording, int n_iterations, std::uint64_t seed);

struct CVSpec {
  int n_splits = 10;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  void validate() const;
  bool operator==(const CVSpec&) const = default;
};

struct ScoreDistribution {
  double center = 0.0;  // median over splits
  double spread = 0.0;  // sample standard deviation over splits
  std::vector<double> per_split;
};

ScoreDistribution summarize_splits(std::vector<double> per_split);

struct LayerScoreOptions {
  int n_components = 25;
  // Wider activations are randomly projected to this many features; 0 disables.
  int max_features = 4096;
  int ceiling_iterations = 30;
  std::uint64_t projection_seed = 0;
};

// Per split: PLS on the training stimuli (repetition-averaged responses),
// held-out Pearson per neuron divided by its ceiling and clamped to
// [-1, 1.5], median over neurons.
ScoreDistribution layer_score(const ActivationMatrix& acts, const NeuralRecording& recording,
                              const CVSpec& cv, const LayerScoreOptions& options = {});
ScoreDistribution layer_score(const ActivationMatrix& acts, const NeuralRecording& recording,
                              const CVSpec& cv, const LayerScoreOptions& options,
                              const NoiseCeiling& ceiling);

// Seeded Gaussian projection of the columns down to `features` columns.
Eigen::MatrixXd random_projection(const Eigen::MatrixXf& values, int features, std::uint64_t seed);

struct BrainScoreReport {
  Region region = Region::V1;
  std::vector<std::pair<std::string, ScoreDistribution>> per_layer;  // network order
  std::string best_layer;
  ScoreDistribution model_score;
};

// per_layer must be in network order (shallow first); ties go to the
// shallower layer.
BrainScoreReport model_score(Region region,
                             std::vector<std::pair<std::string, ScoreDistribution>> per_layer);

nlohmann::json to_json(const ScoreDistribution& s);
nlohmann::json to_json(const BrainScoreReport& r);

// Layer x region table: layer, then <region>,<region>_spread per region, and
// a final "model" row with each region's best layer score.
std::string brain_score_csv(const std::vector<BrainScoreReport>& reports);

}  // namespace vvs
