#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vvs/augment.hpp"
#include "vvs/brainsim.hpp"
#include "vvs/model.hpp"
#include "vvs/probes.hpp"
#include "vvs/trainer.hpp"

namespace vvs {

using nlohmann::json;

// Where images come from. Relative paths resolve against $VVS_DATA_ROOT.
struct DatasetSpec {
  std::string kind = "synthetic";  // synthetic | stl10 | image_dir
  std::string path;
  std::string split = "train";     // stl10 split
  int limit = 0;                   // 0: all
  std::uint64_t seed = 7;          // synthetic
  int count = 4000;                // synthetic
  int n_classes = 4;               // synthetic
  // Side length of the loaded images (synthetic k; resample target for
  // stl10 and image_dir, 0 keeps the stored size).
  int image_size = 32;

  void validate(const std::string& field) const;
  bool operator==(const DatasetSpec&) const = default;
};

struct ProbeConfig {
  ProbeOptions options;
  DatasetSpec train_set;
  DatasetSpec test_set;
  std::uint64_t seed = 0;
  int rpp_samples_per_image = 1;

  bool operator==(const ProbeConfig&) const = default;
};

struct NeuralDatasetSpec {
  std::string path;
  bool drop_nan_neurons = false;
  bool operator==(const NeuralDatasetSpec&) const = default;
};

struct BrainsimConfig {
  std::vector<NeuralDatasetSpec> recordings;
  std::vector<std::string> layers;  // empty: the eight block outputs
  CVSpec cv;
  int n_components = 25;
  int max_features = 4096;
  int ceiling_iterations = 30;
  // How stimuli are brought to the model's input size.
  std::string stimulus_resize = "bilinear";

  bool operator==(const BrainsimConfig&) const = default;
};

struct SweepConfig {
  std::vector<double> alphas;
  std::vector<std::uint64_t> seeds;  // empty: train.seed only
  int parallelism = 1;
  bool plots = true;

  bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TrainConfig train;
  DatasetSpec data;
  ProbeConfig probe;
  BrainsimConfig brainsim;
  SweepConfig sweep;
  std::string output_dir = "runs";

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;

  // Desk-scale defaults: tiny_conv on a synthetic 4-class 32x32 corpus.
  static ExperimentConfig desk();
  // ResNet-18 on STL-10 with the seven-value alpha sweep.
  static ExperimentConfig full();
};

json to_json(const AugmentPolicy& p);
json to_json(const BackboneConfig& c);
json to_json(const HeadConfig& c);
json to_json(const TrainConfig& c);
json to_json(const DatasetSpec& d);
json to_json(const ExperimentConfig& c);

// Parsers reject unknown keys and wrong types with a ConfigError naming the
// dotted field.
AugmentPolicy augment_policy_from_json(const json& j, const std::string& prefix = "train.augment");
BackboneConfig backbone_config_from_json(const json& j, const std::string& prefix = "train.backbone");
HeadConfig head_config_from_json(const json& j, const std::string& prefix = "train.heads");
TrainConfig train_config_from_json(const json& j, const std::string& prefix = "train");
ExperimentConfig experiment_config_from_json(const json& j);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& c);

// Sets a dotted path ("train.alpha") in a config document. The value is
// parsed as JSON when possible, otherwise taken as a string.
void apply_override(json& doc, const std::string& dotted_path, const std::string& value);

// Resolves a dataset path against $VVS_DATA_ROOT when it is relative.
std::filesystem::path resolve_data_path(const std::string& path);

// The seven alpha values of the full-scale sweep.
std::vector<double> reference_alpha_sweep();

}  // namespace vvs
