#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vvs/activations.hpp"
#include "vvs/data.hpp"
#include "vvs/image.hpp"
#include "vvs/layers.hpp"

namespace vvs {

enum class Architecture { resnet18, tiny_conv };

std::string_view to_string(Architecture a);
Architecture architecture_from_string(std::string_view s);

struct BackboneConfig {
  Architecture architecture = Architecture::tiny_conv;
  // Feature dimension n. ResNet-18 requires 512.
  int feature_dim = 64;
  // Input side length k.
  int input_size = 32;
  // Channel width of the first tiny_conv stage (doubles per stage, the last
  // stage emits feature_dim channels). Ignored for resnet18.
  int width = 8;

  void validate() const;
  bool operator==(const BackboneConfig&) const = default;
};

struct HeadConfig {
  int projection_dim = 128;
  int hidden_dim = 512;
  static constexpr int rp_classes = 8;

  void validate() const;
  bool operator==(const HeadConfig&) const = default;
};

enum class ModelPart { backbone, projection, rp_head, all };

// The base network f with its projection head g (contrastive branch) and
// relative-position classifier h (RP branch).
//
// Training-mode calls cache intermediate values for the matching *_backward
// call; gradients accumulate in the parameters until zero_grad().
template <typename T>
class Model {
 public:
  Model(const BackboneConfig& backbone, const HeadConfig& heads, std::uint64_t init_seed = 0);
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  ~Model();

  const BackboneConfig& backbone_config() const { return backbone_cfg_; }
  const HeadConfig& head_config() const { return head_cfg_; }
  int feature_dim() const { return backbone_cfg_.feature_dim; }

  // f: images -> [batch, n]. Images must be input_size x input_size; with
  // allow_half_size, input_size/2 is accepted too (unresized RP blocks).
  nn::Mat<T> encode(std::span<const Image> images, bool train = false, bool allow_half_size = false);
  nn::Mat<T> encode(const ImageSet& images, bool train = false);
  void encode_backward(const nn::Mat<T>& dfeatures);

  // g: [batch, n] -> [batch, m]. No normalization.
  nn::Mat<T> project(const nn::Mat<T>& features, bool train = false);
  nn::Mat<T> project_backward(const nn::Mat<T>& dprojections);

  // h on the ordered concatenation (a then b): pre-softmax scores [batch, 8].
  nn::Mat<T> rp_logits(const nn::Mat<T>& feat_a, const nn::Mat<T>& feat_b, bool train = false);
  // Returns (dfeat_a, dfeat_b).
  std::pair<nn::Mat<T>, nn::Mat<T>> rp_logits_backward(const nn::Mat<T>& dlogits);
  // h with its softmax: each row is a distribution over the 8 directions.
  nn::Mat<T> classify_rp(const nn::Mat<T>& feat_a, const nn::Mat<T>& feat_b);

  // Names of recordable layers in network order: "stem", "layer1.0" ... "layer4.1".
  const std::vector<std::string>& layer_registry() const { return registry_; }
  // The eight block outputs (registry without the stem).
  std::vector<std::string> block_layers() const;

  // Evaluation-mode activations of the named layers, one row per stimulus,
  // spatial maps flattened as (channel, row, col).
  std::map<std::string, ActivationMatrix> record_activations(
      const ImageSet& images, const std::vector<std::string>& layer_names, int batch_size = 64);

  nn::ParamRefs<T> parameters(ModelPart part = ModelPart::all);
  std::size_t parameter_count(ModelPart part) const;
  void zero_grad();

  // A frozen model refuses training-mode calls (probe evaluation).
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  // Incremented by every optimizer update.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  // Copies all weights and buffers into another precision.
  template <typename U>
  void copy_to(Model<U>& other) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  BackboneConfig backbone_cfg_;
  HeadConfig head_cfg_;
  std::vector<std::string> registry_;
  std::uint64_t version_ = 0;
  bool frozen_ = false;

  void require_trainable(bool train) const;
  nn::FeatureMap<T> to_input(std::span<const Image> images, bool allow_half_size) const;
  nn::FeatureMap<T> to_input(const ImageSet& images, int first, int count) const;
  nn::Mat<T> run_backbone(nn::FeatureMap<T> x, bool train,
                          std::map<std::string, nn::FeatureMap<T>>* taps = nullptr);
};

}  // namespace vvs
