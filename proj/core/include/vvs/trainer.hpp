#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vvs/augment.hpp"
#include "vvs/data.hpp"
#include "vvs/losses.hpp"
#include "vvs/model.hpp"

namespace vvs {

enum class LrSchedule { constant, cosine };

std::string_view to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(std::string_view s);

struct TrainConfig {
  int batch_size = 128;
  int epochs = 30;
  double learning_rate = 0.5;
  double weight_decay = 1e-6;
  double momentum = 0.9;
  double alpha = 0.01;
  double temperature = 0.5;
  TemperatureMode temperature_mode = TemperatureMode::inside_exp;
  std::uint64_t seed = 0;
  AugmentPolicy augment;
  BackboneConfig backbone;
  HeadConfig heads;
  // Write a checkpoint every this many epochs (0: final checkpoint only).
  int checkpoint_every = 0;
  LrSchedule lr_schedule = LrSchedule::constant;
  // Resample k/2 quadrant blocks to the encoder input size k.
  bool rp_block_resize = true;
  // Compute the RP branch at all. Off removes it from the step entirely.
  bool rp_branch = true;
  // Skip non-finite batches and, after the second one, clip the gradient
  // norm to grad_clip_norm. Off: the first non-finite loss aborts.
  bool grad_clip_failsafe = false;
  double grad_clip_norm = 5.0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;

  // ResNet-18, N = 512, lr 1.5, wd 1e-6, momentum 0.9, 500 epochs, 96 px.
  static TrainConfig full_preset();
  // tiny_conv, N = 128, lr 0.5, 30 epochs, 32 px.
  static TrainConfig desk_preset();
};

// Settings of the combined objective that the gradient computation needs.
struct ObjectiveConfig {
  double alpha = 0.0;
  double temperature = 0.5;
  TemperatureMode temperature_mode = TemperatureMode::inside_exp;
  bool rp_branch = true;
};

// Inputs of one step: 2N views (rows 2i and 2i+1 come from image i) and N
// quadrant pairs with their direction labels.
struct DualTaskBatch {
  std::vector<Image> views;
  std::vector<Image> blocks;  // N "a" blocks followed by N "b" blocks
  std::vector<int> labels;
};

// Builds the batch for images drawn in one step. Views and RP samples use
// separate streams derived from (seed, epoch, batch_index).
DualTaskBatch make_dual_task_batch(std::span<const ImageView> images, const TrainConfig& config,
                                   std::uint64_t epoch, std::uint64_t batch_index);

// Forward both branches in training mode and, if backward is set, leave
// dL/dtheta in the model's parameter gradients (zeroed first). f receives
// gradient from both branches, g only from the contrastive loss and h only
// from alpha times the RP loss. With alpha = 0 the RP loss is evaluated but
// not back-propagated.
template <typename T>
LossBreakdown dual_task_objective(Model<T>& model, const DualTaskBatch& batch,
                                  const ObjectiveConfig& objective, bool backward);

struct StepLog {
  int epoch = 0;
  std::uint64_t step = 0;
  LossBreakdown loss;
};

struct EpochLog {
  int epoch = 0;
  int steps = 0;
  double cl_loss = 0.0;
  double rpl_loss = 0.0;
  double total = 0.0;
  double alpha = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<std::filesystem::path> checkpoints;
};

// Owns one model and its optimizer state.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  Trainer(TrainConfig config, Model<float> model);

  const TrainConfig& config() const { return config_; }
  Model<float>& model() { return model_; }
  const Model<float>& model() const { return model_; }
  std::uint64_t global_step() const { return global_step_; }

  // One optimizer update on a batch of raw images.
  LossBreakdown step(std::span<const ImageView> images, int epoch, std::uint64_t batch_index);

  // Full training run. With a run directory, writes train_log.jsonl and
  // checkpoints/ there. on_step is called after every update.
  TrainResult train(const ImageSet& images,
                    const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                    const std::function<void(const StepLog&)>& on_step = {});

 private:
  TrainConfig config_;
  Model<float> model_;
  std::vector<std::vector<float>> velocity_;
  std::uint64_t global_step_ = 0;
  std::uint64_t total_steps_ = 0;
  int non_finite_events_ = 0;
  bool clipping_ = false;

  double current_lr() const;
  void apply_update(double lr);
};

}  // namespace vvs
