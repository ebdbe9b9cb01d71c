#include "vvs/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "vvs/checkpoint.hpp"
#include "vvs/config.hpp"
#include "vvs/error.hpp"
#include "vvs/rng.hpp"

namespace vvs {

std::string_view to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

LrSchedule lr_schedule_from_string(std::string_view s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  throw ConfigError("train.lr_schedule", "expected constant or cosine");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train.batch_size", "must be at least 2");
  if (epochs < 1) throw ConfigError("train.epochs", "must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("train.learning_rate", "must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum", "must be in [0, 1)");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("train.alpha", "must be non-negative");
  if (!(temperature > 0.0)) throw ConfigError("train.temperature", "must be positive");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every", "must be non-negative");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("train.grad_clip_norm", "must be positive");
  augment.validate();
  backbone.validate();
  heads.validate();
  if (backbone.input_size % 2 != 0)
    throw ConfigError("train.backbone.input_size", "must be even (quadrant split)");
}

TrainConfig TrainConfig::full_preset() {
  TrainConfig c;
  c.batch_size = 512;
  c.epochs = 500;
  c.learning_rate = 1.5;
  c.weight_decay = 1e-6;
  c.momentum = 0.9;
  c.alpha = 0.01;
  c.backbone.architecture = Architecture::resnet18;
  c.backbone.feature_dim = 512;
  c.backbone.input_size = 96;
  c.heads.projection_dim = 128;
  c.heads.hidden_dim = 512;
  c.checkpoint_every = 50;
  return c;
}

TrainConfig TrainConfig::desk_preset() {
  TrainConfig c;
  c.batch_size = 128;
  c.epochs = 30;
  c.learning_rate = 0.5;
  c.weight_decay = 1e-6;
  c.momentum = 0.9;
  c.alpha = 0.01;
  c.backbone.architecture = Architecture::tiny_conv;
  c.backbone.feature_dim = 64;
  c.backbone.input_size = 32;
  c.backbone.width = 8;
  c.heads.projection_dim = 64;
  c.heads.hidden_dim = 128;
  return c;
}

DualTaskBatch make_dual_task_batch(std::span<const ImageView> images, const TrainConfig& config,
                                   std::uint64_t epoch, std::uint64_t batch_index) {
  DualTaskBatch b;
  const int k = config.backbone.input_size;
  AugmentPolicy policy = config.augment;
  if (policy.output_size == 0) policy.output_size = k;

  Rng view_rng = make_rng(config.seed, {stream::kViews, epoch, batch_index});
  b.views.reserve(images.size() * 2);
  for (const auto& img : images) {
    auto [v1, v2] = make_views(img, view_rng, policy);
    b.views.push_back(std::move(v1));
    b.views.push_back(std::move(v2));
  }

  Rng rp_rng = make_rng(config.seed, {stream::kRelPos, epoch, batch_index});
  std::vector<Image> as, bs;
  as.reserve(images.size());
  bs.reserve(images.size());
  for (const auto& img : images) {
    QuadrantSample s = sample_rp_pair(img, rp_rng);
    if (config.rp_block_resize) {
      as.push_back(resize_bilinear(s.block_a.view(), k, k));
      bs.push_back(resize_bilinear(s.block_b.view(), k, k));
    } else {
      as.push_back(std::move(s.block_a));
      bs.push_back(std::move(s.block_b));
    }
    b.labels.push_back(s.d);
  }
  b.blocks = std::move(as);
  for (auto& x : bs) b.blocks.push_back(std::move(x));
  return b;
}

template <typename T>
LossBreakdown dual_task_objective(Model<T>& model, const DualTaskBatch& batch,
                                  const ObjectiveConfig& objective, bool backward) {
  if (batch.views.empty()) throw ShapeError("step: empty batch");
  if (backward) model.zero_grad();

  // Contrastive branch: f and g.
  nn::Mat<T> feats = model.encode(batch.views, true);
  nn::Mat<T> proj = model.project(feats, true);
  double cl = 0.0;
  if (backward) {
    LossGrad<T> lg = nt_xent_with_grad(proj, objective.temperature, objective.temperature_mode);
    cl = lg.value;
    model.encode_backward(model.project_backward(lg.grad));
  } else {
    cl = nt_xent(proj, objective.temperature, objective.temperature_mode);
  }

  if (!objective.rp_branch) return combined_loss(cl, 0.0, objective.alpha);

  // RP branch: f and h. With alpha = 0 the loss is only monitored, in
  // evaluation mode so that it leaves no trace in the batch-norm statistics.
  const bool optimize_rp = objective.alpha > 0.0;
  const bool half = !batch.blocks.empty() && batch.blocks[0].height != model.backbone_config().input_size;
  const Eigen::Index n = static_cast<Eigen::Index>(batch.labels.size());
  nn::Mat<T> bf = model.encode(batch.blocks, optimize_rp, half);
  nn::Mat<T> fa = bf.topRows(n);
  nn::Mat<T> fb = bf.bottomRows(n);
  nn::Mat<T> logits = model.rp_logits(fa, fb, optimize_rp);
  LossGrad<T> rg = rp_loss_from_logits(logits, batch.labels);
  if (backward && optimize_rp) {
    nn::Mat<T> dlogits = rg.grad * static_cast<T>(objective.alpha);
    auto [dfa, dfb] = model.rp_logits_backward(dlogits);
    nn::Mat<T> dbf(bf.rows(), bf.cols());
    dbf.topRows(n) = dfa;
    dbf.bottomRows(n) = dfb;
    model.encode_backward(dbf);
  }
  return combined_loss(cl, rg.value, objective.alpha);
}

template LossBreakdown dual_task_objective<float>(Model<float>&, const DualTaskBatch&,
                                                  const ObjectiveConfig&, bool);
template LossBreakdown dual_task_objective<double>(Model<double>&, const DualTaskBatch&,
                                                   const ObjectiveConfig&, bool);

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

nlohmann::json loss_json(const LossBreakdown& l) {
  return {{"cl_loss", l.cl_loss}, {"rpl_loss", l.rpl_loss}, {"total", l.total}, {"alpha", l.alpha}};
}

}  // namespace

Trainer::Trainer(TrainConfig config)
    : Trainer(config, Model<float>(config.backbone, config.heads, config.seed)) {}

Trainer::Trainer(TrainConfig config, Model<float> model)
    : config_(std::move(config)), model_(std::move(model)) {
  config_.validate();
  if (!(model_.backbone_config() == config_.backbone) || !(model_.head_config() == config_.heads))
    throw ConfigError("train.backbone", "model does not match the configuration");
  for (auto* p : model_.parameters().params) velocity_.emplace_back(p->size(), 0.0f);
}

double Trainer::current_lr() const {
  if (config_.lr_schedule == LrSchedule::constant || total_steps_ == 0) return config_.learning_rate;
  const double progress = std::min(1.0, static_cast<double>(global_step_) / total_steps_);
  return 0.5 * config_.learning_rate * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void Trainer::apply_update(double lr) {
  auto refs = model_.parameters();
  double clip_scale = 1.0;
  if (clipping_) {
    double sq = 0.0;
    for (auto* p : refs.params)
      for (float g : p->grad) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.grad_clip_norm) clip_scale = config_.grad_clip_norm / norm;
  }
  const float mu = static_cast<float>(config_.momentum);
  const float wd = static_cast<float>(config_.weight_decay);
  const float rate = static_cast<float>(lr);
  const float cs = static_cast<float>(clip_scale);
  for (std::size_t i = 0; i < refs.params.size(); ++i) {
    auto& p = *refs.params[i];
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const float g = p.grad[j] * cs + wd * p.value[j];
      v[j] = mu * v[j] + g;
      p.value[j] -= rate * v[j];
    }
  }
  model_.bump_version();
}

LossBreakdown Trainer::step(std::span<const ImageView> images, int epoch, std::uint64_t batch_index) {
  if (images.empty()) throw ShapeError("step: empty batch");
  if (images.size() < 2) throw ShapeError("step: need at least 2 images for the contrastive loss");
  if (model_.frozen()) throw Error("step: model is frozen (probe mode); training is not allowed");

  DualTaskBatch batch = make_dual_task_batch(images, config_, static_cast<std::uint64_t>(epoch), batch_index);
  ObjectiveConfig obj{config_.alpha, config_.temperature, config_.temperature_mode, config_.rp_branch};
  LossBreakdown loss = dual_task_objective(model_, batch, obj, true);

  bool finite = std::isfinite(loss.total);
  if (finite) {
    for (auto* p : model_.parameters().params)
      for (float g : p->grad)
        if (!std::isfinite(g)) {
          finite = false;
          break;
        }
  }
  if (!finite) {
    double mean = 0.0;
    std::size_t count = 0;
    for (const auto& im : images) {
      for (float v : im.data) mean += v;
      count += im.data.size();
    }
    std::ostringstream diag;
    diag << "non-finite loss at epoch " << epoch << " batch " << batch_index << ": cl_loss=" << loss.cl_loss
         << " rpl_loss=" << loss.rpl_loss << " total=" << loss.total << " batch_size=" << images.size()
         << " pixel_mean=" << (count ? mean / count : 0.0) << " lr=" << current_lr();
    if (!config_.grad_clip_failsafe) throw NumericError(diag.str());
    ++non_finite_events_;
    if (non_finite_events_ > 2) throw NumericError(diag.str() + " (gradient clipping did not help)");
    if (non_finite_events_ == 2) clipping_ = true;
    model_.zero_grad();
    return loss;
  }

  apply_update(current_lr());
  ++global_step_;
  return loss;
}

TrainResult Trainer::train(const ImageSet& images, const std::optional<std::filesystem::path>& run_dir,
                           const std::function<void(const StepLog&)>& on_step) {
  const int k = config_.backbone.input_size;
  if (images.count() < 2) throw DataError("train: need at least 2 images");
  if (images.height() != images.width() || images.height() % 2 != 0)
    throw DataError("train: images must be square with even side length");
  if (images.channels() != 3) throw DataError("train: images must have 3 channels");
  (void)k;

  const int n = images.count();
  const int bs = config_.batch_size;
  const int steps_per_epoch = (n / bs) + ((n % bs) >= 2 ? 1 : 0);
  total_steps_ = static_cast<std::uint64_t>(steps_per_epoch) * config_.epochs;

  std::ofstream log;
  std::filesystem::path ckpt_dir;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    ckpt_dir = *run_dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);
    log.open(*run_dir / "train_log.jsonl");
    if (!log) throw Error("cannot open training log in " + run_dir->string());
  }

  TrainResult result;
  std::vector<int> order(n);
  std::vector<ImageView> views;
  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = make_rng(config_.seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)});
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_int(shuffle, 0, i)]);

    EpochLog el;
    el.epoch = epoch;
    el.alpha = config_.alpha;
    for (int b = 0; b < steps_per_epoch; ++b) {
      const int first = b * bs;
      const int last = std::min(n, first + bs);
      views.clear();
      for (int i = first; i < last; ++i) views.push_back(images.view(order[i]));
      LossBreakdown l = step(views, epoch, static_cast<std::uint64_t>(b));
      if (!std::isfinite(l.total)) continue;  // skipped by the fail-safe
      el.cl_loss += l.cl_loss;
      el.rpl_loss += l.rpl_loss;
      el.total += l.total;
      ++el.steps;
      StepLog sl{epoch, global_step_, l};
      if (log) {
        nlohmann::json j = {{"kind", "step"}, {"epoch", epoch}, {"step", global_step_}, {"timestamp", timestamp()}};
        j.update(loss_json(l));
        log << j.dump() << '\n';
      }
      if (on_step) on_step(sl);
    }
    if (el.steps > 0) {
      el.cl_loss /= el.steps;
      el.rpl_loss /= el.steps;
      el.total /= el.steps;
    }
    result.epochs.push_back(el);
    if (log) {
      nlohmann::json j = {{"kind", "epoch"}, {"epoch", epoch}, {"steps", el.steps}, {"step", global_step_},
                          {"timestamp", timestamp()}};
      j.update(loss_json(LossBreakdown{el.cl_loss, el.rpl_loss, el.total, el.alpha}));
      log << j.dump() << '\n';
      log.flush();
      if (!log) throw Error("writing the training log failed (disk full?)");
    }
    const bool periodic = config_.checkpoint_every > 0 && epoch % config_.checkpoint_every == 0;
    if (run_dir && (periodic || epoch == config_.epochs)) {
      std::ostringstream name;
      name << "epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
      const auto path = ckpt_dir / name.str();
      save_checkpoint(path, model_, CheckpointMeta{config_, epoch, global_step_});
      result.checkpoints.push_back(path);
    }
  }
  return result;
}

}  // namespace vvs
