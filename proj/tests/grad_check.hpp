#pragma once

// Finite-difference check of the combined objective through a small
// tiny_conv + heads stack in double precision. Shared by the unit tests and
// the acceptance runner.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vvs/data.hpp"
#include "vvs/model.hpp"
#include "vvs/trainer.hpp"

namespace gradcheck {

struct Result {
  std::size_t parameters = 0;
  double relative_error = 0.0;  // |fd - analytic| / max(|fd|, |analytic|) over all coordinates
  double worst_tensor_error = 0.0;
  std::string worst_tensor;
};

inline vvs::TrainConfig tiny_config() {
  vvs::TrainConfig c;
  c.batch_size = 4;
  c.alpha = 0.5;
  c.temperature = 0.5;
  c.seed = 17;
  c.backbone.architecture = vvs::Architecture::tiny_conv;
  c.backbone.width = 2;
  c.backbone.feature_dim = 8;
  c.backbone.input_size = 16;
  c.heads.projection_dim = 4;
  c.heads.hidden_dim = 8;
  return c;
}

inline Result run(double alpha = 0.5, double step = 1e-5) {
  vvs::TrainConfig cfg = tiny_config();
  cfg.alpha = alpha;
  const vvs::ImageSet images = vvs::synth_image_set(5, 4, 2, 16);
  std::vector<vvs::ImageView> views;
  for (int i = 0; i < images.count(); ++i) views.push_back(images.view(i));
  const vvs::DualTaskBatch batch = vvs::make_dual_task_batch(views, cfg, 0, 0);
  const vvs::ObjectiveConfig obj{cfg.alpha, cfg.temperature, cfg.temperature_mode, true};

  vvs::Model<double> model(cfg.backbone, cfg.heads, cfg.seed);
  vvs::dual_task_objective(model, batch, obj, true);
  auto refs = model.parameters();

  Result r;
  double num = 0.0, den = 0.0;
  for (auto* p : refs.params) {
    double tn = 0.0, td = 0.0;
    for (std::size_t j = 0; j < p->size(); ++j) {
      const double orig = p->value[j];
      p->value[j] = orig + step;
      const double up = vvs::dual_task_objective(model, batch, obj, false).total;
      p->value[j] = orig - step;
      const double down = vvs::dual_task_objective(model, batch, obj, false).total;
      p->value[j] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double an = p->grad[j];
      tn += (fd - an) * (fd - an);
      td += std::max(fd * fd, an * an);
      ++r.parameters;
    }
    num += tn;
    den += td;
    const double te = td > 0.0 ? std::sqrt(tn / td) : std::sqrt(tn);
    if (te > r.worst_tensor_error) {
      r.worst_tensor_error = te;
      r.worst_tensor = p->name;
    }
  }
  r.relative_error = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
  return r;
}

}  // namespace gradcheck
