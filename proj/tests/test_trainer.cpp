#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "grad_check.hpp"
#include "vvs/checkpoint.hpp"
#include "vvs/config.hpp"
#include "vvs/error.hpp"
#include "vvs/trainer.hpp"

using namespace vvs;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config(double alpha = 0.01) {
  TrainConfig c = TrainConfig::desk_preset();
  c.batch_size = 16;
  c.epochs = 2;
  c.alpha = alpha;
  c.seed = 3;
  c.backbone.width = 4;
  c.backbone.feature_dim = 16;
  c.backbone.input_size = 16;
  c.heads.projection_dim = 16;
  c.heads.hidden_dim = 32;
  return c;
}

std::vector<ImageView> views_of(const ImageSet& s, int first, int count) {
  std::vector<ImageView> v;
  for (int i = first; i < first + count; ++i) v.push_back(s.view(i));
  return v;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vvs_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<float> flat_weights(Model<float>& m) {
  std::vector<float> out;
  for (auto* p : m.parameters().params) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

}  // namespace

TEST_CASE("gradient of the combined objective") {
  const gradcheck::Result r = gradcheck::run();
  CHECK(r.parameters <= 10000);
  CHECK(r.relative_error < 1e-3);
}

TEST_CASE("repeated steps on one batch reduce the total loss") {
  TrainConfig c = small_config(0.5);
  c.learning_rate = 0.05;
  const ImageSet images = synth_image_set(1, 16, 4, 16);
  Trainer t(c);
  const auto v = views_of(images, 0, 16);
  const DualTaskBatch batch = make_dual_task_batch(v, c, 0, 0);
  const ObjectiveConfig obj{c.alpha, c.temperature, c.temperature_mode, true};
  const double before = dual_task_objective(t.model(), batch, obj, false).total;
  for (int i = 0; i < 20; ++i) t.step(v, 0, 0);
  const double after = dual_task_objective(t.model(), batch, obj, false).total;
  CHECK(after < before);
}

TEST_CASE("alpha = 0 leaves the RP head without gradient") {
  TrainConfig c = small_config(0.0);
  const ImageSet images = synth_image_set(2, 32, 4, 16);
  Model<float> model(c.backbone, c.heads, c.seed);
  const auto v = views_of(images, 0, 32);
  const DualTaskBatch batch = make_dual_task_batch(v, c, 0, 0);
  const LossBreakdown l = dual_task_objective(model, batch, {0.0, c.temperature, c.temperature_mode, true}, true);
  double h_grad = 0.0;
  for (auto* p : model.parameters(ModelPart::rp_head).params)
    for (float g : p->grad) h_grad = std::max(h_grad, std::abs(double(g)));
  CHECK(h_grad == 0.0);
  CHECK(std::isfinite(l.rpl_loss));
  CHECK(std::abs(l.rpl_loss - std::log(8.0)) <= 0.15);
  CHECK(l.total == l.cl_loss);
}

TEST_CASE("alpha = 0 training matches a run without the RP branch") {
  const ImageSet images = synth_image_set(4, 48, 4, 16);
  TrainConfig a = small_config(0.0);
  TrainConfig b = a;
  b.rp_branch = false;
  Trainer ta(a), tb(b);
  ta.train(images);
  tb.train(images);
  CHECK(flat_weights(ta.model()) == flat_weights(tb.model()));
}

TEST_CASE("training is deterministic for a seed") {
  const ImageSet images = synth_image_set(4, 40, 4, 16);
  const TrainConfig c = small_config(0.01);
  Trainer t1(c), t2(c);
  const TrainResult r1 = t1.train(images);
  const TrainResult r2 = t2.train(images);
  REQUIRE(r1.epochs.size() == r2.epochs.size());
  for (std::size_t i = 0; i < r1.epochs.size(); ++i) CHECK(r1.epochs[i].total == r2.epochs[i].total);
  CHECK(flat_weights(t1.model()) == flat_weights(t2.model()));

  TrainConfig other = c;
  other.seed = 4;
  Trainer t3(other);
  t3.train(images);
  CHECK(flat_weights(t3.model()) != flat_weights(t1.model()));
}

TEST_CASE("step bookkeeping and errors") {
  const TrainConfig c = small_config(0.01);
  const ImageSet images = synth_image_set(5, 8, 4, 16);
  Trainer t(c);
  const auto v = views_of(images, 0, 8);
  const std::uint64_t v0 = t.model().version();
  const LossBreakdown l = t.step(v, 0, 0);
  CHECK(t.model().version() == v0 + 1);
  CHECK(t.global_step() == 1);
  CHECK(l.total == doctest::Approx(l.cl_loss + c.alpha * l.rpl_loss));
  CHECK(l.alpha == c.alpha);

  CHECK_THROWS_AS(t.step({}, 0, 1), ShapeError);
  CHECK_THROWS_AS(t.step(views_of(images, 0, 1), 0, 1), ShapeError);
  CHECK(t.model().version() == v0 + 1);

  t.model().set_frozen(true);
  CHECK_THROWS_AS(t.step(v, 0, 2), Error);
}

TEST_CASE("epoch count and partial batches") {
  TrainConfig c = small_config(0.01);
  c.epochs = 1;
  c.batch_size = 16;
  const ImageSet images = synth_image_set(6, 35, 4, 16);  // 16 + 16 + 3
  Trainer t(c);
  std::vector<StepLog> logs;
  const TrainResult r = t.train(images, std::nullopt, [&](const StepLog& s) { logs.push_back(s); });
  CHECK(logs.size() == 3);
  REQUIRE(r.epochs.size() == 1);
  CHECK(r.epochs[0].steps == 3);
}

TEST_CASE("invalid training configuration") {
  TrainConfig c = small_config();
  c.alpha = -0.01;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = temp_dir("ckpt");
  const TrainConfig c = small_config(0.01);
  const ImageSet images = synth_image_set(7, 24, 4, 16);
  Trainer t(c);
  t.step(views_of(images, 0, 16), 0, 0);
  save_checkpoint(dir / "a.ckpt", t.model(), {c, 1, t.global_step()});

  LoadedCheckpoint loaded = load_checkpoint(dir / "a.ckpt");
  CHECK(loaded.meta.config == c);
  CHECK(loaded.meta.epoch == 1);
  CHECK(loaded.meta.step == 1);
  const auto w0 = flat_weights(t.model());
  const auto w1 = flat_weights(loaded.model);
  REQUIRE(w0.size() == w1.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < w0.size(); ++i) worst = std::max(worst, std::abs(double(w0[i]) - w1[i]));
  CHECK(worst <= 1e-6);

  const auto fa = t.model().encode(images);
  const auto fb = loaded.model.encode(images);
  CHECK((fa - fb).cwiseAbs().maxCoeff() <= 1e-5f);

  CHECK(sha256_file(dir / "a.ckpt").size() == 64);
  CHECK(sha256_file(dir / "a.ckpt") == sha256_file(dir / "a.ckpt"));

  TrainConfig wider = c;
  wider.backbone.width = 8;
  Model<float> other(wider.backbone, wider.heads, 0);
  CHECK_THROWS_AS(load_weights(dir / "a.ckpt", other), ConfigError);

  std::ofstream(dir / "bad.ckpt", std::ios::binary) << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("train writes logs and checkpoints") {
  const fs::path dir = temp_dir("run");
  TrainConfig c = small_config(0.01);
  c.epochs = 2;
  c.checkpoint_every = 1;
  const ImageSet images = synth_image_set(8, 20, 4, 16);
  Trainer t(c);
  const TrainResult r = t.train(images, dir);
  CHECK(r.checkpoints.size() == 2);
  CHECK(fs::exists(dir / "train_log.jsonl"));
  std::ifstream in(dir / "train_log.jsonl");
  int epochs = 0;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("timestamp"));
    if (j["kind"] == "epoch") ++epochs;
  }
  CHECK(epochs == 2);
  fs::remove_all(dir);
}

TEST_CASE("configuration round trip") {
  for (const TrainConfig& c : {TrainConfig::desk_preset(), TrainConfig::full_preset(), small_config(0.05)}) {
    CHECK(train_config_from_json(to_json(c)) == c);
  }
  const ExperimentConfig e = ExperimentConfig::desk();
  CHECK(to_json(experiment_config_from_json(to_json(e))) == to_json(e));

  nlohmann::json j = to_json(TrainConfig::desk_preset());
  j["bogus"] = 1;
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  j = to_json(TrainConfig::desk_preset());
  j["alpha"] = -1.0;
  try {
    train_config_from_json(j).validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field().find("alpha") != std::string::npos);
  }
}

TEST_CASE("presets") {
  const TrainConfig p = TrainConfig::full_preset();
  CHECK(p.batch_size == 512);
  CHECK(p.learning_rate == 1.5);
  CHECK(p.weight_decay == 1e-6);
  CHECK(p.momentum == 0.9);
  CHECK(p.epochs == 500);
  CHECK(p.backbone.architecture == Architecture::resnet18);
  CHECK(p.backbone.feature_dim == 512);
  CHECK(p.backbone.input_size == 96);
  CHECK(p.heads.projection_dim == 128);
  CHECK(p.temperature == 0.5);
}
