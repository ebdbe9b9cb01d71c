#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "vvs/error.hpp"
#include "vvs/lbfgs.hpp"
#include "vvs/probes.hpp"
#include "vvs/rng.hpp"

using namespace vvs;

namespace {

// Gaussian blobs around well separated class centers.
void blobs(int n_classes, int per_class, int dim, double sep, std::uint64_t seed, Eigen::MatrixXd& x,
           std::vector<int>& y) {
  Rng rng = make_rng(seed);
  Eigen::MatrixXd centers(n_classes, dim);
  for (int c = 0; c < n_classes; ++c)
    for (int d = 0; d < dim; ++d) centers(c, d) = sep * normal(rng);
  x.resize(n_classes * per_class, dim);
  y.clear();
  for (int c = 0; c < n_classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      for (int d = 0; d < dim; ++d) x(c * per_class + i, d) = centers(c, d) + normal(rng);
      y.push_back(c);
    }
}

}  // namespace

TEST_CASE("lbfgs minimizes a quadratic and Rosenbrock") {
  const auto quad = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = 2.0 * (x.array() - 3.0).matrix();
    return (x.array() - 3.0).square().sum();
  };
  const LbfgsResult q = lbfgs_minimize(quad, Eigen::VectorXd::Zero(5));
  CHECK(q.converged);
  CHECK((q.x.array() - 3.0).abs().maxCoeff() < 1e-6);

  const auto rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -2.0 * a - 400.0 * x(0) * b;
    g(1) = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  LbfgsOptions o;
  o.max_iterations = 2000;
  const LbfgsResult r = lbfgs_minimize(rosen, Eigen::Vector2d(-1.2, 1.0), o);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("separable classes are classified perfectly") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  blobs(4, 50, 6, 10.0, 1, x, y);
  const LinearProbe p = fit_linear_probe(x, y, {}, "blobs");
  CHECK(p.n_classes() == 4);
  CHECK(p.n_features() == 6);
  CHECK(p.trained_on == "blobs");
  CHECK(ic_accuracy(p, x, y) == 1.0);
}

TEST_CASE("shuffled labels give chance on held-out data") {
  // Unstructured features: each held-out prediction is an independent draw.
  double total = 0.0;
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng = make_rng(9, {std::uint64_t(seed)});
    Eigen::MatrixXd xtr(1000, 16), xte(1000, 16);
    for (int i = 0; i < 1000; ++i)
      for (int d = 0; d < 16; ++d) {
        xtr(i, d) = normal(rng);
        xte(i, d) = normal(rng);
      }
    std::vector<int> ytr(1000), yte(1000);
    for (int i = 0; i < 1000; ++i) ytr[i] = yte[i] = i % 10;
    std::shuffle(ytr.begin(), ytr.end(), rng);
    total += ic_accuracy(fit_linear_probe(xtr, ytr), xte, yte);
  }
  CHECK(std::abs(total / 5 - 0.10) <= 0.03);
}

TEST_CASE("heavy regularization collapses to chance") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  blobs(4, 50, 6, 10.0, 4, x, y);
  ProbeOptions o;
  o.l2 = 1e6;
  const LinearProbe p = fit_linear_probe(x, y, o);
  CHECK(p.weights.cwiseAbs().maxCoeff() < 1e-3);
  // Predictions are near-uniform. Argmax still follows the tiny logits, so
  // accuracy itself is not asserted here.
  Eigen::MatrixXd logits = (x * p.weights.transpose()).rowwise() + p.bias.transpose();
  for (int i = 0; i < logits.rows(); ++i) {
    const Eigen::ArrayXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    CHECK((e / e.sum() - 0.25).abs().maxCoeff() < 0.01);
  }
}

TEST_CASE("probe input validation") {
  Eigen::MatrixXd x;
  std::vector<int> y;
  blobs(3, 10, 4, 5.0, 5, x, y);
  const LinearProbe p = fit_linear_probe(x, y);
  CHECK_THROWS_AS(ic_accuracy(p, Eigen::MatrixXd::Zero(30, 5), y), ShapeError);
  CHECK_THROWS_AS(fit_linear_probe(x, std::vector<int>(29, 0)), ShapeError);
  CHECK_THROWS_AS(fit_linear_probe(x, std::vector<int>(30, 0)), DataError);
}

TEST_CASE("predict ties go to the lowest class") {
  LinearProbe p;
  p.weights = Eigen::MatrixXd::Zero(3, 2);
  p.bias = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXi pred = p.predict(Eigen::MatrixXd::Ones(4, 2));
  CHECK((pred.array() == 0).all());
}

TEST_CASE("probing leaves the encoder unchanged") {
  BackboneConfig b;
  b.width = 4;
  b.feature_dim = 16;
  b.input_size = 16;
  HeadConfig h;
  h.projection_dim = 8;
  h.hidden_dim = 16;
  Model<float> model(b, h, 3);
  const ImageSet images = synth_image_set(11, 80, 4, 16);

  std::vector<float> before;
  for (auto* p : model.parameters().params) before.insert(before.end(), p->value.begin(), p->value.end());
  const std::uint64_t version = model.version();

  const Eigen::MatrixXd feats = model.encode(images).cast<double>();
  const LinearProbe probe = fit_linear_probe(feats, images.labels());
  ic_accuracy(probe, feats, images.labels());
  rpp_accuracy(model, images);

  std::vector<float> after;
  for (auto* p : model.parameters().params) after.insert(after.end(), p->value.begin(), p->value.end());
  CHECK(before == after);
  CHECK(model.version() == version);
}

TEST_CASE("untrained relative-position accuracy is at chance") {
  BackboneConfig b;
  b.width = 4;
  b.feature_dim = 16;
  b.input_size = 16;
  HeadConfig h;
  h.projection_dim = 8;
  h.hidden_dim = 16;
  const ImageSet images = synth_image_set(12, 2000, 4, 16);
  Model<float> model(b, h, 100);
  const RppResult r = rpp_evaluate(model, images, {.seed = 1});
  CHECK(r.samples == 2000);
  CHECK(r.confusion.sum() == 2000);
  CHECK(std::abs(r.accuracy - 0.125) <= 0.05);
  // Cardinal directions come from two quadrant pairs each, diagonals from one.
  const Eigen::VectorXi per_label = r.confusion.rowwise().sum();
  for (int d = 0; d < 4; ++d) CHECK(per_label(d) > per_label(d + 4));
}

TEST_CASE("rpp accuracy is deterministic") {
  BackboneConfig b;
  b.width = 4;
  b.feature_dim = 16;
  b.input_size = 16;
  Model<float> model(b, HeadConfig{8, 16}, 5);
  const ImageSet images = synth_image_set(13, 64, 4, 16);
  CHECK(rpp_accuracy(model, images, {.seed = 1}) == rpp_accuracy(model, images, {.seed = 1}));
}
