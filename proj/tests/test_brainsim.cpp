#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vvs/brainsim.hpp"
#include "vvs/error.hpp"
#include "vvs/pls.hpp"
#include "vvs/rng.hpp"

using namespace vvs;
using Eigen::MatrixXd;

namespace {

MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

ActivationMatrix acts_from(const MatrixXd& m, const std::string& name = "layer") {
  return {name, m.cast<float>()};
}

NeuralRecording from_values(const std::vector<float>& values, int stimuli, int neurons, int reps) {
  return NeuralRecording(Region::V1, stimuli, neurons, reps, values, ImageSet{});
}

double rel_err(const MatrixXd& a, const MatrixXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

ScoreDistribution dist(double center) {
  ScoreDistribution d;
  d.center = center;
  d.per_split = {center};
  return d;
}

}  // namespace

TEST_CASE("pearson examples") {
  const std::vector<double> a = {1, 2, 3}, b = {3, 2, 1};
  CHECK(pearson(a, a).r == doctest::Approx(1.0));
  CHECK(pearson(a, b).r == doctest::Approx(-1.0));
  const std::vector<double> c = {1, 2, 3, 4}, d = {2, 4, 5, 9};
  CHECK(std::abs(pearson(c, d).r - oracle::pearson(c, d)) < 1e-12);
  for (int s = 0; s < 10; ++s) {
    const MatrixXd m = gaussian(50, 2, 300 + s);
    const std::vector<double> x(m.col(0).data(), m.col(0).data() + 50), y(m.col(1).data(), m.col(1).data() + 50);
    CHECK(std::abs(pearson(x, y).r - oracle::pearson(x, y)) < 1e-12);
  }
}

TEST_CASE("pearson degenerate and error cases") {
  const std::vector<double> flat = {2, 2, 2, 2}, ramp = {1, 2, 3, 4};
  const PearsonResult r = pearson(flat, ramp);
  CHECK(r.degenerate);
  CHECK(r.r == 0.0);
  const std::vector<double> tiny = {0.1, 0.1, 0.1};
  CHECK(pearson(tiny, std::vector<double>{1, 2, 3}).degenerate);
  CHECK_THROWS_AS(pearson(ramp, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{2, 1}), ShapeError);
}

TEST_CASE("PLS recovers an exactly linear target") {
  const MatrixXd x = gaussian(40, 6, 1);
  const MatrixXd w = gaussian(6, 3, 2);
  const MatrixXd y = (x * w).rowwise() + Eigen::RowVector3d(1.0, -2.0, 0.5);
  const PlsModel m = fit_pls(x, y, 6);
  CHECK(m.n_components == 6);
  CHECK_FALSE(m.degenerate);
  CHECK(rel_err(m.predict(x), y) < 1e-5);
}

TEST_CASE("full-rank PLS equals least squares") {
  for (int s = 0; s < 5; ++s) {
    const MatrixXd x = gaussian(30, 5, 10 + s);
    const MatrixXd y = gaussian(30, 4, 20 + s) + x * gaussian(5, 4, 30 + s);
    const MatrixXd xte = gaussian(10, 5, 40 + s);
    const PlsModel m = fit_pls(x, y, 5);
    CHECK(rel_err(m.predict(x), oracle::ols_predict(x, y, x)) < 1e-5);
    CHECK(rel_err(m.predict(xte), oracle::ols_predict(x, y, xte)) < 1e-5);
  }
}

TEST_CASE("PLS residual shrinks with more components") {
  const MatrixXd x = gaussian(60, 10, 5);
  const MatrixXd y = gaussian(60, 3, 6) + x * gaussian(10, 3, 7);
  double prev = INFINITY;
  for (int a = 1; a <= 10; ++a) {
    const double res = (fit_pls(x, y, a).predict(x) - y).norm();
    CHECK(res <= prev + 1e-9);
    prev = res;
  }
}

TEST_CASE("PLS constant target column and degenerate input") {
  const MatrixXd x = gaussian(25, 4, 8);
  MatrixXd y(25, 2);
  y.col(0) = x.col(1) * 2.0;
  y.col(1).setConstant(3.5);
  const MatrixXd pred = fit_pls(x, y, 3).predict(x);
  CHECK((pred.col(1).array() - 3.5).abs().maxCoeff() < 1e-9);

  MatrixXd rank1(25, 4);
  for (int j = 0; j < 4; ++j) rank1.col(j) = x.col(0) * (j + 1.0);
  const PlsModel m = fit_pls(rank1, y, 3);
  CHECK(m.degenerate);
  CHECK(m.n_components < 3);
  CHECK(m.predict(rank1).allFinite());

  CHECK_THROWS_AS(fit_pls(x, y, 25), ShapeError);
  CHECK_THROWS_AS(fit_pls(x, y, 5), ShapeError);
  CHECK_THROWS_AS(fit_pls(x, MatrixXd(MatrixXd::Zero(24, 2)), 2), ShapeError);
}

TEST_CASE("full-rank PLS predictions are affine invariant") {
  const MatrixXd x = gaussian(30, 5, 50);
  const MatrixXd y = gaussian(30, 2, 51) + x * gaussian(5, 2, 52);
  const MatrixXd xte = gaussian(8, 5, 53);
  MatrixXd a = gaussian(5, 5, 54);
  a.diagonal().array() += 3.0;
  const Eigen::RowVectorXd shift = gaussian(1, 5, 55);
  const MatrixXd xa = (x * a).rowwise() + shift;
  const MatrixXd xtea = (xte * a).rowwise() + shift;
  CHECK(rel_err(fit_pls(xa, y, 5).predict(xtea), fit_pls(x, y, 5).predict(xte)) < 1e-5);
}

TEST_CASE("noise ceiling of identical repetitions is one") {
  const MatrixXd signal = gaussian(40, 3, 60);
  std::vector<float> v;
  for (int s = 0; s < 40; ++s)
    for (int n = 0; n < 3; ++n)
      for (int r = 0; r < 4; ++r) v.push_back(float(signal(s, n)));
  const NoiseCeiling c = noise_ceiling(from_values(v, 40, 3, 4), 30, 1);
  for (int n = 0; n < 3; ++n) CHECK(c.ceiling(n) == doctest::Approx(1.0));
}

TEST_CASE("noise ceiling of a pure-noise neuron") {
  Rng rng = make_rng(61);
  std::vector<float> v;
  for (int s = 0; s < 1000; ++s)
    for (int r = 0; r < 4; ++r) v.push_back(float(normal(rng)));
  const NoiseCeiling c = noise_ceiling(from_values(v, 1000, 1, 4), 30, 2);
  CHECK(std::abs(c.split_half_r(0)) <= 0.1);
  CHECK(c.ceiling(0) < 0.2);
  CHECK(c.ceiling(0) >= kCeilingFloor);
}

TEST_CASE("noise ceiling matches the analytic reliability") {
  const ActivationMatrix acts = acts_from(gaussian(600, 20, 62));
  for (double sd : {0.5, 1.0, 2.0})
    for (int reps : {2, 4, 8}) {
      const NeuralRecording rec = synth_neural_recording(acts, 40, sd, reps, 63);
      const NoiseCeiling c = noise_ceiling(rec, 30, 3);
      const double expected = oracle::split_half_reliability(1.0, sd * sd, reps);
      CAPTURE(sd);
      CAPTURE(reps);
      CHECK(std::abs(c.ceiling.mean() - expected) <= 0.05);
    }
  CHECK_THROWS_AS(noise_ceiling(synth_neural_recording(acts, 2, 1.0, 2, 1), 0, 1), ConfigError);
}

TEST_CASE("layer_score on a noiseless linear population") {
  const ActivationMatrix acts = acts_from(gaussian(200, 30, 70));
  CVSpec cv;
  cv.seed = 5;
  LayerScoreOptions opts;
  opts.max_features = 0;
  opts.n_components = 30;
  for (int reps : {2, 4, 10}) {
    const NeuralRecording rec = synth_neural_recording(acts, 20, 0.0, reps, 71);
    const ScoreDistribution d = layer_score(acts, rec, cv, opts);
    CHECK(d.center >= 0.95);
    CHECK(std::abs(d.center - 1.0) <= 0.02);
    CHECK(d.per_split.size() == 10);
    CHECK(std::isfinite(d.spread));
  }
}

TEST_CASE("layer_score of an unrelated population is near zero") {
  const ActivationMatrix acts = acts_from(gaussian(400, 30, 72));
  const ActivationMatrix other = acts_from(gaussian(400, 30, 73));
  const NeuralRecording rec = synth_neural_recording(other, 30, 0.0, 4, 74);
  LayerScoreOptions opts;
  opts.max_features = 0;
  opts.n_components = 10;
  const ScoreDistribution d = layer_score(acts, rec, CVSpec{10, 0.9, 6}, opts);
  CHECK(std::abs(d.center) <= 0.1);
}

TEST_CASE("layer_score determinism, robustness and errors") {
  const ActivationMatrix acts = acts_from(gaussian(150, 12, 80));
  const NeuralRecording clean = synth_neural_recording(acts, 40, 0.3, 4, 81);
  LayerScoreOptions opts;
  opts.max_features = 0;
  opts.n_components = 12;
  const CVSpec cv{10, 0.9, 9};
  const ScoreDistribution a = layer_score(acts, clean, cv, opts);
  const ScoreDistribution b = layer_score(acts, clean, cv, opts);
  CHECK(a.per_split == b.per_split);
  const ScoreDistribution other_seed = layer_score(acts, clean, CVSpec{10, 0.9, 10}, opts);
  CHECK(other_seed.per_split != a.per_split);

  // Replace 10% of the neurons with pure noise.
  std::vector<float> v = clean.responses();
  Rng rng = make_rng(82);
  for (int s = 0; s < 150; ++s)
    for (int n = 0; n < 4; ++n)
      for (int r = 0; r < 4; ++r) v[(std::size_t(s) * 40 + n) * 4 + r] = float(normal(rng));
  const NeuralRecording corrupted = from_values(v, 150, 40, 4);
  const NoiseCeiling cc = noise_ceiling(clean, opts.ceiling_iterations, 0);
  const NoiseCeiling ce = noise_ceiling(corrupted, opts.ceiling_iterations, 0);
  const ScoreDistribution dirty = layer_score(acts, corrupted, cv, opts, ce);
  // A mean over neurons would drop by roughly the corrupted fraction of the
  // clean score; the median moves much less.
  const double mean_drop = 0.1 * a.center;
  CHECK(a.center - dirty.center < mean_drop);
  CHECK(cc.ceiling.size() == 40);

  const ActivationMatrix short_acts = acts_from(gaussian(149, 12, 83));
  CHECK_THROWS_AS(layer_score(short_acts, clean, cv, opts), ShapeError);
  CHECK_THROWS_AS(layer_score(acts, clean, CVSpec{0, 0.9, 1}, opts), ConfigError);
  CHECK_THROWS_AS(layer_score(acts, clean, CVSpec{10, 1.0, 1}, opts), ConfigError);
}

TEST_CASE("wide activations are projected") {
  const MatrixXd wide = gaussian(60, 300, 90);
  const MatrixXd p = random_projection(wide.cast<float>(), 64, 3);
  CHECK(p.rows() == 60);
  CHECK(p.cols() == 64);
  CHECK(p == random_projection(wide.cast<float>(), 64, 3));
  LayerScoreOptions opts;
  opts.max_features = 64;
  opts.n_components = 10;
  const NeuralRecording rec = synth_neural_recording(acts_from(wide), 10, 0.1, 4, 91);
  const ScoreDistribution d = layer_score(acts_from(wide), rec, CVSpec{3, 0.8, 1}, opts);
  CHECK(std::isfinite(d.center));
}

TEST_CASE("model_score picks the best layer") {
  BrainScoreReport r = model_score(Region::V4, {{"A", dist(0.3)}, {"B", dist(0.5)}});
  CHECK(r.best_layer == "B");
  CHECK(r.model_score.center == 0.5);
  CHECK(r.per_layer.size() == 2);
  CHECK(r.region == Region::V4);

  CHECK(model_score(Region::V1, {{"only", dist(0.1)}}).best_layer == "only");
  CHECK(model_score(Region::V1, {{"layer1.0", dist(0.4)}, {"layer2.0", dist(0.4)}}).best_layer == "layer1.0");
  CHECK_THROWS_AS(model_score(Region::V1, {}), ShapeError);
}

TEST_CASE("summaries and serialization") {
  const ScoreDistribution d = summarize_splits({0.1, 0.3, 0.2, 0.4});
  CHECK(d.center == doctest::Approx(0.25));
  CHECK(d.spread == doctest::Approx(std::sqrt((0.0225 + 0.0025 + 0.0025 + 0.0225) / 3.0)));

  const BrainScoreReport v1 = model_score(Region::V1, {{"layer1.0", dist(0.2)}, {"layer2.0", dist(0.3)}});
  const nlohmann::json j = to_json(v1);
  CHECK(j["best_layer"] == "layer2.0");
  CHECK(j["region"] == "V1");
  const std::string csv = brain_score_csv({v1});
  CHECK(csv.rfind("layer,V1,V1_spread\n", 0) == 0);
  CHECK(csv.find("\nmodel,") != std::string::npos);
}
