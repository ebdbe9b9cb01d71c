#include "vvs/probes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vvs/augment.hpp"
#include "vvs/error.hpp"
#include "vvs/lbfgs.hpp"
#include "vvs/rng.hpp"

namespace vvs {

Eigen::VectorXi LinearProbe::predict(const Eigen::MatrixXd& features) const {
  if (features.cols() != weights.cols())
    throw ShapeError("probe expects " + std::to_string(weights.cols()) + " features, got " +
                     std::to_string(features.cols()));
  const Eigen::MatrixXd scores = (features * weights.transpose()).rowwise() + bias.transpose();
  Eigen::VectorXi out(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
    out(i) = best;
  }
  return out;
}

LinearProbe fit_linear_probe(const Eigen::MatrixXd& features, std::span<const int> labels,
                             const ProbeOptions& options, std::string trained_on) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (static_cast<std::size_t>(n) != labels.size())
    throw ShapeError("fit_linear_probe: " + std::to_string(n) + " feature rows but " +
                     std::to_string(labels.size()) + " labels");
  if (!(options.l2 >= 0.0)) throw ConfigError("probe.l2", "must be non-negative");
  if (!features.allFinite()) throw NumericError("fit_linear_probe: non-finite features");
  std::set<int> distinct;
  for (int l : labels) {
    if (l < 0) throw ShapeError("fit_linear_probe: negative label");
    distinct.insert(l);
  }
  if (distinct.size() < 2) throw DataError("fit_linear_probe: labels contain a single class");
  const int k = *distinct.rbegin() + 1;
  if (n < k) throw DataError("fit_linear_probe: fewer samples than classes");

  const Eigen::RowVectorXd mu = features.colwise().mean();
  Eigen::RowVectorXd sd = ((features.rowwise() - mu).array().square().colwise().sum() / n).sqrt().matrix();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  const Eigen::MatrixXd z = (features.rowwise() - mu).array().rowwise() / sd.array();

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels[i]) = 1.0;

  // Parameters: W' [k, d] column-major followed by b' [k].
  const double l2 = options.l2;
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    Eigen::Map<const Eigen::MatrixXd> w(x.data(), k, d);
    Eigen::Map<const Eigen::VectorXd> b(x.data() + k * d, k);
    Eigen::MatrixXd s = (z * w.transpose()).rowwise() + b.transpose();
    const Eigen::VectorXd mx = s.rowwise().maxCoeff();
    s.colwise() -= mx;
    Eigen::MatrixXd e = s.array().exp();
    const Eigen::VectorXd lse = e.rowwise().sum().array().log();
    double loss = -(onehot.array() * s.array()).sum() + lse.sum();
    loss /= n;
    loss += 0.5 * l2 * w.squaredNorm();
    e.array().colwise() /= e.rowwise().sum().array();
    const Eigen::MatrixXd diff = (e - onehot) / static_cast<double>(n);
    Eigen::Map<Eigen::MatrixXd> gw(grad.data(), k, d);
    gw = diff.transpose() * z + l2 * w;
    Eigen::Map<Eigen::VectorXd>(grad.data() + k * d, k) = diff.colwise().sum().transpose();
    return loss;
  };

  LbfgsOptions lo;
  lo.max_iterations = options.max_iterations;
  lo.gradient_tolerance = options.tolerance;
  const LbfgsResult res = lbfgs_minimize(objective, Eigen::VectorXd::Zero(k * d + k), lo);

  LinearProbe p;
  Eigen::Map<const Eigen::MatrixXd> w(res.x.data(), k, d);
  Eigen::Map<const Eigen::VectorXd> b(res.x.data() + k * d, k);
  p.weights = w.array().rowwise() / sd.array();
  p.bias = b - p.weights * mu.transpose();
  p.trained_on = std::move(trained_on);
  p.iterations = res.iterations;
  p.converged = res.converged;
  if (!res.converged)
    p.warning = "L-BFGS stopped after " + std::to_string(res.iterations) +
                " iterations with gradient norm " + std::to_string(res.gradient_norm);
  return p;
}

double ic_accuracy(const LinearProbe& probe, const Eigen::MatrixXd& features, std::span<const int> labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ShapeError("ic_accuracy: feature rows and labels differ in count");
  if (labels.empty()) throw ShapeError("ic_accuracy: empty evaluation set");
  const Eigen::VectorXi pred = probe.predict(features);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred(static_cast<Eigen::Index>(i)) == labels[i];
  return static_cast<double>(hit) / labels.size();
}

double RppResult::independent_chance() const {
  if (samples == 0) return 0.0;
  const Eigen::VectorXd truth = confusion.rowwise().sum().cast<double>() / samples;
  const Eigen::VectorXd pred = confusion.colwise().sum().transpose().cast<double>() / samples;
  return truth.dot(pred);
}

double rpp_accuracy(Model<float>& model, const ImageSet& images, const RppOptions& options) {
  return rpp_evaluate(model, images, options).accuracy;
}

RppResult rpp_evaluate(Model<float>& model, const ImageSet& images, const RppOptions& options) {
  if (images.count() == 0) throw ShapeError("rpp_accuracy: empty image set");
  if (options.samples_per_image < 1) throw ConfigError("probe.rpp_samples_per_image", "must be at least 1");
  if (options.batch_size < 1) throw ConfigError("probe.batch_size", "must be positive");
  const int k = model.backbone_config().input_size;
  Rng rng = make_rng(options.seed, {stream::kRelPos});

  std::vector<Image> as, bs;
  std::vector<int> labels;
  RppResult result;
  result.confusion = Eigen::MatrixXi::Zero(kDirections, kDirections);
  auto flush = [&] {
    if (labels.empty()) return;
    const bool half = as[0].height != k;
    nn::Mat<float> fa = model.encode(as, false, half);
    nn::Mat<float> fb = model.encode(bs, false, half);
    nn::Mat<float> probs = model.classify_rp(fa, fb);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < probs.cols(); ++c)
        if (probs(i, c) > probs(i, best)) best = c;
      ++result.confusion(labels[i], best);
      ++result.samples;
    }
    as.clear();
    bs.clear();
    labels.clear();
  };
  for (int i = 0; i < images.count(); ++i) {
    for (int s = 0; s < options.samples_per_image; ++s) {
      QuadrantSample q = sample_rp_pair(images.view(i), rng);
      if (options.block_resize) {
        as.push_back(resize_bilinear(q.block_a.view(), k, k));
        bs.push_back(resize_bilinear(q.block_b.view(), k, k));
      } else {
        as.push_back(std::move(q.block_a));
        bs.push_back(std::move(q.block_b));
      }
      labels.push_back(q.d);
      if (static_cast<int>(labels.size()) >= options.batch_size) flush();
    }
  }
  flush();
  result.accuracy = static_cast<double>(result.confusion.trace()) / result.samples;
  return result;
}

}  // namespace vvs
