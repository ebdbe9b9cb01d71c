#include "vvs/brainsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vvs/error.hpp"
#include "vvs/rng.hpp"

namespace vvs {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw ShapeError("median of an empty list");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

// Mean as first + mean(x - first): exact when all values are equal.
double shifted_mean(const double* x, int n, int stride) {
  const double x0 = x[0];
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i * stride] - x0;
  return x0 + acc / n;
}

}  // namespace

PearsonResult pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("pearson: length mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  if (a.size() < 3) throw ShapeError("pearson: need at least 3 samples");
  const int n = static_cast<int>(a.size());
  const double ma = shifted_mean(a.data(), n, 1);
  const double mb = shifted_mean(b.data(), n, 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (int i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    if (!std::isfinite(da) || !std::isfinite(db)) throw NumericError("pearson: non-finite input");
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return {0.0, true};
  const double r = sab / std::sqrt(saa * sbb);
  return {std::clamp(r, -1.0, 1.0), false};
}

PearsonResult pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return pearson(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()));
}

NoiseCeiling noise_ceiling(const NeuralRecording& recording, int n_iterations, std::uint64_t seed) {
  const int reps = recording.n_repetitions();
  if (reps < 2) throw DataError("noise_ceiling: need at least 2 repetitions");
  if (n_iterations < 1) throw ConfigError("brainsim.ceiling_iterations", "must be positive");
  const int ns = recording.n_stimuli();
  const int nn = recording.n_neurons();

  // Fixed list of splits shared by all neurons.
  std::vector<std::vector<int>> splits;
  Rng rng = make_rng(seed, {stream::kCeiling});
  std::vector<int> order(reps);
  for (int it = 0; it < n_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    for (int i = reps - 1; i > 0; --i) std::swap(order[i], order[uniform_int(rng, 0, i)]);
    splits.push_back(order);
  }
  const int half = reps / 2;

  NoiseCeiling out;
  out.ceiling.resize(nn);
  out.split_half_r.resize(nn);
  std::vector<double> ha(ns), hb(ns), buf(reps), rs(n_iterations), sb(n_iterations);
  for (int j = 0; j < nn; ++j) {
    for (int it = 0; it < n_iterations; ++it) {
      const auto& sp = splits[it];
      for (int s = 0; s < ns; ++s) {
        for (int r = 0; r < reps; ++r) buf[r] = recording.response(s, j, sp[r]);
        ha[s] = shifted_mean(buf.data(), half, 1);
        hb[s] = shifted_mean(buf.data() + half, reps - half, 1);
      }
      const double r = pearson(ha, hb).r;
      rs[it] = r;
      sb[it] = r <= -1.0 ? -1.0 : 2.0 * r / (1.0 + r);
    }
    out.split_half_r(j) = median(rs);
    out.ceiling(j) = std::clamp(median(sb), kCeilingFloor, 1.0);
  }
  return out;
}

void CVSpec::validate() const {
  if (n_splits < 1) throw ConfigError("brainsim.cv.n_splits", "must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("brainsim.cv.train_fraction", "must be in (0, 1)");
}

ScoreDistribution summarize_splits(std::vector<double> per_split) {
  ScoreDistribution d;
  d.center = median(per_split);
  if (per_split.size() > 1) {
    const double m = std::accumulate(per_split.begin(), per_split.end(), 0.0) / per_split.size();
    double ss = 0.0;
    for (double v : per_split) ss += (v - m) * (v - m);
    d.spread = std::sqrt(ss / (per_split.size() - 1));
  }
  d.per_split = std::move(per_split);
  return d;
}

Eigen::MatrixXd random_projection(const Eigen::MatrixXf& values, int features, std::uint64_t seed) {
  const Eigen::Index n = values.rows();
  const Eigen::Index p = values.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, features);
  const double scale = 1.0 / std::sqrt(static_cast<double>(features));
  const Eigen::Index chunk = 512;
  for (Eigen::Index start = 0; start < p; start += chunk) {
    const Eigen::Index len = std::min(chunk, p - start);
    Rng rng = make_rng(seed, {stream::kProjection, static_cast<std::uint64_t>(start)});
    Eigen::MatrixXd r(len, features);
    for (Eigen::Index i = 0; i < len; ++i)
      for (Eigen::Index c = 0; c < features; ++c) r(i, c) = normal(rng) * scale;
    out.noalias() += values.middleCols(start, len).cast<double>() * r;
  }
  return out;
}

ScoreDistribution layer_score(const ActivationMatrix& acts, const NeuralRecording& recording,
                              const CVSpec& cv, const LayerScoreOptions& options) {
  const NoiseCeiling c = noise_ceiling(recording, options.ceiling_iterations, cv.seed);
  return layer_score(acts, recording, cv, options, c);
}

ScoreDistribution layer_score(const ActivationMatrix& acts, const NeuralRecording& recording,
                              const CVSpec& cv, const LayerScoreOptions& options,
                              const NoiseCeiling& ceiling) {
  cv.validate();
  const int ns = recording.n_stimuli();
  if (acts.n_stimuli() != ns)
    throw ShapeError("layer_score: " + std::to_string(acts.n_stimuli()) + " activation rows for " +
                     std::to_string(ns) + " stimuli (layer " + acts.layer_name + ")");
  if (ceiling.ceiling.size() != recording.n_neurons())
    throw ShapeError("layer_score: ceiling size does not match the neuron count");
  if (options.n_components < 1) throw ConfigError("brainsim.n_components", "must be positive");

  Eigen::MatrixXd x;
  if (options.max_features > 0 && acts.n_features() > options.max_features)
    x = random_projection(acts.values, options.max_features, options.projection_seed);
  else
    x = acts.values.cast<double>();
  const Eigen::MatrixXd y = recording.mean_responses();

  const int n_train = std::clamp(static_cast<int>(std::lround(cv.train_fraction * ns)), 2, ns - 3);
  const int n_test = ns - n_train;
  if (n_train < 2 || n_test < 3) throw DataError("layer_score: too few stimuli for the CV split");
  const int comps = std::min({options.n_components, n_train - 1, static_cast<int>(x.cols())});

  std::vector<double> split_scores;
  std::vector<int> order(ns);
  for (int s = 0; s < cv.n_splits; ++s) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(cv.seed, {stream::kSplit, static_cast<std::uint64_t>(s)});
    for (int i = ns - 1; i > 0; --i) std::swap(order[i], order[uniform_int(rng, 0, i)]);
    Eigen::MatrixXd xtr(n_train, x.cols()), ytr(n_train, y.cols());
    Eigen::MatrixXd xte(n_test, x.cols()), yte(n_test, y.cols());
    for (int i = 0; i < n_train; ++i) {
      xtr.row(i) = x.row(order[i]);
      ytr.row(i) = y.row(order[i]);
    }
    for (int i = 0; i < n_test; ++i) {
      xte.row(i) = x.row(order[n_train + i]);
      yte.row(i) = y.row(order[n_train + i]);
    }
    const PlsModel pls = fit_pls(xtr, ytr, comps);
    const Eigen::MatrixXd pred = pls.predict(xte);
    std::vector<double> corrected(y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const Eigen::VectorXd pj = pred.col(j);
      const Eigen::VectorXd yj = yte.col(j);
      const double r = pearson(pj, yj).r;
      corrected[j] = std::clamp(r / ceiling.ceiling(j), -1.0, 1.5);
    }
    split_scores.push_back(median(std::move(corrected)));
  }
  return summarize_splits(std::move(split_scores));
}

BrainScoreReport model_score(Region region,
                             std::vector<std::pair<std::string, ScoreDistribution>> per_layer) {
  if (per_layer.empty()) throw ShapeError("model_score: no layers");
  std::size_t best = 0;
  for (std::size_t i = 1; i < per_layer.size(); ++i)
    if (per_layer[i].second.center > per_layer[best].second.center) best = i;
  BrainScoreReport r;
  r.region = region;
  r.best_layer = per_layer[best].first;
  r.model_score = per_layer[best].second;
  r.per_layer = std::move(per_layer);
  return r;
}

nlohmann::json to_json(const ScoreDistribution& s) {
  return {{"center", s.center}, {"spread", s.spread}, {"per_split", s.per_split}};
}

nlohmann::json to_json(const BrainScoreReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& [name, d] : r.per_layer) {
    nlohmann::json e = to_json(d);
    e["layer"] = name;
    layers.push_back(e);
  }
  return {{"region", std::string(to_string(r.region))},
          {"best_layer", r.best_layer},
          {"model_score", to_json(r.model_score)},
          {"per_layer", layers}};
}

std::string brain_score_csv(const std::vector<BrainScoreReport>& reports) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "layer";
  for (const auto& r : reports) os << ',' << to_string(r.region) << ',' << to_string(r.region) << "_spread";
  os << '\n';
  std::vector<std::string> names;
  for (const auto& r : reports)
    for (const auto& [name, d] : r.per_layer)
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  for (const auto& name : names) {
    os << name;
    for (const auto& r : reports) {
      auto it = std::find_if(r.per_layer.begin(), r.per_layer.end(),
                             [&](const auto& e) { return e.first == name; });
      if (it == r.per_layer.end())
        os << ",,";
      else
        os << ',' << it->second.center << ',' << it->second.spread;
    }
    os << '\n';
  }
  os << "model";
  for (const auto& r : reports) os << ',' << r.model_score.center << ',' << r.model_score.spread;
  os << '\n';
  return os.str();
}

}  // namespace vvs
