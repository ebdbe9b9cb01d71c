#include "vvs/losses.hpp"

#include <algorithm>
#include <cmath>

#include "vvs/error.hpp"

namespace vvs {

std::string_view to_string(TemperatureMode m) {
  return m == TemperatureMode::inside_exp ? "inside_exp" : "literal";
}

TemperatureMode temperature_mode_from_string(std::string_view s) {
  if (s == "inside_exp") return TemperatureMode::inside_exp;
  if (s == "literal") return TemperatureMode::literal;
  throw ConfigError("train.temperature_mode", "expected inside_exp or literal");
}

namespace {

struct NtXentState {
  Eigen::MatrixXd unit;     // row-normalized projections
  Eigen::VectorXd norms;
  Eigen::MatrixXd softmax;  // per-anchor distribution over j != i
  double loss = 0.0;
  double scale = 1.0;       // multiplier on similarities inside exp
};

template <typename T>
NtXentState nt_xent_forward(const nn::Mat<T>& z, double tau, TemperatureMode mode) {
  const Eigen::Index rows = z.rows();
  if (rows < 4 || rows % 2 != 0)
    throw ShapeError("nt_xent: need an even number of rows >= 4, got " + std::to_string(rows));
  if (!(tau > 0.0)) throw ConfigError("temperature", "must be positive");

  NtXentState st;
  st.scale = mode == TemperatureMode::inside_exp ? 1.0 / tau : 1.0;
  const Eigen::MatrixXd zd = z.template cast<double>();
  st.norms = zd.rowwise().norm();
  for (Eigen::Index i = 0; i < rows; ++i)
    if (!(st.norms(i) > 0.0) || !std::isfinite(st.norms(i)))
      throw NumericError("nt_xent: projection row " + std::to_string(i) +
                         " has zero or non-finite norm");
  st.unit = st.norms.cwiseInverse().asDiagonal() * zd;
  const Eigen::MatrixXd logits = (st.unit * st.unit.transpose()) * st.scale;

  st.softmax = Eigen::MatrixXd::Zero(rows, rows);
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index partner = i ^ 1;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < rows; ++j)
      if (j != i) mx = std::max(mx, logits(i, j));
    double denom = 0.0;
    for (Eigen::Index j = 0; j < rows; ++j)
      if (j != i) {
        const double e = std::exp(logits(i, j) - mx);
        st.softmax(i, j) = e;
        denom += e;
      }
    st.softmax.row(i) /= denom;
    total += -(logits(i, partner) - mx - std::log(denom));
  }
  st.loss = total / static_cast<double>(rows);
  return st;
}

}  // namespace

template <typename T>
double nt_xent(const nn::Mat<T>& projections, double temperature, TemperatureMode mode) {
  return nt_xent_forward(projections, temperature, mode).loss;
}

template <typename T>
LossGrad<T> nt_xent_with_grad(const nn::Mat<T>& projections, double temperature,
                              TemperatureMode mode) {
  NtXentState st = nt_xent_forward(projections, temperature, mode);
  const Eigen::Index rows = projections.rows();
  // d loss / d logit(i, j) for j != i.
  Eigen::MatrixXd a = st.softmax;
  for (Eigen::Index i = 0; i < rows; ++i) a(i, i ^ 1) -= 1.0;
  a /= static_cast<double>(rows);
  // sim(i, j) feeds logit(i, j) and logit(j, i).
  const Eigen::MatrixXd g = (a + a.transpose()) * st.scale;
  const Eigen::MatrixXd du = g * st.unit;
  Eigen::MatrixXd dz(rows, projections.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::RowVectorXd u = st.unit.row(i);
    const Eigen::RowVectorXd d = du.row(i);
    dz.row(i) = (d - u * d.dot(u)) / st.norms(i);
  }
  return {st.loss, dz.cast<T>()};
}

namespace {

void check_labels(Eigen::Index rows, Eigen::Index cols, std::span<const int> labels) {
  if (cols != 8) throw ShapeError("rp_loss: expected 8 direction columns");
  if (static_cast<Eigen::Index>(labels.size()) != rows)
    throw ShapeError("rp_loss: label count does not match batch");
  if (rows == 0) throw ShapeError("rp_loss: empty batch");
  for (int l : labels)
    if (l < 0 || l > 7) throw ShapeError("rp_loss: label " + std::to_string(l) + " outside 0..7");
}

}  // namespace

template <typename T>
double rp_loss(const nn::Mat<T>& probs, std::span<const int> labels) {
  check_labels(probs.rows(), probs.cols(), labels);
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double p = static_cast<double>(probs(i, j));
      if (!(p >= 0.0)) throw NumericError("rp_loss: negative or NaN probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-4)
      throw NumericError("rp_loss: row " + std::to_string(i) + " sums to " + std::to_string(sum));
    const double p = std::max(static_cast<double>(probs(i, labels[i])), kProbEpsilon);
    total += -std::log(p);
  }
  return total / static_cast<double>(probs.rows());
}

template <typename T>
LossGrad<T> rp_loss_from_logits(const nn::Mat<T>& logits, std::span<const int> labels) {
  check_labels(logits.rows(), logits.cols(), labels);
  const Eigen::Index n = logits.rows();
  const nn::Mat<double> lp = nn::log_softmax_rows<double>(logits.template cast<double>());
  double total = 0.0;
  nn::Mat<double> grad = lp.array().exp().matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    total += -std::max(lp(i, labels[i]), std::log(kProbEpsilon));
    grad(i, labels[i]) -= 1.0;
  }
  grad /= static_cast<double>(n);
  return {total / static_cast<double>(n), grad.cast<T>()};
}

LossBreakdown combined_loss(double cl, double rpl, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha", "must be non-negative");
  return {cl, rpl, cl + alpha * rpl, alpha};
}

template double nt_xent<float>(const nn::Mat<float>&, double, TemperatureMode);
template double nt_xent<double>(const nn::Mat<double>&, double, TemperatureMode);
template LossGrad<float> nt_xent_with_grad<float>(const nn::Mat<float>&, double, TemperatureMode);
template LossGrad<double> nt_xent_with_grad<double>(const nn::Mat<double>&, double, TemperatureMode);
template double rp_loss<float>(const nn::Mat<float>&, std::span<const int>);
template double rp_loss<double>(const nn::Mat<double>&, std::span<const int>);
template LossGrad<float> rp_loss_from_logits<float>(const nn::Mat<float>&, std::span<const int>);
template LossGrad<double> rp_loss_from_logits<double>(const nn::Mat<double>&, std::span<const int>);

}  // namespace vvs
