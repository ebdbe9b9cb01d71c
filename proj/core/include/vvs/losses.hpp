#pragma once

#include <span>
#include <string_view>

#include "vvs/layers.hpp"

namespace vvs {

// Where the temperature enters the pairwise similarity term.
//   inside_exp: exp(sim / tau)            (standard NT-Xent)
//   literal:    exp(sim) / tau            (tau cancels in the ratio)
enum class TemperatureMode { inside_exp, literal };

std::string_view to_string(TemperatureMode m);
TemperatureMode temperature_mode_from_string(std::string_view s);

struct LossBreakdown {
  double cl_loss = 0.0;
  double rpl_loss = 0.0;
  double total = 0.0;
  double alpha = 0.0;
};

template <typename T>
struct LossGrad {
  double value = 0.0;
  nn::Mat<T> grad;  // d value / d input, same shape as the input
};

// NT-Xent over 2N projections where rows (2i, 2i+1) (0-based) are positive
// pairs. Cosine similarities; the anchor itself is excluded from each
// denominator; mean over all 2N anchors.
template <typename T>
double nt_xent(const nn::Mat<T>& projections, double temperature,
               TemperatureMode mode = TemperatureMode::inside_exp);

template <typename T>
LossGrad<T> nt_xent_with_grad(const nn::Mat<T>& projections, double temperature,
                              TemperatureMode mode = TemperatureMode::inside_exp);

inline constexpr double kProbEpsilon = 1e-12;

// Mean of -log p[i, label_i] over the batch, probabilities clamped at
// kProbEpsilon. Rows must be distributions over the 8 directions.
template <typename T>
double rp_loss(const nn::Mat<T>& probs, std::span<const int> labels);

// Same quantity computed from pre-softmax scores via log-softmax, with the
// gradient with respect to those scores.
template <typename T>
LossGrad<T> rp_loss_from_logits(const nn::Mat<T>& logits, std::span<const int> labels);

// total = cl + alpha * rpl. alpha = 0 is pure contrastive learning.
LossBreakdown combined_loss(double cl, double rpl, double alpha);

}  // namespace vvs
