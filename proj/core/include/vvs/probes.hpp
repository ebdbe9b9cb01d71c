#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "vvs/data.hpp"
#include "vvs/model.hpp"

namespace vvs {

struct ProbeOptions {
  double l2 = 1e-4;
  int max_iterations = 500;
  double tolerance = 1e-6;
  bool operator==(const ProbeOptions&) const = default;
};

// Multinomial logistic regression on frozen features.
struct LinearProbe {
  Eigen::MatrixXd weights;  // [n_classes, n]
  Eigen::VectorXd bias;     // [n_classes]
  std::string trained_on;
  int iterations = 0;
  bool converged = false;
  std::string warning;  // set when L-BFGS hit the iteration cap

  int n_classes() const { return static_cast<int>(weights.rows()); }
  int n_features() const { return static_cast<int>(weights.cols()); }
  // Argmax class per row; ties go to the lowest index.
  Eigen::VectorXi predict(const Eigen::MatrixXd& features) const;
};

// Minimizes mean cross-entropy + l2/2 * |W|^2 by L-BFGS. Features are
// standardized for the fit; the returned weights act on raw features.
LinearProbe fit_linear_probe(const Eigen::MatrixXd& features, std::span<const int> labels,
                             const ProbeOptions& options = {}, std::string trained_on = {});

double ic_accuracy(const LinearProbe& probe, const Eigen::MatrixXd& features, std::span<const int> labels);

struct RppOptions {
  std::uint64_t seed = 0;
  int samples_per_image = 1;
  // Must match how the model was trained.
  bool block_resize = true;
  int batch_size = 256;
};

struct RppResult {
  double accuracy = 0.0;
  int samples = 0;
  Eigen::MatrixXi confusion;  // [true, predicted], 8 x 8
  // Accuracy expected if predictions were independent of the true label,
  // given both marginals. Labels are not uniform over the 8 directions
  // (diagonals come from one quadrant pair each, the others from two).
  double independent_chance() const;
};

// One quadrant pair per image (same sampling path as training), scored by
// argmax of classify_rp. Evaluation mode only; the model is not modified.
RppResult rpp_evaluate(Model<float>& model, const ImageSet& images, const RppOptions& options = {});
double rpp_accuracy(Model<float>& model, const ImageSet& images, const RppOptions& options = {});

}  // namespace vvs
