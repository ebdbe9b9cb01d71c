#pragma once

#include <string>

#include <Eigen/Dense>

namespace vvs {

// Stimuli x features responses of one named model layer. Rows follow the
// stimulus order of the input set.
struct ActivationMatrix {
  std::string layer_name;
  Eigen::MatrixXf values;

  Eigen::Index n_stimuli() const { return values.rows(); }
  Eigen::Index n_features() const { return values.cols(); }
};

}  // namespace vvs
