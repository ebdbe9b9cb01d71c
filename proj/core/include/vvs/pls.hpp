#pragma once

#include <Eigen/Dense>

namespace vvs {

// PLS2 regression fitted by NIPALS on centered (unscaled) data.
struct PlsModel {
  int n_components = 0;        // components actually extracted
  bool degenerate = false;     // extraction stopped early on a vanishing component
  Eigen::RowVectorXd x_mean;
  Eigen::RowVectorXd y_mean;
  Eigen::MatrixXd x_weights;   // W [features, a]
  Eigen::MatrixXd x_loadings;  // P [features, a]
  Eigen::MatrixXd y_loadings;  // Q [targets, a]
  Eigen::MatrixXd coef;        // [features, targets]

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

struct PlsOptions {
  int max_iterations = 500;
  double tolerance = 1e-6;
};

PlsModel fit_pls(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int n_components,
                 const PlsOptions& options = {});

}  // namespace vvs
