#include "vvs/pls.hpp"

#include <cmath>

#include "vvs/error.hpp"

namespace vvs {

Eigen::MatrixXd PlsModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != x_mean.size())
    throw ShapeError("pls predict: expected " + std::to_string(x_mean.size()) + " features, got " +
                     std::to_string(x.cols()));
  return ((x.rowwise() - x_mean) * coef).rowwise() + y_mean;
}

PlsModel fit_pls(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int n_components,
                 const PlsOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Index q = y.cols();
  if (y.rows() != n) throw ShapeError("fit_pls: X and Y row counts differ");
  if (n_components < 1) throw ConfigError("brainsim.n_components", "must be positive");
  if (n <= n_components)
    throw ShapeError("fit_pls: need more samples (" + std::to_string(n) + ") than components (" +
                     std::to_string(n_components) + ")");
  if (n_components > p)
    throw ShapeError("fit_pls: more components than features (" + std::to_string(p) + ")");
  if (!x.allFinite() || !y.allFinite()) throw NumericError("fit_pls: non-finite input");

  PlsModel m;
  m.x_mean = x.colwise().mean();
  m.y_mean = y.colwise().mean();
  Eigen::MatrixXd xk = x.rowwise() - m.x_mean;
  Eigen::MatrixXd yk = y.rowwise() - m.y_mean;

  const double x_scale = std::max(xk.norm(), 1e-300);
  const double eps = 1e-10;

  m.x_weights.resize(p, n_components);
  m.x_loadings.resize(p, n_components);
  m.y_loadings.resize(q, n_components);
  int a = 0;
  for (; a < n_components; ++a) {
    // Start from the Y column with the largest residual variance.
    Eigen::Index col = 0;
    const double ymax = yk.colwise().squaredNorm().maxCoeff(&col);
    Eigen::VectorXd w;
    if (ymax <= 0.0) {
      // Y fully explained: continue along the dominant X direction so the
      // component count still matches the request.
      Eigen::Index xc = 0;
      xk.colwise().squaredNorm().maxCoeff(&xc);
      w = xk.transpose() * xk.col(xc);
    } else {
      Eigen::VectorXd u = yk.col(col);
      Eigen::VectorXd w_old = Eigen::VectorXd::Zero(p);
      for (int it = 0; it < options.max_iterations; ++it) {
        w = xk.transpose() * u;
        const double wn = w.norm();
        if (!(wn > 0.0)) break;
        w /= wn;
        const Eigen::VectorXd t = xk * w;
        const double tt = t.squaredNorm();
        if (!(tt > 0.0)) break;
        const Eigen::VectorXd c = yk.transpose() * t / tt;
        if (q == 1) break;  // single target converges in one pass
        u = yk * c / c.squaredNorm();
        if ((w - w_old).squaredNorm() < options.tolerance) break;
        w_old = w;
      }
    }
    const double wn = w.norm();
    if (!(wn > 0.0) || !std::isfinite(wn)) {
      m.degenerate = true;
      break;
    }
    w /= wn;
    const Eigen::VectorXd t = xk * w;
    const double tt = t.squaredNorm();
    if (!(std::sqrt(tt) > eps * x_scale)) {
      m.degenerate = true;
      break;
    }
    const Eigen::VectorXd pl = xk.transpose() * t / tt;
    const Eigen::VectorXd ql = yk.transpose() * t / tt;
    xk.noalias() -= t * pl.transpose();
    yk.noalias() -= t * ql.transpose();
    m.x_weights.col(a) = w;
    m.x_loadings.col(a) = pl;
    m.y_loadings.col(a) = ql;
  }
  m.n_components = a;
  m.x_weights.conservativeResize(p, a);
  m.x_loadings.conservativeResize(p, a);
  m.y_loadings.conservativeResize(q, a);
  if (a == 0) {
    m.coef = Eigen::MatrixXd::Zero(p, q);
  } else {
    const Eigen::MatrixXd ptw = m.x_loadings.transpose() * m.x_weights;
    m.coef = m.x_weights * ptw.partialPivLu().solve(m.y_loadings.transpose());
  }
  return m;
}

}  // namespace vvs
