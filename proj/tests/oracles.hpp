#pragma once

// Independent reference implementations used only by the tests. Each is
// written from the defining formula, loops and all, without sharing code with
// the library.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Contrastive loss written term by term: full 2N x 2N matrix of
// s(i,j) = exp(cos(z_i, z_j) / tau) (or exp(cos)/tau in literal mode), the
// anchor's own term subtracted from its row sum, and the two directed terms
// of every pair averaged with the -1/(2N) factor. 1-based pairs (2i-1, 2i)
// are rows (2i-2, 2i-1) here.
inline double nt_xent(const Eigen::MatrixXd& z, double tau, bool literal = false) {
  const int rows = static_cast<int>(z.rows());
  const int n = rows / 2;
  std::vector<std::vector<long double>> s(rows, std::vector<long double>(rows));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < rows; ++j) {
      long double dot = 0, ni = 0, nj = 0;
      for (int c = 0; c < z.cols(); ++c) {
        dot += static_cast<long double>(z(i, c)) * z(j, c);
        ni += static_cast<long double>(z(i, c)) * z(i, c);
        nj += static_cast<long double>(z(j, c)) * z(j, c);
      }
      const long double sim = dot / (std::sqrt(ni) * std::sqrt(nj));
      s[i][j] = literal ? std::exp(sim) / tau : std::exp(sim / tau);
    }
  std::vector<long double> total(rows);
  for (int i = 0; i < rows; ++i) {
    long double acc = 0;
    for (int j = 0; j < rows; ++j) acc += s[i][j];
    total[i] = acc - s[i][i];
  }
  long double sum = 0;
  for (int i = 0; i < n; ++i) {
    const int a = 2 * i, b = 2 * i + 1;
    sum += std::log(s[a][b] / total[a]) + std::log(s[b][a] / total[b]);
  }
  return static_cast<double>(-sum / (2.0L * n));
}

// Mean of -log p[i, label_i].
inline double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
  double sum = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += -std::log(probs(static_cast<Eigen::Index>(i), labels[i]));
  return sum / labels.size();
}

// r = sum((a-ma)(b-mb)) / sqrt(sum((a-ma)^2) sum((b-mb)^2)).
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Least squares with intercept via the normal equations, predictions on xte.
inline Eigen::MatrixXd ols_predict(const Eigen::MatrixXd& xtr, const Eigen::MatrixXd& ytr,
                                   const Eigen::MatrixXd& xte) {
  Eigen::MatrixXd a(xtr.rows(), xtr.cols() + 1);
  a << Eigen::VectorXd::Ones(xtr.rows()), xtr;
  const Eigen::MatrixXd beta = (a.transpose() * a).ldlt().solve(a.transpose() * ytr);
  Eigen::MatrixXd b(xte.rows(), xte.cols() + 1);
  b << Eigen::VectorXd::Ones(xte.rows()), xte;
  return b * beta;
}

// Expected Spearman-Brown corrected split-half reliability of a neuron whose
// stimulus-driven signal has variance sig2 and whose repetitions carry
// independent noise of variance noise2, with n_reps repetitions split into
// two halves of n_reps/2. Half-means have noise variance noise2/(n_reps/2),
// so the half-to-half correlation is r = sig2 / (sig2 + 2 noise2 / n_reps)
// and 2r/(1+r) = sig2 / (sig2 + noise2 / n_reps).
inline double split_half_reliability(double sig2, double noise2, int n_reps) {
  const double r = sig2 / (sig2 + 2.0 * noise2 / n_reps);
  return 2.0 * r / (1.0 + r);
}

// Binomial interval around p0 for n trials: p0 +- z sqrt(p0 (1-p0) / n).
inline bool within_binomial_ci(double observed, double p0, int n, double z = 2.5758) {
  const double half = z * std::sqrt(p0 * (1.0 - p0) / n);
  return observed >= p0 - half && observed <= p0 + half;
}

}  // namespace oracle
