#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "vvs/error.hpp"
#include "vvs/losses.hpp"
#include "vvs/rng.hpp"

using namespace vvs;
using MatD = nn::Mat<double>;

namespace {

MatD random_proj(int rows, int cols, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  MatD z(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) z(i, j) = normal(rng);
  return z;
}

}  // namespace

TEST_CASE("nt_xent fixed points") {
  for (int rows : {4, 8, 16}) {
    MatD z(rows, 3);
    for (int i = 0; i < rows; ++i) z.row(i) << 0.3, -1.2, 2.0;
    for (double tau : {0.1, 0.5, 2.0}) CHECK(nt_xent(z, tau) == doctest::Approx(std::log(rows - 1.0)).epsilon(1e-12));
  }
  MatD four(4, 2);
  four << 1, 1, 1, 1, 1, 1, 1, 1;
  CHECK(std::abs(nt_xent(four, 0.5) - std::log(3.0)) < 1e-6);
}

TEST_CASE("nt_xent matches the term-by-term oracle") {
  MatD z(4, 3);
  z << 1.0, 0.0, 0.5, 0.9, 0.1, 0.4, -0.5, 1.0, 0.0, -0.4, 1.2, 0.1;
  CHECK(std::abs(nt_xent(z, 0.5) - oracle::nt_xent(z, 0.5)) < 1e-6);
  for (int t = 0; t < 20; ++t) {
    const int rows = 4 << (t % 3);
    const MatD r = random_proj(rows, t % 2 ? 8 : 2, 100 + t);
    CHECK(std::abs(nt_xent(r, 0.5) - oracle::nt_xent(r, 0.5)) < 1e-6);
    CHECK(std::abs(nt_xent(r, 0.3, TemperatureMode::literal) - oracle::nt_xent(r, 0.3, true)) < 1e-6);
  }
}

TEST_CASE("literal temperature cancels") {
  const MatD z = random_proj(8, 5, 3);
  CHECK(nt_xent(z, 0.1, TemperatureMode::literal) == doctest::Approx(nt_xent(z, 3.0, TemperatureMode::literal)));
  CHECK(nt_xent(z, 1.0, TemperatureMode::literal) == doctest::Approx(nt_xent(z, 1.0)));
}

TEST_CASE("nt_xent invariances") {
  const MatD z = random_proj(8, 4, 9);
  CHECK(nt_xent(z, 0.5) == doctest::Approx(nt_xent(MatD(z * 10.0), 0.5)).epsilon(1e-12));
  // Permute pairs, keeping partners adjacent (and swapping within a pair).
  const int perm[4] = {2, 0, 3, 1};
  MatD p(8, 4);
  for (int i = 0; i < 4; ++i) {
    p.row(2 * i) = z.row(2 * perm[i] + 1);
    p.row(2 * i + 1) = z.row(2 * perm[i]);
  }
  CHECK(std::abs(nt_xent(p, 0.5) - nt_xent(z, 0.5)) < 1e-6);
}

TEST_CASE("nt_xent gradient matches finite differences") {
  for (int seed = 0; seed < 5; ++seed) {
    const MatD z = random_proj(4, 3, 40 + seed);
    const LossGrad<double> g = nt_xent_with_grad(z, 0.5);
    CHECK(g.value == doctest::Approx(nt_xent(z, 0.5)));
    double num = 0.0, den = 0.0;
    const double h = 1e-6;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j) {
        MatD up = z, dn = z;
        up(i, j) += h;
        dn(i, j) -= h;
        const double fd = (nt_xent(up, 0.5) - nt_xent(dn, 0.5)) / (2 * h);
        num += (fd - g.grad(i, j)) * (fd - g.grad(i, j));
        den += fd * fd;
      }
    CHECK(std::sqrt(num / den) < 1e-4);
  }
}

TEST_CASE("nt_xent errors") {
  MatD z = random_proj(4, 3, 1);
  CHECK_THROWS_AS(nt_xent(z, 0.0), ConfigError);
  CHECK_THROWS_AS(nt_xent(z, -1.0), ConfigError);
  CHECK_THROWS_AS(nt_xent(MatD(random_proj(5, 3, 1)), 0.5), ShapeError);
  CHECK_THROWS_AS(nt_xent(MatD(random_proj(2, 3, 1)), 0.5), ShapeError);
  z.row(2).setZero();
  CHECK_THROWS_AS(nt_xent(z, 0.5), NumericError);
}

TEST_CASE("rp_loss values") {
  MatD uniform = MatD::Constant(5, 8, 1.0 / 8);
  const std::vector<int> labels = {0, 3, 7, 2, 5};
  CHECK(std::abs(rp_loss(uniform, labels) - std::log(8.0)) < 1e-6);

  MatD onehot = MatD::Zero(5, 8);
  for (int i = 0; i < 5; ++i) onehot(i, labels[i]) = 1.0;
  CHECK(rp_loss(onehot, labels) <= 1e-6);
  CHECK(rp_loss(onehot, labels) >= 0.0);

  MatD mixed(3, 8);
  mixed << 0.5, 0.1, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05,  //
      0.01, 0.01, 0.9, 0.02, 0.02, 0.02, 0.01, 0.01,     //
      0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.2;
  const std::vector<int> ml = {0, 3, 7};
  CHECK(std::abs(rp_loss(mixed, ml) - oracle::cross_entropy(mixed, ml)) < 1e-9);
}

TEST_CASE("rp_loss errors") {
  MatD uniform = MatD::Constant(2, 8, 1.0 / 8);
  CHECK_THROWS_AS(rp_loss(uniform, std::vector<int>{0, 8}), ShapeError);
  CHECK_THROWS_AS(rp_loss(uniform, std::vector<int>{-1, 0}), ShapeError);
  MatD off = uniform;
  off(1, 0) += 0.01;
  CHECK_THROWS_AS(rp_loss(off, std::vector<int>{0, 0}), NumericError);
  CHECK_THROWS_AS(rp_loss(MatD(MatD::Constant(2, 4, 0.25)), std::vector<int>{0, 0}), ShapeError);
}

TEST_CASE("rp_loss falls as mass moves to the true label") {
  const std::vector<int> label = {2};
  double prev = INFINITY;
  for (int s = 0; s <= 20; ++s) {
    const double t = s / 20.0;
    MatD p = MatD::Constant(1, 8, (1.0 - t) / 8);
    p(0, 2) += t;
    const double l = rp_loss(p, label);
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("log-softmax path agrees with the probability path") {
  const MatD logits = random_proj(6, 8, 12) * 3.0;
  const std::vector<int> labels = {1, 4, 0, 7, 7, 2};
  const LossGrad<double> g = rp_loss_from_logits(logits, labels);
  CHECK(g.value == doctest::Approx(rp_loss(nn::softmax_rows(logits), labels)).epsilon(1e-12));
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 8; ++j) {
      MatD up = logits, dn = logits;
      up(i, j) += h;
      dn(i, j) -= h;
      const double fd = (rp_loss_from_logits(up, labels).value - rp_loss_from_logits(dn, labels).value) / (2 * h);
      CHECK(g.grad(i, j) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("combined_loss") {
  const LossBreakdown a = combined_loss(1.0, 2.0, 0.0);
  CHECK(a.total == 1.0);
  CHECK(combined_loss(1.0, 2.0, 0.01).total == doctest::Approx(1.02));
  CHECK(combined_loss(1.0, 2.0, 0.05).total == doctest::Approx(1.10));
  const LossBreakdown b = combined_loss(0.7, 1.3, 0.002);
  CHECK(b.total == b.cl_loss + b.alpha * b.rpl_loss);
  CHECK_THROWS_AS(combined_loss(1.0, 2.0, -0.1), ConfigError);
}
