#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "otk/core.hpp"
#include "test_util.hpp"

using namespace otk;

TEST_CASE("make_histogram normalizes") {
  Vector w(2);
  w << 1, 1;
  CHECK(make_histogram(w).weights().isApprox(Vector::Constant(2, 0.5)));

  Vector v(2);
  v << 0.3, 0.7;
  CHECK(make_histogram(v).weights().isApprox(v));

  Vector u(3);
  u << 2, 0, 6;
  Vector expected(3);
  expected << 0.25, 0, 0.75;
  CHECK(make_histogram(u).weights().isApprox(expected));
}

TEST_CASE("make_histogram rejects bad input") {
  CHECK_THROWS_AS(make_histogram(Vector()), std::invalid_argument);
  Vector neg(2);
  neg << 1, -1;
  CHECK_THROWS_AS(make_histogram(neg), std::invalid_argument);
  CHECK_THROWS_AS(make_histogram(Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("coupling validation") {
  const Histogram h = Histogram::uniform(2);
  Matrix bad = Matrix::Constant(2, 2, 0.25);
  bad(0, 0) = 0.3;
  CHECK_THROWS_AS(Coupling(bad, h, h), std::invalid_argument);

  // Entries in [-1e-12, 0) are clamped; worse is rejected.
  Matrix tiny(2, 2);
  tiny << -5e-13, 0.5 + 5e-13, 0.5 + 5e-13, -5e-13;
  const Coupling clamped(tiny, h, h);
  CHECK(clamped(0, 0) == 0.0);
  CHECK(clamped(1, 1) == 0.0);

  Matrix worse(2, 2);
  worse << -1e-10, 0.5 + 1e-10, 0.5 + 1e-10, -1e-10;
  CHECK_THROWS_AS(Coupling(worse, h, h), std::invalid_argument);
}

TEST_CASE("product coupling") {
  const Histogram u2 = Histogram::uniform(2);
  CHECK(product_coupling(u2, u2).matrix().isApprox(
      Matrix::Constant(2, 2, 0.25)));

  const Histogram one = Histogram::uniform(1);
  CHECK(product_coupling(one, one)(0, 0) == doctest::Approx(1.0));

  Vector a(2), b(2);
  a << 0.3, 0.7;
  b << 0.5, 0.5;
  Matrix expected(2, 2);
  expected << 0.15, 0.15, 0.35, 0.35;
  CHECK(product_coupling(Histogram(a), Histogram(b))
            .matrix()
            .isApprox(expected));
}

TEST_CASE("support thresholding") {
  Matrix diag(2, 2);
  diag << 0.5, 0, 0, 0.5;
  CHECK(support(diag) == std::vector<IndexPair>{{0, 0}, {1, 1}});

  CHECK(support(Matrix::Constant(2, 2, 0.25)).size() == 4);

  Matrix sparse(2, 2);
  sparse << 0.3, 0.2, 0, 0.5;
  const auto supp = support(sparse);
  CHECK(supp == std::vector<IndexPair>{{0, 0}, {0, 1}, {1, 1}});
  CHECK(supp.size() == 3);  // n + m - 1
}

namespace {

QuadTensor square_loss_tensor_2x2() {
  Matrix c(2, 2), cb(2, 2);
  c << 0, 1, 1, 0;
  cb << 0, 2, 2, 0;
  return build_dense_tensor(SeparableLoss::square(), CostMatrix(c, true),
                            CostMatrix(cb, true));
}

Coupling identity_half() {
  Matrix p(2, 2);
  p << 0.5, 0, 0, 0.5;
  return Coupling(p, Histogram::uniform(2), Histogram::uniform(2));
}

}  // namespace

TEST_CASE("tensor_apply basics") {
  const Coupling p = identity_half();
  const QuadTensor zero(2, 2, true);
  CHECK(tensor_apply(zero, p.matrix()).isZero());

  QuadTensor ones(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) ones.set(i, j, k, l, 1.0);
  CHECK(tensor_apply(ones, p.matrix()).isApprox(Matrix::Constant(2, 2, 1.0)));

  // Brute-force oracle: (L (x) P)_{11} for the square-loss tensor.
  const QuadTensor l = square_loss_tensor_2x2();
  double oracle = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) oracle += l.at(i, j, 0, 0) * p(i, j);
  CHECK(oracle == doctest::Approx(0.25));
  CHECK(tensor_apply(l, p.matrix())(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("build_dense_tensor") {
  const CostMatrix scalar(Matrix::Zero(1, 1), true);
  const QuadTensor trivial =
      build_dense_tensor(SeparableLoss::square(), scalar, scalar);
  CHECK(trivial.at(0, 0, 0, 0) == 0.0);

  std::mt19937 rng(7);
  const CostMatrix c = testutil::random_symmetric_cost(3, rng);
  const QuadTensor l = build_dense_tensor(SeparableLoss::square(), c, c);
  CHECK(l.symmetric());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int ll = 0; ll < 3; ++ll) {
          const double diff = c(i, k) - c(j, ll);
          CHECK(l.at(i, j, k, ll) == doctest::Approx(0.5 * diff * diff));
        }

  const CostMatrix ones(Matrix::Ones(2, 2), true);
  const QuadTensor kl = build_dense_tensor(SeparableLoss::kl(), ones, ones);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l2 = 0; l2 < 2; ++l2)
          CHECK(kl.at(i, j, k, l2) == doctest::Approx(0.0));

  Matrix nonpos(2, 2);
  nonpos << 1, 0, 0, 1;
  CHECK_THROWS_AS(build_dense_tensor(SeparableLoss::kl(), ones,
                                     CostMatrix(nonpos, true)),
                  std::invalid_argument);
}

TEST_CASE("dense tensor cap") {
  const int n = 40;  // n*m = 1600 > 1024
  const CostMatrix big(Matrix::Zero(n, n), true);
  CHECK_THROWS_AS(
      build_dense_tensor(SeparableLoss::square(), big, big),
      std::invalid_argument);
}

TEST_CASE("gw objective dense") {
  const Coupling p = identity_half();
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  const QuadTensor same = build_dense_tensor(
      SeparableLoss::square(), CostMatrix(c, true), CostMatrix(c, true));
  CHECK(gw_objective_dense(same, p) == doctest::Approx(0.0));

  const QuadTensor l = square_loss_tensor_2x2();
  CHECK(gw_objective_dense(l, p) == doctest::Approx(0.25));
  CHECK(testutil::quadruple_sum_objective(l, p.matrix()) ==
        doctest::Approx(0.25));

  QuadTensor constant(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l2 = 0; l2 < 2; ++l2) constant.set(i, j, k, l2, 3.5);
  CHECK(gw_objective_dense(constant, p) == doctest::Approx(3.5));
}

TEST_CASE("gw objective separable matches dense") {
  const Histogram u2 = Histogram::uniform(2);
  Matrix c(2, 2), cb(2, 2);
  c << 0, 1, 1, 0;
  cb << 0, 2, 2, 0;
  const Coupling p = identity_half();
  CHECK(gw_objective_separable(SeparableLoss::square(), CostMatrix(c, true),
                               CostMatrix(cb, true), u2, u2, p) ==
        doctest::Approx(0.25));
  CHECK(gw_objective_separable(SeparableLoss::square(), CostMatrix(c, true),
                               CostMatrix(c, true), u2, u2, p) ==
        doctest::Approx(0.0));

  const CostMatrix ones(Matrix::Ones(2, 2), true);
  CHECK(gw_objective_separable(SeparableLoss::kl(), ones, ones, u2, u2, p) ==
        doctest::Approx(0.0));
}

TEST_CASE("separable objective rejects marginal mismatch") {
  const Histogram u2 = Histogram::uniform(2);
  Vector skew(2);
  skew << 0.3, 0.7;
  const Coupling p = product_coupling(Histogram(skew), u2);
  const CostMatrix c(Matrix::Zero(2, 2), true);
  CHECK_THROWS_AS(gw_objective_separable(SeparableLoss::square(), c, c, u2,
                                         u2, p),
                  std::invalid_argument);
}

TEST_CASE("dense and separable objectives agree on random instances") {
  std::mt19937 rng(42);
  for (int seed = 0; seed < 100; ++seed) {
    std::uniform_int_distribution<int> size(2, 6);
    const int n = size(rng), m = size(rng);
    const Histogram a = testutil::random_histogram(n, rng);
    const Histogram b = testutil::random_histogram(m, rng);
    const Coupling p = testutil::random_coupling(a, b, rng);
    for (const LossPreset preset : {LossPreset::square, LossPreset::kl}) {
      const SeparableLoss loss = loss_from_preset(preset);
      // Strictly positive entries keep the kl preset in-domain, so the
      // usual zero diagonal is not used here.
      const Matrix raw1 = testutil::random_matrix(n, n, rng, 0.5, 2.0);
      const Matrix raw2 = testutil::random_matrix(m, m, rng, 0.5, 2.0);
      const CostMatrix c(Matrix(0.5 * (raw1 + raw1.transpose())), true);
      const CostMatrix cb(Matrix(0.5 * (raw2 + raw2.transpose())), true);
      const QuadTensor l = build_dense_tensor(loss, c, cb);
      const double dense = gw_objective_dense(l, p);
      const double separable = gw_objective_separable(loss, c, cb, a, b, p);
      CHECK(std::abs(dense - separable) <= 1e-10 * std::max(1.0, std::abs(dense)));
    }
  }
}

TEST_CASE("tensor_apply linearity and self-adjointness") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3, m = 4;
    const Histogram a = testutil::random_histogram(n, rng);
    const Histogram b = testutil::random_histogram(m, rng);
    const CostMatrix c = testutil::random_symmetric_cost(n, rng);
    const CostMatrix cb = testutil::random_symmetric_cost(m, rng);
    const QuadTensor l = build_dense_tensor(SeparableLoss::square(), c, cb);

    const Matrix p = testutil::random_coupling(a, b, rng).matrix();
    const Matrix q = testutil::random_coupling(a, b, rng).matrix();
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    const double alpha = dist(rng), beta = dist(rng);

    const Matrix combined = tensor_apply(l, alpha * p + beta * q);
    const Matrix split = alpha * tensor_apply(l, p) + beta * tensor_apply(l, q);
    CHECK((combined - split).cwiseAbs().maxCoeff() <= 1e-12);

    // <L (x) P, Q> = <L (x) Q, P> for symmetric L.
    const double lhs = tensor_apply(l, p).cwiseProduct(q).sum();
    const double rhs = tensor_apply(l, q).cwiseProduct(p).sum();
    CHECK(std::abs(lhs - rhs) <= 1e-10);
  }
}

TEST_CASE("directional derivative matches finite differences") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3, m = 3;
    const Histogram a = testutil::random_histogram(n, rng);
    const Histogram b = testutil::random_histogram(m, rng);
    const CostMatrix c = testutil::random_symmetric_cost(n, rng);
    const CostMatrix cb = testutil::random_symmetric_cost(m, rng);
    const QuadTensor l = build_dense_tensor(SeparableLoss::square(), c, cb);

    const Matrix p = testutil::random_coupling(a, b, rng).matrix();
    const Matrix d = testutil::random_coupling(a, b, rng).matrix() -
                     testutil::random_coupling(a, b, rng).matrix();
    const double analytic = 2.0 * tensor_apply(l, p).cwiseProduct(d).sum();
    const double h = 1e-5;
    const double central = (gw_objective_dense(l, Matrix(p + h * d)) -
                            gw_objective_dense(l, Matrix(p - h * d))) /
                           (2.0 * h);
    CHECK(std::abs(analytic - central) <=
          1e-6 * std::max(1.0, std::abs(analytic)));
  }
}

TEST_CASE("quad tensor symmetry checks") {
  QuadTensor l(2, 2);
  l.set(0, 0, 1, 1, 1.0);
  CHECK_FALSE(l.verify_symmetric());
  CHECK_THROWS_AS(l.mark_symmetric(), std::invalid_argument);
  const QuadTensor s = l.symmetrized();
  CHECK(s.symmetric());
  CHECK(s.at(0, 0, 1, 1) == doctest::Approx(0.5));
  CHECK(s.at(1, 1, 0, 0) == doctest::Approx(0.5));
}

TEST_CASE("permutation type") {
  CHECK_THROWS_AS(Permutation({0, 0}), std::invalid_argument);
  const Permutation swap({1, 0});
  const Coupling p = swap.as_coupling();
  CHECK(p(0, 1) == doctest::Approx(0.5));
  CHECK(p(1, 0) == doctest::Approx(0.5));
}
