#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "otk/gw.hpp"
#include "otk/io.hpp"
#include "test_util.hpp"

using namespace otk;

namespace {

struct Instance {
  CostMatrix c;
  CostMatrix cb;
  Histogram a;
  Histogram b;
};

Instance random_concave_instance(int n, int m, std::mt19937& rng) {
  return {testutil::random_sqdist_cost(n, 2, rng),
          testutil::random_sqdist_cost(m, 2, rng),
          testutil::random_histogram(n, rng), testutil::random_histogram(m, rng)};
}

}  // namespace

TEST_CASE("TensorOperator dense and separable agree") {
  std::mt19937 rng(83);
  const SeparableLoss loss = SeparableLoss::square();
  for (int trial = 0; trial < 20; ++trial) {
    const CostMatrix c = testutil::random_symmetric_cost(4, rng);
    const CostMatrix cb = testutil::random_symmetric_cost(3, rng);
    const auto dense = TensorOperator::from_dense(build_dense_tensor(loss, c, cb));
    const auto sep = TensorOperator::from_separable(loss, c, cb);
    const Matrix x = testutil::random_matrix(4, 3, rng, -1.0, 1.0);
    CHECK((dense.apply(x) - sep.apply(x)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(dense.objective(x) == doctest::Approx(sep.objective(x)).epsilon(1e-10));
  }
}

TEST_CASE("solve_gw_exact_concave identity instance") {
  // A space matched against itself: the identity permutation reaches zero.
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  const Histogram u2 = Histogram::uniform(2);
  const auto sol = solve_gw_exact_concave(
      SeparableLoss::square(), CostMatrix(c, true), CostMatrix(c, true), u2, u2);
  CHECK(sol.method == GwMethod::exact_concave);
  CHECK(sol.value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_FALSE(sol.upper_bound_only);
  REQUIRE(sol.certificate.has_value());
  CHECK(sol.certificate->concave);
}

TEST_CASE("solve_gw_exact_concave rejects non-concave instances") {
  Matrix c(2, 2), cb(2, 2);
  c << 0, 1, 1, 0;
  cb << 0, -1, -1, 0;
  const Histogram u2 = Histogram::uniform(2);
  CHECK_THROWS_AS(
      solve_gw_exact_concave(SeparableLoss::square(), CostMatrix(c, true),
                             CostMatrix(cb, true), u2, u2),
      std::invalid_argument);
}

TEST_CASE("solve_gw_permutation agrees with exact on uniform marginals") {
  std::mt19937 rng(89);
  const SeparableLoss loss = SeparableLoss::square();
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + trial % 2;  // 3 or 4
    const CostMatrix c = testutil::random_sqdist_cost(n, 2, rng);
    const CostMatrix cb = testutil::random_sqdist_cost(n, 2, rng);
    const Histogram u = Histogram::uniform(n);
    const auto exact = solve_gw_exact_concave(loss, c, cb, u, u);
    const auto perm = solve_gw_permutation(loss, c, cb);
    CHECK(perm.method == GwMethod::permutation);
    CHECK(perm.value == doctest::Approx(exact.value).epsilon(1e-9));
  }
}

TEST_CASE("solve_gw_permutation caps and ties") {
  const SeparableLoss loss = SeparableLoss::square();
  // Constant costs: every permutation ties at zero loss.
  const CostMatrix flat(Matrix::Zero(3, 3), true);
  const auto tie = solve_gw_permutation(loss, flat, flat);
  CHECK(as_permutation(tie.plan)->indices() == std::vector<int>{0, 1, 2});

  const CostMatrix big(Matrix::Zero(9, 9), true);
  CHECK_THROWS_AS(solve_gw_permutation(loss, big, big), std::invalid_argument);
}

TEST_CASE("frank-wolfe descends monotonically and is stationary") {
  std::mt19937 rng(97);
  const SeparableLoss loss = SeparableLoss::square();
  for (int trial = 0; trial < 20; ++trial) {
    const auto [c, cb, a, b] = random_concave_instance(4, 4, rng);
    const auto op = TensorOperator::from_separable(loss, c, cb);
    const auto sol = solve_gw_frank_wolfe(op, a, b, product_coupling(a, b));
    REQUIRE(!sol.fw_values.empty());
    for (std::size_t k = 1; k < sol.fw_values.size(); ++k)
      CHECK(sol.fw_values[k] <= sol.fw_values[k - 1] + 1e-12);
    CHECK(sol.value == doctest::Approx(sol.fw_values.back()).epsilon(1e-12));
    if (sol.converged) {
      REQUIRE(sol.fw_gap.has_value());
      CHECK(*sol.fw_gap <= 1e-9);
      CHECK(check_qp_lp_stationarity(op, sol.plan).pass);
      CHECK(gw_monotonicity_check(op, sol.plan).pass);
    }
  }
}

TEST_CASE("multistart upper-bounds the exact concave value") {
  std::mt19937 rng(101);
  const SeparableLoss loss = SeparableLoss::square();
  int matched = 0, total = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const auto [c, cb, a, b] = random_concave_instance(3, 3, rng);
    const auto exact = solve_gw_exact_concave(loss, c, cb, a, b);
    const auto op = TensorOperator::from_separable(loss, c, cb);
    const auto multi = solve_gw_multistart(op, a, b, 10, 5);
    CHECK(multi.upper_bound_only);
    CHECK(multi.value >= exact.value - 1e-9);
    ++total;
    if (multi.value <= exact.value + 1e-7) ++matched;
  }
  // Local search should reach the global optimum on most tiny instances.
  CHECK(matched * 5 >= total * 4);
}

TEST_CASE("stationarity fails off the optimum") {
  std::mt19937 rng(103);
  const SeparableLoss loss = SeparableLoss::square();
  const auto [c, cb, a, b] = random_concave_instance(4, 4, rng);
  const auto op = TensorOperator::from_separable(loss, c, cb);
  const auto exact = solve_gw_exact_concave(loss, c, cb, a, b);
  // The product coupling is almost never stationary for a generic instance.
  const auto report = check_qp_lp_stationarity(op, product_coupling(a, b));
  CHECK(report.plan_value >= report.lp_value - 1e-12);
  CHECK(check_qp_lp_stationarity(op, exact.plan).pass);
}

TEST_CASE("bilinear identity holds for symmetric operators") {
  std::mt19937 rng(107);
  const SeparableLoss loss = SeparableLoss::square();
  for (int trial = 0; trial < 20; ++trial) {
    const CostMatrix c = testutil::random_symmetric_cost(4, rng);
    const CostMatrix cb = testutil::random_symmetric_cost(3, rng);
    const auto op = TensorOperator::from_separable(loss, c, cb);
    const Matrix x = testutil::random_matrix(4, 3, rng, -1.0, 1.0);
    const Matrix y = testutil::random_matrix(4, 3, rng, -1.0, 1.0);
    CHECK(bilinear_identity_check(op, x, y) <= 1e-10);
  }
}

TEST_CASE("solve_bilinear brute vs alternating") {
  std::mt19937 rng(109);
  const SeparableLoss loss = SeparableLoss::square();
  for (int trial = 0; trial < 10; ++trial) {
    const auto [c, cb, a, b] = random_concave_instance(3, 3, rng);
    const auto op = TensorOperator::from_separable(loss, c, cb);
    const auto brute = solve_bilinear(op, a, b, BilinearMode::brute);
    CHECK(brute.exact);
    const auto local = solve_bilinear(op, a, b, BilinearMode::alternating);
    CHECK_FALSE(local.exact);
    CHECK(local.value >= brute.value - 1e-9);
    CHECK(op.apply(brute.plan1.matrix())
              .cwiseProduct(brute.plan2.matrix())
              .sum() == doctest::Approx(brute.value).epsilon(1e-10));
  }
}

TEST_CASE("bilinear relaxation is tight on concave instances") {
  std::mt19937 rng(113);
  const SeparableLoss loss = SeparableLoss::square();
  for (int trial = 0; trial < 15; ++trial) {
    const auto [c, cb, a, b] = random_concave_instance(3, 3, rng);
    const auto report = check_bilinear_tightness(loss, c, cb, a, b);
    CHECK(report.concave);
    CHECK(report.tight);
    CHECK(report.pair_attains);
    CHECK(report.relaxation_holds);
    CHECK(report.bilinear_value ==
          doctest::Approx(report.gw_value).epsilon(1e-9));
  }
}

TEST_CASE("bilinear relaxation direction on non-concave instances") {
  std::mt19937 rng(127);
  const SeparableLoss loss = SeparableLoss::square();
  int seen = 0;
  for (int trial = 0; trial < 100 && seen < 10; ++trial) {
    const CostMatrix c = testutil::random_symmetric_cost(3, rng, -1.0, 1.0);
    const CostMatrix cb = testutil::random_symmetric_cost(3, rng, -1.0, 1.0);
    if (separable_concavity_check(loss, c, cb).concave) continue;
    ++seen;
    const Histogram a = testutil::random_histogram(3, rng);
    const Histogram b = testutil::random_histogram(3, rng);
    const auto report = check_bilinear_tightness(loss, c, cb, a, b);
    CHECK_FALSE(report.concave);
    CHECK(report.relaxation_holds);
    CHECK(report.bilinear_value <= report.gw_value + 1e-9);
  }
  CHECK(seen >= 10);
}

TEST_CASE("kl loss end to end on positive costs") {
  std::mt19937 rng(131);
  const SeparableLoss loss = SeparableLoss::kl();
  const CostMatrix c(testutil::random_symmetric_cost(3, rng, 0.5, 2.0).matrix() +
                         Matrix::Constant(3, 3, 0.5),
                     true);
  const CostMatrix cb(
      testutil::random_symmetric_cost(3, rng, 0.5, 2.0).matrix() +
          Matrix::Constant(3, 3, 0.5),
      true);
  const Histogram u3 = Histogram::uniform(3);
  const auto op = TensorOperator::from_separable(loss, c, cb);
  const auto dense = TensorOperator::from_dense(build_dense_tensor(loss, c, cb));
  const Matrix x = testutil::random_matrix(3, 3, rng);
  CHECK((op.apply(x) - dense.apply(x)).cwiseAbs().maxCoeff() <= 1e-10);
  const auto sol = solve_gw_multistart(op, u3, u3, 5, 3);
  CHECK(std::isfinite(sol.value));
  CHECK(sol.value >= -1e-9);
}
