#include "otk/gw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include "otk/polytope.hpp"

namespace otk {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

TensorOperator TensorOperator::from_dense(const QuadTensor& l) {
  auto sym = std::make_shared<QuadTensor>(
      l.symmetric() ? l : l.symmetrized());
  return TensorOperator(
      [sym](const Matrix& x) { return tensor_apply(*sym, x); }, l.n(), l.m());
}

TensorOperator TensorOperator::from_separable(const SeparableLoss& loss,
                                              const CostMatrix& c,
                                              const CostMatrix& cb) {
  require(c.symmetric() && cb.symmetric(),
          "TensorOperator: intra costs must be symmetric");
  auto state = std::make_shared<std::pair<SeparableLoss,
                                          std::pair<CostMatrix, CostMatrix>>>(
      loss, std::make_pair(c, cb));
  return TensorOperator(
      [state](const Matrix& x) {
        return separable_tensor_apply(state->first, state->second.first,
                                      state->second.second, x);
      },
      c.rows(), cb.rows());
}

GwSolution solve_gw_exact_concave(const SeparableLoss& loss,
                                  const CostMatrix& c, const CostMatrix& cb,
                                  const Histogram& a, const Histogram& b) {
  const ConcavityCheck check = separable_concavity_check(loss, c, cb);
  if (!check.concave)
    throw std::invalid_argument(
        "solve_gw_exact_concave: instance is not certified concave; the "
        "vertex minimum would only be an upper bound");
  require(a.size() * b.size() <= kVertexEnumerationCap,
          "solve_gw_exact_concave: n*m exceeds the enumeration cap");

  std::vector<Coupling> vertices = enumerate_vertices(a, b);
  int best = -1;
  double best_value = std::numeric_limits<double>::infinity();
  for (int v = 0; v < static_cast<int>(vertices.size()); ++v) {
    const double value = gw_objective_separable(loss, c, cb, a, b, vertices[v]);
    if (value < best_value) {  // canonical vertex order breaks ties
      best_value = value;
      best = v;
    }
  }
  GwSolution sol{std::move(vertices[best]), best_value,
                 GwMethod::exact_concave};
  sol.certificate = check;
  return sol;
}

GwSolution solve_gw_permutation(const SeparableLoss& loss, const CostMatrix& c,
                                const CostMatrix& cb) {
  const int n = c.rows();
  require(cb.rows() == n, "solve_gw_permutation: costs must have equal size");
  require(n <= kGwPermutationCap,
          "solve_gw_permutation: n exceeds the brute-force cap");
  const Histogram uniform = Histogram::uniform(n);

  std::vector<int> sigma(n), best(n);
  std::iota(sigma.begin(), sigma.end(), 0);
  best = sigma;
  double best_value = std::numeric_limits<double>::infinity();
  do {
    const Coupling plan = Permutation(sigma).as_coupling();
    const double value =
        gw_objective_separable(loss, c, cb, uniform, uniform, plan);
    if (value < best_value) {  // keeps the lexicographically smallest sigma
      best_value = value;
      best = sigma;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));

  GwSolution sol{Permutation(best).as_coupling(), best_value,
                 GwMethod::permutation};
  return sol;
}

GwSolution solve_gw_frank_wolfe(const TensorOperator& op, const Histogram& a,
                                const Histogram& b, const Coupling& start,
                                FrankWolfeOptions options) {
  require(start.rows() == op.n() && start.cols() == op.m(),
          "solve_gw_frank_wolfe: start shape mismatch");
  Matrix p = start.matrix();
  GwSolution sol{start, op.objective(p), GwMethod::frank_wolfe};
  sol.converged = false;
  sol.fw_values.push_back(sol.value);

  for (int iter = 0; iter < options.max_iter; ++iter) {
    const Matrix gradient = 2.0 * op.apply(p);
    const LinearSolution direction = solve_linear_ot(gradient, a, b);
    const Matrix delta = direction.plan.matrix() - p;
    const double gap = -gradient.cwiseProduct(delta).sum();
    sol.fw_gap = gap;
    if (gap <= options.tol) {
      sol.converged = true;
      break;
    }
    // Quadratic along the segment: q(g) = f(P) + g <G, delta> + g^2 <L x d, d>.
    const double lin = gradient.cwiseProduct(delta).sum();
    const double quad = op.objective(delta);
    double step;
    if (quad > 0.0)
      step = std::clamp(-lin / (2.0 * quad), 0.0, 1.0);
    else
      step = (lin + quad < 0.0) ? 1.0 : 0.0;  // better endpoint
    if (step == 0.0) {
      // No descent along a direction with positive gap: numerically
      // stationary.
      sol.converged = true;
      break;
    }
    p += step * delta;
    sol.fw_values.push_back(op.objective(p));
  }

  sol.plan = Coupling(p, a, b);
  sol.value = op.objective(sol.plan.matrix());
  sol.upper_bound_only = true;
  return sol;
}

GwSolution solve_gw_multistart(const TensorOperator& op, const Histogram& a,
                               const Histogram& b, int starts, unsigned seed,
                               FrankWolfeOptions options) {
  require(starts >= 1, "solve_gw_multistart: starts must be >= 1");
  std::mt19937 rng(seed);
  std::optional<GwSolution> best;
  for (int s = 0; s < starts; ++s) {
    const Coupling start =
        (s == 0) ? product_coupling(a, b) : random_vertex(a, b, rng);
    GwSolution run = solve_gw_frank_wolfe(op, a, b, start, options);
    if (!best || run.value < best->value) best = std::move(run);
  }
  return std::move(*best);
}

StationarityReport check_qp_lp_stationarity(const TensorOperator& op,
                                            const Coupling& p_star,
                                            double tol) {
  const Matrix frozen_cost = op.apply(p_star.matrix());
  const LinearSolution lp =
      solve_linear_ot(frozen_cost, p_star.row_marginal(),
                      p_star.col_marginal());
  StationarityReport report;
  report.plan_value = frozen_cost.cwiseProduct(p_star.matrix()).sum();
  report.lp_value = lp.value;
  report.pass = report.plan_value <= report.lp_value + tol;
  return report;
}

MonotonicityReport gw_monotonicity_check(const TensorOperator& op,
                                         const Coupling& p_star, int max_n) {
  return check_cyclical_monotonicity(op.apply(p_star.matrix()), p_star, max_n);
}

BilinearSolution solve_bilinear(const TensorOperator& op, const Histogram& a,
                                const Histogram& b, BilinearMode mode) {
  if (mode == BilinearMode::brute) {
    require(a.size() * b.size() <= kVertexEnumerationCap,
            "solve_bilinear: n*m exceeds the enumeration cap in brute mode");
    // The objective is linear in each argument separately, so some optimal
    // pair lies on vertices.
    std::vector<Coupling> vertices = enumerate_vertices(a, b);
    int best1 = 0, best2 = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (int v1 = 0; v1 < static_cast<int>(vertices.size()); ++v1) {
      const Matrix applied = op.apply(vertices[v1].matrix());
      for (int v2 = 0; v2 < static_cast<int>(vertices.size()); ++v2) {
        const double value =
            applied.cwiseProduct(vertices[v2].matrix()).sum();
        if (value < best_value) {
          best_value = value;
          best1 = v1;
          best2 = v2;
        }
      }
    }
    return {vertices[best1], vertices[best2], best_value, true};
  }

  // Alternating LP minimization; uses symmetry of L to update both plans.
  Coupling p1 = product_coupling(a, b);
  Coupling p2 = p1;
  double value = op.apply(p1.matrix()).cwiseProduct(p2.matrix()).sum();
  for (int iter = 0; iter < 200; ++iter) {
    p2 = solve_linear_ot(op.apply(p1.matrix()), a, b).plan;
    p1 = solve_linear_ot(op.apply(p2.matrix()), a, b).plan;
    const double next = op.apply(p1.matrix()).cwiseProduct(p2.matrix()).sum();
    if (value - next <= 1e-10) {
      value = std::min(value, next);
      break;
    }
    value = next;
  }
  return {std::move(p1), std::move(p2), value, false};
}

double bilinear_identity_check(const TensorOperator& op, const Matrix& p1,
                               const Matrix& p2) {
  const double g = op.apply(p1).cwiseProduct(p2).sum();
  const double f_sum = op.objective(p1 + p2);
  const double rhs = 0.5 * (f_sum - op.objective(p1) - op.objective(p2));
  return std::abs(g - rhs);
}

TightnessReport check_bilinear_tightness(const SeparableLoss& loss,
                                         const CostMatrix& c,
                                         const CostMatrix& cb,
                                         const Histogram& a,
                                         const Histogram& b, unsigned seed) {
  require(a.size() * b.size() <= kVertexEnumerationCap,
          "check_bilinear_tightness: n*m exceeds the enumeration cap");
  const TensorOperator op = TensorOperator::from_separable(loss, c, cb);
  const ConcavityCheck check = separable_concavity_check(loss, c, cb);
  const BilinearSolution bilinear =
      solve_bilinear(op, a, b, BilinearMode::brute);

  TightnessReport report;
  report.concave = check.concave;
  report.bilinear_value = bilinear.value;
  if (check.concave) {
    const GwSolution gw = solve_gw_exact_concave(loss, c, cb, a, b);
    report.gw_value = gw.value;
    report.tight = std::abs(bilinear.value - gw.value) <= 1e-9;
    const double pair_value =
        op.apply(gw.plan.matrix()).cwiseProduct(gw.plan.matrix()).sum();
    report.pair_attains = std::abs(pair_value - bilinear.value) <= 1e-9;
    report.relaxation_holds = bilinear.value <= report.gw_value + 1e-9;
  } else {
    // Non-concave: the GW value is only an upper bound, so just the
    // relaxation direction is reported.
    const GwSolution gw = solve_gw_multistart(op, a, b, 10, seed);
    report.gw_value = gw.value;
    report.relaxation_holds = bilinear.value <= report.gw_value + 1e-9;
  }
  return report;
}

}  // namespace otk
