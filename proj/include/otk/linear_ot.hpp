#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "otk/core.hpp"

// Exact linear OT via the transportation simplex, plus the
// cyclical-monotonicity verifier and the Monge brute force.

namespace otk {

struct LinearSolution {
  Coupling plan;
  double value = 0.0;
  int iterations = 0;
};

/// Minimizes <C, P> over the transportation polytope. Northwest-corner
/// start, entering variable by most negative reduced cost (row-major tie
/// break), Bland's rule after 10(n+m) consecutive degenerate pivots. The
/// returned plan is an extreme point with support <= n+m-1.
LinearSolution solve_linear_ot(const Matrix& c, const Histogram& a,
                               const Histogram& b);

struct MonotonicityViolation {
  std::vector<IndexPair> pairs;  // (i_k, j_k), all in supp(P)
  std::vector<int> sigma;        // permutation of the j's
  double deficit = 0.0;          // sum C_{i_k j_k} - sum C_{i_k j_sigma(k)}
};

struct MonotonicityReport {
  bool pass = false;
  int max_n_checked = 0;
  std::optional<MonotonicityViolation> violation;
};

/// Checks sum_k C_{i_k j_k} <= sum_k C_{i_k j_sigma(k)} + tol over all
/// support subsets of size N <= max_n and all non-identity permutations.
/// A necessary condition for optimality; no sufficiency claim is made.
/// Refuses supports larger than 64 pairs. max_n must be 2 or 3.
MonotonicityReport check_cyclical_monotonicity(const Matrix& c,
                                               const Coupling& p,
                                               int max_n = 3,
                                               double tol = 1e-9);

inline constexpr int kMongeCap = 9;

/// Exhaustive minimum of <C, P_sigma> over all permutations, n <= 9.
/// Ties break to the lexicographically smallest sigma.
std::pair<Permutation, double> solve_monge(const Matrix& c);

struct MongeKantorovichReport {
  double monge_value = 0.0;
  double lp_value = 0.0;
  Permutation monge_perm = Permutation::identity(1);
  bool values_match = false;           // |monge - lp| <= 1e-9
  bool plan_is_permutation_mix = false;  // LP plan decomposes into permutations
  bool pass() const { return values_match && plan_is_permutation_mix; }
};

/// Checks the Monge = Kantorovich identity for uniform marginals.
MongeKantorovichReport verify_monge_equals_kantorovich(const Matrix& c);

}  // namespace otk
