#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "otk/cnd.hpp"
#include "otk/core.hpp"
#include "otk/linear_ot.hpp"

// GW solvers (exact-under-concavity, Frank-Wolfe local, permutation brute
// force), the bilinear relaxation, and the QP -> LP verifiers.

namespace otk {

/// Type-erased symmetric quadratic cost: X -> L (x) X. Dense tensors are
/// symmetrized on ingestion, which leaves the quadratic form unchanged.
class TensorOperator {
 public:
  static TensorOperator from_dense(const QuadTensor& l);
  static TensorOperator from_separable(const SeparableLoss& loss,
                                       const CostMatrix& c,
                                       const CostMatrix& cb);

  Matrix apply(const Matrix& x) const { return apply_(x); }
  double objective(const Matrix& x) const {
    return apply_(x).cwiseProduct(x).sum();
  }
  int n() const { return n_; }
  int m() const { return m_; }

 private:
  TensorOperator(std::function<Matrix(const Matrix&)> apply, int n, int m)
      : apply_(std::move(apply)), n_(n), m_(m) {}

  std::function<Matrix(const Matrix&)> apply_;
  int n_, m_;
};

enum class GwMethod { exact_concave, frank_wolfe, permutation };

struct GwSolution {
  Coupling plan;
  double value = 0.0;
  GwMethod method = GwMethod::frank_wolfe;
  std::optional<ConcavityCheck> certificate;
  std::optional<double> fw_gap;
  bool converged = true;             // false when FW hits max_iter
  std::vector<double> fw_values;     // objective per FW iterate
  bool upper_bound_only = false;     // set for local solutions
};

/// Global minimum over the polytope vertices; valid because a concave
/// objective attains its minimum at an extreme point. Requires a concavity
/// certificate and n*m <= 25.
GwSolution solve_gw_exact_concave(const SeparableLoss& loss,
                                  const CostMatrix& c, const CostMatrix& cb,
                                  const Histogram& a, const Histogram& b);

inline constexpr int kGwPermutationCap = 8;

/// Exhaustive minimum over permutation matrices / n, uniform marginals,
/// n = m <= 8. Ties break to the lexicographically smallest permutation.
GwSolution solve_gw_permutation(const SeparableLoss& loss, const CostMatrix& c,
                                const CostMatrix& cb);

struct FrankWolfeOptions {
  int max_iter = 200;
  double tol = 1e-9;
};

/// Conditional-gradient descent with exact line search on the quadratic.
/// Direction finding is a linear OT solve on the frozen gradient 2 L (x) P.
GwSolution solve_gw_frank_wolfe(const TensorOperator& op, const Histogram& a,
                                const Histogram& b, const Coupling& start,
                                FrankWolfeOptions options = {});

/// Best of `starts` Frank-Wolfe runs: the product coupling plus random
/// vertices. The result is an upper bound unless certified otherwise.
GwSolution solve_gw_multistart(const TensorOperator& op, const Histogram& a,
                               const Histogram& b, int starts = 10,
                               unsigned seed = 0,
                               FrankWolfeOptions options = {});

struct StationarityReport {
  bool pass = false;
  double plan_value = 0.0;  // <L (x) P*, P*>
  double lp_value = 0.0;    // LP minimum with frozen cost L (x) P*
};

/// A QP solution solves the LP with its own frozen cost: pass iff
/// <C, P*> <= LP value + tol for C = L (x) P*.
StationarityReport check_qp_lp_stationarity(const TensorOperator& op,
                                            const Coupling& p_star,
                                            double tol = 1e-7);

/// Cyclical monotonicity of P* under its frozen cost L (x) P*.
MonotonicityReport gw_monotonicity_check(const TensorOperator& op,
                                         const Coupling& p_star,
                                         int max_n = 3);

enum class BilinearMode { alternating, brute };

struct BilinearSolution {
  Coupling plan1;
  Coupling plan2;
  double value = 0.0;
  bool exact = false;  // true only in brute mode
};

/// Minimizes <L (x) P1, P2>. Brute mode is exact over vertex pairs
/// (n*m <= 25); alternating mode returns a local pair.
BilinearSolution solve_bilinear(const TensorOperator& op, const Histogram& a,
                                const Histogram& b,
                                BilinearMode mode = BilinearMode::brute);

/// |g(P1,P2) - (f(P1+P2) - f(P1) - f(P2))/2| for the quadratic form f
/// evaluated on arbitrary matrices; <= 1e-10 * max(1, |g|) for symmetric L.
double bilinear_identity_check(const TensorOperator& op, const Matrix& p1,
                               const Matrix& p2);

struct TightnessReport {
  bool concave = false;
  bool tight = false;           // asserted only on concave instances
  bool pair_attains = false;    // (P_gw, P_gw) reaches the bilinear value
  bool relaxation_holds = false;  // bilinear <= GW value + 1e-9
  double bilinear_value = 0.0;
  double gw_value = 0.0;        // exact when concave, upper bound otherwise
};

/// Tightness of the bilinear relaxation. On concave instances asserts
/// equality within 1e-9; otherwise reports the relaxation direction only.
TightnessReport check_bilinear_tightness(const SeparableLoss& loss,
                                         const CostMatrix& c,
                                         const CostMatrix& cb,
                                         const Histogram& a,
                                         const Histogram& b,
                                         unsigned seed = 0);

}  // namespace otk
