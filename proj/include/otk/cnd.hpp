#pragma once

#include <optional>

#include "otk/core.hpp"

// CND/CPD certification of symmetric matrices, the concavity criterion for
// separable losses, and explicit witness construction when concavity fails.

namespace otk {

enum class CndVerdict { cnd, cpd, both, neither };

/// Certificate for the conditional definiteness of a symmetric matrix,
/// decided from the spectrum of the doubly centered matrix H C H.
struct CndCertificate {
  CndVerdict verdict = CndVerdict::neither;
  double max_eigenvalue = 0.0;
  double min_eigenvalue = 0.0;
  Vector max_witness;  // zero-sum eigenvector at the max eigenvalue
  Vector min_witness;  // zero-sum eigenvector at the min eigenvalue
  double tol = 0.0;

  bool is_cnd() const {
    return verdict == CndVerdict::cnd || verdict == CndVerdict::both;
  }
  bool is_cpd() const {
    return verdict == CndVerdict::cpd || verdict == CndVerdict::both;
  }
  /// Eigenvalue of largest magnitude with its witness.
  double extreme_eigenvalue() const;
  const Vector& witness_vector() const;
};

/// H_n = I_n - (1/n) 1_n 1_n^T.
Matrix centering_matrix(int n);

/// CND iff the max eigenvalue of H C H is <= tol, CPD iff the min
/// eigenvalue is >= -tol. Default tol = 1e-9 * max(1, max |C_ij|).
CndCertificate certify_cnd(const Matrix& c,
                           std::optional<double> tol = std::nullopt);

struct ConcavityCheck {
  bool concave = false;
  CndCertificate h1_certificate;
  CndCertificate h2_certificate;
};

/// The separable GW objective is concave iff h1(C) and h2(Cb) are both CND
/// or both CPD.
ConcavityCheck separable_concavity_check(const SeparableLoss& loss,
                                         const CostMatrix& c,
                                         const CostMatrix& cb);

/// Pair of feasible couplings violating the midpoint inequality of the GW
/// objective, built as a b^T +/- eps * u v^T from centered eigenvectors.
struct ConcavityWitness {
  Coupling p1;
  Coupling p2;
  DiffPlan q;           // p1 - p2
  double midpoint_gap;  // f((p1+p2)/2) - (f(p1)+f(p2))/2, strictly < -1e-12
};

/// Requires a non-concave instance and strictly positive a_i b_j. Eigenpair
/// candidates are tried by decreasing |mu * lambda| among pairs with
/// mu * lambda > 0.
ConcavityWitness build_concavity_witness(const SeparableLoss& loss,
                                         const CostMatrix& c,
                                         const CostMatrix& cb,
                                         const Histogram& a,
                                         const Histogram& b);

struct TensorCndSample {
  bool refuted = false;
  int witness_trial = -1;
  double witness_value = 0.0;
  std::optional<DiffPlan> witness;
};

/// Sampling refutation of the tensor CND property: draws random coupling
/// pairs and checks <L (x) Q, Q> <= 1e-9 for Q = P1 - P2. Not a proof of
/// CND when no refutation is found.
TensorCndSample tensor_cnd_sample_check(const QuadTensor& l,
                                        const Histogram& a, const Histogram& b,
                                        int trials, unsigned seed);

}  // namespace otk
