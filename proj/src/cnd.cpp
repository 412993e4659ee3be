#include "otk/cnd.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "otk/polytope.hpp"

namespace otk {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Eigenvector at index idx, projected onto the zero-sum hyperplane. Falls
// back to nearby indices with the same eigenvalue when the projection is
// numerically null (the all-ones kernel direction of H C H).
Vector zero_sum_witness(const Eigen::SelfAdjointEigenSolver<Matrix>& eig,
                        int idx) {
  const int n = static_cast<int>(eig.eigenvalues().size());
  const double target = eig.eigenvalues()(idx);
  const Vector ones = Vector::Ones(n);
  for (int step = 0; step < n; ++step) {
    for (int cand : {idx - step, idx + step}) {
      if (cand < 0 || cand >= n) continue;
      if (std::abs(eig.eigenvalues()(cand) - target) > 1e-9) continue;
      Vector w = eig.eigenvectors().col(cand);
      w -= (w.sum() / n) * ones;
      if (w.norm() > 1e-12) return w / w.norm();
    }
  }
  return Vector::Zero(n);
}

}  // namespace

double CndCertificate::extreme_eigenvalue() const {
  return std::abs(max_eigenvalue) >= std::abs(min_eigenvalue) ? max_eigenvalue
                                                              : min_eigenvalue;
}

const Vector& CndCertificate::witness_vector() const {
  return std::abs(max_eigenvalue) >= std::abs(min_eigenvalue) ? max_witness
                                                              : min_witness;
}

Matrix centering_matrix(int n) {
  require(n >= 1, "centering_matrix: n must be positive");
  return Matrix::Identity(n, n) -
         Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
}

CndCertificate certify_cnd(const Matrix& c, std::optional<double> tol_opt) {
  const int n = static_cast<int>(c.rows());
  require(c.cols() == n, "certify_cnd: matrix must be square");
  require((c - c.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()),
          "certify_cnd: matrix must be symmetric");

  const double tol =
      tol_opt.value_or(1e-9 * std::max(1.0, c.cwiseAbs().maxCoeff()));
  const Matrix h = centering_matrix(n);
  const Matrix centered = h * c * h;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(
      0.5 * (centered + centered.transpose()));

  CndCertificate cert;
  cert.tol = tol;
  cert.max_eigenvalue = eig.eigenvalues()(n - 1);
  cert.min_eigenvalue = eig.eigenvalues()(0);
  cert.max_witness = zero_sum_witness(eig, n - 1);
  cert.min_witness = zero_sum_witness(eig, 0);

  const bool cnd = cert.max_eigenvalue <= tol;
  const bool cpd = cert.min_eigenvalue >= -tol;
  cert.verdict = cnd && cpd   ? CndVerdict::both
                 : cnd        ? CndVerdict::cnd
                 : cpd        ? CndVerdict::cpd
                              : CndVerdict::neither;
  return cert;
}

ConcavityCheck separable_concavity_check(const SeparableLoss& loss,
                                         const CostMatrix& c,
                                         const CostMatrix& cb) {
  require(c.symmetric() && cb.symmetric(),
          "separable_concavity_check: intra costs must be symmetric");
  ConcavityCheck check;
  check.h1_certificate = certify_cnd(elementwise(loss.h1, c.matrix()));
  check.h2_certificate = certify_cnd(elementwise(loss.h2, cb.matrix()));
  check.concave =
      (check.h1_certificate.is_cnd() && check.h2_certificate.is_cnd()) ||
      (check.h1_certificate.is_cpd() && check.h2_certificate.is_cpd());
  return check;
}

ConcavityWitness build_concavity_witness(const SeparableLoss& loss,
                                         const CostMatrix& c,
                                         const CostMatrix& cb,
                                         const Histogram& a,
                                         const Histogram& b) {
  const ConcavityCheck check = separable_concavity_check(loss, c, cb);
  require(!check.concave,
          "build_concavity_witness: instance is concave, no witness exists");
  const int n = a.size(), m = b.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      require(a[i] * b[j] > 0.0,
              "build_concavity_witness: needs strictly positive a_i b_j");

  const Matrix c1 = elementwise(loss.h1, c.matrix());
  const Matrix c2 = -elementwise(loss.h2, cb.matrix());
  const Matrix hn = centering_matrix(n), hm = centering_matrix(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig1(hn * c1 * hn);
  Eigen::SelfAdjointEigenSolver<Matrix> eig2(hm * c2 * hm);

  const double tol1 = check.h1_certificate.tol;
  const double tol2 = 1e-9 * std::max(1.0, c2.cwiseAbs().maxCoeff());

  // Candidate eigenpairs with mu * lambda > 0, strongest product first.
  struct Pair {
    int p, q;
    double product;
  };
  std::vector<Pair> candidates;
  for (int p = 0; p < n; ++p) {
    const double mu = eig1.eigenvalues()(p);
    if (std::abs(mu) <= tol1) continue;
    for (int q = 0; q < m; ++q) {
      const double lambda = eig2.eigenvalues()(q);
      if (std::abs(lambda) <= tol2) continue;
      if (mu * lambda > 0.0) candidates.push_back({p, q, mu * lambda});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Pair& x,
                                                     const Pair& y) {
    return x.product > y.product;
  });
  require(!candidates.empty(),
          "build_concavity_witness: no eigenvalue pair with positive "
          "product; the quadratic part is numerically null on the polytope");

  const Matrix base = a.weights() * b.weights().transpose();
  for (const Pair& cand : candidates) {
    const Vector u = hn * eig1.eigenvectors().col(cand.p);
    const Vector v = hm * eig2.eigenvectors().col(cand.q);
    const Matrix q = u * v.transpose();
    double eps = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (std::abs(q(i, j)) > 1e-14)
          eps = std::min(eps, a[i] * b[j] / std::abs(q(i, j)));
    if (!std::isfinite(eps)) continue;  // numerically null Q, next pair
    eps *= 0.5;  // half the strict feasibility bound

    Coupling p1(base + eps * q, a, b);
    Coupling p2(base - eps * q, a, b);
    Coupling mid(base, a, b);
    const double gap =
        gw_objective_separable(loss, c, cb, a, b, mid) -
        0.5 * (gw_objective_separable(loss, c, cb, a, b, p1) +
               gw_objective_separable(loss, c, cb, a, b, p2));
    if (gap < -1e-12) {
      DiffPlan diff(p1, p2);
      return ConcavityWitness{std::move(p1), std::move(p2), std::move(diff),
                              gap};
    }
  }
  throw std::runtime_error(
      "build_concavity_witness: every candidate eigenpair produced a "
      "numerically null midpoint gap");
}

TensorCndSample tensor_cnd_sample_check(const QuadTensor& l,
                                        const Histogram& a, const Histogram& b,
                                        int trials, unsigned seed) {
  require(l.symmetric(), "tensor_cnd_sample_check: tensor must be symmetric");
  require(trials >= 1, "tensor_cnd_sample_check: trials must be >= 1");
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> n_mix(1, 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto random_coupling = [&]() {
    const int k = n_mix(rng);
    Matrix acc = Matrix::Zero(a.size(), b.size());
    double total = 0.0;
    for (int t = 0; t < k; ++t) {
      const double w = unif(rng) + 1e-3;
      acc += w * random_vertex(a, b, rng).matrix();
      total += w;
    }
    return Coupling(acc / total, a, b);
  };

  TensorCndSample result;
  for (int t = 0; t < trials; ++t) {
    const Coupling p1 = random_coupling();
    const Coupling p2 = random_coupling();
    const Matrix q = p1.matrix() - p2.matrix();
    const double value = (tensor_apply(l, q).array() * q.array()).sum();
    if (value > 1e-9) {
      result.refuted = true;
      result.witness_trial = t;
      result.witness_value = value;
      result.witness = DiffPlan(q);
      return result;
    }
  }
  return result;
}

}  // namespace otk
