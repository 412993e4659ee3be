#include "otk/core.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace otk {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Histogram::Histogram(Vector weights) : w_(std::move(weights)) {
  require(w_.size() >= 1, "Histogram: empty weight vector");
  for (int i = 0; i < w_.size(); ++i) {
    require(w_(i) >= 0.0, "Histogram: negative weight at index " +
                              std::to_string(i));
  }
  require(std::abs(w_.sum() - 1.0) <= kMarginalTol,
          "Histogram: weights do not sum to 1");
}

Histogram Histogram::uniform(int n) {
  require(n >= 1, "Histogram::uniform: n must be positive");
  return Histogram(Vector::Constant(n, 1.0 / n));
}

Histogram make_histogram(const Vector& weights) {
  require(weights.size() >= 1, "make_histogram: empty vector");
  for (int i = 0; i < weights.size(); ++i) {
    require(weights(i) >= 0.0, "make_histogram: negative entry at index " +
                                   std::to_string(i));
  }
  const double total = weights.sum();
  require(total > 0.0, "make_histogram: zero total mass");
  return Histogram(weights / total);
}

Coupling::Coupling(Matrix plan, Histogram row_marginal, Histogram col_marginal)
    : p_(std::move(plan)),
      a_(std::move(row_marginal)),
      b_(std::move(col_marginal)) {
  require(p_.rows() == a_.size() && p_.cols() == b_.size(),
          "Coupling: plan shape does not match marginals");
  for (int i = 0; i < p_.rows(); ++i) {
    for (int j = 0; j < p_.cols(); ++j) {
      if (p_(i, j) < 0.0) {
        require(p_(i, j) >= -kNegativeClampTol,
                "Coupling: entry (" + std::to_string(i) + "," +
                    std::to_string(j) + ") is negative beyond clamp tolerance");
        p_(i, j) = 0.0;
      }
    }
  }
  for (int i = 0; i < p_.rows(); ++i) {
    require(std::abs(p_.row(i).sum() - a_[i]) <= kMarginalTol,
            "Coupling: row sum " + std::to_string(i) + " off marginal");
  }
  for (int j = 0; j < p_.cols(); ++j) {
    require(std::abs(p_.col(j).sum() - b_[j]) <= kMarginalTol,
            "Coupling: column sum " + std::to_string(j) + " off marginal");
  }
}

Coupling product_coupling(const Histogram& a, const Histogram& b) {
  Matrix p = a.weights() * b.weights().transpose();
  return Coupling(std::move(p), a, b);
}

DiffPlan::DiffPlan(Matrix q) : q_(std::move(q)) {
  for (int i = 0; i < q_.rows(); ++i) {
    require(std::abs(q_.row(i).sum()) <= kMarginalTol,
            "DiffPlan: row sum " + std::to_string(i) + " nonzero");
  }
  for (int j = 0; j < q_.cols(); ++j) {
    require(std::abs(q_.col(j).sum()) <= kMarginalTol,
            "DiffPlan: column sum " + std::to_string(j) + " nonzero");
  }
}

DiffPlan::DiffPlan(const Coupling& p1, const Coupling& p2)
    : DiffPlan(p1.matrix() - p2.matrix()) {}

CostMatrix::CostMatrix(Matrix m, bool symmetric)
    : c_(std::move(m)), symmetric_(symmetric) {
  if (symmetric_) {
    require(c_.rows() == c_.cols(), "CostMatrix: symmetric flag on a "
                                    "non-square matrix");
    for (int i = 0; i < c_.rows(); ++i) {
      for (int k = 0; k < c_.cols(); ++k) {
        require(std::abs(c_(i, k) - c_(k, i)) <=
                    1e-12 * std::max(1.0, std::abs(c_(i, k))),
                "CostMatrix: symmetry violated at (" + std::to_string(i) +
                    "," + std::to_string(k) + ")");
      }
    }
  }
}

std::vector<IndexPair> support(const Matrix& p, double tol) {
  require(tol >= 0.0, "support: negative tolerance");
  std::vector<IndexPair> out;
  for (int i = 0; i < p.rows(); ++i)
    for (int j = 0; j < p.cols(); ++j)
      if (p(i, j) > tol) out.push_back({i, j});
  return out;
}

std::vector<IndexPair> support(const Coupling& p, double tol) {
  return support(p.matrix(), tol);
}

SeparableLoss SeparableLoss::square() {
  SeparableLoss l;
  l.f1 = [](double a) { return 0.5 * a * a; };
  l.f2 = [](double b) { return 0.5 * b * b; };
  l.h1 = [](double a) { return a; };
  l.h2 = [](double b) { return b; };
  l.preset = LossPreset::square;
  return l;
}

SeparableLoss SeparableLoss::kl() {
  SeparableLoss l;
  // 0 log 0 = 0 by convention; negative arguments are rejected upstream.
  l.f1 = [](double a) { return a > 0.0 ? a * std::log(a) - a : 0.0; };
  l.f2 = [](double b) { return b; };
  l.h1 = [](double a) { return a; };
  l.h2 = [](double b) {
    if (b <= 0.0) throw std::invalid_argument("kl loss: h2 needs b > 0");
    return std::log(b);
  };
  l.preset = LossPreset::kl;
  return l;
}

SeparableLoss loss_from_preset(LossPreset preset) {
  switch (preset) {
    case LossPreset::square:
      return SeparableLoss::square();
    case LossPreset::kl:
      return SeparableLoss::kl();
    default:
      throw std::invalid_argument("loss_from_preset: custom has no preset");
  }
}

QuadTensor::QuadTensor(int n, int m, bool symmetric)
    : n_(n), m_(m), symmetric_(symmetric) {
  require(n >= 1 && m >= 1, "QuadTensor: dimensions must be positive");
  data_.assign(static_cast<std::size_t>(n) * m * n * m, 0.0);
}

bool QuadTensor::verify_symmetric(unsigned seed) const {
  const double tol = 1e-12;
  if (n_ * m_ <= 64) {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < m_; ++j)
        for (int k = 0; k < n_; ++k)
          for (int l = 0; l < m_; ++l)
            if (std::abs(at(i, j, k, l) - at(k, l, i, j)) > tol) return false;
    return true;
  }
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> di(0, n_ - 1), dj(0, m_ - 1);
  for (int t = 0; t < 10000; ++t) {
    const int i = di(rng), k = di(rng), j = dj(rng), l = dj(rng);
    if (std::abs(at(i, j, k, l) - at(k, l, i, j)) > tol) return false;
  }
  return true;
}

void QuadTensor::mark_symmetric(unsigned seed) {
  require(verify_symmetric(seed), "QuadTensor: symmetry invariant violated");
  symmetric_ = true;
}

QuadTensor QuadTensor::symmetrized() const {
  QuadTensor s(n_, m_, false);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < m_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < m_; ++l)
          s.set(i, j, k, l, 0.5 * (at(i, j, k, l) + at(k, l, i, j)));
  s.symmetric_ = true;
  return s;
}

Matrix tensor_apply(const QuadTensor& l, const Matrix& x) {
  require(x.rows() == l.n() && x.cols() == l.m(),
          "tensor_apply: dimension mismatch");
  Matrix out = Matrix::Zero(l.n(), l.m());
  for (int k = 0; k < l.n(); ++k)
    for (int ll = 0; ll < l.m(); ++ll) {
      double s = 0.0;
      for (int i = 0; i < l.n(); ++i)
        for (int j = 0; j < l.m(); ++j) s += l.at(i, j, k, ll) * x(i, j);
      out(k, ll) = s;
    }
  return out;
}

QuadTensor build_dense_tensor(const SeparableLoss& loss, const CostMatrix& c,
                              const CostMatrix& cb) {
  require(c.symmetric() && cb.symmetric(),
          "build_dense_tensor: intra costs must be symmetric");
  const int n = c.rows(), m = cb.rows();
  require(n * m <= kDenseTensorCap,
          "build_dense_tensor: n*m exceeds dense storage cap");
  if (loss.preset == LossPreset::kl) {
    require(c.matrix().minCoeff() >= 0.0,
            "build_dense_tensor: kl loss needs nonnegative C entries");
    require(cb.matrix().minCoeff() > 0.0,
            "build_dense_tensor: kl loss needs positive Cb entries");
  }
  QuadTensor l(n, m, false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < n; ++k)
        for (int ll = 0; ll < m; ++ll)
          l.set(i, j, k, ll, loss(c(i, k), cb(j, ll)));
  // L_{ijkl} = L_{klij} follows from symmetry of C and Cb.
  l.mark_symmetric();
  return l;
}

double gw_objective_dense(const QuadTensor& l, const Matrix& p) {
  return (tensor_apply(l, p).array() * p.array()).sum();
}

double gw_objective_dense(const QuadTensor& l, const Coupling& p) {
  return gw_objective_dense(l, p.matrix());
}

Matrix elementwise(const std::function<double(double)>& f, const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = f(m(i, j));
  return out;
}

Matrix separable_tensor_apply(const SeparableLoss& loss, const CostMatrix& c,
                              const CostMatrix& cb, const Matrix& x) {
  require(x.rows() == c.rows() && x.cols() == cb.rows(),
          "separable_tensor_apply: dimension mismatch");
  const Matrix f1c = elementwise(loss.f1, c.matrix());
  const Matrix f2cb = elementwise(loss.f2, cb.matrix());
  const Matrix h1c = elementwise(loss.h1, c.matrix());
  const Matrix h2cb = elementwise(loss.h2, cb.matrix());
  const Vector row_mass = x.rowwise().sum();
  const Vector col_mass = x.colwise().sum().transpose();
  const Vector lin_left = f1c.transpose() * row_mass;   // indexed by k
  const Vector lin_right = f2cb.transpose() * col_mass;  // indexed by l
  Matrix out = -(h1c.transpose() * x * h2cb);
  out.colwise() += lin_left;
  out.rowwise() += lin_right.transpose();
  return out;
}

double gw_objective_separable(const SeparableLoss& loss, const CostMatrix& c,
                              const CostMatrix& cb, const Histogram& a,
                              const Histogram& b, const Coupling& p) {
  if ((p.matrix().rowwise().sum() - a.weights()).cwiseAbs().maxCoeff() > 1e-6 ||
      (p.matrix().colwise().sum().transpose() - b.weights())
              .cwiseAbs()
              .maxCoeff() > 1e-6) {
    throw std::invalid_argument(
        "gw_objective_separable: plan marginals do not match (a, b)");
  }
  const Matrix f1c = elementwise(loss.f1, c.matrix());
  const Matrix f2cb = elementwise(loss.f2, cb.matrix());
  const Matrix h1c = elementwise(loss.h1, c.matrix());
  const Matrix h2cb = elementwise(loss.h2, cb.matrix());
  const double linear = (f1c * a.weights()).dot(p.matrix().rowwise().sum()) +
                        (f2cb * b.weights())
                            .dot(p.matrix().colwise().sum().transpose());
  const double quad =
      (h1c * p.matrix() * h2cb.transpose()).cwiseProduct(p.matrix()).sum();
  return linear - quad;
}

Permutation::Permutation(std::vector<int> sigma) : sigma_(std::move(sigma)) {
  std::vector<bool> seen(sigma_.size(), false);
  for (int v : sigma_) {
    require(v >= 0 && v < static_cast<int>(sigma_.size()) && !seen[v],
            "Permutation: not a bijection");
    seen[v] = true;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> s(n);
  std::iota(s.begin(), s.end(), 0);
  return Permutation(std::move(s));
}

Coupling Permutation::as_coupling() const {
  const int n = size();
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) p(i, sigma_[i]) = 1.0 / n;
  return Coupling(std::move(p), Histogram::uniform(n), Histogram::uniform(n));
}

}  // namespace otk
