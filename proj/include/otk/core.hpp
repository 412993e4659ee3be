#pragma once

#include <Eigen/Dense>
#include <compare>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

// Core domain types for discrete optimal transport: histograms, couplings,
// cost matrices, separable losses and the dense 4-index quadratic cost.

namespace otk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kMarginalTol = 1e-9;
inline constexpr double kSupportTol = 1e-12;
inline constexpr double kNegativeClampTol = 1e-12;

/// Probability weight vector on a finite support. Entries are nonnegative
/// and sum to one.
class Histogram {
 public:
  explicit Histogram(Vector weights);
  static Histogram uniform(int n);

  const Vector& weights() const { return w_; }
  int size() const { return static_cast<int>(w_.size()); }
  double operator[](int i) const { return w_(i); }

 private:
  Vector w_;
};

/// Normalizes a nonnegative vector to unit mass. Throws on an empty vector,
/// a negative entry or zero total mass.
Histogram make_histogram(const Vector& weights);

/// Nonnegative matrix with prescribed row and column marginals. Entries in
/// [-1e-12, 0) are clamped to zero at construction; anything more negative
/// is rejected.
class Coupling {
 public:
  Coupling(Matrix plan, Histogram row_marginal, Histogram col_marginal);

  const Matrix& matrix() const { return p_; }
  const Histogram& row_marginal() const { return a_; }
  const Histogram& col_marginal() const { return b_; }
  int rows() const { return static_cast<int>(p_.rows()); }
  int cols() const { return static_cast<int>(p_.cols()); }
  double operator()(int i, int j) const { return p_(i, j); }

 private:
  Matrix p_;
  Histogram a_, b_;
};

/// P_ij = a_i * b_j, the independent coupling.
Coupling product_coupling(const Histogram& a, const Histogram& b);

/// Difference of two couplings with identical marginals: all row and column
/// sums vanish.
class DiffPlan {
 public:
  explicit DiffPlan(Matrix q);
  DiffPlan(const Coupling& p1, const Coupling& p2);

  const Matrix& matrix() const { return q_; }

 private:
  Matrix q_;
};

/// Real matrix tagged as symmetric when it encodes intra-space costs.
class CostMatrix {
 public:
  explicit CostMatrix(Matrix m, bool symmetric = false);

  const Matrix& matrix() const { return c_; }
  bool symmetric() const { return symmetric_; }
  int rows() const { return static_cast<int>(c_.rows()); }
  int cols() const { return static_cast<int>(c_.cols()); }
  double operator()(int i, int j) const { return c_(i, j); }

 private:
  Matrix c_;
  bool symmetric_;
};

struct IndexPair {
  int i = 0;
  int j = 0;
  auto operator<=>(const IndexPair&) const = default;
};

/// {(i,j) : P_ij > tol}, row-major order.
std::vector<IndexPair> support(const Matrix& p, double tol = kSupportTol);
std::vector<IndexPair> support(const Coupling& p, double tol = kSupportTol);

enum class LossPreset { square, kl, custom };

/// Separable ground loss L(a,b) = f1(a) + f2(b) - h1(a) h2(b).
struct SeparableLoss {
  std::function<double(double)> f1, f2, h1, h2;
  LossPreset preset = LossPreset::custom;

  /// 0.5 (a-b)^2 via f1(a)=a^2/2, f2(b)=b^2/2, h1(a)=a, h2(b)=b.
  static SeparableLoss square();
  /// a log(a/b) - a + b with 0 log 0 = 0; h2 requires b > 0.
  static SeparableLoss kl();

  double operator()(double a, double b) const {
    return f1(a) + f2(b) - h1(a) * h2(b);
  }
};

SeparableLoss loss_from_preset(LossPreset preset);

/// Dense 4-index cost L_{ijkl}, i,k in [n], j,l in [m]. Symmetric means
/// L_{ijkl} = L_{klij}.
class QuadTensor {
 public:
  QuadTensor(int n, int m, bool symmetric = false);

  double at(int i, int j, int k, int l) const {
    return data_[index(i, j, k, l)];
  }
  void set(int i, int j, int k, int l, double v) {
    data_[index(i, j, k, l)] = v;
  }

  int n() const { return n_; }
  int m() const { return m_; }
  bool symmetric() const { return symmetric_; }

  /// Checks L_{ijkl} = L_{klij} within 1e-12: exhaustively when n*m <= 64,
  /// on 10^4 random index tuples otherwise.
  bool verify_symmetric(unsigned seed = 0) const;

  /// Marks the tensor symmetric after verifying the invariant.
  void mark_symmetric(unsigned seed = 0);

  /// (L_{ijkl} + L_{klij}) / 2; leaves the quadratic form unchanged.
  QuadTensor symmetrized() const;

 private:
  std::size_t index(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * m_ + j) * n_ + k) * m_ + l;
  }

  int n_, m_;
  bool symmetric_;
  std::vector<double> data_;
};

/// Result_{kl} = sum_{ij} L_{ijkl} X_ij for an arbitrary n x m matrix X.
Matrix tensor_apply(const QuadTensor& l, const Matrix& x);

/// L_{ijkl} = loss(C_ik, Cb_jl). C must be n x n symmetric, Cb m x m
/// symmetric; n*m is capped at 1024 (dense storage is O(n^2 m^2)).
QuadTensor build_dense_tensor(const SeparableLoss& loss, const CostMatrix& c,
                              const CostMatrix& cb);

inline constexpr int kDenseTensorCap = 1024;

/// <L (x) P, P> via tensor_apply and an inner product.
double gw_objective_dense(const QuadTensor& l, const Coupling& p);
double gw_objective_dense(const QuadTensor& l, const Matrix& p);

/// L (x) X for a separable loss, valid for arbitrary matrices X:
///   (L (x) X)_kl = (f1(C)^T X 1_m)_k + (1_n^T X f2(Cb))_l
///                - (h1(C)^T X h2(Cb))_kl.
Matrix separable_tensor_apply(const SeparableLoss& loss, const CostMatrix& c,
                              const CostMatrix& cb, const Matrix& x);

/// Factored evaluation of <L (x) P, P>; matches gw_objective_dense within
/// 1e-10 relative. Throws if P's marginals differ from (a,b) beyond 1e-6.
double gw_objective_separable(const SeparableLoss& loss, const CostMatrix& c,
                              const CostMatrix& cb, const Histogram& a,
                              const Histogram& b, const Coupling& p);

/// Bijection on [n] stored as an index array.
class Permutation {
 public:
  explicit Permutation(std::vector<int> sigma);
  static Permutation identity(int n);

  int size() const { return static_cast<int>(sigma_.size()); }
  int operator()(int i) const { return sigma_[i]; }
  const std::vector<int>& indices() const { return sigma_; }

  /// The coupling P_ij = 1/n if j = sigma(i), 0 otherwise.
  Coupling as_coupling() const;

  bool operator==(const Permutation& o) const { return sigma_ == o.sigma_; }
  bool operator<(const Permutation& o) const { return sigma_ < o.sigma_; }

 private:
  std::vector<int> sigma_;
};

/// Applies an elementwise scalar function to a matrix.
Matrix elementwise(const std::function<double(double)>& f, const Matrix& m);

}  // namespace otk
