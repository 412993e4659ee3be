#include "otk/linear_ot.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "otk/polytope.hpp"

namespace otk {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Basis of the transportation simplex: n+m-1 cells forming a spanning tree
// of the bipartite node set.
struct Basis {
  int n, m;
  std::vector<IndexPair> cells;
  std::vector<std::vector<char>> is_basic;

  Basis(int n_, int m_) : n(n_), m(m_) {
    is_basic.assign(n, std::vector<char>(m, 0));
  }
  void add(IndexPair c) {
    cells.push_back(c);
    is_basic[c.i][c.j] = 1;
  }
  void remove(IndexPair c) {
    is_basic[c.i][c.j] = 0;
    cells.erase(std::find(cells.begin(), cells.end(), c));
  }
  // Adjacency over nodes 0..n-1 (rows) and n..n+m-1 (columns).
  std::vector<std::vector<std::pair<int, IndexPair>>> adjacency() const {
    std::vector<std::vector<std::pair<int, IndexPair>>> adj(n + m);
    for (const IndexPair& c : cells) {
      adj[c.i].push_back({n + c.j, c});
      adj[n + c.j].push_back({c.i, c});
    }
    return adj;
  }
};

// Northwest-corner start that records exactly n+m-1 basic cells, including
// zero-mass cells at degenerate steps.
void northwest_start(const Vector& a, const Vector& b, Matrix& x,
                     Basis& basis) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  Vector ra = a, rb = b;
  int i = 0, j = 0;
  while (true) {
    const double t = std::min(ra(i), rb(j));
    x(i, j) = t;
    basis.add({i, j});
    ra(i) -= t;
    rb(j) -= t;
    if (i == n - 1 && j == m - 1) break;
    if (j == m - 1 || (i < n - 1 && ra(i) <= rb(j)))
      ++i;
    else
      ++j;
  }
}

// Dual potentials from u_0 = 0 via traversal of the basis tree.
void compute_duals(const Matrix& c, const Basis& basis, Vector& u, Vector& v) {
  const int n = basis.n, m = basis.m;
  auto adj = basis.adjacency();
  std::vector<char> done(n + m, 0);
  std::deque<int> queue;
  u(0) = 0.0;
  done[0] = 1;
  queue.push_back(0);
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    for (auto& [next, cell] : adj[node]) {
      if (done[next]) continue;
      if (next >= n)
        v(next - n) = c(cell.i, cell.j) - u(cell.i);
      else
        u(next) = c(cell.i, cell.j) - v(cell.j);
      done[next] = 1;
      queue.push_back(next);
    }
  }
}

// Unique cycle closed by the entering cell: tree path from row node
// enter.i to column node n + enter.j, signs alternating with the entering
// cell positive.
void pivot_cycle(const Basis& basis, IndexPair enter,
                 std::vector<IndexPair>& plus, std::vector<IndexPair>& minus) {
  const int n = basis.n;
  auto adj = basis.adjacency();
  std::vector<int> parent(basis.n + basis.m, -1);
  std::vector<IndexPair> parent_cell(basis.n + basis.m);
  std::deque<int> queue;
  parent[enter.i] = enter.i;
  queue.push_back(enter.i);
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    if (node == n + enter.j) break;
    for (auto& [next, cell] : adj[node]) {
      if (parent[next] != -1) continue;
      parent[next] = node;
      parent_cell[next] = cell;
      queue.push_back(next);
    }
  }
  std::vector<IndexPair> path;
  for (int node = n + enter.j; node != enter.i; node = parent[node])
    path.push_back(parent_cell[node]);
  // path runs from the column endpoint back to the row endpoint; the cell
  // adjacent to enter.i shares its row, so walking from enter.i the signs
  // alternate -, +, -, ...
  std::reverse(path.begin(), path.end());
  plus.clear();
  minus.clear();
  plus.push_back(enter);
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (k % 2 == 0)
      minus.push_back(path[k]);
    else
      plus.push_back(path[k]);
  }
}

}  // namespace

LinearSolution solve_linear_ot(const Matrix& c, const Histogram& a,
                               const Histogram& b) {
  const int n = a.size(), m = b.size();
  require(c.rows() == n && c.cols() == m,
          "solve_linear_ot: cost shape does not match marginals");
  require(c.allFinite(), "solve_linear_ot: non-finite cost entries");

  Matrix x = Matrix::Zero(n, m);
  Basis basis(n, m);
  northwest_start(a.weights(), b.weights(), x, basis);

  const double opt_tol = 1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff());
  const int bland_threshold = 10 * (n + m);
  int degenerate_streak = 0;
  int iterations = 0;
  const int max_iterations = 20000 * (n + m);

  Vector u(n), v(m);
  std::vector<IndexPair> plus, minus;
  while (iterations < max_iterations) {
    compute_duals(c, basis, u, v);

    IndexPair enter{-1, -1};
    if (degenerate_streak > bland_threshold) {
      // Bland's rule: first eligible cell in row-major order.
      for (int i = 0; i < n && enter.i < 0; ++i)
        for (int j = 0; j < m; ++j)
          if (!basis.is_basic[i][j] && c(i, j) - u(i) - v(j) < -opt_tol) {
            enter = {i, j};
            break;
          }
    } else {
      double best = -opt_tol;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
          if (basis.is_basic[i][j]) continue;
          const double rc = c(i, j) - u(i) - v(j);
          if (rc < best) {
            best = rc;
            enter = {i, j};
          }
        }
    }
    if (enter.i < 0) break;  // optimal

    pivot_cycle(basis, enter, plus, minus);
    double theta = std::numeric_limits<double>::infinity();
    IndexPair leave{-1, -1};
    for (const IndexPair& cell : minus) {
      const double val = x(cell.i, cell.j);
      if (val < theta || (val == theta && cell < leave)) {
        theta = val;
        leave = cell;
      }
    }
    for (const IndexPair& cell : plus) x(cell.i, cell.j) += theta;
    for (const IndexPair& cell : minus) x(cell.i, cell.j) -= theta;
    x(leave.i, leave.j) = 0.0;
    basis.remove(leave);
    basis.add(enter);

    degenerate_streak = (theta <= kSupportTol) ? degenerate_streak + 1 : 0;
    ++iterations;
  }
  if (iterations >= max_iterations)
    throw std::runtime_error("solve_linear_ot: pivot limit exceeded");

  Coupling plan(std::move(x), a, b);
  const double value = c.cwiseProduct(plan.matrix()).sum();
  return {std::move(plan), value, iterations};
}

MonotonicityReport check_cyclical_monotonicity(const Matrix& c,
                                               const Coupling& p, int max_n,
                                               double tol) {
  require(max_n >= 2 && max_n <= 3,
          "check_cyclical_monotonicity: max_n must be 2 or 3");
  require(tol >= 0.0, "check_cyclical_monotonicity: negative tolerance");
  const std::vector<IndexPair> supp = support(p);
  if (supp.size() > 64)
    throw std::runtime_error(
        "check_cyclical_monotonicity: support exceeds 64 pairs, refusing "
        "the combinatorial enumeration");

  MonotonicityReport report;
  report.max_n_checked = max_n;

  const int s = static_cast<int>(supp.size());
  std::vector<int> combo;
  auto check_combo = [&](int size) -> bool {
    double lhs = 0.0;
    for (int idx : combo) lhs += c(supp[idx].i, supp[idx].j);
    std::vector<int> sigma(size);
    std::iota(sigma.begin(), sigma.end(), 0);
    while (std::next_permutation(sigma.begin(), sigma.end())) {
      double rhs = 0.0;
      for (int k = 0; k < size; ++k)
        rhs += c(supp[combo[k]].i, supp[combo[sigma[k]]].j);
      if (lhs > rhs + tol) {
        MonotonicityViolation viol;
        for (int idx : combo) viol.pairs.push_back(supp[idx]);
        viol.sigma = sigma;
        viol.deficit = lhs - rhs;
        report.violation = std::move(viol);
        return true;
      }
    }
    return false;
  };

  for (int size = 2; size <= max_n && size <= s; ++size) {
    combo.assign(size, 0);
    std::iota(combo.begin(), combo.end(), 0);
    while (true) {
      if (check_combo(size)) {
        report.pass = false;
        return report;
      }
      // next combination in lexicographic order
      int pos = size - 1;
      while (pos >= 0 && combo[pos] == s - size + pos) --pos;
      if (pos < 0) break;
      ++combo[pos];
      for (int q = pos + 1; q < size; ++q) combo[q] = combo[q - 1] + 1;
    }
  }
  report.pass = true;
  return report;
}

std::pair<Permutation, double> solve_monge(const Matrix& c) {
  const int n = static_cast<int>(c.rows());
  require(c.cols() == n, "solve_monge: cost must be square");
  require(n <= kMongeCap, "solve_monge: n exceeds the brute-force cap");
  std::vector<int> sigma(n), best(n);
  std::iota(sigma.begin(), sigma.end(), 0);
  best = sigma;
  double best_value = std::numeric_limits<double>::infinity();
  do {
    double value = 0.0;
    for (int i = 0; i < n; ++i) value += c(i, sigma[i]);
    value /= n;
    if (value < best_value) {
      best_value = value;
      best = sigma;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return {Permutation(best), best_value};
}

MongeKantorovichReport verify_monge_equals_kantorovich(const Matrix& c) {
  const int n = static_cast<int>(c.rows());
  auto [perm, monge_value] = solve_monge(c);
  const Histogram uniform = Histogram::uniform(n);
  LinearSolution lp = solve_linear_ot(c, uniform, uniform);

  MongeKantorovichReport report;
  report.monge_value = monge_value;
  report.lp_value = lp.value;
  report.monge_perm = perm;
  report.values_match = std::abs(monge_value - lp.value) <= 1e-9;
  report.plan_is_permutation_mix = true;
  for (const auto& comp : extreme_decomposition(lp.plan).components) {
    if (!as_permutation(comp.point)) {
      report.plan_is_permutation_mix = false;
      break;
    }
  }
  return report;
}

}  // namespace otk
