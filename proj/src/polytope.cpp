#include "otk/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace otk {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

SupportGraph support_graph(const Coupling& p, double tol) {
  SupportGraph g;
  g.n = p.rows();
  g.m = p.cols();
  for (const IndexPair& e : support(p, tol)) {
    g.edges.push_back({e, p(e.i, e.j)});
  }
  return g;
}

std::vector<IndexPair> Cycle::forward_edges() const {
  std::vector<IndexPair> out;
  for (int k = 0; k < length(); ++k) out.push_back({left[k], right[k]});
  return out;
}

std::vector<IndexPair> Cycle::backward_edges() const {
  std::vector<IndexPair> out;
  const int n = length();
  for (int k = 0; k < n; ++k) out.push_back({left[(k + 1) % n], right[k]});
  return out;
}

std::optional<Cycle> find_cycle(const SupportGraph& g) {
  const int total = g.n + g.m;
  std::vector<std::vector<int>> adj(total);
  for (const auto& e : g.edges) {
    adj[e.cell.i].push_back(g.n + e.cell.j);
    adj[g.n + e.cell.j].push_back(e.cell.i);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());

  // 0 = unvisited, 1 = on current DFS path, 2 = done.
  std::vector<int> state(total, 0), parent(total, -1);
  std::vector<int> cycle_nodes;

  auto dfs = [&](auto&& self, int u) -> bool {
    state[u] = 1;
    for (int v : adj[u]) {
      if (v == parent[u]) continue;
      if (state[v] == 1) {
        // Back edge: unwind the path u -> ... -> v.
        cycle_nodes.push_back(u);
        for (int w = parent[u]; w != v && w != -1; w = parent[w])
          cycle_nodes.push_back(w);
        cycle_nodes.push_back(v);
        return true;
      }
      if (state[v] == 0) {
        parent[v] = u;
        if (self(self, v)) return true;
      }
    }
    state[u] = 2;
    return false;
  };

  for (int root = 0; root < g.n; ++root) {
    if (state[root] == 0 && dfs(dfs, root)) break;
  }
  if (cycle_nodes.empty()) return std::nullopt;

  // Rotate so the sequence starts at a left node, then read off the
  // alternating i, j lists.
  std::size_t start = 0;
  while (cycle_nodes[start] >= g.n) ++start;
  std::rotate(cycle_nodes.begin(), cycle_nodes.begin() + start,
              cycle_nodes.end());
  Cycle c;
  for (std::size_t k = 0; k < cycle_nodes.size(); k += 2) {
    c.left.push_back(cycle_nodes[k]);
    c.right.push_back(cycle_nodes[k + 1] - g.n);
  }
  return c;
}

bool is_extreme(const Coupling& p, double tol) {
  return !find_cycle(support_graph(p, tol)).has_value();
}

Eigen::MatrixXi cycle_perturbation(const Cycle& cycle, int n, int m) {
  Eigen::MatrixXi e = Eigen::MatrixXi::Zero(n, m);
  for (const IndexPair& f : cycle.forward_edges()) e(f.i, f.j) = 1;
  for (const IndexPair& b : cycle.backward_edges()) e(b.i, b.j) = -1;
  return e;
}

ConvexDecomposition extreme_decomposition(const Coupling& p, double tol) {
  // Peels one extreme point per round: cancel cycles inside the residual to
  // reach a vertex supported on the residual's support, remove the largest
  // feasible multiple, renormalize. The cell attaining that multiple drops
  // out of the support, so the component count is bounded by the support
  // size (at most n*m). Components with equal support are merged.
  const auto clamp_small = [tol](const Matrix& m) {
    return m.unaryExpr([tol](double v) { return std::abs(v) <= tol ? 0.0 : v; })
        .eval();
  };

  std::map<std::vector<IndexPair>, std::pair<double, Matrix>> leaves;
  Matrix residual = p.matrix();
  double weight_left = 1.0;
  const int max_rounds = p.rows() * p.cols() + 1;

  for (int round = 0; round < max_rounds; ++round) {
    const Coupling current(residual, p.row_marginal(), p.col_marginal());

    // Cancel cycles by draining a forward edge each time; marginals are
    // preserved and the support only shrinks.
    Matrix q = residual;
    while (true) {
      const Coupling qc(q, p.row_marginal(), p.col_marginal());
      const auto cycle = find_cycle(support_graph(qc, tol));
      if (!cycle) break;
      const Eigen::MatrixXi e =
          cycle_perturbation(*cycle, p.rows(), p.cols());
      double eps_plus = std::numeric_limits<double>::infinity();
      for (const IndexPair& f : cycle->forward_edges())
        eps_plus = std::min(eps_plus, q(f.i, f.j));
      q = clamp_small(q - eps_plus * e.cast<double>());
    }

    double lambda = 1.0;
    for (const IndexPair& cell : support(q, tol))
      lambda = std::min(lambda, residual(cell.i, cell.j) / q(cell.i, cell.j));

    const auto record = [&](double weight, Matrix point) {
      auto key = support(point, tol);
      auto [it, inserted] =
          leaves.try_emplace(std::move(key), weight, std::move(point));
      if (!inserted) it->second.first += weight;
    };

    if (lambda >= 1.0 - 1e-12) {
      record(weight_left, std::move(q));
      break;
    }
    record(weight_left * lambda, q);
    residual = clamp_small((residual - lambda * q) / (1.0 - lambda));
    weight_left *= 1.0 - lambda;
  }

  ConvexDecomposition out;
  for (auto& [key, wp] : leaves) {
    out.components.push_back(
        {wp.first,
         Coupling(std::move(wp.second), p.row_marginal(), p.col_marginal())});
  }
  return out;
}

std::optional<Permutation> as_permutation(const Coupling& p, double tol) {
  require(p.rows() == p.cols(), "as_permutation: coupling must be square");
  const int n = p.rows();
  std::vector<int> sigma(n, -1);
  std::vector<bool> col_used(n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (p(i, j) > tol) {
        if (sigma[i] != -1) return std::nullopt;  // second entry in row
        sigma[i] = j;
      }
    }
    if (sigma[i] == -1 || col_used[sigma[i]]) return std::nullopt;
    if (std::abs(p(i, sigma[i]) - 1.0 / n) > 1e-9) return std::nullopt;
    col_used[sigma[i]] = true;
  }
  return Permutation(sigma);
}

Coupling northwest_corner(const Histogram& a, const Histogram& b) {
  const int n = a.size(), m = b.size();
  Matrix p = Matrix::Zero(n, m);
  Vector ra = a.weights(), rb = b.weights();
  int i = 0, j = 0;
  while (i < n && j < m) {
    const double t = std::min(ra(i), rb(j));
    p(i, j) = t;
    ra(i) -= t;
    rb(j) -= t;
    if (i == n - 1 && j == m - 1) break;
    if (j == m - 1 || (i < n - 1 && ra(i) <= rb(j)))
      ++i;
    else
      ++j;
  }
  return Coupling(std::move(p), a, b);
}

namespace {

// Flows on a spanning tree of the complete bipartite graph are uniquely
// determined by leaf elimination. Returns false if any flow is negative
// beyond round-off.
bool solve_tree_flow(int n, int m, const std::vector<IndexPair>& tree,
                     const Vector& a, const Vector& b, Matrix& out) {
  const int total = n + m;
  std::vector<std::vector<int>> incident(total);  // edge indices
  std::vector<int> degree(total, 0);
  for (int e = 0; e < static_cast<int>(tree.size()); ++e) {
    incident[tree[e].i].push_back(e);
    incident[n + tree[e].j].push_back(e);
    ++degree[tree[e].i];
    ++degree[n + tree[e].j];
  }
  Vector residual(total);
  residual.head(n) = a;
  residual.tail(m) = b;
  std::vector<bool> edge_done(tree.size(), false);
  std::vector<int> leaves;
  for (int u = 0; u < total; ++u)
    if (degree[u] == 1) leaves.push_back(u);

  out = Matrix::Zero(n, m);
  std::size_t processed = 0;
  while (!leaves.empty()) {
    const int u = leaves.back();
    leaves.pop_back();
    int edge = -1;
    for (int e : incident[u])
      if (!edge_done[e]) edge = e;
    if (edge == -1) continue;  // tree exhausted at this node
    const IndexPair cell = tree[edge];
    double flow = residual(u);
    if (flow < -1e-12) return false;
    if (flow < 0.0) flow = 0.0;
    out(cell.i, cell.j) = flow;
    const int other = (u == cell.i) ? n + cell.j : cell.i;
    residual(other) -= flow;
    residual(u) = 0.0;
    edge_done[edge] = true;
    ++processed;
    if (--degree[other] == 1) leaves.push_back(other);
  }
  if (processed != tree.size()) return false;
  // The root node absorbs the remaining residual, which must vanish.
  return out.minCoeff() >= -1e-12;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int x, int y) {
    x = find(x);
    y = find(y);
    if (x == y) return false;
    parent[x] = y;
    return true;
  }
};

}  // namespace

std::vector<Coupling> enumerate_vertices(const Histogram& a,
                                         const Histogram& b) {
  const int n = a.size(), m = b.size();
  require(n * m <= kVertexEnumerationCap,
          "enumerate_vertices: n*m exceeds the enumeration cap");
  std::vector<IndexPair> all_edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) all_edges.push_back({i, j});
  const int need = n + m - 1;

  std::map<std::vector<long long>, Matrix> found;
  std::vector<IndexPair> chosen;

  auto recurse = [&](auto&& self, int next_edge, const UnionFind& uf) -> void {
    if (static_cast<int>(chosen.size()) == need) {
      Matrix flow;
      if (solve_tree_flow(n, m, chosen, a.weights(), b.weights(), flow)) {
        flow = flow.cwiseMax(0.0);
        std::vector<long long> key;
        key.reserve(static_cast<std::size_t>(n) * m);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < m; ++j)
            key.push_back(std::llround(flow(i, j) * 1e10));
        found.try_emplace(std::move(key), std::move(flow));
      }
      return;
    }
    const int remaining = need - static_cast<int>(chosen.size());
    for (int e = next_edge; e + remaining <= static_cast<int>(all_edges.size());
         ++e) {
      UnionFind next = uf;
      if (!next.unite(all_edges[e].i, n + all_edges[e].j)) continue;
      chosen.push_back(all_edges[e]);
      self(self, e + 1, next);
      chosen.pop_back();
    }
  };
  recurse(recurse, 0, UnionFind(n + m));

  std::vector<std::pair<std::vector<double>, Matrix>> ordered;
  for (auto& [key, mat] : found) {
    // Row-major canonical key.
    std::vector<double> rm;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) rm.push_back(mat(i, j));
    ordered.emplace_back(std::move(rm), std::move(mat));
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  std::vector<Coupling> out;
  out.reserve(ordered.size());
  for (auto& [rm, mat] : ordered) out.emplace_back(std::move(mat), a, b);
  return out;
}

Coupling random_vertex(const Histogram& a, const Histogram& b,
                       std::mt19937& rng) {
  const int n = a.size(), m = b.size();
  std::vector<int> rows(n), cols(m);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  std::shuffle(cols.begin(), cols.end(), rng);

  Matrix p = Matrix::Zero(n, m);
  Vector ra = a.weights(), rb = b.weights();
  int i = 0, j = 0;
  while (i < n && j < m) {
    const int r = rows[i], c = cols[j];
    const double t = std::min(ra(r), rb(c));
    p(r, c) = t;
    ra(r) -= t;
    rb(c) -= t;
    if (i == n - 1 && j == m - 1) break;
    if (j == m - 1 || (i < n - 1 && ra(r) <= rb(c)))
      ++i;
    else
      ++j;
  }
  return Coupling(std::move(p), a, b);
}

}  // namespace otk
