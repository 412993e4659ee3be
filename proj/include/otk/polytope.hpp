#pragma once

#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "otk/core.hpp"

// Structure of the transportation polytope: support graphs, cycles,
// extremality, cycle perturbations, decomposition into extreme points and
// desk-scale vertex enumeration.

namespace otk {

/// Bipartite graph on [n] source and [m] target nodes with an edge per
/// strictly positive coupling entry.
struct SupportGraph {
  int n = 0;
  int m = 0;
  struct Edge {
    IndexPair cell;
    double weight;
  };
  std::vector<Edge> edges;  // row-major order
};

SupportGraph support_graph(const Coupling& p, double tol = kSupportTol);

/// Alternating cycle i_1, j_1, i_2, j_2, ..., i_N, j_N, i_1 in a bipartite
/// support graph. Forward edges are (i_k, j_k); backward edges are
/// (i_{k+1}, j_k) with i_{N+1} = i_1.
struct Cycle {
  std::vector<int> left;   // i_1 .. i_N
  std::vector<int> right;  // j_1 .. j_N

  int length() const { return static_cast<int>(left.size()); }
  std::vector<IndexPair> forward_edges() const;
  std::vector<IndexPair> backward_edges() const;
};

/// Deterministic cycle search: depth-first from the lowest-index left node,
/// neighbors visited in ascending order. Empty when the graph is a forest.
std::optional<Cycle> find_cycle(const SupportGraph& g);

/// A coupling is an extreme point of the polytope iff its support graph has
/// no cycle.
bool is_extreme(const Coupling& p, double tol = kSupportTol);

/// Integer matrix with +1 on forward edges, -1 on backward edges, 0
/// elsewhere. Row and column sums are exactly zero.
Eigen::MatrixXi cycle_perturbation(const Cycle& cycle, int n, int m);

/// Convex combination of extreme points reconstructing a coupling.
struct ConvexDecomposition {
  struct Component {
    double weight;
    Coupling point;
  };
  std::vector<Component> components;
};

/// Cycle canceling: repeatedly drain cycles of the residual to reach an
/// extreme point inside its support, peel off the largest feasible multiple
/// and renormalize. Each peel zeroes a support cell, so there are at most
/// n*m components; components with equal support are merged by weight
/// summation.
ConvexDecomposition extreme_decomposition(const Coupling& p,
                                          double tol = kSupportTol);

/// Returns sigma iff P is a permutation matrix scaled by 1/n.
std::optional<Permutation> as_permutation(const Coupling& p,
                                          double tol = kSupportTol);

/// Greedy fill from the top-left cell; the support is a forest of size at
/// most n+m-1.
Coupling northwest_corner(const Histogram& a, const Histogram& b);

inline constexpr int kVertexEnumerationCap = 25;

/// All extreme points of the transportation polytope, enumerated over
/// spanning trees of the complete bipartite graph. Requires n*m <= 25.
/// Returned list is sorted canonically (row-major value order).
std::vector<Coupling> enumerate_vertices(const Histogram& a,
                                         const Histogram& b);

/// Random extreme point: greedy saturation of the marginals in a uniformly
/// drawn row/column order.
Coupling random_vertex(const Histogram& a, const Histogram& b,
                       std::mt19937& rng);

}  // namespace otk
