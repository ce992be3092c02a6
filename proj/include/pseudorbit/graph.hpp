#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "pseudorbit/transfer_matrix.hpp"

namespace pseudorbit {

/// Directed graph in compressed adjacency form.
struct Digraph {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> targets;

  std::size_t size() const { return offsets.size() - 1; }
  std::size_t out_degree(std::size_t v) const { return offsets[v + 1] - offsets[v]; }

  struct Range {
    const std::size_t* b;
    const std::size_t* e;
    const std::size_t* begin() const { return b; }
    const std::size_t* end() const { return e; }
  };
  Range successors(std::size_t v) const { return {targets.data() + offsets[v], targets.data() + offsets[v + 1]}; }

  /// Appends a vertex with the given (sorted, unique) successor list.
  void add_vertex(const std::vector<std::size_t>& succ) {
    targets.insert(targets.end(), succ.begin(), succ.end());
    offsets.push_back(targets.size());
  }

  bool has_edge(std::size_t u, std::size_t v) const {
    auto r = successors(u);
    return std::binary_search(r.begin(), r.end(), v);
  }
};

/// Support digraph of a matrix: i -> j iff P[i][j] > threshold.
inline Digraph support_graph(const SparseMatrix& m, double threshold) {
  Digraph g;
  g.offsets.reserve(static_cast<std::size_t>(m.rows()) + 1);
  std::vector<std::size_t> succ;
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    succ.clear();
    for (SparseMatrix::InnerIterator it(m, r); it; ++it)
      if (it.value() > threshold) succ.push_back(static_cast<std::size_t>(it.col()));
    g.add_vertex(succ);
  }
  return g;
}

struct SccResult {
  /// Component id per vertex.  Ids are in reverse topological order of the
  /// condensation: every edge goes from a higher id to a lower or equal one.
  std::vector<std::size_t> component;
  std::size_t count = 0;

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(count);
    for (std::size_t v = 0; v < component.size(); ++v) out[component[v]].push_back(v);
    return out;
  }
};

/// Tarjan's algorithm with an explicit call stack (cell graphs are deep).
inline SccResult strongly_connected_components(const Digraph& g) {
  constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();
  const std::size_t n = g.size();
  std::vector<std::size_t> index(n, unvisited), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  SccResult res;
  res.component.assign(n, unvisited);
  std::size_t counter = 0;

  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  std::vector<Frame> calls;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    calls.push_back({root, g.offsets[root]});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;

    while (!calls.empty()) {
      Frame& f = calls.back();
      const std::size_t v = f.v;
      if (f.next < g.offsets[v + 1]) {
        const std::size_t w = g.targets[f.next++];
        if (index[w] == unvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          calls.push_back({w, g.offsets[w]});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          res.component[w] = res.count;
        } while (w != v);
        ++res.count;
      }
      calls.pop_back();
      if (!calls.empty()) {
        const std::size_t parent = calls.back().v;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  return res;
}

/// Condensation DAG: one vertex per SCC, edges deduplicated, self loops dropped.
inline Digraph condensation(const Digraph& g, const SccResult& scc) {
  std::vector<std::vector<std::size_t>> succ(scc.count);
  for (std::size_t v = 0; v < g.size(); ++v)
    for (std::size_t w : g.successors(v))
      if (scc.component[v] != scc.component[w]) succ[scc.component[v]].push_back(scc.component[w]);
  Digraph dag;
  for (auto& s : succ) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    dag.add_vertex(s);
  }
  return dag;
}

/// Vertices reachable from `sources` by paths of length >= min_steps (0 or 1).
inline std::vector<char> reachable(const Digraph& g, const std::vector<std::size_t>& sources, int min_steps = 0) {
  std::vector<char> seen(g.size(), 0);
  std::vector<std::size_t> frontier;
  if (min_steps == 0) {
    for (std::size_t s : sources)
      if (!seen[s]) {
        seen[s] = 1;
        frontier.push_back(s);
      }
  } else {
    for (std::size_t s : sources)
      for (std::size_t w : g.successors(s))
        if (!seen[w]) {
          seen[w] = 1;
          frontier.push_back(w);
        }
  }
  while (!frontier.empty()) {
    const std::size_t v = frontier.back();
    frontier.pop_back();
    for (std::size_t w : g.successors(v))
      if (!seen[w]) {
        seen[w] = 1;
        frontier.push_back(w);
      }
  }
  return seen;
}

}  // namespace pseudorbit
