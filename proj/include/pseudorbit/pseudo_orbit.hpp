#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "pseudorbit/error.hpp"
#include "pseudorbit/graph.hpp"
#include "pseudorbit/map_model.hpp"
#include "pseudorbit/noise.hpp"
#include "pseudorbit/parallel.hpp"
#include "pseudorbit/spectral.hpp"
#include "pseudorbit/ulam.hpp"

namespace pseudorbit {

/// eps-pseudo-orbit graph on cells: i -> j iff I_j meets the open
/// eps-neighbourhood of T(I_i).
struct CellGraph {
  Partition partition;
  double eps;
  Digraph edges;

  std::size_t size() const { return edges.size(); }
};

inline CellGraph build_cell_graph(const PiecewiseMap& map, const Partition& partition, double eps,
                                  unsigned threads = 0) {
  if (!(eps > 0.0)) throw ConfigError("cell graph needs eps > 0");
  const auto branches = unit_branches(map, partition);
  const std::size_t n = partition.size();
  const auto ln = static_cast<long long>(n);
  const double e = snap_to_integer(eps / partition.width());
  const bool wrap = map.wrap();
  std::vector<std::vector<std::size_t>> succ(n);

  parallel_for(
      n,
      [&](std::size_t i) {
        auto& s = succ[i];
        for_each_cell_piece(branches, i, [&](double, double, double a, double z) {
          // Cells [k, k+1) meeting the open interval (a - e, z + e).
          const auto k0 = static_cast<long long>(std::floor(a - e));
          const auto k1 = static_cast<long long>(std::ceil(z + e)) - 1;
          if (wrap) {
            if (k1 - k0 + 1 >= ln) {
              for (std::size_t k = 0; k < n; ++k) s.push_back(k);
              return;
            }
            for (long long k = k0; k <= k1; ++k) s.push_back(static_cast<std::size_t>(((k % ln) + ln) % ln));
          } else {
            for (long long k = std::max(0LL, k0); k <= std::min(ln - 1, k1); ++k) s.push_back(static_cast<std::size_t>(k));
          }
        });
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
      },
      threads);

  CellGraph g{partition, eps, {}};
  g.edges.offsets.reserve(n + 1);
  for (const auto& s : succ) g.edges.add_vertex(s);
  return g;
}

/// Union of the successors of `cells`, sorted.
inline std::vector<std::size_t> one_step_image(const CellGraph& g, const std::vector<std::size_t>& cells) {
  std::vector<char> hit(g.size(), 0);
  for (std::size_t c : cells)
    for (std::size_t w : g.edges.successors(c)) hit[w] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hit.size(); ++i)
    if (hit[i]) out.push_back(i);
  return out;
}

/// U = union of U_n with U_1 = cells meeting B_eps(T seed) and
/// U_n = cells meeting B_eps(T U_{n-1}); equivalently everything reachable
/// from the seed in at least one step.  Closed: one_step_image(U) ⊆ U.
inline std::vector<std::size_t> forward_invariant_hull(const CellGraph& g, const std::vector<std::size_t>& seed) {
  if (seed.empty()) throw ConfigError("forward_invariant_hull needs a nonempty seed");
  const auto seen = reachable(g.edges, seed, 1);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i]) out.push_back(i);
  return out;
}

inline std::vector<std::size_t> forward_invariant_hull(const PiecewiseMap& map, const std::vector<std::size_t>& seed,
                                                       double eps, const Partition& partition) {
  return forward_invariant_hull(build_cell_graph(map, partition, eps), seed);
}

/// Reachability pre-order between ergodic components, its equivalence
/// classes and their condensation.  Least elements are the sink classes.
struct ComponentDAG {
  std::vector<std::vector<std::size_t>> supports;
  /// relation[i][j]: some pseudo-orbit leads from component i to component j.
  std::vector<std::vector<char>> relation;
  std::vector<std::size_t> class_of;
  std::vector<std::vector<std::size_t>> classes;
  std::vector<std::vector<std::size_t>> class_edges;
  std::vector<std::size_t> least;

  bool is_least(std::size_t c) const { return std::find(least.begin(), least.end(), c) != least.end(); }

  std::vector<std::size_t> class_cells(std::size_t c) const {
    std::vector<std::size_t> cells;
    for (std::size_t comp : classes[c]) cells.insert(cells.end(), supports[comp].begin(), supports[comp].end());
    std::sort(cells.begin(), cells.end());
    return cells;
  }

  /// Partition of components into classes plus least flags; comparable
  /// across resolutions when components are listed in spatial order.
  bool same_structure(const ComponentDAG& o) const {
    return supports.size() == o.supports.size() && classes == o.classes && least == o.least &&
           class_edges == o.class_edges;
  }
};

inline ComponentDAG component_relation(const CellGraph& g, std::vector<std::vector<std::size_t>> supports) {
  if (supports.empty()) throw ConfigError("component_relation needs at least one component");
  const std::size_t m = supports.size();
  ComponentDAG dag;
  dag.relation.assign(m, std::vector<char>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    const auto seen = reachable(g.edges, supports[i], 0);
    for (std::size_t j = 0; j < m; ++j)
      dag.relation[i][j] = std::any_of(supports[j].begin(), supports[j].end(), [&](std::size_t c) { return seen[c] != 0; });
  }
  constexpr auto none = static_cast<std::size_t>(-1);
  dag.class_of.assign(m, none);
  for (std::size_t i = 0; i < m; ++i) {
    if (dag.class_of[i] != none) continue;
    const std::size_t c = dag.classes.size();
    dag.classes.emplace_back();
    for (std::size_t j = i; j < m; ++j)
      if (dag.class_of[j] == none && dag.relation[i][j] && dag.relation[j][i]) {
        dag.class_of[j] = c;
        dag.classes[c].push_back(j);
      }
  }
  dag.class_edges.assign(dag.classes.size(), {});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (dag.relation[i][j] && dag.class_of[i] != dag.class_of[j]) dag.class_edges[dag.class_of[i]].push_back(dag.class_of[j]);
  for (std::size_t c = 0; c < dag.classes.size(); ++c) {
    auto& e = dag.class_edges[c];
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    if (e.empty()) dag.least.push_back(c);
  }
  dag.supports = std::move(supports);
  return dag;
}

inline ComponentDAG component_relation(const CellGraph& g, const std::vector<ErgodicComponent>& components) {
  std::vector<std::vector<std::size_t>> s;
  for (const auto& c : components) s.push_back(c.support);
  return component_relation(g, std::move(s));
}

/// Least-element analysis at one resolution.
struct LeastElementAnalysis {
  std::vector<ErgodicComponent> components;
  CellGraph graph;
  ComponentDAG dag;
};

inline LeastElementAnalysis analyse_least_elements(const PiecewiseMap& map, const Partition& partition, double eps,
                                                   double stationary_tol = 1e-12, unsigned threads = 0) {
  TransferMatrix p = build_ulam(map, partition, threads);
  auto components = stationary_densities(p, stationary_tol);
  CellGraph g = build_cell_graph(map, partition, eps, threads);
  ComponentDAG dag = component_relation(g, components);
  return {std::move(components), std::move(g), std::move(dag)};
}

/// Whether the class structure found at n cells is reproduced at 2n cells.
inline bool resolution_consistent(const PiecewiseMap& map, const Partition& partition, double eps,
                                  const ComponentDAG& at_n, double stationary_tol = 1e-12, unsigned threads = 0) {
  const Partition fine(partition.domain(), 2 * partition.size());
  const auto refined = analyse_least_elements(map, fine, eps, stationary_tol, threads);
  return at_n.same_structure(refined.dag);
}

struct LeastElementCheck {
  std::size_t class_index = 0;
  std::vector<std::size_t> hull;
  /// Fraction of each perturbed density's mass inside the hull.
  std::vector<double> mass_in_hull;
  std::size_t densities_inside = 0;
  bool ok = false;
};

struct NonLeastCheck {
  std::size_t class_index = 0;
  double max_mass = 0.0;
  bool ok = false;
};

struct Theorem1Report {
  double eps = 0.0;
  std::size_t cells = 0;
  std::vector<ErgodicComponent> unperturbed;
  std::vector<ErgodicComponent> perturbed;
  ComponentDAG dag;
  std::vector<LeastElementCheck> least;
  std::vector<NonLeastCheck> non_least;
  bool count_bound_ok = false;
  /// Per perturbed density: how many least elements its support contains.
  std::vector<std::size_t> least_per_density;
  bool one_least_per_density_ok = false;
  std::optional<bool> resolution_consistent;

  bool passed() const {
    return std::all_of(least.begin(), least.end(), [](const auto& c) { return c.ok; }) &&
           std::all_of(non_least.begin(), non_least.end(), [](const auto& c) { return c.ok; }) && count_bound_ok &&
           one_least_per_density_ok && resolution_consistent.value_or(true);
  }
};

struct VerifyOptions {
  double inside_fraction = 1.0 - 1e-9;
  double mass_tol = 1e-9;
  double stationary_tol = 1e-12;
  bool cross_check = true;
  unsigned threads = 0;
};

/// Least elements of the unperturbed map against the stationary densities of
/// the perturbed operator: one density per least-element hull, no mass on
/// non-least classes, no more densities than unperturbed components, and one
/// least element inside each density's support.  Failures are reported, not thrown.
inline Theorem1Report verify_theorem1(const PiecewiseMap& map, const Partition& partition, double eps,
                                      const NoiseKernel& kernel, VerifyOptions opt = {}) {
  Theorem1Report rep;
  rep.eps = eps;
  rep.cells = partition.size();
  auto analysis = analyse_least_elements(map, partition, eps, opt.stationary_tol, opt.threads);
  rep.unperturbed = std::move(analysis.components);
  rep.dag = std::move(analysis.dag);
  const CellGraph& g = analysis.graph;

  std::vector<std::vector<std::size_t>> hulls;
  for (std::size_t c : rep.dag.least) hulls.push_back(forward_invariant_hull(g, rep.dag.class_cells(c)));
  for (std::size_t a = 0; a < hulls.size(); ++a)
    for (std::size_t b = a + 1; b < hulls.size(); ++b) {
      std::vector<std::size_t> common;
      std::set_intersection(hulls[a].begin(), hulls[a].end(), hulls[b].begin(), hulls[b].end(), std::back_inserter(common));
      if (!common.empty()) {
        std::ostringstream os;
        os << "hulls of least elements " << a << " and " << b << " overlap at eps = " << eps;
        throw EpsTooLargeError(os.str());
      }
    }

  const TransferMatrix p_eps = build_perturbed(map, partition, kernel, opt.threads);
  rep.perturbed = stationary_densities(p_eps, opt.stationary_tol);

  for (std::size_t l = 0; l < rep.dag.least.size(); ++l) {
    LeastElementCheck chk;
    chk.class_index = rep.dag.least[l];
    chk.hull = hulls[l];
    for (const auto& d : rep.perturbed) {
      const double m = d.mass_on(chk.hull);
      chk.mass_in_hull.push_back(m);
      if (m >= opt.inside_fraction) ++chk.densities_inside;
    }
    chk.ok = chk.densities_inside == 1;
    rep.least.push_back(std::move(chk));
  }
  for (std::size_t c = 0; c < rep.dag.classes.size(); ++c) {
    if (rep.dag.is_least(c)) continue;
    NonLeastCheck chk;
    chk.class_index = c;
    const auto cells = rep.dag.class_cells(c);
    for (const auto& d : rep.perturbed) chk.max_mass = std::max(chk.max_mass, d.mass_on(cells));
    chk.ok = chk.max_mass < opt.mass_tol;
    rep.non_least.push_back(chk);
  }
  rep.count_bound_ok = rep.perturbed.size() <= rep.unperturbed.size();
  rep.one_least_per_density_ok = true;
  for (const auto& d : rep.perturbed) {
    std::size_t count = 0;
    for (std::size_t c : rep.dag.least) {
      const auto cells = rep.dag.class_cells(c);
      if (std::all_of(cells.begin(), cells.end(), [&](std::size_t x) { return d.density[static_cast<Eigen::Index>(x)] > 0.0; }))
        ++count;
    }
    rep.least_per_density.push_back(count);
    if (count != 1) rep.one_least_per_density_ok = false;
  }
  if (opt.cross_check)
    rep.resolution_consistent = resolution_consistent(map, partition, eps, rep.dag, opt.stationary_tol, opt.threads);
  return rep;
}

}  // namespace pseudorbit
