#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "pseudorbit/error.hpp"
#include "pseudorbit/map_model.hpp"
#include "pseudorbit/noise.hpp"
#include "pseudorbit/pseudo_orbit.hpp"
#include "pseudorbit/simulate.hpp"
#include "pseudorbit/spectral.hpp"
#include "pseudorbit/transfer_matrix.hpp"

namespace pseudorbit::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

namespace detail {
template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

inline Interval interval(const json& j, const char* key) {
  const auto v = get<std::vector<double>>(j, key);
  if (v.size() != 2) throw ConfigError(std::string("field '") + key + "' must be [lo, hi]");
  try {
    return {v[0], v[1]};
  } catch (const StructuralError& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}
}  // namespace detail

/// Builds a map from either an explicit branch table or a named family
/// ("doubling", "example1", "tent" with "peak", "example2_base" with "a").
/// `a_override` replaces the config's "a" when set.
inline PiecewiseMap map_from_json(const json& j, std::optional<double> a_override = std::nullopt) {
  if (!j.is_object()) throw ConfigError("map config must be a JSON object");
  try {
    if (j.contains("family")) {
      const auto family = detail::get<std::string>(j, "family");
      if (family == "doubling") return maps::doubling();
      if (family == "example1") return maps::example1();
      if (family == "tent") return maps::tent(detail::get<double>(j, "peak"));
      if (family == "example2_base") return maps::example2_base(a_override ? *a_override : detail::get<double>(j, "a"));
      throw ConfigError("unknown map family '" + family + "'");
    }
    const Interval domain = detail::interval(j, "domain");
    const bool wrap = j.value("wrap", false);
    if (!j.contains("branches") || !j["branches"].is_array()) throw ConfigError("missing 'branches' array");
    std::vector<AffineBranch> branches;
    for (const auto& b : j["branches"])
      branches.push_back({detail::interval(b, "dom"), detail::get<double>(b, "slope"),
                          detail::get<double>(b, "intercept"), b.value("transient_ok", false)});
    return PiecewiseMap(domain, std::move(branches), wrap);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid map config: ") + e.what());
  }
}

inline json map_to_json(const PiecewiseMap& m) {
  json j;
  j["domain"] = {m.domain().lo, m.domain().hi};
  j["wrap"] = m.wrap();
  json bs = json::array();
  for (const auto& b : m.branches()) {
    json e{{"dom", {b.domain.lo, b.domain.hi}}, {"slope", b.slope}, {"intercept", b.intercept}};
    if (b.transient_ok) e["transient_ok"] = true;
    bs.push_back(e);
  }
  j["branches"] = bs;
  return j;
}

inline KernelShape shape_from_string(const std::string& s) {
  if (s == "uniform") return KernelShape::uniform;
  if (s == "triangular") return KernelShape::triangular;
  if (s == "table") return KernelShape::table;
  throw ConfigError("unknown kernel kind '" + s + "'");
}

inline BoundaryMode boundary_from_string(const std::string& s) {
  if (s == "strict") return BoundaryMode::strict;
  if (s == "torus-wrap" || s == "torus") return BoundaryMode::torus_wrap;
  throw ConfigError("unknown boundary mode '" + s + "'");
}

inline NoiseKernel kernel_from_json(const json& j) {
  const auto shape = shape_from_string(j.value("kind", std::string("uniform")));
  const auto boundary = boundary_from_string(j.value("boundary", std::string("strict")));
  std::vector<double> table;
  if (shape == KernelShape::table) table = detail::get<std::vector<double>>(j, "table");
  return NoiseKernel(shape, detail::get<double>(j, "eps"), boundary, std::move(table));
}

inline json kernel_to_json(const NoiseKernel& k) {
  json j{{"kind", to_string(k.shape())}, {"eps", k.eps()}, {"boundary", to_string(k.boundary())}};
  if (k.shape() == KernelShape::table) j["table"] = k.table();
  return j;
}

inline json partition_to_json(const Partition& p) {
  return {{"domain", {p.domain().lo, p.domain().hi}}, {"cells", p.size()}};
}

inline json grid_to_json(const Grid& g) {
  json j{{"x", partition_to_json(g.x)}};
  if (g.y) j["y"] = partition_to_json(*g.y);
  return j;
}

inline Partition partition_from_json(const json& j) {
  const Interval d = detail::interval(j, "domain");
  return Partition(d, detail::get<std::size_t>(j, "cells"));
}

inline Grid grid_from_json(const json& j) {
  if (!j.contains("x")) throw ConfigError("matrix header: missing grid.x");
  Partition x = partition_from_json(j["x"]);
  if (j.contains("y")) return Grid(x, partition_from_json(j["y"]));
  return Grid(x);
}

/// Sidecar header path for a coordinate-list matrix file: P.csv -> P.header.json.
inline fs::path header_path(const fs::path& csv) {
  fs::path h = csv;
  h.replace_extension(".header.json");
  return h;
}

inline json matrix_header(const TransferMatrix& p) {
  json j{{"grid", grid_to_json(p.grid)}, {"kind", to_string(p.kind)}, {"eps", p.eps}};
  j["seed"] = p.seed ? json(*p.seed) : json(nullptr);
  j["nonzeros"] = p.matrix.nonZeros();
  return j;
}

inline void write_matrix(const fs::path& csv, const TransferMatrix& p) {
  std::ostringstream os;
  os << "row,col,value\n";
  for (Eigen::Index r = 0; r < p.matrix.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(p.matrix, r); it; ++it)
      os << it.row() << ',' << it.col() << ',' << fmt(it.value()) << '\n';
  write_text(csv, os.str());
  write_json(header_path(csv), matrix_header(p));
}

inline TransferMatrix read_matrix(const fs::path& csv) {
  const json h = load_json(header_path(csv));
  TransferMatrix p{grid_from_json(detail::get<json>(h, "grid")), MatrixKind::unperturbed, 0.0, std::nullopt, {}};
  const auto kind = detail::get<std::string>(h, "kind");
  if (kind == "perturbed") {
    p.kind = MatrixKind::perturbed;
  } else if (kind != "unperturbed") {
    throw ConfigError("matrix header: unknown kind '" + kind + "'");
  }
  p.eps = detail::get<double>(h, "eps");
  if (h.contains("seed") && !h["seed"].is_null()) p.seed = h["seed"].get<std::uint64_t>();

  std::ifstream in(csv);
  if (!in) throw ConfigError("cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("row,col,value", 0) != 0) throw ConfigError(csv.string() + ": expected header 'row,col,value'");
  const std::size_t n = p.grid.size();
  Triplets t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    long long r = -1, c = -1;
    double v = 0.0;
    char c1 = 0, c2 = 0;
    if (!(ls >> r >> c1 >> c >> c2 >> v) || c1 != ',' || c2 != ',' || r < 0 || c < 0 ||
        static_cast<std::size_t>(r) >= n || static_cast<std::size_t>(c) >= n)
      throw ConfigError(csv.string() + ":" + std::to_string(lineno) + ": malformed entry");
    t.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  }
  p.matrix = from_triplets(n, n, t);
  return p;
}

inline void write_vector_csv(const fs::path& path, const Eigen::VectorXd& v, const Grid& grid) {
  std::ostringstream os;
  os << "cell,lo,hi,value\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto c = static_cast<std::size_t>(i);
    const std::size_t ix = grid.x_index(c);
    os << i << ',' << fmt(grid.x.edge(ix)) << ',' << fmt(grid.x.edge(ix + 1)) << ',' << fmt(v[i]) << '\n';
  }
  write_text(path, os.str());
}

/// Maximal runs of consecutive cells as [first, last] pairs.
inline json cell_ranges(const std::vector<std::size_t>& cells) {
  json out = json::array();
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    while (j + 1 < cells.size() && cells[j + 1] == cells[j] + 1) ++j;
    out.push_back({cells[i], cells[j]});
    i = j + 1;
  }
  return out;
}

inline json complex_pair(std::complex<double> z) { return {z.real(), z.imag()}; }

inline json spectrum_to_json(const SpectrumReport& s) {
  json ev = json::array();
  for (const auto& e : s.eigenvalues) ev.push_back({{"value", complex_pair(e.value)}, {"multiplicity", e.multiplicity}});
  json j{{"eigenvalues", ev},
         {"unit_multiplicity", s.unit_multiplicity},
         {"second_modulus", s.second_modulus},
         {"gap_radius", s.gap_radius},
         {"isolation_delta", s.isolation_delta}};
  j["xi_eps"] = s.xi_eps ? json(*s.xi_eps) : json(nullptr);
  if (s.second_eigvec) {
    j["positive_cells"] = cell_ranges(s.positive_set);
    j["negative_cells"] = cell_ranges(s.negative_set);
  }
  return j;
}

/// Component summaries; `density_files[i]`, when given, names the CSV sidecar.
inline json components_to_json(const std::vector<ErgodicComponent>& comps, const Grid& grid,
                               const std::vector<std::string>& density_files = {}) {
  json out = json::array();
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto& c = comps[i];
    json j{{"cells", cell_ranges(c.support)},
           {"cell_count", c.support.size()},
           {"hull", {grid.x.edge(grid.x_index(c.support.front())), grid.x.edge(grid.x_index(c.support.back()) + 1)}},
           {"residual", c.residual},
           {"iterations", c.iterations}};
    if (i < density_files.size()) j["density"] = density_files[i];
    out.push_back(j);
  }
  return out;
}

inline json dag_to_json(const ComponentDAG& dag, const Partition& p) {
  json comps = json::array();
  for (std::size_t i = 0; i < dag.supports.size(); ++i) {
    const auto& s = dag.supports[i];
    comps.push_back({{"index", i},
                     {"cells", cell_ranges(s)},
                     {"hull", {p.edge(s.front()), p.edge(s.back() + 1)}},
                     {"class", dag.class_of[i]}});
  }
  json classes = json::array();
  for (std::size_t c = 0; c < dag.classes.size(); ++c)
    classes.push_back({{"index", c}, {"members", dag.classes[c]}, {"successors", dag.class_edges[c]},
                       {"least", dag.is_least(c)}});
  json rel = json::array();
  for (const auto& row : dag.relation) {
    json r = json::array();
    for (char v : row) r.push_back(v != 0);
    rel.push_back(r);
  }
  return {{"components", comps}, {"relation", rel}, {"classes", classes}, {"least", dag.least}};
}

inline json theorem1_to_json(const Theorem1Report& r, const Partition& p) {
  json least = json::array();
  for (const auto& c : r.least)
    least.push_back({{"class", c.class_index},
                     {"hull", cell_ranges(c.hull)},
                     {"mass_in_hull", c.mass_in_hull},
                     {"densities_inside", c.densities_inside},
                     {"ok", c.ok}});
  json non_least = json::array();
  for (const auto& c : r.non_least)
    non_least.push_back({{"class", c.class_index}, {"max_mass", c.max_mass}, {"ok", c.ok}});
  json j{{"eps", r.eps},
         {"cells", r.cells},
         {"unperturbed_components", components_to_json(r.unperturbed, Grid(p))},
         {"perturbed_densities", components_to_json(r.perturbed, Grid(p))},
         {"dag", dag_to_json(r.dag, p)},
         {"least_elements", least},
         {"non_least_classes", non_least},
         {"count_bound", {{"densities", r.perturbed.size()}, {"components", r.unperturbed.size()}, {"ok", r.count_bound_ok}}},
         {"least_per_density", r.least_per_density},
         {"one_least_per_density_ok", r.one_least_per_density_ok}};
  j["resolution_consistent"] = r.resolution_consistent ? json(*r.resolution_consistent) : json(nullptr);
  j["passed"] = r.passed();
  return j;
}

inline json escape_to_json(const EscapeStats& s) {
  json j{{"trials", s.trials}, {"censored", s.censored}};
  j["mean"] = s.mean ? json(*s.mean) : json(nullptr);
  j["median"] = s.median ? json(*s.median) : json(nullptr);
  j["log2_histogram"] = s.histogram;
  return j;
}

inline void write_histogram_csv(const fs::path& path, const EmpiricalMeasure& em) {
  std::ostringstream os;
  os << "cell_x,cell_y,count\n";
  for (std::size_t c = 0; c < em.counts.size(); ++c)
    os << em.grid.x_index(c) << ',' << em.grid.y_index(c) << ',' << em.counts[c] << '\n';
  write_text(path, os.str());
}

inline void write_orbits_csv(const fs::path& path, const std::vector<SkewChainResult>& chains) {
  std::ostringstream os;
  os << "chain,step,x,y\n";
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (const auto& pt : chains[c].points) os << c << ',' << pt.step << ',' << fmt(pt.x) << ',' << fmt(pt.y) << '\n';
  write_text(path, os.str());
}

}  // namespace pseudorbit::io
