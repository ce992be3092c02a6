#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pseudorbit/pseudorbit.hpp"

using namespace pseudorbit;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double worst_row_deviation = 0.0;
std::size_t matrices_built = 0;

const TransferMatrix& track(const TransferMatrix& p) {
  worst_row_deviation = std::max(worst_row_deviation, p.max_row_sum_deviation());
  ++matrices_built;
  return p;
}

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    std::cout << "    " << (ok ? "ok   " : "FAIL ") << what << '\n';
    pass_ = pass_ && ok;
  }
  bool pass() const { return pass_; }

 private:
  bool pass_ = true;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<std::size_t> cells_of(const Partition& p, double lo, double hi) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.edge(i) >= lo - 1e-12 && p.edge(i + 1) <= hi + 1e-12) out.push_back(i);
  return out;
}

bool support_matches(const std::vector<std::size_t>& s, const Partition& p, double lo, double hi, double cells) {
  const double tol = cells * p.width();
  return std::abs(p.edge(s.front()) - lo) <= tol && std::abs(p.edge(s.back() + 1) - hi) <= tol;
}

bool support_inside(const std::vector<std::size_t>& s, const Partition& p, double lo, double hi) {
  return p.edge(s.front()) >= lo - 1e-12 && p.edge(s.back() + 1) <= hi + 1e-12;
}

// Criterion 1 -----------------------------------------------------------------

bool criterion1(Checker& c) {
  const auto t0 = Clock::now();
  const auto d = maps::doubling();
  const auto p1024 = track(build_ulam(d, Partition({0, 1}, 1024)));
  const auto comps = stationary_densities(p1024);
  c.expect(comps.size() == 1, "doubling n=1024 has one stationary density");
  const double dev = (comps.at(0).density.array() - 1.0 / 1024).abs().maxCoeff();
  c.expect(dev <= 1e-8, "per-cell deviation from uniform " + num(dev) + " <= 1e-8");
  const auto spec = top_eigenvalues(p1024, 6);
  c.expect(spec.unit_multiplicity == 1, "eigenvalue 1 simple");
  c.expect(spec.second_modulus <= 0.5 + 1e-6, "second modulus " + num(spec.second_modulus) + " <= 0.5 + 1e-6");

  const auto p256 = track(build_ulam(d, Partition({0, 1}, 256)));
  Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(p256.matrix), false);
  std::vector<double> mods;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()[i]));
  std::sort(mods.rbegin(), mods.rend());
  const auto s256 = top_eigenvalues(p256, 6);
  c.expect(std::abs(mods[0] - 1.0) < 1e-10 && mods[1] <= 0.5 + 1e-6,
           "dense oracle n=256: second modulus " + num(mods[1]));
  c.expect(std::abs(s256.second_modulus - mods[1]) < 1e-8, "sparse spectrum agrees with dense oracle at n=256");

  for (const auto& m : {maps::example1(), maps::example2_base(0.1), maps::tent(0.4)}) {
    const Partition p(m.domain(), 2000);
    track(build_ulam(m, p));
  }
  track(build_perturbed(d, Partition({0, 1}, 1024), NoiseKernel::uniform(0.01, BoundaryMode::torus_wrap)));
  track(build_perturbed(d, Partition({0, 1}, 1024), NoiseKernel::triangular(0.01, BoundaryMode::torus_wrap)));
  track(build_perturbed(maps::example1(), Partition({0, 10}, 2000), NoiseKernel::uniform(0.05)));
  track(build_ulam_2d(SkewFamily(maps::example2_base(0.1)), Grid(Partition({0, 1}, 64), Partition({0, 1}, 64)),
                      NoiseKernel::uniform(1.0 / 120), 64, 1));
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime " + num(secs) + " s < 10 s");
  return c.pass();
}

// Criterion 2 -----------------------------------------------------------------

bool criterion2(Checker& c) {
  const auto t0 = Clock::now();
  const auto m = maps::example1();
  const Partition p(m.domain(), 4000);
  const auto a = analyse_least_elements(m, p, 0.05);
  track(build_ulam(m, p));
  c.expect(a.components.size() == 3, "three unperturbed components (found " + std::to_string(a.components.size()) + ")");
  if (a.components.size() == 3) {
    const double want[3][2] = {{1, 4}, {5.5, 7.5}, {7.5, 9.5}};
    for (int i = 0; i < 3; ++i)
      c.expect(support_matches(a.components[static_cast<std::size_t>(i)].support, p, want[i][0], want[i][1], 2),
               "support " + std::to_string(i) + " matches [" + num(want[i][0]) + ", " + num(want[i][1]) + "]");
    const auto& dag = a.dag;
    c.expect(dag.classes.size() == 2 && dag.classes[0] == std::vector<std::size_t>{0} &&
                 dag.classes[1] == std::vector<std::size_t>{1, 2},
             "pseudo-orbit classes {L1}, {L2, L3}");
    c.expect(dag.least == std::vector<std::size_t>{0, 1}, "both classes are least elements");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, "runtime " + num(secs) + " s < 60 s");
  return c.pass();
}

// Criterion 3 -----------------------------------------------------------------

bool criterion3(Checker& c) {
  const auto m = maps::example1();
  const Partition p(m.domain(), 4000);
  const double eps = 0.05;
  const auto r = verify_theorem1(m, p, eps, NoiseKernel::uniform(eps));
  track(build_perturbed(m, p, NoiseKernel::uniform(eps)));
  c.expect(r.perturbed.size() == 2, "two perturbed stationary densities (found " + std::to_string(r.perturbed.size()) + ")");
  for (const auto& l : r.least) {
    double best = 0.0;
    for (double v : l.mass_in_hull) best = std::max(best, v);
    c.expect(l.densities_inside == 1 && best >= 1 - 1e-9,
             "least class " + std::to_string(l.class_index) + ": one density with hull mass " + num(best));
  }
  std::vector<char> in_least(p.size(), 0);
  for (std::size_t cls : r.dag.least)
    for (std::size_t x : forward_invariant_hull(build_cell_graph(m, p, eps), r.dag.class_cells(cls))) in_least[x] = 1;
  double outside = 0.0;
  for (const auto& d : r.perturbed)
    for (std::size_t x = 0; x < p.size(); ++x)
      if (!in_least[x]) outside = std::max(outside, d.density[static_cast<Eigen::Index>(x)]);
  double non_least = 0.0;
  for (const auto& nl : r.non_least) non_least = std::max(non_least, nl.max_mass);
  c.expect(non_least < 1e-9 && outside < 1e-9, "mass off the least hulls " + num(std::max(outside, non_least)) + " < 1e-9");
  c.expect(r.count_bound_ok, "density count " + std::to_string(r.perturbed.size()) + " <= component count " +
                                 std::to_string(r.unperturbed.size()));
  c.expect(r.one_least_per_density_ok, "one least element per density support");
  c.expect(r.resolution_consistent.value_or(false), "class structure unchanged at 8000 cells");
  return c.pass();
}

// Criterion 4 -----------------------------------------------------------------

bool criterion4(Checker& c) {
  const auto t0 = Clock::now();
  const auto m = maps::example2_base(0.1);
  const Partition p(m.domain(), 4000);
  const double eps = 1.0 / 120;
  const auto a = analyse_least_elements(m, p, eps);
  c.expect(a.components.size() == 2, "two unperturbed components");
  if (a.components.size() == 2) {
    c.expect(support_inside(a.components[0].support, p, 0.1, 0.4), "left support inside [0.1, 0.4]");
    c.expect(support_inside(a.components[1].support, p, 0.6, 0.9), "right support inside [0.6, 0.9]");
    c.expect(a.dag.least.size() == 1 && a.dag.classes[a.dag.least[0]] == std::vector<std::size_t>{1},
             "unique least element is the right component");
  }
  const auto pe = track(build_perturbed(m, p, NoiseKernel::uniform(eps)));
  const auto d = stationary_densities(pe);
  c.expect(d.size() == 1, "one perturbed stationary density");
  if (!d.empty() && !a.dag.least.empty()) {
    const auto hull = forward_invariant_hull(a.graph, a.dag.class_cells(a.dag.least[0]));
    const double mass = d[0].mass_on(hull);
    c.expect(mass >= 0.999, "mass in the right hull " + num(mass) + " >= 0.999");
  }
  const SkewFamily f(m);
  SkewChainOptions opt;
  opt.max_points = 0;
  const auto runs = run_skew_ensemble(f, NoiseKernel::uniform(eps), 100, 100000, 10000, 2024,
                                      Grid(Partition({0, 1}, 100), Partition({0, 1}, 100)), opt);
  double worst = 1.0;
  for (const auto& r : runs) worst = std::min(worst, r.histogram.occupancy_above(0.55));
  c.expect(runs.size() == 100 && worst >= 0.99, "100 skew chains, lowest occupancy of {x > 0.55} " + num(worst));
  const double secs = seconds_since(t0);
  c.expect(secs < 300.0, "runtime " + num(secs) + " s < 300 s");
  return c.pass();
}

// Criterion 5 -----------------------------------------------------------------

bool criterion5(Checker& c) {
  const auto m = maps::example2_base(0.1);
  const Partition p(m.domain(), 4096);
  double prev = 0.0;
  for (double inv : {40.0, 80.0, 160.0}) {
    const auto pe = track(build_perturbed(m, p, NoiseKernel::uniform(1.0 / inv)));
    const std::string tag = "eps = 1/" + num(inv) + ": ";
    SpectrumReport r;
    try {
      r = metastability_report(pe);
    } catch (const std::exception& e) {
      c.expect(false, tag + e.what());
      continue;
    }
    c.expect(r.unit_multiplicity == 1, tag + "eigenvalue 1 simple");
    if (!r.xi_eps) {
      c.expect(false, tag + "no real eigenvalue above 0.8");
      continue;
    }
    const double xi = *r.xi_eps;
    bool second = true;
    for (const auto& e : r.eigenvalues)
      if (std::abs(e.value - 1.0) > 1e-10 && std::abs(e.value - xi) > 1e-10) second = second && std::abs(e.value) < xi;
    c.expect(xi > 0.9 && second, tag + "xi = " + num(xi) + " real, second largest, > 0.9");
    c.expect(xi > prev, tag + "xi increases as eps decreases");
    prev = xi;
    const double purity = sign_split(*r.second_eigvec, p, 0.5).purity();
    c.expect(purity >= 0.95, tag + "sign split purity " + num(purity) + " >= 0.95");
  }
  return c.pass();
}

// Criterion 6 -----------------------------------------------------------------

bool criterion6(Checker& c) {
  struct Case {
    std::string name;
    PiecewiseMap map;
    BoundaryMode boundary;
  };
  for (const auto& cs : {Case{"doubling", maps::doubling(), BoundaryMode::torus_wrap},
                         Case{"example2", maps::example2_base(0.1), BoundaryMode::strict}}) {
    const Partition p(cs.map.domain(), 4000);
    const auto base = track(build_ulam(cs.map, p));
    std::vector<double> dist;
    for (double eps : {0.02, 0.005, 0.00125})
      dist.push_back(operator_distance(base, track(build_perturbed(cs.map, p, NoiseKernel::uniform(eps, cs.boundary)))));
    c.expect(dist[0] > dist[1] && dist[1] > dist[2],
             cs.name + ": " + num(dist[0]) + " > " + num(dist[1]) + " > " + num(dist[2]));
  }
  return c.pass();
}

// Criterion 7 -----------------------------------------------------------------

bool criterion7(Checker& c) {
  struct Case {
    std::string name;
    PiecewiseMap map;
    NoiseKernel kernel;
    std::size_t cells;
  };
  const std::uint64_t n = 1000000, burn = 10000;
  const std::size_t factor = 8;
  std::uint64_t seed = 7;
  for (const auto& cs :
       {Case{"doubling", maps::doubling(), NoiseKernel::uniform(0.01, BoundaryMode::torus_wrap), 4096},
        Case{"example1", maps::example1(), NoiseKernel::uniform(0.05), 4000},
        Case{"example2", maps::example2_base(0.1), NoiseKernel::uniform(1.0 / 120), 4000}}) {
    const Partition p(cs.map.domain(), cs.cells);
    const auto dens = stationary_densities(track(build_perturbed(cs.map, p, cs.kernel)));
    for (std::size_t i = 0; i < dens.size(); ++i) {
      const auto& s = dens[i].support;
      const double x0 = p.center(s[s.size() / 2]);
      const auto em = run_chain(cs.map, cs.kernel, x0, n, burn, seed++, p);
      const double l1 = l1_distance(em.coarsened(factor), coarsen(dens[i].density, factor));
      c.expect(l1 <= 0.05, cs.name + " density " + std::to_string(i) + ": L1 " + num(l1) + " <= 0.05 on " +
                               std::to_string(cs.cells / factor) + " bins");
    }
  }
  const auto m = maps::example2_base(0.1);
  const Partition p(m.domain(), 4000);
  const auto left = cells_of(p, 0.1, 0.4), right = cells_of(p, 0.6, 0.9);
  double prev = 0.0;
  for (double inv : {40.0, 80.0, 160.0}) {
    const auto s = escape_time(m, NoiseKernel::uniform(1.0 / inv), p, left, right, 10000000, 1000, 99);
    const double mean = s.mean.value_or(0.0);
    c.expect(s.censored == 0 && mean > prev,
             "escape time at eps = 1/" + num(inv) + ": mean " + num(mean) + ", censored " + std::to_string(s.censored));
    prev = mean;
  }
  return c.pass();
}

// Criterion 8 -----------------------------------------------------------------

bool criterion8(Checker& c) {
  struct Case {
    std::string name;
    PiecewiseMap map;
    NoiseKernel kernel;
    std::size_t cells;
  };
  Rng rng(8);
  for (const auto& cs : {Case{"doubling", maps::doubling(), NoiseKernel::uniform(0.01, BoundaryMode::torus_wrap), 4096},
                         Case{"example1", maps::example1(), NoiseKernel::uniform(0.05), 4000},
                         Case{"example2", maps::example2_base(0.1), NoiseKernel::uniform(1.0 / 120), 4000}}) {
    const Partition p(cs.map.domain(), cs.cells);
    const auto pe = track(build_perturbed(cs.map, p, cs.kernel));
    const auto g = build_cell_graph(cs.map, p, cs.kernel.eps());
    std::size_t mismatches = 0;
    for (int t = 0; t < 100; ++t) {
      const std::size_t len = 1 + rng.below(t % 2 ? 40 : 1);
      const std::size_t start = rng.below(p.size() - len + 1);
      std::vector<std::size_t> seed_cells;
      for (std::size_t k = 0; k < len; ++k) seed_cells.push_back(start + k);
      Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
      for (std::size_t k : seed_cells) f[static_cast<Eigen::Index>(k)] = 1.0;
      const Eigen::VectorXd h = pe.push_forward(f);
      std::vector<std::size_t> supp;
      for (Eigen::Index k = 0; k < h.size(); ++k)
        if (h[k] > 0.0) supp.push_back(static_cast<std::size_t>(k));
      if (supp != one_step_image(g, seed_cells)) ++mismatches;
    }
    c.expect(mismatches == 0, cs.name + ": " + std::to_string(100 - mismatches) + "/100 seeds match the cell graph");
  }
  return c.pass();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<bool(Checker&)>>> criteria = {
      {"1 stochasticity and exactness", criterion1},
      {"2 example 1 structure", criterion2},
      {"3 least elements carry the perturbed densities (example 1)", criterion3},
      {"4 example 2 attracting least element", criterion4},
      {"5 metastable second eigenvalue", criterion5},
      {"6 perturbation norm decreases", criterion6},
      {"7 Monte Carlo agreement and escape times", criterion7},
      {"8 positivity propagation", criterion8},
  };
  std::vector<Outcome> results;
  for (const auto& [name, fn] : criteria) {
    std::cout << "criterion " << name << '\n';
    Checker c;
    const auto t0 = Clock::now();
    bool ok = false;
    try {
      ok = fn(c);
    } catch (const std::exception& e) {
      std::cout << "    error: " << e.what() << '\n';
    }
    results.push_back({ok, num(seconds_since(t0)) + " s"});
  }
  const bool stochastic = worst_row_deviation < 1e-10;
  std::cout << "row-sum deviation over " << matrices_built << " matrices: " << num(worst_row_deviation) << '\n';
  results[0].pass = results[0].pass && stochastic;

  std::cout << '\n';
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::cout << (results[i].pass ? "PASS" : "FAIL") << "  criterion " << criteria[i].first << " (" << results[i].detail
              << ")\n";
    all = all && results[i].pass;
  }
  return all ? 0 : 1;
}
