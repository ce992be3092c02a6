#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "pseudorbit/io.hpp"
#include "pseudorbit/pseudorbit.hpp"

namespace po = pseudorbit;
namespace fs = std::filesystem;
using json = po::io::json;

namespace {

struct Env {
  unsigned threads = 0;
  std::string out_dir = ".";

  fs::path out(const std::string& name) const {
    fs::path dir = out_dir;
    if (const char* e = std::getenv("PSEUDORBIT_OUT_DIR"); e != nullptr && *e != '\0') dir = e;
    const fs::path p(name);
    return p.is_absolute() ? p : dir / p;
  }
};

struct MapArgs {
  std::string path;
  std::optional<double> a;

  void add(CLI::App* app, bool required) {
    auto* opt = app->add_option("--map", path, "map config (JSON)");
    if (required) opt->required();
    app->add_option("--a", a, "parameter of the example2_base family");
  }

  po::PiecewiseMap load() const { return po::io::map_from_json(po::io::load_json(path), a); }

  json describe(const po::PiecewiseMap& m) const {
    json j{{"source", path}};
    if (a) j["a"] = *a;
    j["resolved"] = po::io::map_to_json(m);
    return j;
  }
};

struct KernelArgs {
  std::string kind = "uniform";
  std::string boundary = "auto";
  double eps = 0.0;

  void add(CLI::App* app, bool eps_required) {
    auto* e = app->add_option("--eps", eps, "noise amplitude")->check(CLI::NonNegativeNumber);
    if (eps_required) e->required();
    app->add_option("--kernel", kind, "uniform | triangular")->check(CLI::IsMember({"uniform", "triangular"}));
    app->add_option("--boundary", boundary, "auto | strict | torus-wrap")
        ->check(CLI::IsMember({"auto", "strict", "torus-wrap"}));
  }

  po::NoiseKernel make(const po::PiecewiseMap& m) const {
    const auto b = boundary == "auto" ? (m.wrap() ? po::BoundaryMode::torus_wrap : po::BoundaryMode::strict)
                                      : po::io::boundary_from_string(boundary);
    return {po::io::shape_from_string(kind), eps, b};
  }
};

struct Verdicts {
  json items = json::object();
  bool all = true;

  void add(const std::string& name, bool ok) {
    items[name] = ok;
    all = all && ok;
    std::cout << (ok ? "PASS  " : "FAIL  ") << name << '\n';
  }
};

void require_positive_eps(double eps) {
  if (!(eps > 0.0)) throw po::ConfigError("--eps must be strictly positive");
}

std::string sidecar(const fs::path& report, const std::string& suffix) {
  return report.stem().string() + suffix;
}

// ---------------------------------------------------------------- ulam

struct UlamCmd {
  MapArgs map;
  KernelArgs kernel;
  std::size_t bins = 0;
  std::string out = "P.csv";

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("ulam", "build the Ulam matrix of a map, optionally perturbed");
    map.add(c, true);
    kernel.add(c, false);
    c->add_option("--bins", bins, "number of cells")->required()->check(CLI::Range(2ul, 1ul << 24));
    c->add_option("--out", out, "coordinate-list CSV; the header goes to <stem>.header.json");
  }

  int run(const Env& env) const {
    const auto m = map.load();
    const po::Partition p(m.domain(), bins);
    const auto P = kernel.eps > 0.0 ? po::build_perturbed(m, p, kernel.make(m), env.threads)
                                    : po::build_ulam(m, p, env.threads);
    const fs::path path = env.out(out);
    po::io::write_matrix(path, P);
    const double dev = P.max_row_sum_deviation();
    std::cout << "wrote " << path.string() << " (" << P.matrix.nonZeros() << " nonzeros, row-sum deviation " << dev
              << ")\n";
    return dev < 1e-10 ? 0 : 1;
  }
};

// ---------------------------------------------------------------- spectrum

struct SpectrumCmd {
  std::string matrix;
  std::size_t topk = 8;
  bool metastability = false;
  double r = 0.8;
  double delta = 0.1;
  std::string out = "spectrum.json";

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("spectrum", "leading eigenvalues of a stored matrix");
    c->add_option("--matrix", matrix, "matrix CSV written by 'ulam'")->required();
    c->add_option("--topk", topk, "number of eigenvalues")->check(CLI::Range(1ul, 12ul));
    c->add_flag("--metastability", metastability, "also locate xi_eps and its eigenvector (perturbed matrices)");
    c->add_option("--r", r, "essential spectral radius bound");
    c->add_option("--delta", delta, "isolation radius around 1");
    c->add_option("--out", out, "report JSON");
  }

  int run(const Env& env) const {
    const auto P = po::io::read_matrix(matrix);
    const auto rep = metastability ? po::metastability_report(P, r, delta, topk) : po::top_eigenvalues(P, topk);
    json report{{"config",
                 {{"command", "spectrum"},
                  {"matrix", matrix},
                  {"header", po::io::matrix_header(P)},
                  {"topk", topk},
                  {"metastability", metastability},
                  {"r", r},
                  {"delta", delta}}},
                {"spectrum", po::io::spectrum_to_json(rep)}};
    const fs::path path = env.out(out);
    if (rep.second_eigvec) {
      const std::string name = sidecar(path, ".eigvec2.csv");
      po::io::write_vector_csv(path.parent_path() / name, *rep.second_eigvec, P.grid);
      report["spectrum"]["second_eigvec"] = name;
    }
    po::io::write_json(path, report);
    for (const auto& e : rep.eigenvalues)
      std::cout << e.value.real() << (e.value.imag() < 0 ? " - " : " + ") << std::abs(e.value.imag()) << "i"
                << (e.multiplicity > 1 ? "  (x" + std::to_string(e.multiplicity) + ")" : "") << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------- components

struct ComponentsCmd {
  std::string matrix;
  std::string out = "components.json";

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("components", "recurrent classes and their stationary densities");
    c->add_option("--matrix", matrix, "matrix CSV written by 'ulam'")->required();
    c->add_option("--out", out, "report JSON; densities go to CSV sidecars");
  }

  int run(const Env& env) const {
    const auto P = po::io::read_matrix(matrix);
    const auto comps = po::stationary_densities(P);
    const fs::path path = env.out(out);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      files.push_back(sidecar(path, ".density" + std::to_string(i) + ".csv"));
      po::io::write_vector_csv(path.parent_path() / files.back(), comps[i].density, P.grid);
    }
    po::io::write_json(path, {{"config", {{"command", "components"}, {"matrix", matrix}, {"header", po::io::matrix_header(P)}}},
                              {"components", po::io::components_to_json(comps, P.grid, files)}});
    std::cout << comps.size() << " component(s)\n";
    return 0;
  }
};

// ---------------------------------------------------------------- least-elements

struct LeastCmd {
  MapArgs map;
  std::size_t bins = 4000;
  double eps = 0.0;
  bool cross_check = false;
  std::string out = "dag.json";

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("least-elements", "pseudo-orbit classes of ergodic components");
    map.add(c, true);
    c->add_option("--bins", bins, "number of cells")->check(CLI::Range(2ul, 1ul << 24));
    c->add_option("--eps", eps, "pseudo-orbit jump size")->required();
    c->add_flag("--cross-check", cross_check, "repeat at twice the resolution");
    c->add_option("--out", out, "DAG JSON");
  }

  int run(const Env& env) const {
    require_positive_eps(eps);
    const auto m = map.load();
    const po::Partition p(m.domain(), bins);
    const auto a = po::analyse_least_elements(m, p, eps, 1e-12, env.threads);
    json report{{"config", {{"command", "least-elements"}, {"map", map.describe(m)}, {"bins", bins}, {"eps", eps}}},
                {"dag", po::io::dag_to_json(a.dag, p)}};
    if (cross_check) report["resolution_consistent"] = po::resolution_consistent(m, p, eps, a.dag, 1e-12, env.threads);
    po::io::write_json(env.out(out), report);
    std::cout << a.components.size() << " component(s), " << a.dag.classes.size() << " class(es), "
              << a.dag.least.size() << " least element(s)\n";
    return 0;
  }
};

// ---------------------------------------------------------------- verify

struct VerifyCmd {
  MapArgs map;
  KernelArgs kernel;
  std::size_t bins = 4000;
  bool no_cross_check = false;
  std::string out = "report.json";

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("verify", "check least elements against perturbed stationary densities");
    map.add(c, true);
    kernel.add(c, true);
    c->add_option("--bins", bins, "number of cells")->check(CLI::Range(2ul, 1ul << 24));
    c->add_flag("--no-cross-check", no_cross_check, "skip the resolution-doubling check");
    c->add_option("--out", out, "report JSON");
  }

  int run(const Env& env) const {
    require_positive_eps(kernel.eps);
    const auto m = map.load();
    const auto k = kernel.make(m);
    const po::Partition p(m.domain(), bins);
    po::VerifyOptions opt;
    opt.cross_check = !no_cross_check;
    opt.threads = env.threads;
    const auto rep = po::verify_theorem1(m, p, kernel.eps, k, opt);
    po::io::write_json(env.out(out), {{"config",
                                       {{"command", "verify"},
                                        {"map", map.describe(m)},
                                        {"kernel", po::io::kernel_to_json(k)},
                                        {"bins", bins},
                                        {"cross_check", opt.cross_check}}},
                                      {"theorem1", po::io::theorem1_to_json(rep, p)}});
    std::cout << (rep.passed() ? "PASS" : "FAIL") << ": " << rep.perturbed.size() << " stationary densit"
              << (rep.perturbed.size() == 1 ? "y" : "ies") << ", " << rep.dag.least.size() << " least element(s)\n";
    return rep.passed() ? 0 : 1;
  }
};

// ---------------------------------------------------------------- simulate

struct SimulateCmd {
  MapArgs map;
  KernelArgs kernel;
  bool skew = false;
  std::size_t starts = 1;
  std::uint64_t steps = 100000;
  std::uint64_t burn = 10000;
  std::uint64_t seed = 7;
  std::optional<double> x0;
  std::size_t bins = 512;
  std::size_t ybins = 64;
  std::string fiber = "refill";
  double threshold = 0.55;
  std::size_t thin = 10;
  std::string out = "orbits.csv";
  std::string hist = "hist.csv";
  std::string summary = "simulate.json";

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("simulate", "Monte Carlo random orbits");
    map.add(c, true);
    kernel.add(c, true);
    c->add_flag("--skew", skew, "simulate the skew product over the map");
    c->add_option("--starts", starts, "independent chains")->check(CLI::PositiveNumber);
    c->add_option("--steps", steps, "steps per chain")->check(CLI::PositiveNumber);
    c->add_option("--burn", burn, "discarded prefix per chain");
    c->add_option("--seed", seed, "base seed");
    c->add_option("--x0", x0, "start point (1-D, default: uniform per chain)");
    c->add_option("--bins", bins, "histogram cells along x")->check(CLI::Range(2ul, 1ul << 24));
    c->add_option("--ybins", ybins, "histogram cells along y (skew)")->check(CLI::Range(2ul, 1ul << 16));
    c->add_option("--fiber", fiber, "exact | refill")->check(CLI::IsMember({"exact", "refill"}));
    c->add_option("--threshold", threshold, "occupancy threshold on x (skew)");
    c->add_option("--thin", thin, "keep every k-th orbit point")->check(CLI::PositiveNumber);
    c->add_option("--out", out, "orbit CSV (skew)");
    c->add_option("--hist", hist, "histogram CSV");
    c->add_option("--summary", summary, "summary JSON");
  }

  int run(const Env& env) const {
    if (steps <= burn) throw po::ConfigError("--steps must exceed --burn");
    const auto m = map.load();
    const auto k = kernel.make(m);
    json config{{"command", "simulate"},
                {"map", map.describe(m)},
                {"kernel", po::io::kernel_to_json(k)},
                {"skew", skew},
                {"starts", starts},
                {"steps", steps},
                {"burn", burn},
                {"seed", seed},
                {"bins", bins}};
    json results;
    if (skew) {
      const po::SkewFamily family(m);
      const po::Grid grid(po::Partition({0.0, 1.0}, bins), po::Partition({0.0, 1.0}, ybins));
      po::SkewChainOptions opt;
      opt.fiber = fiber == "exact" ? po::FiberMode::exact : po::FiberMode::refill;
      opt.thin = thin;
      config["ybins"] = ybins;
      config["fiber"] = fiber;
      config["thin"] = thin;
      config["threshold"] = threshold;
      const auto chains = po::run_skew_ensemble(family, k, starts, steps, burn, seed, grid, opt, env.threads);
      po::EmpiricalMeasure total(grid);
      json occ = json::array();
      double worst = 1.0;
      for (const auto& c : chains) {
        total.merge(c.histogram);
        const double o = c.histogram.occupancy_above(threshold);
        occ.push_back(o);
        worst = std::min(worst, o);
      }
      po::io::write_orbits_csv(env.out(out), chains);
      po::io::write_histogram_csv(env.out(hist), total);
      results = {{"occupancy_above_threshold", occ}, {"min_occupancy", worst}};
      std::cout << starts << " chain(s); minimum occupancy of {x > " << threshold << "}: " << worst << '\n';
    } else {
      const po::Partition p(m.domain(), bins);
      if (x0) config["x0"] = *x0;
      po::EmpiricalMeasure total{po::Grid(p)};
      for (std::size_t c = 0; c < starts; ++c) {
        po::Rng init(po::derive_seed(seed, c));
        const double start = x0 ? *x0 : m.domain().lo + init.uniform_open() * m.domain().length();
        total.merge(po::run_chain(m, k, start, steps, burn, init.bits(), p));
      }
      po::io::write_histogram_csv(env.out(hist), total);
      results = {{"samples", total.total}};
      std::cout << total.total << " samples tallied\n";
    }
    po::io::write_json(env.out(summary), {{"config", config}, {"results", results}});
    return 0;
  }
};

// ---------------------------------------------------------------- example1

struct Example1Cmd {
  std::string map_path;
  double eps = 0.05;
  std::size_t bins = 4000;
  std::uint64_t seed = 7;
  std::uint64_t mc_steps = 1000000;
  std::uint64_t mc_burn = 10000;
  std::size_t mc_bins = 500;
  std::string out = "report.json";

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("example1", "three components, two least elements");
    c->add_option("--map", map_path, "override the built-in map");
    c->add_option("--eps", eps, "noise amplitude");
    c->add_option("--bins", bins, "number of cells")->check(CLI::Range(2ul, 1ul << 24));
    c->add_option("--seed", seed, "Monte Carlo seed");
    c->add_option("--mc-steps", mc_steps, "Monte Carlo chain length")->check(CLI::PositiveNumber);
    c->add_option("--mc-burn", mc_burn, "Monte Carlo burn-in");
    c->add_option("--mc-bins", mc_bins, "histogram cells for the Monte Carlo comparison");
    c->add_option("--out", out, "report JSON");
  }

  int run(const Env& env) const {
    require_positive_eps(eps);
    if (mc_bins == 0 || bins % mc_bins != 0) throw po::ConfigError("--mc-bins must divide --bins");
    if (mc_steps <= mc_burn) throw po::ConfigError("--mc-steps must exceed --mc-burn");
    const auto m = map_path.empty() ? po::maps::example1() : po::io::map_from_json(po::io::load_json(map_path));
    const auto k = po::NoiseKernel::uniform(eps, po::BoundaryMode::strict);
    const po::Partition p(m.domain(), bins);
    Verdicts v;

    po::VerifyOptions opt;
    opt.threads = env.threads;
    const auto rep = po::verify_theorem1(m, p, eps, k, opt);
    v.add("three unperturbed components", rep.unperturbed.size() == 3);
    v.add("two least elements", rep.dag.least.size() == 2);
    v.add("stationary densities match least elements", rep.passed());

    const auto Pe = po::build_perturbed(m, p, k, env.threads);
    const auto spec = po::top_eigenvalues(Pe, 6);
    v.add("unit multiplicity equals density count", spec.unit_multiplicity == rep.perturbed.size());

    const fs::path path = env.out(out);
    json mc = json::array();
    std::vector<std::string> files;
    const std::size_t factor = bins / mc_bins;
    for (std::size_t i = 0; i < rep.perturbed.size(); ++i) {
      const auto& d = rep.perturbed[i].density;
      Eigen::Index peak = 0;
      d.maxCoeff(&peak);
      const double x = p.center(static_cast<std::size_t>(peak));
      const auto em = po::run_chain(m, k, x, mc_steps, mc_burn, po::derive_seed(seed, i), p);
      const double l1 = po::l1_distance(em.coarsened(factor), po::coarsen(d, factor));
      mc.push_back({{"density", i}, {"x0", x}, {"l1", l1}});
      v.add("Monte Carlo agrees with density " + std::to_string(i), l1 <= 0.05);
      files.push_back(sidecar(path, ".density" + std::to_string(i) + ".csv"));
      po::io::write_vector_csv(path.parent_path() / files.back(), d, po::Grid(p));
    }

    json report{{"config",
                 {{"command", "example1"},
                  {"map", po::io::map_to_json(m)},
                  {"kernel", po::io::kernel_to_json(k)},
                  {"bins", bins},
                  {"seed", seed},
                  {"mc_steps", mc_steps},
                  {"mc_burn", mc_burn},
                  {"mc_bins", mc_bins}}},
                {"theorem1", po::io::theorem1_to_json(rep, p)},
                {"perturbed_density_files", files},
                {"perturbed_spectrum", po::io::spectrum_to_json(spec)},
                {"monte_carlo", mc},
                {"verdicts", v.items},
                {"passed", v.all}};
    po::io::write_json(path, report);
    return v.all ? 0 : 1;
  }
};

// ---------------------------------------------------------------- example2

struct Example2Cmd {
  double a = 0.1;
  double eps = 1.0 / 120.0;
  std::size_t bins = 4000;
  std::size_t meta_bins = 4096;
  std::uint64_t seed = 7;
  std::size_t starts = 100;
  std::uint64_t steps = 100000;
  std::uint64_t burn = 10000;
  std::size_t xbins = 128;
  std::size_t ybins = 64;
  std::string out = "report.json";
  std::string orbits = "orbits.csv";
  std::string hist = "hist.csv";

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("example2", "skew product with one attracting least element");
    c->add_option("--a", a, "map parameter in (0, 1/4)");
    c->add_option("--eps", eps, "noise amplitude, below a");
    c->add_option("--bins", bins, "cells for the decomposition")->check(CLI::Range(2ul, 1ul << 24));
    c->add_option("--meta-bins", meta_bins, "cells for the spectral run")->check(CLI::Range(2ul, 1ul << 24));
    c->add_option("--seed", seed, "Monte Carlo seed");
    c->add_option("--starts", starts, "skew chains")->check(CLI::PositiveNumber);
    c->add_option("--steps", steps, "steps per chain")->check(CLI::PositiveNumber);
    c->add_option("--burn", burn, "burn-in per chain");
    c->add_option("--xbins", xbins, "scatter histogram cells along x")->check(CLI::Range(2ul, 1ul << 16));
    c->add_option("--ybins", ybins, "scatter histogram cells along y")->check(CLI::Range(2ul, 1ul << 16));
    c->add_option("--out", out, "report JSON");
    c->add_option("--orbits", orbits, "orbit CSV");
    c->add_option("--hist", hist, "2-D histogram CSV");
  }

  int run(const Env& env) const {
    require_positive_eps(eps);
    if (!(a > 0.0 && a < 0.25)) throw po::ConfigError("--a must lie in (0, 1/4)");
    if (eps >= a) throw po::ConfigError("--eps must be smaller than --a");
    if (steps <= burn) throw po::ConfigError("--steps must exceed --burn");
    const auto m = po::maps::example2_base(a);
    const auto k = po::NoiseKernel::uniform(eps, po::BoundaryMode::strict);
    const po::Partition p(m.domain(), bins);
    Verdicts v;

    po::VerifyOptions opt;
    opt.threads = env.threads;
    opt.inside_fraction = 0.999;
    const auto rep = po::verify_theorem1(m, p, eps, k, opt);
    const double tol = 2.0 * p.width();
    auto inside = [&](const po::ErgodicComponent& c, double lo, double hi) {
      return p.edge(c.support.front()) >= lo - tol && p.edge(c.support.back() + 1) <= hi + tol;
    };
    const bool two = rep.unperturbed.size() == 2;
    v.add("two unperturbed components", two && inside(rep.unperturbed[0], a, 0.5 - a) &&
                                            inside(rep.unperturbed[1], 0.5 + a, 1.0 - a));
    const bool one_least = rep.dag.least.size() == 1;
    bool right_least = false;
    if (two && one_least) {
      const auto& members = rep.dag.classes[rep.dag.least[0]];
      right_least = members.size() == 1 && members[0] == 1;
    }
    v.add("unique least element on the right", one_least && right_least);
    v.add("one stationary density", rep.perturbed.size() == 1);
    double right_mass = 0.0;
    if (!rep.least.empty() && !rep.least[0].mass_in_hull.empty()) right_mass = rep.least[0].mass_in_hull[0];
    v.add("stationary mass in the right hull >= 0.999", right_least && right_mass >= 0.999);

    const po::Partition q(m.domain(), meta_bins);
    const auto Pe = po::build_perturbed(m, q, k, env.threads);
    json meta;
    try {
      const auto ms = po::metastability_report(Pe);
      meta = po::io::spectrum_to_json(ms);
      if (ms.second_eigvec) meta["purity"] = po::sign_split(*ms.second_eigvec, q, 0.5).purity();
      v.add("eigenvalue 1 simple", ms.unit_multiplicity == 1);
    } catch (const po::MetastabilityError& e) {
      meta = {{"error", e.what()}};
      v.add("eigenvalue 1 simple", false);
    }

    const po::SkewFamily family(m);
    const po::Grid grid(po::Partition({0.0, 1.0}, xbins), po::Partition({0.0, 1.0}, ybins));
    const auto chains = po::run_skew_ensemble(family, k, starts, steps, burn, seed, grid, {}, env.threads);
    po::EmpiricalMeasure total(grid);
    double worst = 1.0;
    for (const auto& c : chains) {
      total.merge(c.histogram);
      worst = std::min(worst, c.histogram.occupancy_above(0.55));
    }
    v.add("every chain >= 99% in {x > 0.55}", worst >= 0.99);
    po::io::write_orbits_csv(env.out(orbits), chains);
    po::io::write_histogram_csv(env.out(hist), total);

    json report{{"config",
                 {{"command", "example2"},
                  {"a", a},
                  {"map", po::io::map_to_json(m)},
                  {"kernel", po::io::kernel_to_json(k)},
                  {"bins", bins},
                  {"meta_bins", meta_bins},
                  {"seed", seed},
                  {"starts", starts},
                  {"steps", steps},
                  {"burn", burn},
                  {"xbins", xbins},
                  {"ybins", ybins},
                  {"fiber", "refill"}}},
                {"theorem1", po::io::theorem1_to_json(rep, p)},
                {"stationary_mass_right", right_mass},
                {"metastability", meta},
                {"skew", {{"min_occupancy_right", worst}, {"orbits", orbits}, {"histogram", hist}}},
                {"verdicts", v.items},
                {"passed", v.all}};
    po::io::write_json(env.out(out), report);
    return v.all ? 0 : 1;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer operators, pseudo-orbits and stationary measures of noisy expanding maps"};
  app.require_subcommand(1);
  Env env;
  app.add_option("--threads", env.threads, "worker threads (0 = all cores)");
  app.add_option("--out-dir", env.out_dir, "directory for output files (PSEUDORBIT_OUT_DIR overrides)");

  UlamCmd ulam;
  SpectrumCmd spectrum;
  ComponentsCmd components;
  LeastCmd least;
  VerifyCmd verify;
  SimulateCmd simulate;
  Example1Cmd example1;
  Example2Cmd example2;
  ulam.add(app);
  spectrum.add(app);
  components.add(app);
  least.add(app);
  verify.add(app);
  simulate.add(app);
  example1.add(app);
  example2.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  po::set_default_threads(env.threads);
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "ulam") return ulam.run(env);
    if (name == "spectrum") return spectrum.run(env);
    if (name == "components") return components.run(env);
    if (name == "least-elements") return least.run(env);
    if (name == "verify") return verify.run(env);
    if (name == "simulate") return simulate.run(env);
    if (name == "example1") return example1.run(env);
    if (name == "example2") return example2.run(env);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const po::EpsTooLargeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
