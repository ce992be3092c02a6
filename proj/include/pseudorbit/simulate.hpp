#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "pseudorbit/error.hpp"
#include "pseudorbit/map_model.hpp"
#include "pseudorbit/noise.hpp"
#include "pseudorbit/parallel.hpp"
#include "pseudorbit/partition.hpp"
#include "pseudorbit/rng.hpp"

namespace pseudorbit {

/// Occupation histogram of a random orbit over a grid.
struct EmpiricalMeasure {
  Grid grid;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t seed = 0;

  explicit EmpiricalMeasure(Grid g) : grid(std::move(g)), counts(grid.size(), 0) {}

  void add(std::size_t cell) {
    ++counts[cell];
    ++total;
  }

  Eigen::VectorXd normalized() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = total ? static_cast<double>(counts[i]) / static_cast<double>(total) : 0.0;
    return v;
  }

  /// Fraction of samples in cells whose x-range lies entirely at or above x_min.
  double occupancy_above(double x_min) const {
    if (total == 0) return 0.0;
    std::uint64_t hit = 0;
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (grid.x.edge(grid.x_index(c)) >= x_min) hit += counts[c];
    return static_cast<double>(hit) / static_cast<double>(total);
  }

  double occupancy_in(const std::vector<std::size_t>& cells) const {
    if (total == 0) return 0.0;
    std::uint64_t hit = 0;
    for (std::size_t c : cells) hit += counts[c];
    return static_cast<double>(hit) / static_cast<double>(total);
  }

  /// Merges blocks of `factor` consecutive cells (1-D grids only).
  EmpiricalMeasure coarsened(std::size_t factor) const {
    if (grid.is_2d() || factor == 0 || grid.x.size() % factor != 0)
      throw StructuralError("coarsening needs a 1-D grid whose size is a multiple of the factor");
    EmpiricalMeasure out(Grid(Partition(grid.x.domain(), grid.x.size() / factor)));
    for (std::size_t i = 0; i < counts.size(); ++i) out.counts[i / factor] += counts[i];
    out.total = total;
    out.burn_in = burn_in;
    out.seed = seed;
    return out;
  }

  void merge(const EmpiricalMeasure& o) {
    if (!(grid == o.grid)) throw StructuralError("cannot merge histograms on different grids");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    total += o.total;
  }
};

/// Sums blocks of `factor` consecutive entries.
inline Eigen::VectorXd coarsen(const Eigen::VectorXd& density, std::size_t factor) {
  const auto n = static_cast<std::size_t>(density.size());
  if (factor == 0 || n % factor != 0) throw StructuralError("density size is not a multiple of the factor");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n / factor));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i / factor)] += density[static_cast<Eigen::Index>(i)];
  return out;
}

/// One noisy step x -> T(x) + omega with the kernel's boundary rule.
inline double noisy_step(const PiecewiseMap& map, const NoiseKernel& kernel, double x, Rng& rng, std::size_t step) {
  double y = map.eval(x) + kernel.sample(rng);
  const Interval& d = map.domain();
  if (kernel.boundary() == BoundaryMode::torus_wrap || (kernel.degenerate() && map.wrap())) return map.reduce(y);
  if (y < d.lo || y > d.hi) {
    std::ostringstream os;
    os << "orbit left the domain at step " << step << " (x = " << y << ")";
    throw BoundaryError(os.str(), step);
  }
  return y;
}

/// Annealed random orbit x_{k+1} = T(x_k) + omega_k; the first burn_in of the
/// n generated states are discarded and the rest tallied.
inline EmpiricalMeasure run_chain(const PiecewiseMap& map, const NoiseKernel& kernel, double x0, std::uint64_t n,
                                  std::uint64_t burn_in, std::uint64_t seed, const Partition& partition) {
  if (!map.domain().contains_closed(x0)) throw DomainError("x0 outside the map domain");
  if (n <= burn_in) throw ConfigError("run_chain needs n > burn_in");
  EmpiricalMeasure em{Grid(partition)};
  em.burn_in = burn_in;
  em.seed = seed;
  Rng rng(seed);
  double x = x0;
  for (std::uint64_t k = 1; k <= n; ++k) {
    x = noisy_step(map, kernel, x, rng, k);
    if (k > burn_in) em.add(partition.index_of(x));
  }
  return em;
}

/// How the fiber coordinate y -> 2y mod 1 is iterated.  `exact` shifts the
/// 64-bit binary expansion and feeds zeros, so dyadic starts stay dyadic and
/// every orbit reaches 0 within 64 steps.  `refill` feeds seeded random bits,
/// which reveals the expansion of a Lebesgue-typical point below the stored
/// precision and keeps the fiber chaotic for arbitrarily long runs.
enum class FiberMode { exact, refill };

struct OrbitPoint {
  std::uint64_t step;
  double x;
  double y;
};

struct SkewChainResult {
  EmpiricalMeasure histogram;
  /// Thinned post-burn-in states.
  std::vector<OrbitPoint> points;
};

struct SkewChainOptions {
  FiberMode fiber = FiberMode::refill;
  std::size_t thin = 10;
  std::size_t max_points = 100000;
};

namespace detail {
inline double fiber_value(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }
inline std::uint64_t fiber_bits(double y) {
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("fiber coordinate outside [0,1]");
  y -= std::floor(y);
  return static_cast<std::uint64_t>(std::ldexp(y, 53)) << 11;
}
}  // namespace detail

inline SkewChainResult run_skew_chain(const SkewFamily& family, const NoiseKernel& kernel, double x0, double y0,
                                      std::uint64_t n, std::uint64_t burn_in, std::uint64_t seed, const Grid& grid,
                                      SkewChainOptions opt = {}) {
  if (!grid.is_2d()) throw StructuralError("skew chains need a two-axis grid");
  if (n <= burn_in) throw ConfigError("run_skew_chain needs n > burn_in");
  if (!kernel.degenerate() && kernel.eps() >= family.margin()) {
    std::ostringstream os;
    os << "eps = " << kernel.eps() << " must stay below the margin " << family.margin();
    throw MarginError(os.str());
  }
  SkewChainResult out{EmpiricalMeasure(grid), {}};
  out.histogram.burn_in = burn_in;
  out.histogram.seed = seed;
  Rng rng(seed);
  std::uint64_t reservoir = 0;
  int reservoir_left = 0;
  double x = x0;
  std::uint64_t y = detail::fiber_bits(y0);
  const std::size_t thin = std::max<std::size_t>(opt.thin, 1);
  for (std::uint64_t k = 1; k <= n; ++k) {
    const double omega = kernel.sample(rng);
    x = family.eval(omega, x, detail::fiber_value(y)).first;
    std::uint64_t bit = 0;
    if (opt.fiber == FiberMode::refill) {
      if (reservoir_left == 0) {
        reservoir = rng.bits();
        reservoir_left = 64;
      }
      bit = reservoir & 1u;
      reservoir >>= 1;
      --reservoir_left;
    }
    // Only the top 53 bits are read; new bits enter at position 11.
    y = (y << 1) | (bit << 11);
    if (k > burn_in) {
      const double yv = detail::fiber_value(y);
      out.histogram.add(grid.index(grid.x.index_of(x), grid.y->index_of(yv)));
      if ((k - burn_in) % thin == 0 && out.points.size() < opt.max_points) out.points.push_back({k, x, yv});
    }
  }
  return out;
}

/// Independent skew chains from starts uniform on [0,1] x S.  Chain c draws
/// its start and its noise from stream derive_seed(seed, c).
inline std::vector<SkewChainResult> run_skew_ensemble(const SkewFamily& family, const NoiseKernel& kernel,
                                                      std::size_t starts, std::uint64_t n, std::uint64_t burn_in,
                                                      std::uint64_t seed, const Grid& grid, SkewChainOptions opt = {},
                                                      unsigned threads = 0) {
  std::vector<std::optional<SkewChainResult>> slots(starts);
  parallel_for(
      starts,
      [&](std::size_t c) {
        Rng init(derive_seed(seed, c));
        const double x0 = init.uniform_open();
        const double y0 = detail::fiber_value(init.bits());
        slots[c] = run_skew_chain(family, kernel, x0, y0, n, burn_in, init.bits(), grid, opt);
      },
      threads);
  std::vector<SkewChainResult> out;
  out.reserve(starts);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// L1 distance between the normalised histogram and a density vector.
inline double l1_distance(const EmpiricalMeasure& em, const Eigen::VectorXd& density) {
  if (static_cast<std::size_t>(density.size()) != em.counts.size())
    throw StructuralError("l1_distance: partition mismatch");
  return (em.normalized() - density).lpNorm<1>();
}

struct EscapeStats {
  std::size_t trials = 0;
  std::size_t censored = 0;
  /// Uncensored hitting times, sorted.
  std::vector<std::uint64_t> times;
  std::optional<double> mean;
  std::optional<double> median;
  /// histogram[b] counts hitting times in [2^b, 2^(b+1)).
  std::vector<std::uint64_t> histogram;
};

/// First entry time into `absorb` from a uniform start in `start`; trials that
/// do not hit within max_steps are censored and excluded from mean and median.
inline EscapeStats escape_time(const PiecewiseMap& map, const NoiseKernel& kernel, const Partition& partition,
                               const std::vector<std::size_t>& start, const std::vector<std::size_t>& absorb,
                               std::uint64_t max_steps, std::size_t trials, std::uint64_t seed, unsigned threads = 0) {
  if (start.empty()) throw ConfigError("escape_time needs start cells");
  std::vector<char> is_absorb(partition.size(), 0);
  for (std::size_t c : absorb) is_absorb.at(c) = 1;
  for (std::size_t c : start)
    if (is_absorb.at(c)) throw ConfigError("start and absorb cell sets must be disjoint");

  std::vector<std::uint64_t> hit(trials, 0);
  parallel_for(
      trials,
      [&](std::size_t t) {
        Rng rng(derive_seed(seed, t));
        const Interval cell = partition.cell(start[rng.below(start.size())]);
        double x = cell.lo + rng.uniform_open() * cell.length();
        for (std::uint64_t k = 1; k <= max_steps; ++k) {
          x = noisy_step(map, kernel, x, rng, k);
          if (is_absorb[partition.index_of(x)]) {
            hit[t] = k;
            return;
          }
        }
      },
      threads);

  EscapeStats s;
  s.trials = trials;
  for (std::uint64_t h : hit) {
    if (h == 0) {
      ++s.censored;
      continue;
    }
    s.times.push_back(h);
    const auto b = static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(h))));
    if (s.histogram.size() <= b) s.histogram.resize(b + 1, 0);
    ++s.histogram[b];
  }
  std::sort(s.times.begin(), s.times.end());
  if (!s.times.empty()) {
    double sum = 0.0;
    for (auto v : s.times) sum += static_cast<double>(v);
    s.mean = sum / static_cast<double>(s.times.size());
    const std::size_t m = s.times.size();
    s.median = m % 2 ? static_cast<double>(s.times[m / 2])
                     : 0.5 * (static_cast<double>(s.times[m / 2 - 1]) + static_cast<double>(s.times[m / 2]));
  }
  return s;
}

}  // namespace pseudorbit
