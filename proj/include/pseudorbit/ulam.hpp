#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "pseudorbit/error.hpp"
#include "pseudorbit/map_model.hpp"
#include "pseudorbit/noise.hpp"
#include "pseudorbit/parallel.hpp"
#include "pseudorbit/partition.hpp"
#include "pseudorbit/rng.hpp"
#include "pseudorbit/transfer_matrix.hpp"

namespace pseudorbit {

/// A branch expressed in cell units of a partition: domain [lo, hi] and
/// u -> slope * u + intercept, with aligned breakpoints snapped to integers.
struct UnitBranch {
  double lo, hi, slope, intercept;

  double operator()(double u) const { return slope * u + intercept; }
};

inline void require_same_domain(const PiecewiseMap& map, const Partition& partition) {
  const double tol = 1e-12 * map.domain().length();
  if (std::abs(map.domain().lo - partition.domain().lo) > tol || std::abs(map.domain().hi - partition.domain().hi) > tol)
    throw StructuralError("map and partition domains differ");
}

inline std::vector<UnitBranch> unit_branches(const PiecewiseMap& map, const Partition& partition) {
  require_same_domain(map, partition);
  const double lo = partition.domain().lo;
  const double h = partition.width();
  std::vector<UnitBranch> out;
  for (const auto& b : map.branches()) {
    out.push_back({snap_to_integer(partition.to_units(b.domain.lo)), snap_to_integer(partition.to_units(b.domain.hi)),
                   b.slope, (b.slope * lo + b.intercept - lo) / h});
  }
  out.front().lo = 0.0;
  out.back().hi = static_cast<double>(partition.size());
  return out;
}

/// Calls fn(u_lo, u_hi, image_lo, image_hi) for each nonempty piece of cell i
/// lying in one branch.  Image endpoints are in cell units, sorted and snapped.
template <class Fn>
void for_each_cell_piece(const std::vector<UnitBranch>& branches, std::size_t i, Fn&& fn) {
  const double c0 = static_cast<double>(i);
  const double c1 = c0 + 1.0;
  for (const auto& b : branches) {
    if (b.hi <= c0) continue;
    if (b.lo >= c1) break;
    const double lo = std::max(c0, b.lo);
    const double hi = std::min(c1, b.hi);
    if (!(hi > lo)) continue;
    double a = snap_to_integer(b(lo));
    double z = snap_to_integer(b(hi));
    if (a > z) std::swap(a, z);
    fn(lo, hi, a, z);
  }
}

/// Exact Ulam matrix: P[i][j] = m(I_i ∩ T^{-1} I_j) / m(I_i) for affine branches.
inline TransferMatrix build_ulam(const PiecewiseMap& map, const Partition& partition, unsigned threads = 0) {
  const auto branches = unit_branches(map, partition);
  const std::size_t n = partition.size();
  const double nd = static_cast<double>(n);
  const bool wrap = map.wrap();
  std::vector<Triplets> rows(n);

  parallel_for(
      n,
      [&](std::size_t i) {
        auto& row = rows[i];
        for_each_cell_piece(branches, i, [&](double lo, double hi, double a, double z) {
          const double mass = hi - lo;
          if (wrap) {
            const double shift = nd * std::floor(a / nd);
            a -= shift;
            z -= shift;
          } else if (a < -1e-9 || z > nd + 1e-9) {
            std::ostringstream os;
            os << "image of cell " << i << " escapes the domain";
            throw StructuralError(os.str());
          }
          const double len = z - a;
          const auto k0 = static_cast<long long>(std::floor(a));
          const auto k1 = static_cast<long long>(std::ceil(z));
          for (long long k = k0; k < k1; ++k) {
            const double overlap = std::min(z, static_cast<double>(k + 1)) - std::max(a, static_cast<double>(k));
            if (overlap <= 0.0) continue;
            long long col = wrap ? ((k % static_cast<long long>(n)) + static_cast<long long>(n)) % static_cast<long long>(n)
                                 : std::clamp<long long>(k, 0, static_cast<long long>(n) - 1);
            row.emplace_back(static_cast<int>(i), static_cast<int>(col), mass * overlap / len);
          }
        });
      },
      threads);

  Triplets all;
  for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  return {Grid(partition), MatrixKind::unperturbed, 0.0, std::nullopt, from_triplets(n, n, all)};
}

namespace detail {

/// ∫_{-1}^{1} (1 - |t|) k(o + t) dt for a piecewise-polynomial kernel in cell
/// units.  Each segment integrand is at most quadratic, so Simpson is exact.
inline double cell_overlap_integral(const std::vector<NoiseKernel::Piece>& pieces, double o) {
  double total = 0.0;
  for (const auto& p : pieces) {
    const double t_lo = std::max(-1.0, p.lo - o);
    const double t_hi = std::min(1.0, p.hi - o);
    if (!(t_hi > t_lo)) continue;
    auto f = [&](double t) { return (1.0 - std::abs(t)) * (p.c0 + p.c1 * (o + t)); };
    auto simpson = [&](double a, double b) {
      if (!(b > a)) return 0.0;
      return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
    };
    if (t_lo < 0.0 && t_hi > 0.0)
      total += simpson(t_lo, 0.0) + simpson(0.0, t_hi);
    else
      total += simpson(t_lo, t_hi);
  }
  return total;
}

}  // namespace detail

/// Noise-smoothing matrix K[j][k] = (1/m(I_j)) ∫_{I_j} ∫_{I_k} h(v - u) dv du.
/// Under torus-wrap the displacement is taken on the circle.  In strict mode
/// mass that would leave the domain is dropped and the row renormalised; this
/// only touches cells no admissible image reaches (see build_perturbed).
inline SparseMatrix smoothing_matrix(const Partition& partition, const NoiseKernel& kernel) {
  const std::size_t n = partition.size();
  const auto ln = static_cast<long long>(n);
  if (kernel.degenerate()) {
    SparseMatrix id(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    id.setIdentity();
    return id;
  }
  const double eps_units = snap_to_integer(kernel.eps() / partition.width());
  const NoiseKernel unit_kernel(kernel.shape(), eps_units, kernel.boundary(), kernel.table());
  const auto pieces = unit_kernel.pieces();
  const auto band = static_cast<long long>(std::ceil(eps_units)) + 1;
  std::vector<double> weights;
  for (long long o = -band; o <= band; ++o) weights.push_back(detail::cell_overlap_integral(pieces, static_cast<double>(o)));

  const bool wrap = kernel.boundary() == BoundaryMode::torus_wrap;
  Triplets t;
  for (long long j = 0; j < ln; ++j) {
    double kept = 0.0;
    const std::size_t first = t.size();
    for (long long o = -band; o <= band; ++o) {
      const double w = weights[static_cast<std::size_t>(o + band)];
      if (w <= 0.0) continue;
      long long k = j + o;
      if (wrap) {
        k = ((k % ln) + ln) % ln;
      } else if (k < 0 || k >= ln) {
        continue;
      }
      t.emplace_back(static_cast<int>(j), static_cast<int>(k), w);
      kept += w;
    }
    if (!wrap && kept > 0.0)
      for (std::size_t q = first; q < t.size(); ++q) t[q] = {t[q].row(), t[q].col(), t[q].value() / kept};
  }
  return from_triplets(n, n, t);
}

/// P_eps = P K: map first, then add noise.
inline TransferMatrix build_perturbed(const PiecewiseMap& map, const Partition& partition, const NoiseKernel& kernel,
                                      unsigned threads = 0) {
  if (kernel.boundary() == BoundaryMode::strict && !kernel.degenerate()) {
    const Interval img = map.wrap() ? map.domain() : map.image_hull();
    if (img.lo - kernel.eps() < map.domain().lo || img.hi + kernel.eps() > map.domain().hi) {
      std::ostringstream os;
      os << "strict noise of size " << kernel.eps() << " pushes the image [" << img.lo << ", " << img.hi
         << "] out of the domain";
      throw BoundaryError(os.str());
    }
  }
  TransferMatrix p = build_ulam(map, partition, threads);
  SparseMatrix k = smoothing_matrix(partition, kernel);
  SparseMatrix pk = p.matrix * k;
  pk.prune(0.0, 0.0);
  pk.makeCompressed();
  return {Grid(partition), MatrixKind::perturbed, kernel.eps(), std::nullopt, std::move(pk)};
}

/// Point m of the R2 low-discrepancy sequence in the unit square.
inline std::pair<double, double> r2_point(std::size_t m) {
  constexpr double g = 1.32471795724474602596;  // plastic number
  constexpr double a1 = 1.0 / g;
  constexpr double a2 = 1.0 / (g * g);
  const double k = static_cast<double>(m + 1);
  double u = 0.5 + a1 * k;
  double v = 0.5 + a2 * k;
  return {u - std::floor(u), v - std::floor(v)};
}

/// Monte Carlo Ulam matrix of the skew family on [0,1] x S.  Sample points
/// inside each cell follow the R2 sequence (seed independent); the seed only
/// drives the omega draws, one per point, from a per-cell stream.
inline TransferMatrix build_ulam_2d(const SkewFamily& family, const Grid& grid, const NoiseKernel& kernel,
                                    std::size_t samples_per_cell, std::uint64_t seed, unsigned threads = 0) {
  if (!grid.is_2d()) throw StructuralError("build_ulam_2d needs a two-axis grid");
  if (grid.x.domain() != Interval{0.0, 1.0} || grid.y->domain() != Interval{0.0, 1.0})
    throw StructuralError("skew grid must cover [0,1] x [0,1)");
  if (samples_per_cell < 64) throw ConfigError("samples_per_cell must be at least 64");
  if (!kernel.degenerate() && kernel.eps() >= family.margin()) {
    std::ostringstream os;
    os << "eps = " << kernel.eps() << " must stay below the margin " << family.margin();
    throw MarginError(os.str());
  }
  const std::size_t cells = grid.size();
  const double hx = grid.x.width();
  const double hy = grid.y->width();
  const double inv = 1.0 / static_cast<double>(samples_per_cell);
  std::vector<Triplets> rows(cells);

  parallel_for(
      cells,
      [&](std::size_t c) {
        const std::size_t ix = grid.x_index(c);
        const std::size_t iy = grid.y_index(c);
        Rng rng(derive_seed(seed, c));
        std::vector<std::size_t> dest;
        dest.reserve(samples_per_cell);
        for (std::size_t m = 0; m < samples_per_cell; ++m) {
          const auto [su, sv] = r2_point(m);
          const double x = grid.x.edge(ix) + su * hx;
          const double y = grid.y->edge(iy) + sv * hy;
          const double omega = kernel.sample(rng);
          const auto [xn, yn] = family.eval(omega, x, y);
          dest.push_back(grid.index(grid.x.index_of(xn), grid.y->index_of(yn)));
        }
        std::sort(dest.begin(), dest.end());
        auto& row = rows[c];
        for (std::size_t q = 0; q < dest.size();) {
          std::size_t r = q;
          while (r < dest.size() && dest[r] == dest[q]) ++r;
          row.emplace_back(static_cast<int>(c), static_cast<int>(dest[q]), static_cast<double>(r - q) * inv);
          q = r;
        }
      },
      threads);

  Triplets all;
  for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  return {grid, kernel.degenerate() ? MatrixKind::unperturbed : MatrixKind::perturbed, kernel.eps(), seed,
          from_triplets(cells, cells, all)};
}

/// Row-wise proxy for |||P - P_eps|||: the largest L1 distance between
/// corresponding rows, i.e. the sup over normalised cell indicators.  Not a
/// certified bound on the strong-to-weak operator norm.
inline double operator_distance(const TransferMatrix& p, const TransferMatrix& q) {
  if (!(p.grid == q.grid) || p.size() != q.size()) throw StructuralError("operator_distance: partition mismatch");
  double worst = 0.0;
  for (Eigen::Index r = 0; r < p.matrix.outerSize(); ++r) {
    SparseMatrix::InnerIterator a(p.matrix, r);
    SparseMatrix::InnerIterator b(q.matrix, r);
    double d = 0.0;
    while (a || b) {
      if (b && (!a || b.col() < a.col())) {
        d += std::abs(b.value());
        ++b;
      } else if (a && (!b || a.col() < b.col())) {
        d += std::abs(a.value());
        ++a;
      } else {
        d += std::abs(a.value() - b.value());
        ++a;
        ++b;
      }
    }
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace pseudorbit
