#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include "pseudorbit/error.hpp"
#include "pseudorbit/partition.hpp"

namespace pseudorbit {

/// x -> slope * x + intercept on a half-open domain.
struct AffineBranch {
  Interval domain;
  double slope = 2.0;
  double intercept = 0.0;
  /// Allows |slope| == 1 (non-expanding boundary branches).
  bool transient_ok = false;

  double operator()(double x) const { return slope * x + intercept; }

  /// Closed hull of the image of the branch domain.
  Interval image() const {
    const double a = (*this)(domain.lo);
    const double b = (*this)(domain.hi);
    return {std::min(a, b), std::max(a, b)};
  }

  bool operator==(const AffineBranch&) const = default;
};

struct Preimage {
  double x;
  std::size_t branch;
};

/// Piecewise-affine map of an interval; either a compact interval (images must
/// stay inside) or a circle (wrap = true, images reduced modulo the length).
class PiecewiseMap {
 public:
  PiecewiseMap(Interval domain, std::vector<AffineBranch> branches, bool wrap = false)
      : domain_(domain), branches_(std::move(branches)), wrap_(wrap) {
    validate();
  }

  const Interval& domain() const { return domain_; }
  const std::vector<AffineBranch>& branches() const { return branches_; }
  bool wrap() const { return wrap_; }

  /// Index of the branch whose half-open domain contains x (last one closed).
  std::size_t branch_index(double x) const {
    if (!domain_.contains_closed(x)) {
      std::ostringstream os;
      os << "x = " << x << " outside map domain [" << domain_.lo << ", " << domain_.hi << "]";
      throw DomainError(os.str());
    }
    // upper_bound over branch starts: first branch starting after x, minus one.
    auto it = std::upper_bound(branches_.begin(), branches_.end(), x,
                               [](double v, const AffineBranch& b) { return v < b.domain.lo; });
    return static_cast<std::size_t>(std::distance(branches_.begin(), it)) - 1;
  }

  double eval(double x) const {
    const double y = branches_[branch_index(x)](x);
    return wrap_ ? reduce(y) : y;
  }

  double derivative_abs(double x) const {
    const std::size_t b = branch_index(x);
    const auto& d = branches_[b].domain;
    if (x == d.lo || x == d.hi) {
      std::ostringstream os;
      os << "derivative requested at branch endpoint x = " << x;
      throw DiscontinuityError(os.str());
    }
    return std::abs(branches_[b].slope);
  }

  /// All (x, branch) with T(x) = y.  Membership in a branch domain is decided
  /// with a relative tolerance of 1e-12 so that images of breakpoints resolve.
  std::vector<Preimage> preimages(double y) const {
    if (!domain_.contains_closed(y)) {
      std::ostringstream os;
      os << "y = " << y << " outside map domain";
      throw DomainError(os.str());
    }
    const double tol = 1e-12 * domain_.length();
    std::vector<Preimage> out;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      const auto& br = branches_[b];
      const bool last = b + 1 == branches_.size();
      auto accept = [&](double target) {
        double x = (target - br.intercept) / br.slope;
        const bool inside = x >= br.domain.lo - tol && (last ? x <= br.domain.hi + tol : x < br.domain.hi - tol);
        if (!inside) return;
        x = std::clamp(x, br.domain.lo, br.domain.hi);
        out.push_back({x, b});
      };
      if (!wrap_) {
        accept(y);
        continue;
      }
      const Interval img = br.image();
      const double len = domain_.length();
      const double kmin = std::floor((img.lo - y) / len) - 1;
      const double kmax = std::ceil((img.hi - y) / len) + 1;
      for (double k = kmin; k <= kmax; k += 1.0) accept(y + k * len);
    }
    return out;
  }

  /// Hull of all branch images (before any wrap reduction).
  Interval image_hull() const {
    double lo = branches_.front().image().lo;
    double hi = branches_.front().image().hi;
    for (const auto& b : branches_) {
      lo = std::min(lo, b.image().lo);
      hi = std::max(hi, b.image().hi);
    }
    return {lo, hi};
  }

  /// Finite set of branch endpoints, the discontinuity candidates.
  std::vector<double> breakpoints() const {
    std::vector<double> pts;
    pts.reserve(branches_.size() + 1);
    for (const auto& b : branches_) pts.push_back(b.domain.lo);
    pts.push_back(domain_.hi);
    return pts;
  }

  double reduce(double y) const {
    const double len = domain_.length();
    double r = y - len * std::floor((y - domain_.lo) / len);
    if (r >= domain_.hi) r = domain_.lo;
    return r;
  }

  bool operator==(const PiecewiseMap&) const = default;

 private:
  void validate() const {
    if (branches_.empty()) throw StructuralError("map needs at least one branch");
    const double tol = 1e-12 * domain_.length();
    if (std::abs(branches_.front().domain.lo - domain_.lo) > tol ||
        std::abs(branches_.back().domain.hi - domain_.hi) > tol)
      throw StructuralError("branch domains must start and end at the map domain endpoints");
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      const auto& b = branches_[i];
      if (i + 1 < branches_.size() && std::abs(b.domain.hi - branches_[i + 1].domain.lo) > tol) {
        std::ostringstream os;
        os << "branch domains must tile the domain without gaps or overlaps (branch " << i << ")";
        throw StructuralError(os.str());
      }
      if (b.slope == 0.0) throw StructuralError("branch slope must be nonzero");
      const double s = std::abs(b.slope);
      if (b.transient_ok ? s < 1.0 : s <= 1.0) {
        std::ostringstream os;
        os << "branch " << i << " is not expanding (|slope| = " << s << ")";
        throw StructuralError(os.str());
      }
      if (!wrap_) {
        const Interval img = b.image();
        if (img.lo < domain_.lo - tol || img.hi > domain_.hi + tol) {
          std::ostringstream os;
          os << "image of branch " << i << " [" << img.lo << ", " << img.hi << "] escapes the domain";
          throw StructuralError(os.str());
        }
      }
    }
  }

  Interval domain_;
  std::vector<AffineBranch> branches_;
  bool wrap_;
};

/// True iff the image of every cell is a union of cells (endpoints within 1e-12).
/// Cells that straddle a branch endpoint are handled piecewise.
inline bool markov_check(const PiecewiseMap& map, const Partition& partition) {
  const double tol = 1e-12;
  const double dtol = 1e-12 * map.domain().length();
  if (std::abs(map.domain().lo - partition.domain().lo) > dtol ||
      std::abs(map.domain().hi - partition.domain().hi) > dtol)
    throw StructuralError("partition and map domains differ");
  const double n = static_cast<double>(partition.size());
  const double utol = tol / partition.width();
  auto integral = [&](double u) { return std::abs(u - std::round(u)) <= utol; };

  for (std::size_t i = 0; i < partition.size(); ++i) {
    const Interval cell = partition.cell(i);
    std::vector<std::pair<double, double>> pieces;
    for (const auto& br : map.branches()) {
      const double lo = std::max(cell.lo, br.domain.lo);
      const double hi = std::min(cell.hi, br.domain.hi);
      if (hi - lo <= dtol) continue;
      double a = partition.to_units(br(lo));
      double b = partition.to_units(br(hi));
      if (a > b) std::swap(a, b);
      if (map.wrap()) {
        const double shift = n * std::floor(a / n);
        a -= shift;
        b -= shift;
        if (b > n + utol) {
          pieces.emplace_back(a, n);
          pieces.emplace_back(0.0, b - n);
          continue;
        }
      }
      pieces.emplace_back(a, b);
    }
    std::sort(pieces.begin(), pieces.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& p : pieces) {
      if (!merged.empty() && p.first <= merged.back().second + utol)
        merged.back().second = std::max(merged.back().second, p.second);
      else
        merged.push_back(p);
    }
    for (const auto& [a, b] : merged)
      if (!integral(a) || !integral(b)) return false;
  }
  return true;
}

/// Skew product (x, y) -> (T(x) + omega * y, 2y mod 1) on [0,1] x S.
class SkewFamily {
 public:
  explicit SkewFamily(PiecewiseMap base) : base_(std::move(base)) {
    if (base_.wrap() || base_.domain().lo != 0.0 || base_.domain().hi != 1.0)
      throw StructuralError("skew family base must be a non-wrapping map of [0,1]");
    const Interval img = base_.image_hull();
    margin_ = std::min(img.lo - base_.domain().lo, base_.domain().hi - img.hi);
  }

  const PiecewiseMap& base() const { return base_; }
  /// Noise amplitudes strictly below the margin keep the image inside [0,1].
  double margin() const { return margin_; }

  std::pair<double, double> eval(double omega, double x, double y) const {
    if (std::abs(omega) >= margin_ && omega != 0.0) {
      std::ostringstream os;
      os << "|omega| = " << std::abs(omega) << " reaches the margin " << margin_;
      throw MarginError(os.str());
    }
    const double xn = base_.eval(x) + omega * y;
    if (xn < 0.0 || xn > 1.0) {
      std::ostringstream os;
      os << "skew image x' = " << xn << " left [0,1]";
      throw MarginError(os.str());
    }
    double yn = 2.0 * y;
    yn -= std::floor(yn);
    return {xn, yn};
  }

 private:
  PiecewiseMap base_;
  double margin_;
};

inline std::pair<double, double> eval_skew(const SkewFamily& family, double omega, double x, double y) {
  return family.eval(omega, x, y);
}

namespace maps {

/// 2x mod 1 on the circle.
inline PiecewiseMap doubling() {
  return PiecewiseMap({0.0, 1.0}, {{{0.0, 0.5}, 2.0, 0.0}, {{0.5, 1.0}, 2.0, -1.0}}, true);
}

/// Asymmetric full tent with its peak at `peak`.
inline PiecewiseMap tent(double peak) {
  if (!(peak > 0.0 && peak < 1.0)) throw StructuralError("tent peak must lie in (0,1)");
  return PiecewiseMap({0.0, 1.0},
                      {{{0.0, peak}, 1.0 / peak, 0.0}, {{peak, 1.0}, -1.0 / (1.0 - peak), 1.0 / (1.0 - peak)}});
}

/// Three-component Markov map of [0,10]: tents on [1,4], [5.5,7.5] and
/// [7.5,9.5] fed by transient branches on [0,1), [4,5), [5,5.5) and [9.5,10].
/// Markov with respect to the half-unit partition.
inline PiecewiseMap example1() {
  return PiecewiseMap({0.0, 10.0},
                      {
                          {{0.0, 1.0}, 3.0, 1.0},     // -> [1,4)
                          {{1.0, 2.0}, 3.0, -2.0},    // -> [1,4)
                          {{2.0, 3.0}, -3.0, 10.0},   // -> (1,4]
                          {{3.0, 4.0}, 3.0, -8.0},    // -> [1,4)
                          {{4.0, 5.0}, -3.0, 16.0},   // -> (1,4]
                          {{5.0, 5.5}, 4.0, -14.0},   // -> [6,8)
                          {{5.5, 6.5}, 2.0, -5.5},    // -> [5.5,7.5)
                          {{6.5, 7.5}, -2.0, 20.5},   // -> (5.5,7.5]
                          {{7.5, 8.5}, 2.0, -7.5},    // -> [7.5,9.5)
                          {{8.5, 9.5}, -2.0, 26.5},   // -> (7.5,9.5]
                          {{9.5, 10.0}, -4.0, 46.5},  // -> [6.5,8.5]
                      });
}

/// Base map of the skew example, parametrised by a in (0, 1/4).  For a = 0.1
/// the intervals [a, 1/2 - a] and [1/2 + a, 1 - a] are forward invariant.
inline PiecewiseMap example2_base(double a) {
  if (!(a > 0.0 && a < 0.25)) throw StructuralError("example2 parameter a must lie in (0, 1/4)");
  const double s_edge = 1.0 / (2.0 * a) - 3.0;
  return PiecewiseMap({0.0, 1.0},
                      {
                          {{0.0, a}, s_edge, a, true},
                          {{a, 0.25}, -2.0, a + 0.5},
                          {{0.25, 0.5 + a}, 2.0, a - 0.5},
                          {{0.5 + a, 0.75}, -2.0, 2.0 + a},
                          {{0.75, 1.0 - a}, 2.0, a - 1.0},
                          {{1.0 - a, 1.0}, -s_edge, -2.5 + 1.0 / (2.0 * a) + 2.0 * a, true},
                      });
}

}  // namespace maps
}  // namespace pseudorbit
