#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>

#include "pseudorbit/error.hpp"

namespace pseudorbit {

/// Half-open interval [lo, hi); the last cell of a partition is treated as closed.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  Interval() = default;
  Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(lo < hi)) {
      std::ostringstream os;
      os << "interval requires lo < hi, got [" << lo << ", " << hi << "]";
      throw StructuralError(os.str());
    }
  }

  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x < hi; }
  bool contains_closed(double x) const { return x >= lo && x <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Rounds u to the nearest integer when it is within tol of it.  Cell-unit
/// coordinates of aligned breakpoints otherwise pick up one-ulp offsets that
/// create spurious sliver entries.
inline double snap_to_integer(double u, double tol = 1e-9) {
  const double r = std::round(u);
  return std::abs(u - r) <= tol ? r : u;
}

/// Uniform partition of an interval into n cells.
class Partition {
 public:
  Partition(Interval domain, std::size_t n) : domain_(domain), n_(n) {
    if (n < 2) throw StructuralError("partition needs at least 2 cells");
  }

  const Interval& domain() const { return domain_; }
  std::size_t size() const { return n_; }
  double width() const { return domain_.length() / static_cast<double>(n_); }

  double edge(std::size_t i) const {
    if (i == n_) return domain_.hi;
    return domain_.lo + domain_.length() * static_cast<double>(i) / static_cast<double>(n_);
  }
  Interval cell(std::size_t i) const { return {edge(i), edge(i + 1)}; }
  double center(std::size_t i) const {
    return domain_.lo + domain_.length() * (static_cast<double>(i) + 0.5) / static_cast<double>(n_);
  }

  /// Position in cell units: 0 at lo, n at hi.
  double to_units(double x) const {
    return (x - domain_.lo) * static_cast<double>(n_) / domain_.length();
  }
  double from_units(double u) const {
    return domain_.lo + u * domain_.length() / static_cast<double>(n_);
  }

  std::size_t index_of(double x) const {
    if (!domain_.contains_closed(x)) {
      std::ostringstream os;
      os << "x = " << x << " outside partition domain [" << domain_.lo << ", " << domain_.hi << "]";
      throw DomainError(os.str());
    }
    const auto i = static_cast<std::size_t>(std::floor(to_units(x)));
    return i >= n_ ? n_ - 1 : i;
  }

  /// Whether x sits on a cell boundary within an absolute tolerance.
  bool is_edge(double x, double tol = 1e-12) const {
    const double u = to_units(x);
    return std::abs(u - std::round(u)) * width() <= tol;
  }

  bool operator==(const Partition& o) const = default;

 private:
  Interval domain_;
  std::size_t n_;
};

/// One- or two-axis product grid.  Cell (ix, iy) has flat index ix * ny + iy.
struct Grid {
  Partition x;
  std::optional<Partition> y;

  explicit Grid(Partition px) : x(px) {}
  Grid(Partition px, Partition py) : x(px), y(py) {}

  bool is_2d() const { return y.has_value(); }
  std::size_t size() const { return x.size() * (y ? y->size() : 1); }
  std::size_t index(std::size_t ix, std::size_t iy) const { return ix * (y ? y->size() : 1) + iy; }
  std::size_t x_index(std::size_t flat) const { return flat / (y ? y->size() : 1); }
  std::size_t y_index(std::size_t flat) const { return y ? flat % y->size() : 0; }

  bool operator==(const Grid& o) const = default;
};

}  // namespace pseudorbit
