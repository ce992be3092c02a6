#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pseudorbit/error.hpp"
#include "pseudorbit/map_model.hpp"
#include "pseudorbit/rng.hpp"

namespace pseudorbit {

enum class KernelShape { uniform, triangular, table };
enum class BoundaryMode { torus_wrap, strict };

/// Additive noise density supported on [-eps, eps], strictly positive on the
/// open support.  eps == 0 is allowed as the point-mass limit (no noise) for
/// the matrix and chain builders; density() is undefined there.
class NoiseKernel {
 public:
  /// Polynomial piece of the density: c0 + c1 * u on [lo, hi].
  struct Piece {
    double lo, hi, c0, c1;
  };

  NoiseKernel(KernelShape shape, double eps, BoundaryMode boundary, std::vector<double> table = {})
      : shape_(shape), eps_(eps), boundary_(boundary), table_(std::move(table)) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("noise eps must be finite and >= 0");
    if (shape_ == KernelShape::table) {
      if (table_.empty()) throw ConfigError("table kernel needs at least one value");
      for (double v : table_)
        if (!(v > 0.0)) throw ConfigError("table kernel values must be strictly positive");
      const double bin = eps_ > 0.0 ? 2.0 * eps_ / static_cast<double>(table_.size()) : 1.0;
      const double mass = std::accumulate(table_.begin(), table_.end(), 0.0) * bin;
      for (double& v : table_) v /= mass;
    }
  }

  static NoiseKernel uniform(double eps, BoundaryMode b = BoundaryMode::strict) {
    return {KernelShape::uniform, eps, b};
  }
  static NoiseKernel triangular(double eps, BoundaryMode b = BoundaryMode::strict) {
    return {KernelShape::triangular, eps, b};
  }
  static NoiseKernel tabulated(double eps, std::vector<double> values, BoundaryMode b = BoundaryMode::strict) {
    return {KernelShape::table, eps, b, std::move(values)};
  }

  KernelShape shape() const { return shape_; }
  double eps() const { return eps_; }
  BoundaryMode boundary() const { return boundary_; }
  bool degenerate() const { return eps_ == 0.0; }
  const std::vector<double>& table() const { return table_; }

  std::vector<Piece> pieces() const {
    const double e = eps_;
    switch (shape_) {
      case KernelShape::uniform:
        return {{-e, e, 1.0 / (2.0 * e), 0.0}};
      case KernelShape::triangular:
        return {{-e, 0.0, 1.0 / e, 1.0 / (e * e)}, {0.0, e, 1.0 / e, -1.0 / (e * e)}};
      case KernelShape::table: {
        std::vector<Piece> out;
        const double bin = 2.0 * e / static_cast<double>(table_.size());
        for (std::size_t i = 0; i < table_.size(); ++i)
          out.push_back({-e + bin * static_cast<double>(i), -e + bin * static_cast<double>(i + 1), table_[i], 0.0});
        out.back().hi = e;
        return out;
      }
    }
    return {};
  }

  double density(double u) const {
    if (degenerate()) throw ConfigError("density of the zero-noise kernel is a point mass");
    if (!(std::abs(u) < eps_)) return 0.0;
    switch (shape_) {
      case KernelShape::uniform:
        return 1.0 / (2.0 * eps_);
      case KernelShape::triangular:
        return (eps_ - std::abs(u)) / (eps_ * eps_);
      case KernelShape::table: {
        const double bin = 2.0 * eps_ / static_cast<double>(table_.size());
        auto i = static_cast<std::size_t>((u + eps_) / bin);
        return table_[std::min(i, table_.size() - 1)];
      }
    }
    return 0.0;
  }

  double cdf(double u) const {
    if (degenerate()) return u < 0.0 ? 0.0 : 1.0;
    if (u <= -eps_) return 0.0;
    if (u >= eps_) return 1.0;
    double acc = 0.0;
    for (const auto& p : pieces()) {
      if (u <= p.lo) break;
      const double b = std::min(u, p.hi);
      acc += p.c0 * (b - p.lo) + 0.5 * p.c1 * (b * b - p.lo * p.lo);
    }
    return acc;
  }

  /// One draw from the density; |omega| < eps almost surely.
  double sample(Rng& rng) const {
    if (degenerate()) return 0.0;
    switch (shape_) {
      case KernelShape::uniform:
        return eps_ * (2.0 * rng.uniform_open() - 1.0);
      case KernelShape::triangular:
        return eps_ * (rng.uniform_open() + rng.uniform_open() - 1.0);
      case KernelShape::table: {
        const double bin = 2.0 * eps_ / static_cast<double>(table_.size());
        double target = rng.uniform_open();
        std::size_t i = 0;
        for (; i + 1 < table_.size(); ++i) {
          const double m = table_[i] * bin;
          if (target < m) break;
          target -= m;
        }
        return -eps_ + bin * (static_cast<double>(i) + rng.uniform_open());
      }
    }
    return 0.0;
  }

 private:
  KernelShape shape_;
  double eps_;
  BoundaryMode boundary_;
  std::vector<double> table_;
};

inline std::string to_string(KernelShape s) {
  switch (s) {
    case KernelShape::uniform: return "uniform";
    case KernelShape::triangular: return "triangular";
    case KernelShape::table: return "table";
  }
  return "?";
}

inline std::string to_string(BoundaryMode b) { return b == BoundaryMode::torus_wrap ? "torus-wrap" : "strict"; }

/// p_eps(x, y) = h_eps(T x - y); the difference is taken on the circle when
/// the kernel wraps.
inline double transition_density(const NoiseKernel& kernel, const PiecewiseMap& map, double x, double y) {
  const double tx = map.eval(x);
  if (!map.domain().contains_closed(y)) throw DomainError("y outside map domain");
  double diff = tx - y;
  if (kernel.boundary() == BoundaryMode::torus_wrap) {
    const double len = map.domain().length();
    diff -= len * std::round(diff / len);
  } else if (tx - kernel.eps() < map.domain().lo || tx + kernel.eps() > map.domain().hi) {
    std::ostringstream os;
    os << "noise ball around T(x) = " << tx << " leaves the domain";
    throw BoundaryError(os.str());
  }
  return kernel.density(diff);
}

}  // namespace pseudorbit
