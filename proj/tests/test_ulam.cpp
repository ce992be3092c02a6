#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "pseudorbit/map_model.hpp"
#include "pseudorbit/noise.hpp"
#include "pseudorbit/ulam.hpp"

using namespace pseudorbit;

namespace {

Eigen::MatrixXd dense(const TransferMatrix& p) { return Eigen::MatrixXd(p.matrix); }

// P[i][j] by midpoint sampling of each source cell.
Eigen::MatrixXd sampled_ulam(const PiecewiseMap& m, const Partition& p, int per_cell) {
  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Interval c = p.cell(static_cast<std::size_t>(i));
    for (int s = 0; s < per_cell; ++s) {
      const double x = c.lo + (s + 0.5) / per_cell * c.length();
      out(i, static_cast<Eigen::Index>(p.index_of(m.eval(x)))) += 1.0 / per_cell;
    }
  }
  return out;
}

// Closed-form kernel distribution functions, independent of the kernel class.
double uniform_cdf(double u, double e) { return std::clamp((u + e) / (2 * e), 0.0, 1.0); }
double triangular_cdf(double u, double e) {
  if (u <= -e) return 0.0;
  if (u >= e) return 1.0;
  return u < 0 ? (u + e) * (u + e) / (2 * e * e) : 1.0 - (e - u) * (e - u) / (2 * e * e);
}

// K[j][k]: exact inner integral over I_k, midpoint rule over I_j.
double quadrature_k(const NoiseKernel& k, const Partition& p, std::size_t j, std::size_t c, int q) {
  const Interval a = p.cell(j), b = p.cell(c);
  auto F = [&](double u) {
    return k.shape() == KernelShape::uniform ? uniform_cdf(u, k.eps()) : triangular_cdf(u, k.eps());
  };
  double s = 0.0;
  for (int r = 0; r < q; ++r) {
    const double u = a.lo + (r + 0.5) / q * a.length();
    s += F(b.hi - u) - F(b.lo - u);
  }
  return s / q;
}

std::vector<PiecewiseMap> shipped_maps() {
  return {maps::doubling(), maps::example1(), maps::example2_base(0.1), maps::tent(0.4)};
}

}  // namespace

TEST(Ulam, DoublingFourCells) {
  const auto P = dense(build_ulam(maps::doubling(), Partition({0, 1}, 4)));
  EXPECT_DOUBLE_EQ(P(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(P(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(P(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(P(0, 3), 0.0);
  EXPECT_DOUBLE_EQ(P(3, 2), 0.5);
  EXPECT_DOUBLE_EQ(P(3, 3), 0.5);
}

TEST(Ulam, Example1ClosedBlock) {
  const Partition p({0, 10}, 20);
  const auto P = dense(build_ulam(maps::example1(), p));
  for (Eigen::Index i = 2; i < 8; ++i) EXPECT_NEAR(P.row(i).segment(2, 6).sum(), 1.0, 1e-14);
}

TEST(Ulam, RowStochasticAndTotalMass) {
  for (const auto& m : shipped_maps())
    for (std::size_t n : {7u, 64u, 1000u}) {
      const auto P = build_ulam(m, Partition(m.domain(), n));
      EXPECT_LT(P.max_row_sum_deviation(), 1e-10);
      EXPECT_GE(P.min_entry(), 0.0);
      EXPECT_NEAR(Eigen::MatrixXd(P.matrix).sum(), static_cast<double>(n), 1e-9);
    }
}

TEST(Ulam, MatchesSampledOracle) {
  for (const auto& m : shipped_maps()) {
    const Partition p(m.domain(), 37);
    const auto P = dense(build_ulam(m, p));
    const auto Q = sampled_ulam(m, p, 20000);
    EXPECT_LT((P - Q).cwiseAbs().maxCoeff(), 5e-4);
  }
}

TEST(Ulam, DomainMismatch) {
  EXPECT_THROW(build_ulam(maps::doubling(), Partition({0, 2}, 8)), StructuralError);
}

TEST(Ulam, DoublingUniformIsExactlyStationary) {
  const auto P = build_ulam(maps::doubling(), Partition({0, 1}, 1024));
  const Eigen::VectorXd f = Eigen::VectorXd::Constant(1024, 1.0 / 1024);
  EXPECT_LT((P.push_forward(f) - f).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Smoothing, MatchesQuadrature) {
  const Partition p({0, 1}, 50);
  for (const auto& k : {NoiseKernel::uniform(0.031, BoundaryMode::torus_wrap),
                        NoiseKernel::triangular(0.047, BoundaryMode::torus_wrap),
                        NoiseKernel::uniform(0.01, BoundaryMode::torus_wrap)}) {
    const Eigen::MatrixXd K(smoothing_matrix(p, k));
    for (std::size_t j : {20u, 25u})
      for (std::size_t c = 15; c < 31; ++c)
        EXPECT_NEAR(K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)), quadrature_k(k, p, j, c, 20000), 1e-8)
            << to_string(k.shape()) << " j=" << j << " k=" << c;
  }
}

TEST(Smoothing, NarrowKernelIsTridiagonal) {
  const Partition p({0, 1}, 100);
  const Eigen::MatrixXd K(smoothing_matrix(p, NoiseKernel::uniform(0.004)));
  for (Eigen::Index j = 1; j < 99; ++j)
    for (Eigen::Index c = 0; c < 100; ++c) {
      if (std::abs(c - j) <= 1)
        EXPECT_GT(K(j, c), 0.0);
      else
        EXPECT_EQ(K(j, c), 0.0);
    }
}

TEST(Smoothing, BandwidthFollowsEps) {
  const Partition p({0, 1}, 100);
  const Eigen::MatrixXd K(smoothing_matrix(p, NoiseKernel::uniform(0.035, BoundaryMode::torus_wrap)));
  for (Eigen::Index c = 0; c < 100; ++c) {
    const auto d = std::min(std::abs(c - 50), 100 - std::abs(c - 50));
    EXPECT_EQ(K(50, c) > 0.0, d <= 4) << c;
  }
}

TEST(Perturbed, EqualsProductOfParts) {
  const auto m = maps::example2_base(0.1);
  const Partition p(m.domain(), 400);
  const auto k = NoiseKernel::triangular(0.02);
  const Eigen::MatrixXd lhs = dense(build_perturbed(m, p, k));
  const Eigen::MatrixXd rhs = dense(build_ulam(m, p)) * Eigen::MatrixXd(smoothing_matrix(p, k));
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Perturbed, RowStochastic) {
  EXPECT_LT(build_perturbed(maps::doubling(), Partition({0, 1}, 4), NoiseKernel::uniform(0.25, BoundaryMode::torus_wrap))
                .max_row_sum_deviation(),
            1e-10);
  for (double e : {0.001, 0.01, 0.05}) {
    EXPECT_LT(build_perturbed(maps::example1(), Partition({0, 10}, 1000), NoiseKernel::uniform(e)).max_row_sum_deviation(),
              1e-10);
    EXPECT_LT(build_perturbed(maps::example2_base(0.1), Partition({0, 1}, 1000), NoiseKernel::triangular(e))
                  .max_row_sum_deviation(),
              1e-10);
  }
}

TEST(Perturbed, VanishingNoiseRecoversP) {
  const auto m = maps::example2_base(0.1);
  const Partition p(m.domain(), 512);
  const auto P = build_ulam(m, p);
  EXPECT_EQ(operator_distance(P, build_perturbed(m, p, NoiseKernel::uniform(0.0))), 0.0);
  EXPECT_LT(operator_distance(P, build_perturbed(m, p, NoiseKernel::uniform(1e-9))), 1e-5);
}

TEST(Perturbed, StrictBoundaryViolation) {
  EXPECT_THROW(build_perturbed(maps::tent(0.4), Partition({0, 1}, 64), NoiseKernel::uniform(0.01)), BoundaryError);
  EXPECT_THROW(build_perturbed(maps::example2_base(0.1), Partition({0, 1}, 64), NoiseKernel::uniform(0.15)),
               BoundaryError);
}

TEST(OperatorDistance, Basics) {
  const auto m = maps::doubling();
  const Partition p({0, 1}, 512);
  const auto P = build_ulam(m, p);
  EXPECT_EQ(operator_distance(P, P), 0.0);
  EXPECT_THROW(operator_distance(P, build_ulam(m, Partition({0, 1}, 256))), StructuralError);
}

TEST(OperatorDistance, DecreasesWithEps) {
  const auto m = maps::doubling();
  const Partition p({0, 1}, 512);
  const auto P = build_ulam(m, p);
  double prev = INFINITY;
  for (double e : {0.02, 0.005, 0.00125}) {
    const double d = operator_distance(P, build_perturbed(m, p, NoiseKernel::uniform(e, BoundaryMode::torus_wrap)));
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(Ulam2d, NoiselessIsDeterministicAndLocal) {
  const SkewFamily f(maps::example2_base(0.1));
  const Grid g(Partition({0, 1}, 32), Partition({0, 1}, 16));
  const auto k = NoiseKernel::uniform(0.0);
  const auto A = build_ulam_2d(f, g, k, 64, 1);
  const auto B = build_ulam_2d(f, g, k, 64, 2);
  EXPECT_EQ(A.kind, MatrixKind::unperturbed);
  EXPECT_EQ((Eigen::MatrixXd(A.matrix) - Eigen::MatrixXd(B.matrix)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT(A.max_row_sum_deviation(), 1e-12);
  const auto& m = f.base();
  for (Eigen::Index r = 0; r < A.matrix.outerSize(); ++r) {
    const auto c = static_cast<std::size_t>(r);
    const Interval cx = g.x.cell(g.x_index(c));
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& br : m.branches()) {
      const double a = std::max(cx.lo, br.domain.lo), b = std::min(cx.hi, br.domain.hi);
      if (b <= a) continue;
      lo = std::min({lo, br(a), br(b)});
      hi = std::max({hi, br(a), br(b)});
    }
    for (SparseMatrix::InnerIterator it(A.matrix, r); it; ++it) {
      const Interval tx = g.x.cell(g.x_index(static_cast<std::size_t>(it.col())));
      EXPECT_LE(tx.lo, hi + 1e-12);
      EXPECT_GE(tx.hi, lo - 1e-12);
      const std::size_t ty = g.y_index(static_cast<std::size_t>(it.col()));
      const std::size_t sy = g.y_index(c);
      EXPECT_TRUE(ty == (2 * sy) % 16 || ty == (2 * sy + 1) % 16);
    }
  }
}

TEST(Ulam2d, Example2RowsAndRightInvariance) {
  const SkewFamily f(maps::example2_base(0.1));
  const Grid g(Partition({0, 1}, 128), Partition({0, 1}, 128));
  const auto A = build_ulam_2d(f, g, NoiseKernel::uniform(1.0 / 120), 64, 7);
  EXPECT_LT(A.max_row_sum_deviation(), 1e-12);
  for (Eigen::Index r = 0; r < A.matrix.outerSize(); ++r) {
    const double x = g.x.center(g.x_index(static_cast<std::size_t>(r)));
    if (x < 0.6 || x > 0.9) continue;
    for (SparseMatrix::InnerIterator it(A.matrix, r); it; ++it)
      EXPECT_GE(g.x.edge(g.x_index(static_cast<std::size_t>(it.col())) + 1), 0.55);
  }
}

TEST(Ulam2d, Preconditions) {
  const SkewFamily f(maps::example2_base(0.1));
  const Grid g(Partition({0, 1}, 16), Partition({0, 1}, 16));
  EXPECT_THROW(build_ulam_2d(f, g, NoiseKernel::uniform(0.1), 64, 1), MarginError);
  EXPECT_THROW(build_ulam_2d(f, g, NoiseKernel::uniform(0.01), 32, 1), ConfigError);
  EXPECT_THROW(build_ulam_2d(f, Grid(Partition({0, 1}, 16)), NoiseKernel::uniform(0.01), 64, 1), StructuralError);
}
