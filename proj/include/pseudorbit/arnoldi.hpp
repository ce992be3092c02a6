#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pseudorbit/rng.hpp"

namespace pseudorbit {

struct ArnoldiOptions {
  std::size_t nev = 6;
  /// Krylov dimension; 0 picks max(2 nev + 10, 30) capped by n - 1.
  std::size_t ncv = 0;
  double tol = 1e-10;
  std::size_t max_restarts = 500;
  std::uint64_t seed = 0x5eed;
};

struct ArnoldiResult {
  std::vector<std::complex<double>> values;
  Eigen::MatrixXcd vectors;
  std::vector<double> residuals;
  bool converged = false;
  std::size_t restarts = 0;
};

namespace detail {

inline bool by_modulus_desc(const std::complex<double>& a, const std::complex<double>& b) {
  const double ma = std::abs(a), mb = std::abs(b);
  if (ma != mb) return ma > mb;
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

inline std::vector<std::size_t> order_by_modulus(const Eigen::VectorXcd& v) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return by_modulus_desc(v[static_cast<Eigen::Index>(a)], v[static_cast<Eigen::Index>(b)]);
  });
  return idx;
}

}  // namespace detail

/// Implicitly restarted Arnoldi (exact shifts) for the nev eigenvalues of
/// largest modulus of a real operator.  op(x, y) must set y = A x.  Works in
/// complex arithmetic so conjugate pairs need no special handling.  On
/// breakdown the basis is continued with a fresh random vector, which keeps
/// the Arnoldi relation valid and exposes the remaining spectrum.
template <class Op>
ArnoldiResult arnoldi_largest(Op&& op, std::size_t n, ArnoldiOptions opt) {
  using Vec = Eigen::VectorXcd;
  using Mat = Eigen::MatrixXcd;
  const auto N = static_cast<Eigen::Index>(n);
  const std::size_t nev = std::min(opt.nev, n > 2 ? n - 2 : std::size_t{1});
  std::size_t m = opt.ncv != 0 ? opt.ncv : std::max<std::size_t>(2 * nev + 10, 30);
  m = std::min(m, n > 1 ? n - 1 : std::size_t{1});
  m = std::max(m, nev + 1);
  const auto M = static_cast<Eigen::Index>(m);
  const std::size_t keep = std::min(m - 1, std::max(nev + 1, nev + (m - nev) / 3));

  Rng rng(opt.seed);
  auto random_vector = [&] {
    Vec v(N);
    for (Eigen::Index i = 0; i < N; ++i) v[i] = {rng.uniform_open() - 0.5, 0.0};
    return v;
  };

  Mat V = Mat::Zero(N, M + 1);
  Mat H = Mat::Zero(M + 1, M);
  Vec w(N);
  Eigen::VectorXd re(N), im(N), ore(N), oim(N);

  auto apply = [&](const Vec& x, Vec& y) {
    re = x.real();
    im = x.imag();
    op(re, ore);
    if (im.cwiseAbs().maxCoeff() > 0.0) {
      op(im, oim);
    } else {
      oim.setZero();
    }
    y.real() = ore;
    y.imag() = oim;
  };

  auto orthogonalize = [&](Vec& v, Eigen::Index cols, Eigen::VectorXcd* coeffs) {
    for (int pass = 0; pass < 2; ++pass) {
      Vec h = V.leftCols(cols).adjoint() * v;
      v.noalias() -= V.leftCols(cols) * h;
      if (coeffs) *coeffs += h;
    }
  };

  {
    Vec v0 = random_vector();
    V.col(0) = v0 / v0.norm();
  }

  auto extend = [&](Eigen::Index from) {
    for (Eigen::Index j = from; j < M; ++j) {
      apply(V.col(j), w);
      const double wnorm = w.norm();
      Vec h = Vec::Zero(j + 1);
      orthogonalize(w, j + 1, &h);
      H.block(0, j, j + 1, 1) = h;
      const double beta = w.norm();
      if (beta <= 1e-12 * std::max(wnorm, 1.0)) {
        Vec r = random_vector();
        orthogonalize(r, j + 1, nullptr);
        H(j + 1, j) = 0.0;
        V.col(j + 1) = r / r.norm();
      } else {
        H(j + 1, j) = beta;
        V.col(j + 1) = w / beta;
      }
    }
  };

  ArnoldiResult result;
  Eigen::Index k = 0;
  for (std::size_t restart = 0;; ++restart) {
    extend(k == 0 ? 0 : k);
    Mat Hm = H.topLeftCorner(M, M);
    Eigen::ComplexEigenSolver<Mat> es(Hm);
    const Vec theta = es.eigenvalues();
    const Mat Y = es.eigenvectors();
    const auto order = detail::order_by_modulus(theta);
    const double beta_m = std::abs(H(M, M - 1));

    bool ok = true;
    std::vector<double> res(nev);
    for (std::size_t i = 0; i < nev; ++i) {
      const auto c = static_cast<Eigen::Index>(order[i]);
      res[i] = beta_m * std::abs(Y(M - 1, c)) / Y.col(c).norm();
      if (res[i] > opt.tol) ok = false;
    }
    if (ok || restart >= opt.max_restarts) {
      result.converged = ok;
      result.restarts = restart;
      result.residuals = res;
      result.vectors.resize(N, static_cast<Eigen::Index>(nev));
      for (std::size_t i = 0; i < nev; ++i) {
        const auto c = static_cast<Eigen::Index>(order[i]);
        result.values.push_back(theta[c]);
        Vec x = V.leftCols(M) * Y.col(c);
        result.vectors.col(static_cast<Eigen::Index>(i)) = x / x.norm();
      }
      return result;
    }

    // Exact shifts: the unwanted Ritz values.
    Mat Q = Mat::Identity(M, M);
    for (std::size_t i = keep; i < m; ++i) {
      const std::complex<double> mu = theta[static_cast<Eigen::Index>(order[i])];
      Eigen::HouseholderQR<Mat> qr(Hm - mu * Mat::Identity(M, M));
      Mat Qs = qr.householderQ();
      Hm = Qs.adjoint() * Hm * Qs;
      for (Eigen::Index c = 0; c < M; ++c)
        for (Eigen::Index r = c + 2; r < M; ++r) Hm(r, c) = 0.0;
      Q = Q * Qs;
    }
    k = static_cast<Eigen::Index>(keep);
    const Vec f_old = V.col(M) * H(M, M - 1);
    const std::complex<double> sigma = Q(M - 1, k - 1);
    Mat Vq = V.leftCols(M) * Q.leftCols(k + 1);
    Vec f = Vq.col(k) * Hm(k, k - 1) + f_old * sigma;
    V.leftCols(k) = Vq.leftCols(k);
    H.setZero();
    H.topLeftCorner(k, k) = Hm.topLeftCorner(k, k);
    const double fn = f.norm();
    if (fn <= 1e-14) {
      Vec r = random_vector();
      orthogonalize(r, k, nullptr);
      V.col(k) = r / r.norm();
      H(k, k - 1) = 0.0;
    } else {
      orthogonalize(f, k, nullptr);
      const double fn2 = f.norm();
      V.col(k) = f / fn2;
      H(k, k - 1) = fn2;
    }
  }
}

}  // namespace pseudorbit
