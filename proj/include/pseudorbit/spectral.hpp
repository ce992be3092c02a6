#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <complex>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "pseudorbit/arnoldi.hpp"
#include "pseudorbit/error.hpp"
#include "pseudorbit/graph.hpp"
#include "pseudorbit/rng.hpp"
#include "pseudorbit/transfer_matrix.hpp"

namespace pseudorbit {

/// Entries at or below this value are treated as structural zeros.
inline constexpr double support_threshold = 1e-14;

/// Discretised ergodic component: a closed communicating class and its
/// stationary density (full length, zero off the support, summing to 1).
struct ErgodicComponent {
  std::vector<std::size_t> support;
  Eigen::VectorXd density;
  double residual = 0.0;
  std::size_t iterations = 0;

  double mass_on(const std::vector<std::size_t>& cells) const {
    double m = 0.0;
    for (std::size_t c : cells) m += density[static_cast<Eigen::Index>(c)];
    return m;
  }
};

/// Closed classes of the support digraph, each sorted, ordered by first cell.
inline std::vector<std::vector<std::size_t>> recurrent_classes(const TransferMatrix& p,
                                                               double threshold = support_threshold) {
  const Digraph g = support_graph(p.matrix, threshold);
  const SccResult scc = strongly_connected_components(g);
  const Digraph dag = condensation(g, scc);
  auto members = scc.members();
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t c = 0; c < scc.count; ++c)
    if (dag.out_degree(c) == 0) out.push_back(std::move(members[c]));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

/// Square submatrix on `cells`, rows renormalised to drop sub-threshold leakage.
inline SparseMatrix restrict_to(const SparseMatrix& m, const std::vector<std::size_t>& cells, bool renormalise) {
  std::vector<long long> local(static_cast<std::size_t>(m.rows()), -1);
  for (std::size_t i = 0; i < cells.size(); ++i) local[cells[i]] = static_cast<long long>(i);
  Triplets t;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t first = t.size();
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(m, static_cast<Eigen::Index>(cells[i])); it; ++it) {
      const long long j = local[static_cast<std::size_t>(it.col())];
      if (j < 0) continue;
      t.emplace_back(static_cast<int>(i), static_cast<int>(j), it.value());
      s += it.value();
    }
    if (renormalise && s > 0.0)
      for (std::size_t q = first; q < t.size(); ++q) t[q] = {t[q].row(), t[q].col(), t[q].value() / s};
  }
  return from_triplets(cells.size(), cells.size(), t);
}

/// Stationary density of each recurrent class by power iteration from the
/// uniform vector on the class, stopped when |fP - f|_1 <= tol.  After a
/// quarter of the budget the iteration switches to the lazy chain (P + I)/2,
/// which has the same fixed point and converges on periodic classes.
inline std::vector<ErgodicComponent> stationary_densities(const TransferMatrix& p, double tol = 1e-12,
                                                          std::size_t max_iterations = 200000) {
  std::vector<ErgodicComponent> out;
  for (auto& cls : recurrent_classes(p)) {
    const SparseMatrix sub = restrict_to(p.matrix, cls, true);
    const auto m = static_cast<Eigen::Index>(cls.size());
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Constant(m, 1.0 / static_cast<double>(m));
    Eigen::RowVectorXd g(m);
    double residual = 0.0;
    std::size_t it = 0;
    for (;; ++it) {
      g = f * sub;
      residual = (g - f).lpNorm<1>();
      if (residual <= tol) break;
      if (it >= max_iterations) {
        std::ostringstream os;
        os << "power iteration did not reach " << tol << " after " << max_iterations << " iterations";
        throw ConvergenceError(os.str(), residual);
      }
      if (it >= max_iterations / 4) g = 0.5 * (f + g);
      f = g / g.sum();
    }
    ErgodicComponent comp;
    comp.density = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < cls.size(); ++i) comp.density[static_cast<Eigen::Index>(cls[i])] = f[static_cast<Eigen::Index>(i)];
    comp.support = std::move(cls);
    comp.residual = residual;
    comp.iterations = it;
    out.push_back(std::move(comp));
  }
  return out;
}

struct SpectralValue {
  std::complex<double> value;
  std::size_t multiplicity = 1;
};

struct SpectrumReport {
  /// Top eigenvalues by modulus, near-equal values merged with multiplicity.
  std::vector<SpectralValue> eigenvalues;
  std::size_t unit_multiplicity = 0;
  /// Largest modulus once the unit eigenvalue(s) are removed.
  double second_modulus = 0.0;
  std::optional<double> xi_eps;
  double gap_radius = 0.8;
  double isolation_delta = 0.1;
  /// Left eigenvector (density-like, f P = xi f), largest |entry| positive.
  std::optional<Eigen::VectorXd> second_eigvec;
  std::vector<std::size_t> positive_set;
  std::vector<std::size_t> negative_set;
};

struct EigenOptions {
  /// Eigenvalues closer than this are merged into one value with multiplicity.
  double merge_tol = 1e-8;
  /// |lambda - 1| below this counts towards the unit multiplicity.
  double unit_tol = 1e-8;
  /// Irreducible blocks up to this size are solved densely.
  std::size_t dense_limit = 512;
  double arnoldi_tol = 1e-10;
  std::size_t max_dim = 16384;
};

namespace detail {

inline std::vector<std::complex<double>> dense_eigenvalues(const SparseMatrix& block) {
  const Eigen::MatrixXd d(block);
  Eigen::EigenSolver<Eigen::MatrixXd> es(d, false);
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  std::vector<std::complex<double>> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

inline std::vector<std::complex<double>> block_eigenvalues(const SparseMatrix& block, std::size_t k,
                                                           const EigenOptions& opt) {
  const auto n = static_cast<std::size_t>(block.rows());
  if (n == 1) return {block.coeff(0, 0)};
  if (n <= opt.dense_limit) return dense_eigenvalues(block);
  ArnoldiOptions ao;
  ao.nev = std::min(k, n - 2);
  ao.tol = opt.arnoldi_tol;
  auto op = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y.noalias() = block * x; };
  ArnoldiResult r = arnoldi_largest(op, n, ao);
  if (r.converged) return r.values;
  if (n <= opt.max_dim) return dense_eigenvalues(block);
  throw NumericalError("Arnoldi did not converge and the block is too large for the dense fallback");
}

}  // namespace detail

/// Top-k eigenvalues of P.  The support digraph is condensed into irreducible
/// diagonal blocks (Frobenius normal form); the spectrum of P is the union of
/// the block spectra, so each block is solved on its own.  This keeps the
/// multiplicity of eigenvalue 1 exact: one per closed class.
inline SpectrumReport top_eigenvalues(const TransferMatrix& p, std::size_t k, EigenOptions opt = {}) {
  if (k == 0 || k > 12) throw ConfigError("top_eigenvalues supports 1 <= k <= 12");
  if (p.size() > opt.max_dim) throw ConfigError("matrix too large for the spectral solver");
  const Digraph g = support_graph(p.matrix, support_threshold);
  const SccResult scc = strongly_connected_components(g);
  std::vector<std::complex<double>> all;
  for (auto& cells : scc.members()) {
    const SparseMatrix block = restrict_to(p.matrix, cells, false);
    auto vals = detail::block_eigenvalues(block, k, opt);
    all.insert(all.end(), vals.begin(), vals.end());
  }
  std::sort(all.begin(), all.end(), detail::by_modulus_desc);

  SpectrumReport rep;
  for (const auto& v : all)
    if (std::abs(v - 1.0) < opt.unit_tol) ++rep.unit_multiplicity;

  std::size_t take = std::min(k, all.size());
  // Keep conjugate pairs together.
  if (take < all.size() && std::abs(all[take - 1].imag()) > opt.merge_tol &&
      std::abs(all[take] - std::conj(all[take - 1])) < opt.merge_tol)
    ++take;
  for (std::size_t i = 0; i < take; ++i) {
    auto hit = std::find_if(rep.eigenvalues.begin(), rep.eigenvalues.end(),
                            [&](const SpectralValue& s) { return std::abs(s.value - all[i]) < opt.merge_tol; });
    if (hit != rep.eigenvalues.end())
      ++hit->multiplicity;
    else
      rep.eigenvalues.push_back({all[i], 1});
  }
  std::size_t skipped_units = 0;
  for (const auto& v : all) {
    if (std::abs(v - 1.0) < opt.unit_tol && skipped_units < rep.unit_multiplicity) {
      ++skipped_units;
      continue;
    }
    rep.second_modulus = std::abs(v);
    break;
  }
  return rep;
}

/// Left eigenvector for a simple real eigenvalue by shift-invert iteration on
/// (P^T - sigma I).  Sign fixed so that the entry of largest magnitude is positive.
inline Eigen::VectorXd left_eigenvector(const TransferMatrix& p, double lambda, std::uint64_t seed = 0x5eed) {
  using ColMajor = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  const auto n = static_cast<Eigen::Index>(p.size());
  const double sigma = lambda + 1e-9 * std::max(1.0, std::abs(lambda));
  ColMajor a = ColMajor(p.matrix.transpose());
  ColMajor shift(n, n);
  shift.setIdentity();
  a -= sigma * shift;
  a.makeCompressed();
  Eigen::SparseLU<ColMajor> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw NumericalError("shift-invert factorisation failed");
  Rng rng(seed);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.uniform_open();
  x.normalize();
  const ColMajor pt = ColMajor(p.matrix.transpose());
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd y = lu.solve(x);
    if (lu.info() != Eigen::Success) throw NumericalError("shift-invert solve failed");
    x = y / y.norm();
    const double res = (pt * x - lambda * x).norm();
    if (res < 1e-11) break;
  }
  Eigen::Index arg = 0;
  x.cwiseAbs().maxCoeff(&arg);
  if (x[arg] < 0) x = -x;
  return x;
}

/// Spectral picture of a perturbed operator with two almost-invariant
/// regions: eigenvalue 1 simple, a real xi_eps > r second in modulus, and
/// the sign split of its eigenvector.  When the second modulus does not
/// exceed r there is no metastable eigenvalue and xi_eps stays empty.
inline SpectrumReport metastability_report(const TransferMatrix& p_eps, double r = 0.8, double delta = 0.1,
                                           std::size_t k = 6) {
  if (p_eps.kind != MatrixKind::perturbed) throw ConfigError("metastability_report expects a perturbed matrix");
  EigenOptions opt;
  opt.unit_tol = 1e-10;
  SpectrumReport rep = top_eigenvalues(p_eps, k, opt);
  rep.gap_radius = r;
  rep.isolation_delta = delta;
  if (rep.unit_multiplicity != 1) {
    std::ostringstream os;
    os << "eigenvalue 1 has multiplicity " << rep.unit_multiplicity << ", expected a simple eigenvalue";
    throw MetastabilityError(os.str());
  }
  std::optional<SpectralValue> second;
  for (const auto& s : rep.eigenvalues) {
    if (std::abs(s.value - 1.0) < opt.unit_tol) continue;
    second = s;
    break;
  }
  if (!second || std::abs(second->value) <= r) return rep;

  const auto v = second->value;
  if (std::abs(v.imag()) > 1e-10 || v.real() <= 0.0) {
    std::ostringstream os;
    os << "second eigenvalue " << v.real() << (v.imag() < 0 ? " - " : " + ") << std::abs(v.imag())
       << "i is not real positive";
    throw MetastabilityError(os.str());
  }
  if (second->multiplicity > 1) throw MetastabilityError("second eigenvalue is not simple");
  rep.xi_eps = v.real();
  Eigen::VectorXd f = left_eigenvector(p_eps, v.real());
  const double cut = 1e-12 * f.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (f[i] > cut) rep.positive_set.push_back(static_cast<std::size_t>(i));
    if (f[i] < -cut) rep.negative_set.push_back(static_cast<std::size_t>(i));
  }
  rep.second_eigvec = std::move(f);
  return rep;
}

/// Mass of the positive and negative parts of a signed cell vector on either
/// side of x = split.
struct SignSplit {
  double positive_left = 0.0, positive_right = 0.0;
  double negative_left = 0.0, negative_right = 0.0;

  /// Worst-side fraction of each sign part lying on "its" side, where the
  /// positive part is assigned the side holding most of it.
  double purity() const {
    const double pos = positive_left + positive_right;
    const double neg = negative_left + negative_right;
    if (pos <= 0.0 || neg <= 0.0) return 0.0;
    const bool pos_left = positive_left >= positive_right;
    const double p = (pos_left ? positive_left : positive_right) / pos;
    const double q = (pos_left ? negative_right : negative_left) / neg;
    return std::min(p, q);
  }
};

inline SignSplit sign_split(const Eigen::VectorXd& v, const Partition& partition, double split) {
  SignSplit s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const bool left = partition.center(static_cast<std::size_t>(i)) < split;
    if (v[i] > 0) (left ? s.positive_left : s.positive_right) += v[i];
    if (v[i] < 0) (left ? s.negative_left : s.negative_right) -= v[i];
  }
  return s;
}

/// Whether z lies in {|z| <= r} ∪ {|z - 1| <= delta}.
inline bool in_spectral_region(std::complex<double> z, double delta, double r) {
  return std::abs(z) <= r || std::abs(z - 1.0) <= delta;
}

}  // namespace pseudorbit
