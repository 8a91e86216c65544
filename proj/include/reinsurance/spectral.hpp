#pragma once

// Spectral radius of nonnegative matrices. Inputs are split into strongly
// connected components (the radius of a reducible matrix is the largest
// radius of its irreducible diagonal blocks); small blocks go to a dense
// eigensolver, large ones to shifted power iteration with Collatz-Wielandt
// bounds, falling back to the dense solver on slow convergence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/strong_components.hpp>

namespace reinsurance {

struct SpectralOptions {
  double tol = 1e-10;  // relative
  int max_power_steps = 10'000;
  Eigen::Index dense_limit = 64;
};

struct SpectralResult {
  double radius = 0.0;
  std::vector<Eigen::Index> component;  // indices of the block attaining the radius
};

namespace detail {

template <typename Sparse>
inline void require_square_nonnegative(const Sparse& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("spectral radius needs a square matrix, got " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  for (Eigen::Index k = 0; k < a.outerSize(); ++k)
    for (typename Sparse::InnerIterator it(a, k); it; ++it)
      if (it.value() < 0.0 || std::isnan(it.value()))
        throw std::invalid_argument("spectral radius needs a nonnegative matrix");
}

inline double dense_radius(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1) return std::abs(a(0, 0));
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Power iteration on (A + I). The shift makes every irreducible block
/// aperiodic, so the iteration converges even on permutation cycles.
/// Returns a negative value when the Collatz-Wielandt bounds did not close.
inline double shifted_power_radius(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a,
                                   const SpectralOptions& opt) {
  const Eigen::Index n = a.rows();
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = 1.0 + 1e-12 * static_cast<double>(i + 1);
  x /= x.sum();
  for (int step = 0; step < opt.max_power_steps; ++step) {
    Eigen::VectorXd y = a * x + x;
    const Eigen::ArrayXd ratio = y.array() / x.array();
    const double lo = ratio.minCoeff() - 1.0;
    const double hi = ratio.maxCoeff() - 1.0;
    if (hi - lo <= opt.tol * std::max(hi, 1e-12)) return std::max(0.5 * (lo + hi), 0.0);
    x = y / y.sum();
  }
  return -1.0;
}

}  // namespace detail

/// Strongly connected components of the nonzero pattern of `a`.
inline std::vector<std::vector<Eigen::Index>> strongly_connected_components(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& a) {
  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS>;
  Graph g(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index r = 0; r < a.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a, r); it; ++it)
      if (it.value() != 0.0)
        boost::add_edge(static_cast<std::size_t>(r), static_cast<std::size_t>(it.col()), g);
  std::vector<int> comp(static_cast<std::size_t>(a.rows()));
  const int count = a.rows() == 0
                        ? 0
                        : boost::strong_components(
                              g, boost::make_iterator_property_map(comp.begin(),
                                                                   boost::get(boost::vertex_index, g)));
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(count));
  for (std::size_t v = 0; v < comp.size(); ++v)
    out[static_cast<std::size_t>(comp[v])].push_back(static_cast<Eigen::Index>(v));
  return out;
}

inline SpectralResult spectral_radius_detail(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a,
                                             const SpectralOptions& opt = {}) {
  detail::require_square_nonnegative(a);
  SpectralResult best;
  if (a.rows() == 0) return best;

  // Working block by block also keeps the dense eigensolver away from the
  // nilpotent parts of a reducible matrix, where its eigenvalues are badly
  // conditioned.
  for (auto& comp : strongly_connected_components(a)) {
    double r = 0.0;
    const auto k = static_cast<Eigen::Index>(comp.size());
    if (k == 1) {
      r = std::abs(a.coeff(comp[0], comp[0]));
    } else {
      std::vector<Eigen::Index> local(static_cast<std::size_t>(a.rows()), -1);
      for (Eigen::Index i = 0; i < k; ++i) local[static_cast<std::size_t>(comp[i])] = i;
      std::vector<Eigen::Triplet<double>> trips;
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a, comp[i]); it; ++it)
          if (auto j = local[static_cast<std::size_t>(it.col())]; j >= 0) trips.emplace_back(i, j, it.value());
      Eigen::SparseMatrix<double, Eigen::RowMajor> block(k, k);
      block.setFromTriplets(trips.begin(), trips.end());
      r = k <= opt.dense_limit ? detail::dense_radius(Eigen::MatrixXd(block))
                               : detail::shifted_power_radius(block, opt);
      if (r < 0.0) r = detail::dense_radius(Eigen::MatrixXd(block));
    }
    if (r > best.radius || best.component.empty()) {
      best.radius = r;
      best.component = std::move(comp);
    }
  }
  return best;
}

inline double spectral_radius(const Eigen::SparseMatrix<double, Eigen::RowMajor>& a,
                              const SpectralOptions& opt = {}) {
  return spectral_radius_detail(a, opt).radius;
}

inline double spectral_radius(const Eigen::MatrixXd& a, const SpectralOptions& opt = {}) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("spectral radius needs a square matrix, got " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  return spectral_radius(Eigen::SparseMatrix<double, Eigen::RowMajor>(a.sparseView()), opt);
}

}  // namespace reinsurance
