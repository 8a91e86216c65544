#pragma once

// Contract-level view of a network. Each contract becomes a node; contract e
// feeds contract f when the firm reinsured by e is the reinsurer in f, i.e.
// the liabilities owed on f become claims that e's reinsured firm passes on.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "reinsurance/network.hpp"

namespace reinsurance {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct ContractKey {
  FirmIndex reinsurer = 0;
  FirmIndex reinsured = 0;
  int layer = 0;
  std::size_t source = 0;  // index into ReinsuranceNetwork::contracts

  friend bool operator==(const ContractKey&, const ContractKey&) = default;
};

struct LineGraphSystem {
  std::size_t n_firms = 0;
  std::vector<ContractKey> edges;
  SparseRowMatrix X;      // m x m, X(e, f) = 1 iff reinsured(e) == reinsurer(f)
  Eigen::VectorXd gamma;  // rates
  Eigen::VectorXd d;      // deductibles
  Eigen::VectorXd c;      // caps, +inf when unlimited
  Eigen::VectorXd s;      // shock of the reinsured firm

  std::size_t size() const { return edges.size(); }

  bool all_caps_infinite() const { return (c.array() == std::numeric_limits<double>::infinity()).all(); }

  Eigen::MatrixXd dense_X() const { return Eigen::MatrixXd(X); }

  /// gamma X as a sparse row-major matrix.
  SparseRowMatrix weighted() const { return gamma.asDiagonal() * X; }
};

/// Builds the line graph with contracts ordered by (reinsured, reinsurer,
/// layer). Throws ValidationError when the network violates any rule.
inline LineGraphSystem build_line_graph(const ReinsuranceNetwork& net) {
  require_valid(net);

  LineGraphSystem sys;
  sys.n_firms = net.size();
  sys.edges.reserve(net.contracts.size());
  for (std::size_t k = 0; k < net.contracts.size(); ++k) {
    const auto& c = net.contracts[k];
    sys.edges.push_back({c.reinsurer, c.reinsured, c.layer, k});
  }
  std::sort(sys.edges.begin(), sys.edges.end(), [](const ContractKey& a, const ContractKey& b) {
    return std::tie(a.reinsured, a.reinsurer, a.layer) < std::tie(b.reinsured, b.reinsurer, b.layer);
  });

  const auto m = static_cast<Eigen::Index>(sys.edges.size());
  sys.gamma.resize(m);
  sys.d.resize(m);
  sys.c.resize(m);
  sys.s.resize(m);

  std::vector<std::vector<Eigen::Index>> written_by(net.size());
  for (Eigen::Index e = 0; e < m; ++e) {
    const auto& key = sys.edges[static_cast<std::size_t>(e)];
    const auto& src = net.contracts[key.source];
    sys.gamma(e) = src.rate;
    sys.d(e) = src.deductible;
    sys.c(e) = src.cap.value();
    sys.s(e) = net.shock[key.reinsured];
    written_by[key.reinsurer].push_back(e);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index e = 0; e < m; ++e) {
    for (Eigen::Index f : written_by[sys.edges[static_cast<std::size_t>(e)].reinsured])
      triplets.emplace_back(e, f, 1.0);
  }
  sys.X.resize(m, m);
  sys.X.setFromTriplets(triplets.begin(), triplets.end());
  sys.X.makeCompressed();
  return sys;
}

/// Maps a contract liability vector back to the n x n firm matrix L, where
/// L(i, j) is what reinsurer i owes firm j (summed over layers).
inline Eigen::MatrixXd liabilities_matrix(const LineGraphSystem& sys, const Eigen::VectorXd& ell) {
  if (static_cast<std::size_t>(ell.size()) != sys.size())
    throw std::invalid_argument("liability vector has length " + std::to_string(ell.size()) +
                                ", expected " + std::to_string(sys.size()));
  const auto n = static_cast<Eigen::Index>(sys.n_firms);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < sys.size(); ++e) {
    const auto& key = sys.edges[e];
    L(static_cast<Eigen::Index>(key.reinsurer), static_cast<Eigen::Index>(key.reinsured)) +=
        ell(static_cast<Eigen::Index>(e));
  }
  return L;
}

/// Delta(L) = L^T 1 - L 1: what each firm is owed minus what it owes.
inline Eigen::VectorXd net_liabilities(const Eigen::MatrixXd& L) {
  return L.colwise().sum().transpose() - L.rowwise().sum();
}

}  // namespace reinsurance
