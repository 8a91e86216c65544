#pragma once

// Small hand-built networks and random generators shared by the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reinsurance/line_graph.hpp"
#include "reinsurance/network.hpp"
#include "reinsurance/spectral.hpp"

namespace fixtures {

using namespace reinsurance;

struct Cover {
  std::size_t reinsurer, reinsured;
  double rate, deductible, cap;  // cap may be +inf
  int layer = 0;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline ReinsuranceNetwork make(const std::vector<std::string>& ids, const std::vector<Cover>& covers,
                               std::vector<double> shock, const std::vector<Role>& roles = {}) {
  ReinsuranceNetwork net;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Firm f;
    f.id = ids[i];
    f.role = roles.empty() ? Role::primary_insurer : roles[i];
    f.equity = 100.0;
    net.firms.push_back(f);
  }
  for (const auto& c : covers) {
    Contract k;
    k.reinsurer = c.reinsurer;
    k.reinsured = c.reinsured;
    k.layer = c.layer;
    k.rate = c.rate;
    k.deductible = c.deductible;
    k.cap = std::isinf(c.cap) ? Cap::infinite() : Cap::finite(c.cap);
    net.contracts.push_back(k);
  }
  net.shock = std::move(shock);
  return net;
}

/// Three-firm spiral: C covers A, A covers B, B covers C, all 100% with cap 10,
/// shock 5 on A.
inline ReinsuranceNetwork spiral() {
  return make({"A", "B", "C"}, {{2, 0, 1.0, 0.0, 10.0}, {0, 1, 1.0, 0.0, 10.0}, {1, 2, 1.0, 0.0, 10.0}},
              {5.0, 0.0, 0.0});
}

/// A and B cede 99% to each other; D takes 1% of B. Shock 10 on A.
inline ReinsuranceNetwork damped_cycle() {
  return make({"A", "B", "D"}, {{1, 0, 0.99, 0.0, kInf}, {0, 1, 0.99, 0.0, kInf}, {2, 1, 0.01, 0.0, kInf}},
              {10.0, 0.0, 0.0});
}

/// P (shock 5) is fully covered by A; A, B, C form a 100% cycle in which C's
/// cover of A has a deductible of exactly 5.
inline ReinsuranceNetwork multiplicity() {
  return make({"P", "A", "B", "C"},
              {{1, 0, 1.0, 0.0, kInf}, {3, 1, 1.0, 5.0, kInf}, {2, 3, 1.0, 0.0, kInf}, {1, 2, 1.0, 0.0, kInf}},
              {5.0, 0.0, 0.0, 0.0});
}

/// Three-firm 100% cycle without caps, shock 5 on A.
inline ReinsuranceNetwork hundred_percent_cycle(double shock = 5.0) {
  return make({"A", "B", "C"}, {{1, 0, 1.0, 0.0, kInf}, {2, 1, 1.0, 0.0, kInf}, {0, 2, 1.0, 0.0, kInf}},
              {shock, 0.0, 0.0});
}

/// Complete graph on three firms, every firm cedes half to each other firm.
inline ReinsuranceNetwork complete_three() {
  std::vector<Cover> covers;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) covers.push_back({i, j, 0.5, 0.0, kInf});
  return make({"A", "B", "C"}, covers, {1.0, 0.0, 0.0});
}

/// One firm with a two-layer tower: R1 takes 20..60, R2 takes 60..100.
inline ReinsuranceNetwork tower() {
  return make({"F", "R1", "R2"}, {{1, 0, 1.0, 20.0, 40.0, 0}, {2, 0, 1.0, 60.0, 40.0, 1}}, {100.0, 0.0, 0.0},
              {Role::primary_insurer, Role::reinsurer, Role::reinsurer});
}

struct RandomSpec {
  int max_firms = 20;
  double max_rho = 0.95;
  bool finite_caps = false;
  bool deductibles = true;
};

/// Random connected network: a random spanning tree of covers plus extra
/// random covers, per-firm rates normalized to at most 1 and the whole rate
/// vector rescaled so that rho(gamma X) <= max_rho.
inline ReinsuranceNetwork random_network(std::mt19937_64& rng, const RandomSpec& spec) {
  std::uniform_int_distribution<int> nd(2, spec.max_firms);
  const int n = nd(rng);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("F" + std::to_string(i));

  std::vector<std::vector<std::uint8_t>> has(n, std::vector<std::uint8_t>(n, 0));
  std::vector<Cover> covers;
  auto add = [&](int i, int j) {
    if (i == j || has[i][j]) return;
    has[i][j] = 1;
    covers.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), 0.05 + u01(rng), 0.0, kInf});
  };
  for (int v = 1; v < n; ++v) {
    const int w = std::uniform_int_distribution<int>(0, v - 1)(rng);
    if (u01(rng) < 0.5) add(v, w);
    else add(w, v);
  }
  const int extra = std::uniform_int_distribution<int>(0, 2 * n)(rng);
  for (int k = 0; k < extra; ++k)
    add(std::uniform_int_distribution<int>(0, n - 1)(rng), std::uniform_int_distribution<int>(0, n - 1)(rng));

  std::vector<double> colsum(n, 0.0);
  for (const auto& c : covers) colsum[c.reinsured] += c.rate;
  for (auto& c : covers) {
    const double target = 0.3 + 0.7 * u01(rng);
    c.rate = c.rate / colsum[c.reinsured] * target;
  }

  std::vector<double> shock(n);
  for (auto& s : shock) s = u01(rng) < 0.6 ? 100.0 * u01(rng) : 0.0;
  for (auto& c : covers) {
    if (spec.deductibles && u01(rng) < 0.5) c.deductible = 30.0 * u01(rng);
    if (spec.finite_caps && u01(rng) < 0.7) c.cap = 5.0 + 60.0 * u01(rng);
  }

  auto net = make(ids, covers, shock);
  const double rho = spectral_radius(build_line_graph(net).weighted());
  if (rho > spec.max_rho)
    for (auto& c : net.contracts) c.rate *= spec.max_rho / rho;
  return net;
}

/// Fixed-point check computed without the library's phi.
inline double fixed_point_gap(const LineGraphSystem& sys, const Eigen::VectorXd& ell) {
  const Eigen::MatrixXd X = sys.dense_X();
  double gap = 0.0;
  for (Eigen::Index e = 0; e < ell.size(); ++e) {
    double claims = sys.s(e) - sys.d(e);
    for (Eigen::Index f = 0; f < ell.size(); ++f) claims += X(e, f) * ell(f);
    const double pay = std::min(sys.c(e), std::max(0.0, sys.gamma(e) * claims));
    gap = std::max(gap, std::abs(pay - ell(e)));
  }
  return gap;
}

}  // namespace fixtures
