#pragma once

// Structural risk checks on the contract line graph: spectral certificates of
// uniqueness, 100% cycle detection, and (for small systems) enumeration of the
// feasible deductible/cap activation patterns and the matrix Omega, the
// element-wise maximum of the affine pieces of the liability operator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "reinsurance/liability.hpp"
#include "reinsurance/line_graph.hpp"
#include "reinsurance/spectral.hpp"

namespace reinsurance {

inline constexpr double kCycleTolerance = 1e-9;
inline constexpr std::size_t kDefaultOmegaLimit = 14;

enum class Certificate { unique_for_all_shocks, unique_by_omega, least_and_greatest_exist, no_certificate };

inline const char* to_string(Certificate c) {
  switch (c) {
    case Certificate::unique_for_all_shocks: return "unique-for-all-shocks";
    case Certificate::unique_by_omega: return "unique-by-omega";
    case Certificate::least_and_greatest_exist: return "least-and-greatest-exist";
    case Certificate::no_certificate: return "no-certificate";
  }
  return "unknown";
}

struct CycleReport {
  bool detected = false;
  double radius = 0.0;
  std::vector<std::size_t> component;  // contracts of the strongly connected block attaining the radius
};

struct StructureReport {
  double rho_full = 0.0;
  double rho_infinite_caps = 0.0;
  std::optional<double> rho_omega;
  Certificate certificate = Certificate::no_certificate;
  bool omega_skipped = false;
  std::size_t feasible_patterns = 0;  // size of the enumerated set, 0 when skipped
  CycleReport cycle;
};

/// Raised when enumeration is requested on a system above the size limit.
class EnumerationTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// An activation pattern together with a liability vector realizing it.
struct FeasibleActivation {
  ActivationState state;
  Eigen::VectorXd witness;
};

namespace detail {

/// Restriction of gamma X to the contracts whose cap is infinite.
inline SparseRowMatrix infinite_cap_block(const LineGraphSystem& sys) {
  std::vector<Eigen::Index> keep;
  std::vector<Eigen::Index> local(sys.size(), -1);
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(sys.size()); ++e) {
    if (std::isinf(sys.c(e))) {
      local[static_cast<std::size_t>(e)] = static_cast<Eigen::Index>(keep.size());
      keep.push_back(e);
    }
  }
  const auto k = static_cast<Eigen::Index>(keep.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < k; ++i)
    for (SparseRowMatrix::InnerIterator it(sys.X, keep[static_cast<std::size_t>(i)]); it; ++it)
      if (auto j = local[static_cast<std::size_t>(it.col())]; j >= 0)
        trips.emplace_back(i, j, sys.gamma(keep[static_cast<std::size_t>(i)]));
  SparseRowMatrix out(k, k);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

/// Smallest claims level u with gamma * (u - d) >= c, matching the floating
/// point evaluation used by activation_state.
inline double cap_threshold(double gamma, double d, double c) {
  auto hits = [&](double u) { return gamma * (u - d) >= c; };
  double u = d + c / gamma;
  while (!hits(u)) u = std::nextafter(u, std::numeric_limits<double>::infinity());
  for (;;) {
    const double lower = std::nextafter(u, -std::numeric_limits<double>::infinity());
    if (!hits(lower)) break;
    u = lower;
  }
  return u;
}

}  // namespace detail

/// Checks whether gamma X has spectral radius at least 1 - 1e-9, which is the
/// signature of a contract cycle recirculating 100% of losses.
inline CycleReport detect_hundred_percent_cycle(const LineGraphSystem& sys) {
  const auto res = spectral_radius_detail(sys.weighted());
  CycleReport rep;
  rep.radius = res.radius;
  rep.detected = res.radius >= 1.0 - kCycleTolerance;
  for (auto e : res.component) rep.component.push_back(static_cast<std::size_t>(e));
  return rep;
}

/// Every activation pattern (B, C) whose constant region contains some l >= 0.
///
/// The excess claims of every contract covering firm j equal u_j - d_e with
/// u_j = sh_j + (liabilities owed by j). The amount j owes ranges over
/// [0, inf) when j writes any contract and is 0 otherwise, independently per
/// firm. Each contract's pattern is a nondecreasing step function of u_j, so
/// the reachable patterns of a firm are its patterns at the lower end of the
/// range and at every breakpoint above it, and the feasible set is the
/// product over firms. This decides feasibility exactly without a general
/// linear program.
inline std::vector<FeasibleActivation> enumerate_feasible_activations(const LineGraphSystem& sys,
                                                                      std::size_t limit_m = kDefaultOmegaLimit) {
  const std::size_t m = sys.size();
  if (m > limit_m)
    throw EnumerationTooLarge("activation enumeration refused: " + std::to_string(m) + " contracts exceeds limit " +
                              std::to_string(limit_m) + "; use the spectral radius certificate instead");

  // Contracts are sorted by reinsured firm, so each firm's cover is contiguous.
  struct Group {
    FirmIndex firm;
    std::size_t begin, end;
    double shock;
    std::optional<std::size_t> writes;  // a contract written by this firm
  };
  std::vector<Group> groups;
  for (std::size_t e = 0; e < m; ++e) {
    if (groups.empty() || groups.back().firm != sys.edges[e].reinsured)
      groups.push_back({sys.edges[e].reinsured, e, e, sys.s(static_cast<Eigen::Index>(e)), std::nullopt});
    groups.back().end = e + 1;
  }
  for (auto& g : groups)
    for (std::size_t f = 0; f < m; ++f)
      if (sys.edges[f].reinsurer == g.firm) {
        g.writes = f;
        break;
      }

  struct Option {
    std::vector<std::uint8_t> B, C;
    double u;
  };
  std::vector<std::vector<Option>> per_group;
  for (const auto& g : groups) {
    std::vector<double> points{g.shock};
    if (g.writes) {
      for (std::size_t e = g.begin; e < g.end; ++e) {
        const auto i = static_cast<Eigen::Index>(e);
        points.push_back(sys.d(i));
        if (std::isfinite(sys.c(i))) points.push_back(detail::cap_threshold(sys.gamma(i), sys.d(i), sys.c(i)));
      }
    }
    std::sort(points.begin(), points.end());
    std::vector<Option> options;
    std::set<std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>>> seen;
    for (double u : points) {
      if (u < g.shock) continue;
      Option opt{{}, {}, u};
      for (std::size_t e = g.begin; e < g.end; ++e) {
        const auto i = static_cast<Eigen::Index>(e);
        const double z = u - sys.d(i);
        opt.B.push_back(z >= 0.0);
        opt.C.push_back(sys.gamma(i) * z >= sys.c(i));
      }
      if (seen.insert({opt.B, opt.C}).second) options.push_back(std::move(opt));
    }
    per_group.push_back(std::move(options));
  }

  std::vector<FeasibleActivation> out;
  std::vector<std::size_t> pick(groups.size(), 0);
  for (;;) {
    FeasibleActivation fa;
    fa.state.B.assign(m, 0);
    fa.state.C.assign(m, 0);
    fa.witness = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& opt = per_group[g][pick[g]];
      for (std::size_t k = 0; k < opt.B.size(); ++k) {
        fa.state.B[groups[g].begin + k] = opt.B[k];
        fa.state.C[groups[g].begin + k] = opt.C[k];
      }
      if (groups[g].writes && opt.u > groups[g].shock) {
        // Choose y with fl(y + shock) == u.
        double y = opt.u - groups[g].shock;
        while (y + groups[g].shock < opt.u) y = std::nextafter(y, std::numeric_limits<double>::infinity());
        while (y > 0.0 && std::nextafter(y, 0.0) + groups[g].shock >= opt.u) y = std::nextafter(y, 0.0);
        fa.witness(static_cast<Eigen::Index>(*groups[g].writes)) = y;
      }
    }
    out.push_back(std::move(fa));

    std::size_t g = 0;
    for (; g < groups.size(); ++g) {
      if (++pick[g] < per_group[g].size()) break;
      pick[g] = 0;
    }
    if (g == groups.size()) break;
  }
  std::sort(out.begin(), out.end(),
            [](const FeasibleActivation& a, const FeasibleActivation& b) { return a.state < b.state; });
  return out;
}

/// Omega: element-wise maximum of (I - C) gamma B X (I - C) over the given
/// activation patterns. Contracts absent from every pattern's active set get
/// zero rows and columns.
inline Eigen::MatrixXd omega_matrix(const LineGraphSystem& sys, const std::vector<FeasibleActivation>& patterns) {
  const auto m = static_cast<Eigen::Index>(sys.size());
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(m, m);
  for (const auto& p : patterns) omega = omega.cwiseMax(Eigen::MatrixXd(detail::active_operator(sys, p.state)));
  return omega;
}

/// Spectral certificates for the system. Precedence: rho(gamma X) < 1, then
/// rho(Omega) < 1 when the system is small enough to enumerate, then the
/// infinite-cap subsystem radius < 1 (least and greatest fixed points exist).
inline StructureReport omega_certificate(const LineGraphSystem& sys, std::size_t limit_m = kDefaultOmegaLimit) {
  StructureReport rep;
  rep.cycle = detect_hundred_percent_cycle(sys);
  rep.rho_full = rep.cycle.radius;
  rep.rho_infinite_caps = spectral_radius(detail::infinite_cap_block(sys));

  if (sys.size() <= limit_m) {
    const auto patterns = enumerate_feasible_activations(sys, limit_m);
    rep.feasible_patterns = patterns.size();
    rep.rho_omega = spectral_radius(omega_matrix(sys, patterns));
  } else {
    rep.omega_skipped = true;
  }

  if (rep.rho_full < 1.0)
    rep.certificate = Certificate::unique_for_all_shocks;
  else if (rep.rho_omega && *rep.rho_omega < 1.0)
    rep.certificate = Certificate::unique_by_omega;
  else if (rep.rho_infinite_caps < 1.0)
    rep.certificate = Certificate::least_and_greatest_exist;
  else
    rep.certificate = Certificate::no_certificate;
  return rep;
}

/// True when the report guarantees a unique fixed point.
inline bool certifies_uniqueness(const StructureReport& rep) {
  return rep.certificate == Certificate::unique_for_all_shocks || rep.certificate == Certificate::unique_by_omega;
}

}  // namespace reinsurance
