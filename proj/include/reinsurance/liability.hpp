#pragma once

// Equilibrium contract liabilities. The liability operator is
//
//   phi(l) = min(c, max(0, gamma * (X l + s - d)))
//
// and the economically meaningful equilibrium is its least fixed point. Three
// solvers are provided: plain fixed-point iteration from zero, an iterative
// linear solver for systems without caps that grows the set of activated
// contracts, and an iterative linear solver for capped systems that shrinks
// (deductible, cap) activations downward from the all-activated state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "reinsurance/line_graph.hpp"
#include "reinsurance/linear_solve.hpp"
#include "reinsurance/spectral.hpp"

namespace reinsurance {

/// Deductible (B) and cap (C) activation indicators, one entry per contract.
struct ActivationState {
  std::vector<std::uint8_t> B;
  std::vector<std::uint8_t> C;

  friend bool operator==(const ActivationState&, const ActivationState&) = default;
  friend auto operator<=>(const ActivationState&, const ActivationState&) = default;
};

enum class SolverStatus { converged, max_iters_exceeded, diverging, not_a_fixed_point };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iters_exceeded: return "max-iters-exceeded";
    case SolverStatus::diverging: return "diverging";
    case SolverStatus::not_a_fixed_point: return "not-a-fixed-point";
  }
  return "unknown";
}

enum class Algorithm { fixed_point_iteration = 1, no_caps = 2, with_caps = 3 };

struct LiabilitySolution {
  Eigen::VectorXd ell;
  ActivationState activation;
  int iterations = 0;  // Algorithm 1: phi evaluations; Algorithm 2: linear solves; Algorithm 3: (B, C) states
  int linear_solves = 0;
  SolverStatus status = SolverStatus::converged;
  double residual = 0.0;  // max-norm of ell - phi(ell)
  Algorithm algorithm = Algorithm::fixed_point_iteration;
  bool multiplicity_warning = false;
  std::string note;

  bool converged() const { return status == SolverStatus::converged; }
};

struct SolverOptions {
  double tol = 1e-9;                 // relative: residual <= tol * (1 + |ell|_inf)
  std::optional<int> max_iters;      // default 10 m + 1000
  double divergence_factor = 1e6;    // ceiling = sum(s) * factor
  bool cross_check = true;           // Algorithm 3: compare against Algorithm 1
  double cross_check_tol = 1e-12;    // tolerance of that Algorithm 1 run
  LinearSolveOptions linear;
};

/// Raised when a linear subsystem is singular. Carries the contracts that
/// were active in the failing step.
class StructuralFailure : public std::runtime_error {
 public:
  StructuralFailure(const std::string& what, std::vector<std::size_t> active)
      : std::runtime_error(what), active_(std::move(active)) {}
  const std::vector<std::size_t>& active_contracts() const { return active_; }

 private:
  std::vector<std::size_t> active_;
};

namespace detail {

inline Eigen::VectorXd excess_claims(const Eigen::VectorXd& ell, const LineGraphSystem& sys) {
  return sys.X * ell + sys.s - sys.d;
}

inline double threshold(double tol, const Eigen::VectorXd& ell) {
  return tol * (1.0 + (ell.size() ? ell.cwiseAbs().maxCoeff() : 0.0));
}

inline double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline void require_length(const Eigen::VectorXd& ell, const LineGraphSystem& sys) {
  if (static_cast<std::size_t>(ell.size()) != sys.size())
    throw std::invalid_argument("liability vector has length " + std::to_string(ell.size()) +
                                ", expected " + std::to_string(sys.size()));
}

/// Rows of gamma X kept where B = 1 and C = 0, columns kept where C = 0.
inline SparseRowMatrix active_operator(const LineGraphSystem& sys, const ActivationState& act) {
  const auto m = static_cast<Eigen::Index>(sys.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index e = 0; e < m; ++e) {
    const auto ue = static_cast<std::size_t>(e);
    if (!act.B[ue] || act.C[ue]) continue;
    for (SparseRowMatrix::InnerIterator it(sys.X, e); it; ++it)
      if (!act.C[static_cast<std::size_t>(it.col())]) trips.emplace_back(e, it.col(), sys.gamma(e));
  }
  SparseRowMatrix A(m, m);
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

inline std::string describe_active(const LineGraphSystem& sys, const std::vector<std::size_t>& active) {
  std::string out;
  for (std::size_t e : active) {
    const auto& k = sys.edges[e];
    if (!out.empty()) out += ", ";
    out += "#" + std::to_string(e) + "(" + std::to_string(k.reinsurer) + "->" + std::to_string(k.reinsured) +
           " layer " + std::to_string(k.layer) + ")";
  }
  return out.empty() ? "(none)" : out;
}

}  // namespace detail

inline Eigen::VectorXd phi(const Eigen::VectorXd& ell, const LineGraphSystem& sys) {
  detail::require_length(ell, sys);
  const Eigen::ArrayXd raw = sys.gamma.array() * detail::excess_claims(ell, sys).array();
  return raw.max(0.0).min(sys.c.array()).matrix();
}

/// B_e = 1 iff (X l + s - d)_e >= 0; C_e = 1 iff gamma_e (X l + s - d)_e >= c_e.
/// Exact ties count as activated.
inline ActivationState activation_state(const Eigen::VectorXd& ell, const LineGraphSystem& sys) {
  detail::require_length(ell, sys);
  const Eigen::VectorXd z = detail::excess_claims(ell, sys);
  ActivationState act;
  act.B.resize(sys.size());
  act.C.resize(sys.size());
  for (std::size_t e = 0; e < sys.size(); ++e) {
    const auto i = static_cast<Eigen::Index>(e);
    act.B[e] = z(i) >= 0.0;
    act.C[e] = sys.gamma(i) * z(i) >= sys.c(i);
  }
  return act;
}

inline double residual(const Eigen::VectorXd& ell, const LineGraphSystem& sys) {
  return detail::max_abs(phi(ell, sys) - ell);
}

/// Algorithm 1: l_t = phi(l_{t-1}) from l_0 = 0. Iterates are nondecreasing
/// and converge to the least fixed point when one exists. Divergence is
/// declared when a coordinate passes sum(s) * divergence_factor while still
/// rising, or earlier when the activation pattern has frozen, the increments
/// have stopped shrinking, and the active linear operator has spectral radius
/// at least one (an activated 100% cycle).
inline LiabilitySolution solve_fixed_point_iteration(const LineGraphSystem& sys, const SolverOptions& opt = {}) {
  if (!(opt.tol >= 0.0)) throw std::invalid_argument("tolerance must be nonnegative");
  const auto m = static_cast<Eigen::Index>(sys.size());
  const int max_iters = opt.max_iters.value_or(10 * static_cast<int>(m) + 1000);
  const double ceiling = sys.s.sum() * opt.divergence_factor;
  const int probe_every = std::max(64, 2 * static_cast<int>(m) + 2);

  LiabilitySolution sol;
  sol.algorithm = Algorithm::fixed_point_iteration;
  sol.ell = Eigen::VectorXd::Zero(m);

  std::optional<ActivationState> probe_state;
  double probe_step = 0.0;

  for (int t = 1; t <= max_iters; ++t) {
    Eigen::VectorXd next = phi(sol.ell, sys);
    const double step = detail::max_abs(next - sol.ell);
    sol.iterations = t;
    sol.residual = step;
    if (step <= detail::threshold(opt.tol, sol.ell)) {
      sol.activation = activation_state(sol.ell, sys);
      sol.status = SolverStatus::converged;
      return sol;
    }
    sol.ell = std::move(next);

    if (sol.ell.maxCoeff() > ceiling) {
      sol.activation = activation_state(sol.ell, sys);
      sol.status = SolverStatus::diverging;
      sol.note = "liabilities exceeded the divergence ceiling while still increasing";
      return sol;
    }
    if (t % probe_every == 0) {
      auto act = activation_state(sol.ell, sys);
      if (probe_state && *probe_state == act && step >= probe_step * (1.0 - 1e-9) &&
          spectral_radius(detail::active_operator(sys, act)) >= 1.0 - 1e-9) {
        sol.activation = std::move(act);
        sol.status = SolverStatus::diverging;
        sol.note = "activated subsystem has spectral radius >= 1 and increments are not decaying";
        return sol;
      }
      probe_state = std::move(act);
      probe_step = step;
    }
  }
  sol.activation = activation_state(sol.ell, sys);
  sol.status = SolverStatus::max_iters_exceeded;
  return sol;
}

/// Algorithm 2, for systems whose caps are all infinite. Solves
/// l = gamma B (s + X l - d) for the current activation B, recomputes B from
/// the solution, and stops when B is unchanged. B only grows, so at most m
/// linear solves are needed; with zero deductibles a single solve suffices.
inline LiabilitySolution solve_no_caps(const LineGraphSystem& sys, const SolverOptions& opt = {}) {
  if (!sys.all_caps_infinite()) throw std::invalid_argument("solve_no_caps requires every cap to be infinite");
  const auto m = static_cast<Eigen::Index>(sys.size());

  LiabilitySolution sol;
  sol.algorithm = Algorithm::no_caps;
  sol.ell = Eigen::VectorXd::Zero(m);

  Eigen::VectorXd z = sys.s - sys.d;
  std::vector<std::uint8_t> B(static_cast<std::size_t>(m));
  for (Eigen::Index e = 0; e < m; ++e) B[static_cast<std::size_t>(e)] = z(e) >= 0.0;

  const int limit = static_cast<int>(std::max<Eigen::Index>(m, 1));
  for (;;) {
    std::vector<std::size_t> active;
    Eigen::VectorXd bvec(m);
    for (Eigen::Index e = 0; e < m; ++e) {
      bvec(e) = B[static_cast<std::size_t>(e)];
      if (B[static_cast<std::size_t>(e)]) active.push_back(static_cast<std::size_t>(e));
    }

    if (active.empty()) {
      sol.ell.setZero();
    } else {
      const Eigen::VectorXd gb = sys.gamma.cwiseProduct(bvec);
      const SparseRowMatrix M = gb.asDiagonal() * sys.X;
      const Eigen::VectorXd rhs = gb.cwiseProduct(sys.s - sys.d);
      try {
        sol.ell = solve_identity_minus(M, rhs, opt.linear);
      } catch (const SingularSystem& err) {
        throw StructuralFailure(std::string("structural failure: ") + err.what() +
                                    "; active contracts: " + detail::describe_active(sys, active),
                                std::move(active));
      }
      // Round-off can leave -0 or -1e-17 on exactly-met deductibles.
      sol.ell = sol.ell.cwiseMax(0.0);
    }
    ++sol.iterations;
    ++sol.linear_solves;

    z = detail::excess_claims(sol.ell, sys);
    std::vector<std::uint8_t> next(static_cast<std::size_t>(m));
    for (Eigen::Index e = 0; e < m; ++e) next[static_cast<std::size_t>(e)] = z(e) >= 0.0;
    if (next == B) break;
    if (sol.iterations >= limit) {
      sol.status = SolverStatus::max_iters_exceeded;
      sol.note = "activation set did not stabilize within m linear solves";
      break;
    }
    B = std::move(next);
  }

  sol.activation = activation_state(sol.ell, sys);
  sol.residual = residual(sol.ell, sys);
  if (sol.status == SolverStatus::converged && sol.residual > detail::threshold(opt.tol, sol.ell))
    sol.status = SolverStatus::not_a_fixed_point;
  return sol;
}

namespace detail {

/// Contracts below their cap in `C` with their local index, and the claims
/// each one sees from the capped contracts.
struct FreeSubsystem {
  std::vector<Eigen::Index> idx;
  std::vector<Eigen::Index> local;  // -1 for capped contracts
  Eigen::VectorXd capped;           // cap where C is set, 0 elsewhere
  Eigen::VectorXd v;                // s + X capped - d
};

inline FreeSubsystem free_subsystem(const LineGraphSystem& sys, const std::vector<std::uint8_t>& C) {
  const auto m = static_cast<Eigen::Index>(sys.size());
  FreeSubsystem f;
  f.local.assign(sys.size(), -1);
  f.capped = Eigen::VectorXd::Zero(m);
  for (Eigen::Index e = 0; e < m; ++e) {
    if (C[static_cast<std::size_t>(e)]) {
      f.capped(e) = sys.c(e);
    } else {
      f.local[static_cast<std::size_t>(e)] = static_cast<Eigen::Index>(f.idx.size());
      f.idx.push_back(e);
    }
  }
  f.v = sys.s + sys.X * f.capped - sys.d;
  return f;
}

/// Solves l = gamma B (X l + v) on the free contracts.
inline Eigen::VectorXd solve_free(const LineGraphSystem& sys, const FreeSubsystem& f,
                                  const std::vector<std::uint8_t>& B, const LinearSolveOptions& lin) {
  const auto k = static_cast<Eigen::Index>(f.idx.size());
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs(k);
  std::vector<std::size_t> active;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index e = f.idx[static_cast<std::size_t>(i)];
    const double gb = B[static_cast<std::size_t>(e)] ? sys.gamma(e) : 0.0;
    rhs(i) = gb * f.v(e);
    if (gb == 0.0) continue;
    active.push_back(static_cast<std::size_t>(e));
    for (SparseRowMatrix::InnerIterator it(sys.X, e); it; ++it)
      if (auto j = f.local[static_cast<std::size_t>(it.col())]; j >= 0) trips.emplace_back(i, j, gb);
  }
  SparseRowMatrix M(k, k);
  M.setFromTriplets(trips.begin(), trips.end());
  try {
    return solve_identity_minus(M, rhs, lin);
  } catch (const SingularSystem& err) {
    throw StructuralFailure(std::string("structural failure: ") + err.what() +
                                "; active contracts: " + describe_active(sys, active),
                            std::move(active));
  }
}

inline Eigen::VectorXd assemble(const FreeSubsystem& f, const Eigen::VectorXd& sub) {
  Eigen::VectorXd ell = f.capped;
  for (std::size_t i = 0; i < f.idx.size(); ++i)
    ell(f.idx[i]) = std::max(sub(static_cast<Eigen::Index>(i)), 0.0);
  return ell;
}

/// Solution of l = gamma max(0, X l + v) on the free contracts with the
/// capped ones held at their caps, grown from below as in Algorithm 2.
inline Eigen::VectorXd solve_free_from_below(const LineGraphSystem& sys, const FreeSubsystem& f,
                                             const LinearSolveOptions& lin, int& solves) {
  std::vector<std::uint8_t> B(sys.size(), 0);
  for (auto e : f.idx) B[static_cast<std::size_t>(e)] = f.v(e) >= 0.0;
  Eigen::VectorXd ell = f.capped;
  for (std::size_t round = 0; round <= f.idx.size(); ++round) {
    ell = assemble(f, solve_free(sys, f, B, lin));
    ++solves;
    const Eigen::VectorXd z = excess_claims(ell, sys);
    bool grew = false;
    for (auto e : f.idx) {
      auto& b = B[static_cast<std::size_t>(e)];
      if (!b && z(e) >= 0.0) b = grew = true;
    }
    if (!grew) break;
  }
  return ell;
}

}  // namespace detail

/// Algorithm 3, for systems with deductibles and caps. Starts from every
/// contract activated and every finite cap reached, solves the linear system
/// on the contracts below their caps, and lowers (B, C) until stable. The
/// result is the greatest fixed point reachable from above, which equals the
/// least fixed point only when the fixed point is unique; with
/// `opt.cross_check` the result is compared to Algorithm 1 and a mismatch sets
/// `multiplicity_warning`.
///
/// A linear solve with B set on a contract whose deductible is not met gives
/// it a negative value, which lowers the claims on other contracts and can
/// push the iterate below the fixed point. Such a step, and a step whose
/// activation would have to rise, is redone by growing B from below on the
/// free contracts with C held fixed; that solution lies above every fixed
/// point consistent with C.
inline LiabilitySolution solve_with_caps(const LineGraphSystem& sys, const SolverOptions& opt = {}) {
  const auto m = static_cast<Eigen::Index>(sys.size());
  const auto um = static_cast<std::size_t>(m);

  LiabilitySolution sol;
  sol.algorithm = Algorithm::with_caps;
  sol.ell = Eigen::VectorXd::Zero(m);

  ActivationState state;
  state.B.assign(um, 1);
  state.C.resize(um);
  for (std::size_t e = 0; e < um; ++e) state.C[e] = std::isfinite(sys.c(static_cast<Eigen::Index>(e)));

  const int bound = 2 * static_cast<int>(m) + 1;
  while (m > 0) {
    const auto f = detail::free_subsystem(sys, state.C);
    ++sol.iterations;
    bool from_below = false;
    if (!f.idx.empty()) {
      const Eigen::VectorXd sub = detail::solve_free(sys, f, state.B, opt.linear);
      ++sol.linear_solves;
      const double floor = -1e-12 * (1.0 + detail::max_abs(sub));
      from_below = (sub.array() < floor).any();
      sol.ell = from_below ? detail::solve_free_from_below(sys, f, opt.linear, sol.linear_solves)
                           : detail::assemble(f, sub);
    } else {
      sol.ell = f.capped;
    }

    ActivationState next = activation_state(sol.ell, sys);
    if (next == state) break;
    auto lower = [&state](ActivationState& a) {
      for (std::size_t e = 0; e < a.B.size(); ++e) {
        a.B[e] &= state.B[e];
        a.C[e] &= state.C[e];
      }
    };
    lower(next);
    if (next == state && !from_below && !f.idx.empty()) {
      sol.ell = detail::solve_free_from_below(sys, f, opt.linear, sol.linear_solves);
      next = activation_state(sol.ell, sys);
      if (next == state) break;
      lower(next);
    }
    if (next == state || sol.iterations >= bound) {
      sol.note = "activation sequence stopped decreasing before reaching a consistent state";
      break;
    }
    state = std::move(next);
  }

  sol.activation = activation_state(sol.ell, sys);
  sol.residual = residual(sol.ell, sys);
  if (sol.residual > detail::threshold(opt.tol, sol.ell)) sol.status = SolverStatus::not_a_fixed_point;

  if (opt.cross_check && sol.status == SolverStatus::converged) {
    SolverOptions strict = opt;
    strict.tol = opt.cross_check_tol;
    strict.max_iters = std::max(opt.max_iters.value_or(0), 100 * static_cast<int>(m) + 100'000);
    const auto least = solve_fixed_point_iteration(sys, strict);
    if (!least.converged() ||
        detail::max_abs(least.ell - sol.ell) > 1e-8 * (1.0 + detail::max_abs(sol.ell))) {
      sol.multiplicity_warning = true;
      sol.note = "result differs from the least fixed point found by fixed-point iteration";
    }
  }
  return sol;
}

}  // namespace reinsurance
