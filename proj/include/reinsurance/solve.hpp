#pragma once

#include <algorithm>
#include <cstddef>
#include <string>

#include "reinsurance/diagnostics.hpp"
#include "reinsurance/liability.hpp"

namespace reinsurance {

struct AutoSolveResult {
  LiabilitySolution solution;
  StructureReport structure;
  bool cross_checked = false;  // Algorithm 3 was run against the result
};

/// Picks an algorithm from the structure of the system: the linear solver for
/// cap-free systems with rho(gamma X) < 1, otherwise fixed-point iteration,
/// cross-checked by Algorithm 3 when uniqueness is certified.
inline AutoSolveResult solve_auto(const LineGraphSystem& sys, const SolverOptions& opt = {},
                                  std::size_t omega_limit = kDefaultOmegaLimit) {
  AutoSolveResult out;
  out.structure = omega_certificate(sys, omega_limit);

  if (sys.all_caps_infinite() && out.structure.rho_full < 1.0) {
    out.solution = solve_no_caps(sys, opt);
    return out;
  }

  out.solution = solve_fixed_point_iteration(sys, opt);
  if (out.solution.converged() && certifies_uniqueness(out.structure)) {
    SolverOptions inner = opt;
    inner.cross_check = false;
    try {
      const auto check = solve_with_caps(sys, inner);
      out.cross_checked = true;
      auto disagrees = [&check](const LiabilitySolution& s) {
        return !check.converged() ||
               detail::max_abs(check.ell - s.ell) > 1e-8 * (1.0 + detail::max_abs(s.ell));
      };
      if (disagrees(out.solution)) {
        // A slowly contracting system can stop Algorithm 1 early; tighten
        // before calling it a disagreement.
        SolverOptions strict = opt;
        strict.tol = opt.cross_check_tol;
        strict.max_iters = std::max(opt.max_iters.value_or(0), 100 * static_cast<int>(sys.size()) + 100'000);
        auto refined = solve_fixed_point_iteration(sys, strict);
        if (refined.converged()) out.solution = std::move(refined);
      }
      if (disagrees(out.solution)) {
        out.solution.multiplicity_warning = true;
        out.solution.note = "Algorithm 3 cross-check disagrees with fixed-point iteration";
      }
    } catch (const StructuralFailure& err) {
      out.solution.note = std::string("Algorithm 3 cross-check skipped: ") + err.what();
    }
  }
  return out;
}

}  // namespace reinsurance
