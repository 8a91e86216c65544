#pragma once

// Clearing of the firm-to-firm liability matrix. Each firm pays the lesser of
// what it owes and what it has: p = min(pbar, max(0, a + Pi^T p)) with
// a = e0 - sh and Pi the row-normalized liability matrix. The greatest
// solution is found by a decreasing Picard sequence from pbar, accelerated by
// solving the affine system implied by the current solvent / partial / zero
// payment split (fictitious default).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reinsurance/network.hpp"

namespace reinsurance {

enum class ShockSeniority {
  senior,               // the primary shock is paid before interfirm claims
  ignored_in_clearing,  // shock enters only the end-equity formula
};

struct ClearingOptions {
  double default_tol = 1e-6;  // default iff pbar - p > default_tol * (1 + pbar)
  double recovery = 1.0;      // fraction of a defaulter's resources that is distributed
  ShockSeniority seniority = ShockSeniority::senior;
  int max_picard_steps = 100'000;
};

struct ClearingResult {
  Eigen::VectorXd payments;     // p
  Eigen::VectorXd obligations;  // pbar = L 1
  Eigen::VectorXd alpha;        // p / pbar, 0 where pbar = 0
  std::vector<std::uint8_t> defaults;
  Eigen::VectorXd end_equity;   // e1
  std::vector<std::optional<double>> returns;  // e1 / e0, empty where e0 = 0
  int default_rounds = 0;       // times the default set grew
  int picard_steps = 0;

  std::size_t n_defaults() const { return static_cast<std::size_t>(std::count(defaults.begin(), defaults.end(), 1)); }
};

namespace detail {

enum class PayStatus : std::uint8_t { full, partial, zero };

inline void check_clearing_inputs(const Eigen::MatrixXd& L, const Eigen::VectorXd& e0, const Eigen::VectorXd& sh) {
  if (L.rows() != L.cols())
    throw std::invalid_argument("liability matrix must be square, got " + std::to_string(L.rows()) + "x" +
                                std::to_string(L.cols()));
  if (e0.size() != L.rows() || sh.size() != L.rows())
    throw std::invalid_argument("equity and shock vectors must have length " + std::to_string(L.rows()));
  if ((L.array() < 0.0).any()) throw std::invalid_argument("liability matrix has negative entries");
}

inline Eigen::VectorXd payout_fractions(const Eigen::VectorXd& p, const Eigen::VectorXd& pbar) {
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (pbar(i) > 0.0) alpha(i) = p(i) / pbar(i);
  return alpha;
}

}  // namespace detail

/// Greatest clearing payment vector.
inline ClearingResult clearing_vector(const Eigen::MatrixXd& L, const Eigen::VectorXd& e0, const Eigen::VectorXd& sh,
                                      const ClearingOptions& opt = {}) {
  detail::check_clearing_inputs(L, e0, sh);
  if (!(opt.recovery > 0.0 && opt.recovery <= 1.0)) throw std::invalid_argument("recovery must lie in (0, 1]");
  using detail::PayStatus;
  const Eigen::Index n = L.rows();

  ClearingResult res;
  res.obligations = L.rowwise().sum();
  const Eigen::VectorXd& pbar = res.obligations;
  Eigen::MatrixXd Pi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (pbar(i) > 0.0) Pi.row(i) = L.row(i) / pbar(i);
  const Eigen::VectorXd a = opt.seniority == ShockSeniority::senior ? Eigen::VectorXd(e0 - sh) : e0;

  auto value = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return a + Pi.transpose() * p; };
  auto classify = [&](const Eigen::VectorXd& v) {
    std::vector<PayStatus> st(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (v(i) >= pbar(i) || pbar(i) == 0.0) st[k] = PayStatus::full;
      else if (v(i) <= 0.0) st[k] = PayStatus::zero;
      else st[k] = PayStatus::partial;
    }
    return st;
  };
  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i)
      out(i) = v(i) >= pbar(i) ? pbar(i) : std::max(0.0, opt.recovery * v(i));
    return out;
  };
  // Payments implied by a status split: full payers pay pbar, zero payers
  // nothing, partial payers recovery * (a + Pi^T p).
  auto affine_solution = [&](const std::vector<PayStatus>& st) -> std::optional<Eigen::VectorXd> {
    std::vector<Eigen::Index> part;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto s = st[static_cast<std::size_t>(i)];
      if (s == PayStatus::full) p(i) = pbar(i);
      if (s == PayStatus::partial) part.push_back(i);
    }
    if (part.empty()) return p;
    const auto k = static_cast<Eigen::Index>(part.size());
    const Eigen::VectorXd base = a + Pi.transpose() * p;
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      rhs(r) = opt.recovery * base(part[static_cast<std::size_t>(r)]);
      for (Eigen::Index c = 0; c < k; ++c)
        A(r, c) -= opt.recovery * Pi(part[static_cast<std::size_t>(c)], part[static_cast<std::size_t>(r)]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (!(lu.rcond() > 1e-13)) return std::nullopt;
    const Eigen::VectorXd x = lu.solve(rhs);
    for (Eigen::Index r = 0; r < k; ++r) p(part[static_cast<std::size_t>(r)]) = x(r);
    return p;
  };
  auto default_count = [](const std::vector<PayStatus>& st) {
    return std::count_if(st.begin(), st.end(), [](PayStatus s) { return s != PayStatus::full; });
  };

  Eigen::VectorXd p = pbar;
  auto status = classify(value(p));
  auto defaulted = default_count(status);
  res.default_rounds = defaulted > 0 ? 1 : 0;
  for (;;) {
    if (defaulted == 0) break;  // everyone pays in full

    // The affine candidate is accepted only if it is a clearing vector with
    // the same split as the current iterate and does not exceed it; it then
    // equals the greatest clearing vector.
    if (auto cand = affine_solution(status)) {
      const Eigen::VectorXd v = value(*cand);
      const double scale = 1e-12 * (1.0 + pbar.cwiseAbs().maxCoeff());
      if (classify(v) == status && ((*cand - p).array() <= scale).all() &&
          ((apply(v) - *cand).cwiseAbs().array() <= scale).all()) {
        p = apply(v);
        break;
      }
    }
    if (res.picard_steps >= opt.max_picard_steps)
      throw std::runtime_error("clearing did not converge within " + std::to_string(opt.max_picard_steps) +
                               " steps");
    Eigen::VectorXd next = apply(value(p)).cwiseMin(p);
    ++res.picard_steps;
    const bool stalled = (next - p).cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + pbar.cwiseAbs().maxCoeff());
    p = std::move(next);
    status = classify(value(p));
    const auto now = default_count(status);
    if (now > defaulted) ++res.default_rounds;
    defaulted = now;
    if (stalled) break;
  }

  res.payments = p;
  res.alpha = detail::payout_fractions(p, pbar);
  res.defaults.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    res.defaults[static_cast<std::size_t>(i)] = pbar(i) - p(i) > opt.default_tol * (1.0 + pbar(i));
  return res;
}

/// e1 = e0 - p + L^T alpha - sh, and returns e1 / e0 where e0 > 0.
inline void end_equities(const Eigen::MatrixXd& L, ClearingResult& res, const Eigen::VectorXd& e0,
                         const Eigen::VectorXd& sh) {
  detail::check_clearing_inputs(L, e0, sh);
  res.end_equity = e0 - res.payments + L.transpose() * res.alpha - sh;
  res.returns.assign(static_cast<std::size_t>(e0.size()), std::nullopt);
  for (Eigen::Index i = 0; i < e0.size(); ++i)
    if (e0(i) > 0.0) res.returns[static_cast<std::size_t>(i)] = res.end_equity(i) / e0(i);
}

/// Clearing followed by end equities.
inline ClearingResult clear(const Eigen::MatrixXd& L, const Eigen::VectorXd& e0, const Eigen::VectorXd& sh,
                            const ClearingOptions& opt = {}) {
  auto res = clearing_vector(L, e0, sh, opt);
  end_equities(L, res, e0, sh);
  return res;
}

/// Total primary-insurer losses left uncovered: sum of max(0, -e1) over
/// primary insurers. Reinsurers never contribute.
inline double uncovered_primary_liabilities(const ClearingResult& res, const std::vector<Firm>& firms) {
  if (static_cast<std::size_t>(res.end_equity.size()) != firms.size())
    throw std::invalid_argument("firm list does not match clearing result");
  double total = 0.0;
  for (std::size_t i = 0; i < firms.size(); ++i)
    if (firms[i].role == Role::primary_insurer) total += std::max(0.0, -res.end_equity(static_cast<Eigen::Index>(i)));
  return total;
}

}  // namespace reinsurance
