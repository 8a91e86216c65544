#pragma once

// Firm-level representation of a reinsurance network: firms, contracts
// (edge list, one entry per reinsurer/reinsured/layer), and structural checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace reinsurance {

using FirmIndex = std::size_t;

enum class Role { primary_insurer, reinsurer };

inline const char* to_string(Role role) {
  return role == Role::primary_insurer ? "primary_insurer" : "reinsurer";
}

/// Contract cap: either a finite positive amount or "unlimited". The
/// unlimited state is stored as IEEE +inf so that `min(x, cap)` and the
/// activation test `x >= cap` need no special casing; it is never a large
/// finite number.
class Cap {
 public:
  constexpr Cap() = default;

  static constexpr Cap infinite() { return Cap(std::numeric_limits<double>::infinity()); }
  static constexpr Cap finite(double amount) { return Cap(amount); }

  constexpr bool is_infinite() const { return value_ == std::numeric_limits<double>::infinity(); }
  constexpr bool is_finite() const { return !is_infinite(); }
  constexpr double value() const { return value_; }

  friend constexpr bool operator==(Cap, Cap) = default;

 private:
  constexpr explicit Cap(double v) : value_(v) {}
  double value_ = std::numeric_limits<double>::infinity();
};

struct Firm {
  std::string id;
  Role role = Role::primary_insurer;
  double equity = 0.0;
  double primary_premiums = 0.0;
  double foreign_reins_premiums = 0.0;
};

/// One reinsurance contract: `reinsurer` covers `reinsured` in `layer`.
/// The reinsurer pays min(cap, max(0, rate * (claims - deductible))) where
/// claims are the reinsured firm's gross claims.
struct Contract {
  FirmIndex reinsurer = 0;
  FirmIndex reinsured = 0;
  int layer = 0;
  double rate = 0.0;
  double deductible = 0.0;
  Cap cap = Cap::infinite();
  double premium_ceded = 0.0;
};

struct ReinsuranceNetwork {
  std::vector<Firm> firms;
  std::vector<Contract> contracts;
  std::vector<double> shock;  // per firm, length n

  std::size_t size() const { return firms.size(); }
};

/// Builds a network from the dense matrix form (Gamma, DD, CP, sh). A contract
/// is created wherever any of the three matrices is nonzero, so pattern
/// mismatches survive construction and are reported by `validate_network`.
/// `cp` uses +inf for unlimited caps and 0 for "no contract".
inline ReinsuranceNetwork from_matrices(std::vector<Firm> firms, const Eigen::MatrixXd& gamma,
                                        const Eigen::MatrixXd& dd, const Eigen::MatrixXd& cp,
                                        std::vector<double> shock) {
  const auto n = static_cast<Eigen::Index>(firms.size());
  auto check = [n](const Eigen::MatrixXd& m, const char* name) {
    if (m.rows() != n || m.cols() != n)
      throw std::invalid_argument(std::string("matrix ") + name + " is " +
                                  std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                  ", expected " + std::to_string(n) + "x" + std::to_string(n));
  };
  check(gamma, "Gamma");
  check(dd, "DD");
  check(cp, "CP");
  if (shock.size() != firms.size())
    throw std::invalid_argument("shock vector length " + std::to_string(shock.size()) +
                                " does not match firm count " + std::to_string(firms.size()));

  ReinsuranceNetwork net{std::move(firms), {}, std::move(shock)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (gamma(i, j) == 0.0 && dd(i, j) == 0.0 && cp(i, j) == 0.0) continue;
      Contract c;
      c.reinsurer = static_cast<FirmIndex>(i);
      c.reinsured = static_cast<FirmIndex>(j);
      c.rate = gamma(i, j);
      c.deductible = dd(i, j);
      c.cap = std::isinf(cp(i, j)) ? Cap::infinite() : Cap::finite(cp(i, j));
      net.contracts.push_back(c);
    }
  }
  return net;
}

/// Gamma as an n x n matrix. Entry (i, j) sums the rates of every layer in
/// which i reinsures j.
inline Eigen::MatrixXd gamma_matrix(const ReinsuranceNetwork& net) {
  const auto n = static_cast<Eigen::Index>(net.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (const auto& c : net.contracts)
    g(static_cast<Eigen::Index>(c.reinsurer), static_cast<Eigen::Index>(c.reinsured)) += c.rate;
  return g;
}

enum class Rule {
  sparsity,
  rate_range,
  negative_deductible,
  self_reinsurance,
  duplicate_contract,
  layer_over_100_percent,
  negative_shock,
  reinsurer_shocked,
  reinsurer_primary_premiums,
  negative_equity,
};

inline const char* to_string(Rule r) {
  switch (r) {
    case Rule::sparsity: return "sparsity";
    case Rule::rate_range: return "rate_range";
    case Rule::negative_deductible: return "negative_deductible";
    case Rule::self_reinsurance: return "self_reinsurance";
    case Rule::duplicate_contract: return "duplicate_contract";
    case Rule::layer_over_100_percent: return "layer_over_100_percent";
    case Rule::negative_shock: return "negative_shock";
    case Rule::reinsurer_shocked: return "reinsurer_shocked";
    case Rule::reinsurer_primary_premiums: return "reinsurer_primary_premiums";
    case Rule::negative_equity: return "negative_equity";
  }
  return "unknown";
}

struct Violation {
  Rule rule;
  std::string firm;  // id of the firm the rule is about
  std::ptrdiff_t contract = -1;  // index into net.contracts, -1 when firm-level
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<std::string> warnings;

  bool ok() const { return violations.empty(); }
};

inline constexpr double kColumnSumTolerance = 1e-9;

namespace detail {

inline bool weakly_connected(const ReinsuranceNetwork& net) {
  const std::size_t n = net.size();
  if (n <= 1) return true;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&parent](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& c : net.contracts) parent[find(c.reinsurer)] = find(c.reinsured);
  const std::size_t root = find(0);
  for (std::size_t i = 1; i < n; ++i)
    if (find(i) != root) return false;
  return true;
}

}  // namespace detail

/// Checks every structural assumption of the model. Index errors (a contract
/// pointing outside the firm list, a shock vector of the wrong length) are
/// hard errors; everything else is collected into the report.
inline ValidationReport validate_network(const ReinsuranceNetwork& net) {
  const std::size_t n = net.size();
  if (net.shock.size() != n)
    throw std::invalid_argument("shock vector length " + std::to_string(net.shock.size()) +
                                " does not match firm count " + std::to_string(n));
  for (std::size_t k = 0; k < net.contracts.size(); ++k) {
    const auto& c = net.contracts[k];
    if (c.reinsurer >= n || c.reinsured >= n)
      throw std::invalid_argument("contract " + std::to_string(k) + " references firm index " +
                                  std::to_string(std::max(c.reinsurer, c.reinsured)) +
                                  " outside [0, " + std::to_string(n) + ")");
  }

  ValidationReport report;
  auto add = [&](Rule rule, FirmIndex firm, std::ptrdiff_t contract, std::string msg) {
    report.violations.push_back({rule, net.firms[firm].id, contract, std::move(msg)});
  };

  std::map<std::tuple<FirmIndex, FirmIndex, int>, std::size_t> seen;
  std::map<std::pair<FirmIndex, int>, double> layer_sums;
  for (std::size_t k = 0; k < net.contracts.size(); ++k) {
    const auto& c = net.contracts[k];
    const auto idx = static_cast<std::ptrdiff_t>(k);
    const std::string pair = net.firms[c.reinsurer].id + "->" + net.firms[c.reinsured].id;

    const bool has_rate = c.rate > 0.0;
    const bool has_cap = c.cap.value() > 0.0;
    if (has_rate != has_cap || (!has_rate && c.deductible != 0.0))
      add(Rule::sparsity, c.reinsured, idx,
          "contract " + pair + " has mismatched rate/deductible/cap pattern");
    if (c.rate < 0.0 || c.rate > 1.0 || std::isnan(c.rate))
      add(Rule::rate_range, c.reinsured, idx, "contract " + pair + " rate outside (0, 1]");
    if (c.deductible < 0.0)
      add(Rule::negative_deductible, c.reinsured, idx, "contract " + pair + " has negative deductible");
    if (c.reinsurer == c.reinsured)
      add(Rule::self_reinsurance, c.reinsured, idx, "firm reinsures itself in contract " + pair);
    if (auto [it, fresh] = seen.try_emplace({c.reinsurer, c.reinsured, c.layer}, k); !fresh)
      add(Rule::duplicate_contract, c.reinsured, idx,
          "contract " + pair + " duplicates contract " + std::to_string(it->second) + " in layer " +
              std::to_string(c.layer));
    layer_sums[{c.reinsured, c.layer}] += std::max(c.rate, 0.0);
  }
  for (const auto& [key, sum] : layer_sums) {
    if (sum > 1.0 + kColumnSumTolerance)
      add(Rule::layer_over_100_percent, key.first, -1,
          "firm " + net.firms[key.first].id + " is reinsured " + std::to_string(sum * 100.0) +
              "% in layer " + std::to_string(key.second));
  }

  for (FirmIndex i = 0; i < n; ++i) {
    const auto& f = net.firms[i];
    if (net.shock[i] < 0.0 || std::isnan(net.shock[i]))
      add(Rule::negative_shock, i, -1, "firm " + f.id + " has negative shock");
    if (f.role == Role::reinsurer && net.shock[i] != 0.0)
      add(Rule::reinsurer_shocked, i, -1, "reinsurer " + f.id + " has a nonzero primary shock");
    if (f.role == Role::reinsurer && f.primary_premiums != 0.0)
      add(Rule::reinsurer_primary_premiums, i, -1, "reinsurer " + f.id + " has primary premiums");
    if (f.equity < 0.0)
      add(Rule::negative_equity, i, -1, "firm " + f.id + " has negative equity");
  }

  if (!detail::weakly_connected(net))
    report.warnings.emplace_back("network is not connected; components can be analyzed separately");
  return report;
}

inline std::string describe(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report.violations) {
    out += "[";
    out += to_string(v.rule);
    out += "] ";
    out += v.message;
    out += "\n";
  }
  return out;
}

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(ValidationReport report)
      : std::runtime_error("network validation failed:\n" + describe(report)),
        report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

inline void require_valid(const ReinsuranceNetwork& net) {
  auto report = validate_network(net);
  if (!report.ok()) throw ValidationError(std::move(report));
}

}  // namespace reinsurance
