#pragma once

// Construction of excess-of-loss and proportional networks from ceded
// premium data, with the calibration of outside premiums, equities and
// catastrophe shocks.
//
// XL rules of thumb, for a ceding firm with total ceded premium P:
//   tower limit      = P / premium_to_limit          (10 P by default)
//   tower deductible = limit / limit_to_deductible   (2.5 P)
//   layer k (0-based) attaches at deductible + k * limit / n_layers
// Reinsurers are split into layers by a greedy knapsack on premiums; each
// contract takes its premium share of the layer as rate, pays above the layer
// attachment (measured on the ceding firm's gross claims), and is capped at
// rate * layer limit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "reinsurance/network.hpp"
#include "reinsurance/rng.hpp"

namespace reinsurance {

struct CessionRecord {
  std::string ceding_firm;
  std::string reinsurer;
  double premium_ceded = 0.0;

  friend bool operator==(const CessionRecord&, const CessionRecord&) = default;
};

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct SynthesisConfig {
  double premium_to_limit = 0.1;
  double limit_to_deductible = 4.0;
  double top_layer_premium_share = 0.2;
  int n_layers = 2;
  Bounds primary_cede_ratio_bounds{0.05, 0.5};
  Bounds reinsurer_cede_ratio_bounds{0.1, 0.3};
  Bounds leverage_bounds{0.7, 2.0};
  double shock_aggregate_1_in_100 = 215.2e9;
  double shock_aggregate_1_in_250 = 290.6e9;
  std::uint64_t seed = 0;

  friend bool operator==(const SynthesisConfig&, const SynthesisConfig&) = default;

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid config: " + what); };
    if (!(premium_to_limit > 0.0 && premium_to_limit <= 1.0)) fail("premium_to_limit must lie in (0, 1]");
    if (!(limit_to_deductible > 0.0)) fail("limit_to_deductible must be positive");
    if (!(top_layer_premium_share > 0.0 && top_layer_premium_share < 1.0))
      fail("top_layer_premium_share must lie in (0, 1)");
    if (n_layers < 1) fail("n_layers must be at least 1");
    auto ratio_bounds = [&](const Bounds& b, const char* name) {
      if (!(b.lo > 0.0 && b.lo <= b.hi && b.hi <= 1.0)) fail(std::string(name) + " must satisfy 0 < lo <= hi <= 1");
    };
    ratio_bounds(primary_cede_ratio_bounds, "primary_cede_ratio_bounds");
    ratio_bounds(reinsurer_cede_ratio_bounds, "reinsurer_cede_ratio_bounds");
    if (!(leverage_bounds.lo > 0.0 && leverage_bounds.lo <= leverage_bounds.hi))
      fail("leverage_bounds must satisfy 0 < lo <= hi");
    if (!(shock_aggregate_1_in_100 >= 0.0) || !(shock_aggregate_1_in_250 >= 0.0))
      fail("shock aggregates must be nonnegative");
  }
};

/// Layer index of every cession (aligned with the cession list it was
/// computed from). Frozen across perturbations.
struct Layering {
  int n_layers = 1;
  std::vector<int> layer_of;

  friend bool operator==(const Layering&, const Layering&) = default;
};

struct XlNetwork {
  ReinsuranceNetwork network;
  Layering layering;
};

/// Merges duplicate (ceding firm, reinsurer) rows by summing premiums and
/// sorts the result by (ceding firm, reinsurer).
inline std::vector<CessionRecord> aggregate_cessions(const std::vector<CessionRecord>& records) {
  std::map<std::pair<std::string, std::string>, double> sums;
  for (const auto& r : records) {
    if (r.ceding_firm.empty() || r.reinsurer.empty()) throw std::invalid_argument("cession with empty firm id");
    if (r.ceding_firm == r.reinsurer)
      throw std::invalid_argument("firm " + r.ceding_firm + " cedes premium to itself");
    if (!(r.premium_ceded > 0.0) || !std::isfinite(r.premium_ceded))
      throw std::invalid_argument("cession " + r.ceding_firm + " -> " + r.reinsurer +
                                  " must have a positive finite premium");
    sums[{r.ceding_firm, r.reinsurer}] += r.premium_ceded;
  }
  std::vector<CessionRecord> out;
  out.reserve(sums.size());
  for (const auto& [key, p] : sums) out.push_back({key.first, key.second, p});
  return out;
}

/// Firm list implied by the cessions, sorted by id. Firms that only ever
/// receive cessions are reinsurers; every firm that cedes is a primary
/// insurer. Premiums and equity start at zero.
inline std::vector<Firm> firms_from_cessions(const std::vector<CessionRecord>& cessions) {
  std::map<std::string, bool> cedes;
  for (const auto& c : cessions) {
    cedes[c.ceding_firm] = true;
    cedes.try_emplace(c.reinsurer, false);
  }
  std::vector<Firm> firms;
  for (const auto& [id, ceding] : cedes) {
    Firm f;
    f.id = id;
    f.role = ceding ? Role::primary_insurer : Role::reinsurer;
    firms.push_back(f);
  }
  return firms;
}

namespace detail {

inline std::map<std::string, FirmIndex> index_firms(const std::vector<Firm>& firms) {
  std::map<std::string, FirmIndex> idx;
  for (FirmIndex i = 0; i < firms.size(); ++i)
    if (!idx.emplace(firms[i].id, i).second) throw std::invalid_argument("duplicate firm id " + firms[i].id);
  return idx;
}

/// Resolves cession firm ids; throws listing every firm missing from `firms`.
inline std::vector<std::pair<FirmIndex, FirmIndex>> resolve(const std::vector<CessionRecord>& cessions,
                                                            const std::vector<Firm>& firms) {
  const auto idx = index_firms(firms);
  std::vector<std::pair<FirmIndex, FirmIndex>> out;
  std::vector<std::string> missing;
  auto look = [&](const std::string& id) -> FirmIndex {
    auto it = idx.find(id);
    if (it != idx.end()) return it->second;
    if (std::find(missing.begin(), missing.end(), id) == missing.end()) missing.push_back(id);
    return 0;
  };
  for (const auto& c : cessions) {
    const FirmIndex a = look(c.ceding_firm);
    const FirmIndex b = look(c.reinsurer);
    out.emplace_back(a, b);
  }
  if (!missing.empty()) {
    std::string msg = "no premium data for firm(s):";
    for (const auto& id : missing) msg += " " + id;
    throw std::invalid_argument(msg);
  }
  return out;
}

struct Flows {
  std::vector<double> ceded, received;
};

inline Flows premium_flows(const std::vector<CessionRecord>& cessions, const std::vector<Firm>& firms) {
  const auto pairs = resolve(cessions, firms);
  Flows f{std::vector<double>(firms.size(), 0.0), std::vector<double>(firms.size(), 0.0)};
  for (std::size_t k = 0; k < cessions.size(); ++k) {
    f.ceded[pairs[k].first] += cessions[k].premium_ceded;
    f.received[pairs[k].second] += cessions[k].premium_ceded;
  }
  return f;
}

inline double outside_premiums(const Firm& f) {
  return f.role == Role::primary_insurer ? f.primary_premiums : f.foreign_reins_premiums;
}

}  // namespace detail

/// Greedy split of premiums into layers. Items are sorted by premium
/// (descending, ties by id). Each non-top layer has target
/// (1 - top_layer_premium_share) * total / (n_layers - 1); items are added
/// while the layer stays within target, the first item that would overflow
/// joins the layer only if that brings its sum strictly closer to target, and
/// everything left moves on to the next layer. Returns the layer of each
/// input item (0 = bottom).
inline std::vector<int> split_layers(const std::vector<std::pair<std::string, double>>& premiums,
                                     const SynthesisConfig& config) {
  const std::size_t k = premiums.size();
  std::vector<int> layer(k, 0);
  if (k <= 1 || config.n_layers <= 1) return layer;

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (premiums[a].second != premiums[b].second) return premiums[a].second > premiums[b].second;
    return premiums[a].first < premiums[b].first;
  });
  double total = 0.0;
  for (const auto& p : premiums) total += p.second;
  const double target = (1.0 - config.top_layer_premium_share) * total / (config.n_layers - 1);

  std::size_t pos = 0;
  for (int l = 0; l < config.n_layers - 1 && pos < k; ++l) {
    double sum = 0.0;
    while (pos < k && sum + premiums[order[pos]].second <= target) {
      sum += premiums[order[pos]].second;
      layer[order[pos++]] = l;
    }
    if (pos < k && std::abs(sum + premiums[order[pos]].second - target) < std::abs(sum - target)) {
      sum += premiums[order[pos]].second;
      layer[order[pos++]] = l;
    }
  }
  for (; pos < k; ++pos) layer[order[pos]] = config.n_layers - 1;
  return layer;
}

/// Layer of every cession, computed per ceding firm.
inline Layering compute_layering(const std::vector<CessionRecord>& cessions, const SynthesisConfig& config) {
  Layering out;
  out.n_layers = config.n_layers;
  out.layer_of.assign(cessions.size(), 0);
  std::map<std::string, std::vector<std::size_t>> by_firm;
  for (std::size_t k = 0; k < cessions.size(); ++k) by_firm[cessions[k].ceding_firm].push_back(k);
  for (const auto& [firm, rows] : by_firm) {
    std::vector<std::pair<std::string, double>> items;
    for (auto r : rows) items.emplace_back(cessions[r].reinsurer, cessions[r].premium_ceded);
    const auto layers = split_layers(items, config);
    for (std::size_t i = 0; i < rows.size(); ++i) out.layer_of[rows[i]] = layers[i];
  }
  return out;
}

/// Tower geometry for a ceding firm with total ceded premium P.
struct Tower {
  double limit = 0.0;
  double deductible = 0.0;
  double layer_limit = 0.0;

  double attachment(int layer) const { return deductible + layer * layer_limit; }
  double coverage() const { return deductible + limit; }
};

inline Tower tower_for(double total_ceded, const SynthesisConfig& config, int n_layers) {
  Tower t;
  t.limit = total_ceded / config.premium_to_limit;
  t.deductible = t.limit / config.limit_to_deductible;
  t.layer_limit = t.limit / n_layers;
  return t;
}

inline Tower tower_for(double total_ceded, const SynthesisConfig& config) {
  return tower_for(total_ceded, config, config.n_layers);
}

/// XL network from cessions. Pass a stored layering to rebuild contracts
/// with frozen layer membership (for perturbed premiums); otherwise the
/// layering is computed. Shock is zero.
inline XlNetwork build_xl_network(const std::vector<CessionRecord>& cessions, const std::vector<Firm>& firms,
                                  const SynthesisConfig& config, const Layering* frozen = nullptr) {
  config.validate();
  const auto pairs = detail::resolve(cessions, firms);
  XlNetwork out;
  out.layering = frozen ? *frozen : compute_layering(cessions, config);
  if (out.layering.layer_of.size() != cessions.size())
    throw std::invalid_argument("layering does not match the cession list");

  std::vector<double> total(firms.size(), 0.0);
  std::map<std::pair<FirmIndex, int>, double> layer_total;
  for (std::size_t k = 0; k < cessions.size(); ++k) {
    total[pairs[k].first] += cessions[k].premium_ceded;
    layer_total[{pairs[k].first, out.layering.layer_of[k]}] += cessions[k].premium_ceded;
  }

  out.network.firms = firms;
  out.network.shock.assign(firms.size(), 0.0);
  for (std::size_t k = 0; k < cessions.size(); ++k) {
    const FirmIndex ceding = pairs[k].first;
    const int layer = out.layering.layer_of[k];
    const Tower t = tower_for(total[ceding], config, out.layering.n_layers);
    Contract c;
    c.reinsurer = pairs[k].second;
    c.reinsured = ceding;
    c.layer = layer;
    c.rate = cessions[k].premium_ceded / layer_total[{ceding, layer}];
    c.deductible = t.attachment(layer);
    c.cap = Cap::finite(c.rate * t.layer_limit);
    c.premium_ceded = cessions[k].premium_ceded;
    out.network.contracts.push_back(c);
  }
  require_valid(out.network);
  return out;
}

/// Proportional network: rate = premium ceded / (outside premiums +
/// reinsurance premiums received) of the ceding firm, no deductibles, no
/// caps. Shock is zero.
inline ReinsuranceNetwork build_proportional_network(const std::vector<CessionRecord>& cessions,
                                                     const std::vector<Firm>& firms) {
  const auto pairs = detail::resolve(cessions, firms);
  const auto flows = detail::premium_flows(cessions, firms);
  ReinsuranceNetwork net;
  net.firms = firms;
  net.shock.assign(firms.size(), 0.0);
  for (std::size_t k = 0; k < cessions.size(); ++k) {
    const FirmIndex ceding = pairs[k].first;
    const double received = detail::outside_premiums(firms[ceding]) + flows.received[ceding];
    if (!(received > 0.0))
      throw std::invalid_argument("firm " + firms[ceding].id + " cedes premium but receives none");
    Contract c;
    c.reinsurer = pairs[k].second;
    c.reinsured = ceding;
    c.rate = cessions[k].premium_ceded / received;
    c.deductible = 0.0;
    c.cap = Cap::infinite();
    c.premium_ceded = cessions[k].premium_ceded;
    net.contracts.push_back(c);
  }
  require_valid(net);
  return net;
}

/// Outside premiums per firm (primary premiums for primary insurers,
/// foreign reinsurance premiums for reinsurers). One ratio r = ceded /
/// received is drawn per firm, in firm order, from the role's bounds;
/// outside = max(0, ceded / r - reinsurance premiums received).
inline std::vector<double> sample_outside_premiums(const std::vector<Firm>& firms,
                                                   const std::vector<CessionRecord>& cessions,
                                                   const SynthesisConfig& config, Rng& rng) {
  const auto flows = detail::premium_flows(cessions, firms);
  std::vector<double> out(firms.size(), 0.0);
  for (std::size_t i = 0; i < firms.size(); ++i) {
    const Bounds& b = firms[i].role == Role::primary_insurer ? config.primary_cede_ratio_bounds
                                                             : config.reinsurer_cede_ratio_bounds;
    const double r = rng.uniform(b.lo, b.hi);
    out[i] = std::max(0.0, flows.ceded[i] / r - flows.received[i]);
  }
  return out;
}

/// Stores outside premiums on the firms according to their role.
inline void apply_outside_premiums(std::vector<Firm>& firms, const std::vector<double>& outside) {
  if (outside.size() != firms.size()) throw std::invalid_argument("outside premium vector length mismatch");
  for (std::size_t i = 0; i < firms.size(); ++i) {
    firms[i].primary_premiums = firms[i].role == Role::primary_insurer ? outside[i] : 0.0;
    firms[i].foreign_reins_premiums = firms[i].role == Role::reinsurer ? outside[i] : 0.0;
  }
}

/// Equity = leverage ratio * net written premiums, where net written
/// premiums = outside + reinsurance received - ceded, floored at zero. One
/// leverage ratio is drawn per firm, in firm order.
inline std::vector<double> sample_equities(const std::vector<Firm>& firms, const std::vector<CessionRecord>& cessions,
                                           const SynthesisConfig& config, Rng& rng) {
  const auto flows = detail::premium_flows(cessions, firms);
  std::vector<double> out(firms.size(), 0.0);
  for (std::size_t i = 0; i < firms.size(); ++i) {
    const double ratio = rng.uniform(config.leverage_bounds.lo, config.leverage_bounds.hi);
    const double nwp = std::max(0.0, detail::outside_premiums(firms[i]) + flows.received[i] - flows.ceded[i]);
    out[i] = ratio * nwp;
  }
  return out;
}

/// Distributes an aggregate loss over primary insurers: u_i ~ U[0, primary
/// premiums_i] for each primary insurer in firm order, normalized to sum to
/// one and scaled by the aggregate. Reinsurers get zero.
inline std::vector<double> generate_shock(const std::vector<Firm>& firms, double aggregate, Rng& rng) {
  if (!(aggregate >= 0.0)) throw std::invalid_argument("aggregate shock must be nonnegative");
  if (aggregate == 0.0) return std::vector<double>(firms.size(), 0.0);
  bool any = false;
  for (const auto& f : firms) any |= f.role == Role::primary_insurer && f.primary_premiums > 0.0;
  if (!any) throw std::invalid_argument("no primary insurer with positive primary premiums to receive the shock");

  std::vector<double> draws(firms.size(), 0.0);
  double sum = 0.0;
  while (!(sum > 0.0)) {
    sum = 0.0;
    for (std::size_t i = 0; i < firms.size(); ++i) {
      draws[i] = firms[i].role == Role::primary_insurer ? rng.uniform(0.0, firms[i].primary_premiums) : 0.0;
      sum += draws[i];
    }
  }
  for (auto& d : draws) d = aggregate * (d / sum);
  return draws;
}

/// Firms with sampled outside premiums and equities, ready for either
/// network builder. Both builders receive the same firm data.
inline std::vector<Firm> calibrate_firms(const std::vector<CessionRecord>& cessions, const SynthesisConfig& config) {
  config.validate();
  auto firms = firms_from_cessions(cessions);
  Rng premiums_rng = Rng::stream(config.seed, Stream::outside_premiums);
  apply_outside_premiums(firms, sample_outside_premiums(firms, cessions, config, premiums_rng));
  Rng equity_rng = Rng::stream(config.seed, Stream::equities);
  const auto e0 = sample_equities(firms, cessions, config, equity_rng);
  for (std::size_t i = 0; i < firms.size(); ++i) firms[i].equity = e0[i];
  return firms;
}

struct SyntheticSpec {
  int n_firms = 100;
  int n_reinsurers = 20;  // firms that never cede
  int n_core = 8;         // reinsurers most primary insurers buy from
  double primary_scale = 2e10;
};

/// Core-periphery cession data for testing and demonstrations. Primary
/// insurers cede to a few reinsurers, mostly from the core; some primary
/// insurers also write business for others, which creates retrocession
/// chains and cycles.
inline std::vector<CessionRecord> synthetic_cessions(std::uint64_t seed, const SyntheticSpec& spec = {}) {
  if (spec.n_reinsurers < 1 || spec.n_firms <= spec.n_reinsurers || spec.n_core < 1 ||
      spec.n_core > spec.n_reinsurers)
    throw std::invalid_argument("synthetic network needs 1 <= n_core <= n_reinsurers < n_firms");
  Rng rng = Rng::stream(seed, Stream::synthetic_network);
  auto name = [](const char* prefix, int i) {
    std::string digits = std::to_string(i);
    return std::string(prefix) + std::string(3 - std::min<std::size_t>(3, digits.size()), '0') + digits;
  };
  const int n_primary = spec.n_firms - spec.n_reinsurers;
  const int n_ring = std::min(5, n_primary);  // largest primary insurers, linked in a cycle
  std::vector<CessionRecord> out;
  for (int p = 0; p < n_primary; ++p) {
    // Heavy-tailed firm size: a few large primary insurers, many small ones.
    const double size = spec.primary_scale * std::exp(2.0 * rng.uniform() - 1.0) / (1.0 + 0.1 * p);
    const int n_links = std::min(spec.n_reinsurers, 2 + static_cast<int>(rng.below(6)));
    std::vector<int> chosen;
    while (static_cast<int>(chosen.size()) < n_links) {
      const bool core = rng.uniform() < 0.75;
      const int r = core ? static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_core)))
                         : static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_reinsurers)));
      if (std::find(chosen.begin(), chosen.end(), r) == chosen.end()) chosen.push_back(r);
    }
    for (int r : chosen)
      out.push_back({name("P", p), name("R", r), size * 0.05 * (0.2 + rng.uniform())});
    // Some smaller primary insurers also cede to one of the largest.
    if (p >= n_ring && rng.uniform() < 0.3) {
      const int peer = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_ring)));
      out.push_back({name("P", p), name("P", peer), size * 0.02 * (0.2 + rng.uniform())});
    }
  }
  // Retrocession among the largest primary writers closes a few cycles.
  for (int a = 0; n_ring > 1 && a < n_ring; ++a) {
    const int b = (a + 1) % n_ring;
    out.push_back({name("P", a), name("P", b), spec.primary_scale * 0.01 * (0.5 + rng.uniform())});
  }
  return aggregate_cessions(out);
}

}  // namespace reinsurance
