#pragma once

// Experiment runner: single scenarios (liabilities, clearing, end equities),
// parameter-perturbation studies on XL networks and paired XL vs
// proportional comparisons under sampled catastrophe shocks.
//
// Every scenario draws from its own RNG substream keyed by (seed, stream,
// index), and results are folded in index order, so the output does not
// depend on the number of worker threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "reinsurance/clearing.hpp"
#include "reinsurance/line_graph.hpp"
#include "reinsurance/network.hpp"
#include "reinsurance/rng.hpp"
#include "reinsurance/solve.hpp"
#include "reinsurance/synthesis.hpp"

namespace reinsurance {

struct ScenarioOptions {
  SolverOptions solver;
  ClearingOptions clearing;
  std::size_t omega_limit = kDefaultOmegaLimit;
};

struct ScenarioReport {
  bool failed = false;
  std::string diagnosis;  // set when failed or when the solver left a note

  std::vector<std::optional<double>> returns;
  std::vector<std::uint8_t> defaults;
  std::size_t n_defaults = 0;
  double uncovered_primary = 0.0;
  Eigen::VectorXd end_equity;
  std::vector<double> equity_delta;  // vs. a base scenario, filled by studies

  SolverStatus status = SolverStatus::converged;
  Algorithm algorithm = Algorithm::fixed_point_iteration;
  int iterations = 0;
  Certificate certificate = Certificate::no_certificate;
  double rho = 0.0;
  bool cross_checked = false;
  bool multiplicity_warning = false;
  double total_liabilities = 0.0;
  double net_liability_sum = 0.0;  // sum of net liabilities; zero up to rounding
  int default_rounds = 0;
};

/// Solves liabilities for `net` under shock `sh`, clears, and reports end
/// equities. Solver failures mark the scenario failed with the structural
/// diagnosis; they are never dropped.
inline ScenarioReport run_scenario(const ReinsuranceNetwork& net, const std::vector<double>& sh,
                                   const ScenarioOptions& opt = {}) {
  ScenarioReport rep;
  const std::size_t n = net.size();
  if (sh.size() != n) throw std::invalid_argument("shock vector length does not match the network");
  try {
    ReinsuranceNetwork shocked = net;
    shocked.shock = sh;
    const auto sys = build_line_graph(shocked);
    const auto solved = solve_auto(sys, opt.solver, opt.omega_limit);
    rep.status = solved.solution.status;
    rep.algorithm = solved.solution.algorithm;
    rep.iterations = solved.solution.iterations;
    rep.certificate = solved.structure.certificate;
    rep.rho = solved.structure.rho_full;
    rep.cross_checked = solved.cross_checked;
    rep.multiplicity_warning = solved.solution.multiplicity_warning;
    rep.diagnosis = solved.solution.note;
    if (!solved.solution.converged()) {
      rep.failed = true;
      std::string why = "liabilities did not converge (" + std::string(to_string(rep.status)) +
                        "), rho = " + std::to_string(rep.rho) + ", certificate " + to_string(rep.certificate);
      if (solved.structure.cycle.detected) why += ", 100% cycle detected";
      if (!rep.diagnosis.empty()) why += "; " + rep.diagnosis;
      rep.diagnosis = why;
      return rep;
    }

    const Eigen::MatrixXd L = liabilities_matrix(sys, solved.solution.ell);
    rep.total_liabilities = L.sum();
    rep.net_liability_sum = net_liabilities(L).sum();

    Eigen::VectorXd e0(static_cast<Eigen::Index>(n)), s(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      e0(static_cast<Eigen::Index>(i)) = net.firms[i].equity;
      s(static_cast<Eigen::Index>(i)) = sh[i];
    }
    auto cleared = clear(L, e0, s, opt.clearing);
    rep.returns = cleared.returns;
    rep.defaults = cleared.defaults;
    rep.n_defaults = cleared.n_defaults();
    rep.uncovered_primary = uncovered_primary_liabilities(cleared, net.firms);
    rep.end_equity = std::move(cleared.end_equity);
    rep.default_rounds = cleared.default_rounds;
  } catch (const std::exception& err) {
    rep.failed = true;
    rep.diagnosis = err.what();
  }
  return rep;
}

/// Runs f(0), ..., f(count - 1) on up to `threads` workers (0 = hardware
/// concurrency) and returns the results in index order.
template <class F>
auto parallel_map(std::size_t count, unsigned threads, F f) -> std::vector<decltype(f(std::size_t{0}))> {
  using R = decltype(f(std::size_t{0}));
  std::vector<R> out(count);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) out[i] = f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// An XL network together with everything needed to rebuild it from
/// perturbed premiums.
struct XlBase {
  std::vector<CessionRecord> cessions;
  std::vector<Firm> firms;
  SynthesisConfig config;
  Layering layering;
  ReinsuranceNetwork network;
};

inline XlBase make_xl_base(const std::vector<CessionRecord>& cessions, const SynthesisConfig& config) {
  XlBase base;
  base.cessions = aggregate_cessions(cessions);
  base.config = config;
  base.firms = calibrate_firms(base.cessions, config);
  auto xl = build_xl_network(base.cessions, base.firms, config);
  base.layering = std::move(xl.layering);
  base.network = std::move(xl.network);
  return base;
}

/// The shock held fixed across a perturbation study.
inline std::vector<double> fixed_shock(const XlBase& base, double aggregate, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, Stream::fixed_shock);
  return generate_shock(base.firms, aggregate, rng);
}

/// Multiplies every premium ceded, primary premium, foreign reinsurance
/// premium and equity by an independent U[1 - delta, 1 + delta] factor
/// (cessions first, then firms in order) and rebuilds the XL contracts with
/// the base layering. The base shock is carried over unchanged.
inline ReinsuranceNetwork perturb_network(const XlBase& base, double delta, Rng& rng) {
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
  auto factor = [&] { return rng.uniform(1.0 - delta, 1.0 + delta); };
  auto cessions = base.cessions;
  for (auto& c : cessions) c.premium_ceded *= factor();
  auto firms = base.firms;
  for (auto& f : firms) {
    f.primary_premiums *= factor();
    f.foreign_reins_premiums *= factor();
    f.equity *= factor();
  }
  auto out = build_xl_network(cessions, firms, base.config, &base.layering).network;
  out.shock = base.network.shock;
  return out;
}

struct PerturbationConfig {
  double delta = 0.025;
  int samples = 50;
  std::uint64_t seed = 0;
  std::vector<double> shock;  // fixed shock applied to every sample
  unsigned threads = 0;
};

struct SampleSummary {
  bool failed = false;
  std::string diagnosis;
  std::size_t n_defaults = 0;
  std::size_t default_flips = 0;  // firms whose default flag differs from base
  double max_return_change = 0.0;
  double max_equity_change = 0.0;
};

struct HistogramBin {
  std::string label;
  double lo = 0.0;  // inclusive
  double hi = 0.0;  // exclusive
  double count = 0.0;
};

/// Log-scale histogram of nonnegative values: one bin for exact zeros, one
/// for (0, 1e-12), decade bins [1e-k, 1e-k+1) up to 1e3, and one for
/// [1e3, inf).
inline std::vector<HistogramBin> log_histogram(const std::vector<double>& values) {
  std::vector<HistogramBin> bins;
  bins.push_back({"zero", 0.0, 0.0, 0.0});
  bins.push_back({"(0,1e-12)", 0.0, 1e-12, 0.0});
  for (int k = -12; k < 3; ++k)
    bins.push_back({"[1e" + std::to_string(k) + ",1e" + std::to_string(k + 1) + ")", std::pow(10.0, k),
                    std::pow(10.0, k + 1), 0.0});
  bins.push_back({"[1e3,inf)", 1e3, HUGE_VAL, 0.0});
  for (double v : values) {
    if (v == 0.0) {
      bins[0].count += 1.0;
      continue;
    }
    for (std::size_t b = 1; b < bins.size(); ++b)
      if (v < bins[b].hi || b + 1 == bins.size()) {
        bins[b].count += 1.0;
        break;
      }
  }
  return bins;
}

struct PerturbationReport {
  double delta = 0.0;
  int samples = 0;
  ScenarioReport base;
  std::vector<SampleSummary> per_sample;
  std::vector<std::string> firm_ids;
  std::vector<std::optional<double>> max_return_change;  // per firm; empty when e0 = 0
  std::vector<double> max_equity_change;                 // per firm
  std::vector<std::uint8_t> default_flipped;             // per firm, in >= 1 sample
  std::size_t firms_flipped = 0;
  std::size_t n_failed = 0;
  std::vector<HistogramBin> return_change_histogram;
};

/// Perturbs the base network `samples` times, runs every sample under the
/// fixed shock and reports changes against the unperturbed run. Sample k
/// draws from the perturbation stream with index k.
inline PerturbationReport perturbation_study(const XlBase& base, const PerturbationConfig& config,
                                             const ScenarioOptions& opt = {}) {
  if (!(config.delta >= 0.0 && config.delta < 1.0)) throw std::invalid_argument("delta must lie in [0, 1)");
  if (config.samples < 1) throw std::invalid_argument("samples must be at least 1");
  const std::size_t n = base.firms.size();
  if (config.shock.size() != n) throw std::invalid_argument("fixed shock length does not match the network");

  PerturbationReport rep;
  rep.delta = config.delta;
  rep.samples = config.samples;
  rep.base = run_scenario(base.network, config.shock, opt);
  if (rep.base.failed) throw std::runtime_error("base scenario failed: " + rep.base.diagnosis);
  for (const auto& f : base.firms) rep.firm_ids.push_back(f.id);

  auto runs = parallel_map(static_cast<std::size_t>(config.samples), config.threads, [&](std::size_t k) {
    Rng rng = Rng::stream(config.seed, Stream::perturbation, k);
    return run_scenario(perturb_network(base, config.delta, rng), config.shock, opt);
  });

  rep.max_return_change.assign(n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i)
    if (rep.base.returns[i]) rep.max_return_change[i] = 0.0;
  rep.max_equity_change.assign(n, 0.0);
  rep.default_flipped.assign(n, 0);
  for (auto& run : runs) {
    SampleSummary s;
    s.failed = run.failed;
    s.diagnosis = run.diagnosis;
    if (run.failed) {
      ++rep.n_failed;
      rep.per_sample.push_back(s);
      continue;
    }
    s.n_defaults = run.n_defaults;
    run.equity_delta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double de = std::abs(run.end_equity(ii) - rep.base.end_equity(ii));
      run.equity_delta[i] = run.end_equity(ii) - rep.base.end_equity(ii);
      s.max_equity_change = std::max(s.max_equity_change, de);
      rep.max_equity_change[i] = std::max(rep.max_equity_change[i], de);
      if (run.defaults[i] != rep.base.defaults[i]) {
        ++s.default_flips;
        rep.default_flipped[i] = 1;
      }
      if (rep.base.returns[i] && run.returns[i]) {
        const double dr = std::abs(*run.returns[i] - *rep.base.returns[i]);
        s.max_return_change = std::max(s.max_return_change, dr);
        rep.max_return_change[i] = std::max(*rep.max_return_change[i], dr);
      }
    }
    rep.per_sample.push_back(s);
  }
  rep.firms_flipped = static_cast<std::size_t>(std::count(rep.default_flipped.begin(), rep.default_flipped.end(), 1));
  std::vector<double> changes;
  for (const auto& c : rep.max_return_change)
    if (c) changes.push_back(*c);
  rep.return_change_histogram = log_histogram(changes);
  return rep;
}

/// Two shock families with their probability weights.
struct ShockFamily {
  std::string name;
  Stream stream;
  double aggregate = 0.0;
  double weight = 0.0;
  int scenarios = 0;
};

inline std::vector<ShockFamily> default_shock_families(const SynthesisConfig& config, int per_family = 50) {
  return {{"1-in-100", Stream::shock_1_in_100, config.shock_aggregate_1_in_100, 0.6, per_family},
          {"1-in-250", Stream::shock_1_in_250, config.shock_aggregate_1_in_250, 0.4, per_family}};
}

struct PairedScenario {
  std::size_t index = 0;
  std::string family;
  double weight = 0.0;  // family weight / scenarios in family
  ScenarioReport xl;
  ScenarioReport proportional;
};

struct ReturnHistogram {
  int bins_per_unit = 20;  // bin width 0.05
  long first_bin = 0;      // bin k covers [k, k + 1) / bins_per_unit
  std::vector<double> xl;            // weighted counts per bin
  std::vector<double> proportional;  // same bins

  double bin_width() const { return 1.0 / bins_per_unit; }
  double edge(long k) const { return static_cast<double>(k) / bins_per_unit; }
  long bin_of(double r) const { return static_cast<long>(std::floor(r * bins_per_unit)); }
};

struct CompareReport {
  std::vector<std::string> firm_ids;
  std::vector<PairedScenario> scenarios;
  ReturnHistogram histogram;
  std::size_t pairs = 0;                 // (firm, scenario) pairs with both returns defined
  double fraction_prop_ge_xl = 0.0;      // unweighted share of pairs
  double probability_prop_ge_xl = 0.0;   // share weighted by scenario probability
  std::size_t n_failed = 0;
};

/// Builds the XL and proportional systems from the same cessions and firm
/// data and runs both on identical sampled shocks. Scenario k of a family
/// draws its shock from that family's stream with index k.
inline CompareReport compare_systems(const std::vector<CessionRecord>& cessions, const SynthesisConfig& config,
                                     const std::vector<ShockFamily>& families, unsigned threads = 0,
                                     const ScenarioOptions& opt = {}) {
  const auto merged = aggregate_cessions(cessions);
  const auto firms = calibrate_firms(merged, config);
  const auto xl = build_xl_network(merged, firms, config).network;
  const auto prop = build_proportional_network(merged, firms);

  struct Task {
    const ShockFamily* family;
    std::size_t k;
  };
  std::vector<Task> tasks;
  for (const auto& f : families) {
    if (f.scenarios < 0) throw std::invalid_argument("scenario count must be nonnegative");
    for (int k = 0; k < f.scenarios; ++k) tasks.push_back({&f, static_cast<std::size_t>(k)});
  }

  CompareReport rep;
  for (const auto& f : firms) rep.firm_ids.push_back(f.id);
  rep.scenarios = parallel_map(tasks.size(), threads, [&](std::size_t t) {
    const auto& task = tasks[t];
    PairedScenario ps;
    ps.index = t;
    ps.family = task.family->name;
    ps.weight = task.family->weight / task.family->scenarios;
    Rng rng = Rng::stream(config.seed, task.family->stream, task.k);
    const auto sh = generate_shock(firms, task.family->aggregate, rng);
    ps.xl = run_scenario(xl, sh, opt);
    ps.proportional = run_scenario(prop, sh, opt);
    return ps;
  });

  double lo = HUGE_VAL, hi = -HUGE_VAL;
  double weight_total = 0.0, weight_ge = 0.0;
  std::size_t ge = 0;
  for (const auto& ps : rep.scenarios) {
    if (ps.xl.failed || ps.proportional.failed) {
      ++rep.n_failed;
      continue;
    }
    for (std::size_t i = 0; i < firms.size(); ++i) {
      for (const auto* r : {&ps.xl.returns[i], &ps.proportional.returns[i]})
        if (*r) {
          lo = std::min(lo, **r);
          hi = std::max(hi, **r);
        }
      if (ps.xl.returns[i] && ps.proportional.returns[i]) {
        ++rep.pairs;
        weight_total += ps.weight;
        if (*ps.proportional.returns[i] >= *ps.xl.returns[i]) {
          ++ge;
          weight_ge += ps.weight;
        }
      }
    }
  }
  if (rep.pairs > 0) {
    rep.fraction_prop_ge_xl = static_cast<double>(ge) / static_cast<double>(rep.pairs);
    rep.probability_prop_ge_xl = weight_ge / weight_total;
  }

  auto& h = rep.histogram;
  if (lo <= hi) {
    h.first_bin = h.bin_of(lo);
    const auto bins = static_cast<std::size_t>(h.bin_of(hi) - h.first_bin + 1);
    h.xl.assign(bins, 0.0);
    h.proportional.assign(bins, 0.0);
    auto slot = [&](double r) { return static_cast<std::size_t>(h.bin_of(r) - h.first_bin); };
    for (const auto& ps : rep.scenarios) {
      if (ps.xl.failed || ps.proportional.failed) continue;
      for (std::size_t i = 0; i < firms.size(); ++i) {
        if (ps.xl.returns[i]) h.xl[slot(*ps.xl.returns[i])] += ps.weight;
        if (ps.proportional.returns[i]) h.proportional[slot(*ps.proportional.returns[i])] += ps.weight;
      }
    }
  }
  return rep;
}

}  // namespace reinsurance
