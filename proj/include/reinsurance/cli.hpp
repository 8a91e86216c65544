#pragma once

// The `reinsure` command line: synth, build, solve, diagnose and study.
// Exit codes: 0 success, 2 invalid input or validation failure, 3 divergence
// or missing uniqueness certificate, 4 file I/O failure, 1 anything else.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "reinsurance/diagnostics.hpp"
#include "reinsurance/harness.hpp"
#include "reinsurance/io.hpp"
#include "reinsurance/line_graph.hpp"
#include "reinsurance/liability.hpp"
#include "reinsurance/solve.hpp"
#include "reinsurance/synthesis.hpp"

namespace reinsurance::cli {

enum ExitCode : int { ok = 0, failure = 1, invalid_input = 2, diverged = 3, io_failure = 4 };

using io::decimal;
using io::ordered_json;

/// Output files of a command, keyed by file name, in write order.
using Outputs = std::vector<std::pair<std::string, std::string>>;

inline std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

inline std::string optional_decimal(const std::optional<double>& v) { return v ? decimal(*v) : std::string(); }

// ---- report formatting ----------------------------------------------------

inline ordered_json structure_json(const StructureReport& rep, const LineGraphSystem& sys,
                                   const std::vector<Firm>& firms) {
  ordered_json cycle_contracts = ordered_json::array();
  if (rep.cycle.detected)
    for (auto e : rep.cycle.component)
      cycle_contracts.push_back({{"reinsurer", firms[sys.edges[e].reinsurer].id},
                                 {"reinsured", firms[sys.edges[e].reinsured].id},
                                 {"layer", sys.edges[e].layer}});
  return ordered_json{
      {"contracts", sys.size()},
      {"rho_full", decimal(rep.rho_full)},
      {"rho_infinite_caps", decimal(rep.rho_infinite_caps)},
      {"rho_omega", rep.rho_omega ? ordered_json(decimal(*rep.rho_omega)) : ordered_json(nullptr)},
      {"omega", {{"skipped", rep.omega_skipped}, {"feasible_patterns", rep.feasible_patterns}}},
      {"certificate", to_string(rep.certificate)},
      {"hundred_percent_cycle", {{"detected", rep.cycle.detected}, {"contracts", cycle_contracts}}}};
}

inline ordered_json solution_json(const LiabilitySolution& sol, const LineGraphSystem& sys,
                                  const std::vector<Firm>& firms) {
  ordered_json contracts = ordered_json::array();
  for (std::size_t e = 0; e < sys.size(); ++e) {
    const auto ee = static_cast<Eigen::Index>(e);
    ordered_json c{{"reinsurer", firms[sys.edges[e].reinsurer].id},
                   {"reinsured", firms[sys.edges[e].reinsured].id},
                   {"layer", sys.edges[e].layer}};
    if (sol.ell.size() == static_cast<Eigen::Index>(sys.size())) {
      c["liability"] = decimal(sol.ell(ee));
      c["deductible_active"] = static_cast<bool>(sol.activation.B.at(e));
      c["cap_active"] = static_cast<bool>(sol.activation.C.at(e));
    }
    contracts.push_back(std::move(c));
  }
  ordered_json out{{"algorithm", static_cast<int>(sol.algorithm)},
                   {"status", to_string(sol.status)},
                   {"iterations", sol.iterations},
                   {"linear_solves", sol.linear_solves},
                   {"residual", decimal(sol.residual)},
                   {"multiplicity_warning", sol.multiplicity_warning},
                   {"note", sol.note},
                   {"contracts", contracts}};
  if (sol.converged()) {
    const Eigen::MatrixXd L = liabilities_matrix(sys, sol.ell);
    ordered_json entries = ordered_json::array();
    for (Eigen::Index i = 0; i < L.rows(); ++i)
      for (Eigen::Index j = 0; j < L.cols(); ++j)
        if (L(i, j) != 0.0)
          entries.push_back({{"debtor", firms[static_cast<std::size_t>(i)].id},
                             {"creditor", firms[static_cast<std::size_t>(j)].id},
                             {"amount", decimal(L(i, j))}});
    const Eigen::VectorXd delta = net_liabilities(L);
    ordered_json net = ordered_json::array();
    for (Eigen::Index i = 0; i < delta.size(); ++i)
      net.push_back({{"firm", firms[static_cast<std::size_t>(i)].id}, {"net_liability", decimal(delta(i))}});
    out["liabilities_matrix"] = entries;
    out["net_liabilities"] = net;
    out["net_liability_sum"] = decimal(delta.sum());
  }
  return out;
}

inline ordered_json scenario_summary(const ScenarioReport& r) {
  return ordered_json{{"failed", r.failed},
                      {"diagnosis", r.diagnosis},
                      {"n_defaults", r.n_defaults},
                      {"uncovered_primary", decimal(r.uncovered_primary)},
                      {"algorithm", static_cast<int>(r.algorithm)},
                      {"status", to_string(r.status)},
                      {"iterations", r.iterations},
                      {"certificate", to_string(r.certificate)},
                      {"cross_checked", r.cross_checked},
                      {"multiplicity_warning", r.multiplicity_warning}};
}

inline Outputs perturbation_outputs(const PerturbationReport& rep, const io::RunManifest& manifest) {
  const std::string head = io::manifest_comment(manifest);
  Outputs out;

  ordered_json samples = ordered_json::array();
  for (std::size_t k = 0; k < rep.per_sample.size(); ++k) {
    const auto& s = rep.per_sample[k];
    if (s.failed) samples.push_back({{"sample", k}, {"diagnosis", s.diagnosis}});
  }
  ordered_json bins = ordered_json::array();
  for (const auto& b : rep.return_change_histogram)
    bins.push_back({{"bin", b.label}, {"lo", decimal(b.lo)}, {"hi", decimal(b.hi)}, {"count", decimal(b.count)}});
  ordered_json report{
      {"manifest", manifest.to_json()},
      {"mode", "perturbation"},
      {"delta", decimal(rep.delta)},
      {"samples", rep.samples},
      {"failed_samples", rep.n_failed},
      {"failures", samples},
      {"firms_with_default_flip", rep.firms_flipped},
      {"base", scenario_summary(rep.base)},
      {"histogram",
       {{"quantity", "per-firm maximum absolute change in equity return over samples"},
        {"binning", "log10 decades: exact zeros, (0,1e-12), [1e-k,1e-k+1) up to 1e3, then [1e3,inf); firms with "
                    "zero initial equity are excluded"},
        {"bins", bins}}}};
  out.emplace_back("perturbation_report.json", dump(report));

  std::string firms = head + "firm,max_return_change,max_equity_change,default_flipped\n";
  for (std::size_t i = 0; i < rep.firm_ids.size(); ++i)
    firms += io::csv_field(rep.firm_ids[i]) + "," + optional_decimal(rep.max_return_change[i]) + "," +
             decimal(rep.max_equity_change[i]) + "," + std::to_string(rep.default_flipped[i]) + "\n";
  out.emplace_back("perturbation_firms.csv", firms);

  std::string per_sample = head + "sample,failed,n_defaults,default_flips,max_return_change,max_equity_change\n";
  for (std::size_t k = 0; k < rep.per_sample.size(); ++k) {
    const auto& s = rep.per_sample[k];
    per_sample += std::to_string(k) + "," + (s.failed ? "1" : "0") + "," + std::to_string(s.n_defaults) + "," +
                  std::to_string(s.default_flips) + "," + decimal(s.max_return_change) + "," +
                  decimal(s.max_equity_change) + "\n";
  }
  out.emplace_back("perturbation_samples.csv", per_sample);

  std::string hist = head + "bin,lo,hi,count\n";
  for (const auto& b : rep.return_change_histogram)
    hist += b.label + "," + decimal(b.lo) + "," + decimal(b.hi) + "," + decimal(b.count) + "\n";
  out.emplace_back("perturbation_histogram.csv", hist);
  return out;
}

inline Outputs compare_outputs(const CompareReport& rep, const io::RunManifest& manifest) {
  const std::string head = io::manifest_comment(manifest);
  Outputs out;

  ordered_json failures = ordered_json::array();
  for (const auto& s : rep.scenarios) {
    if (s.xl.failed) failures.push_back({{"scenario", s.index}, {"system", "xl"}, {"diagnosis", s.xl.diagnosis}});
    if (s.proportional.failed)
      failures.push_back({{"scenario", s.index}, {"system", "proportional"}, {"diagnosis", s.proportional.diagnosis}});
  }
  ordered_json report{
      {"manifest", manifest.to_json()},
      {"mode", "compare"},
      {"scenarios", rep.scenarios.size()},
      {"failed_scenarios", rep.n_failed},
      {"failures", failures},
      {"firm_scenario_pairs", rep.pairs},
      {"fraction_proportional_ge_xl", decimal(rep.fraction_prop_ge_xl)},
      {"probability_proportional_ge_xl", decimal(rep.probability_prop_ge_xl)},
      {"histogram",
       {{"quantity", "equity return e1/e0 per firm and scenario"},
        {"bin_width", decimal(rep.histogram.bin_width())},
        {"lo", decimal(rep.histogram.edge(rep.histogram.first_bin))},
        {"weighting", "each observation weighs family weight / scenarios in family (0.6 for 1-in-100, 0.4 for "
                      "1-in-250); firms with zero initial equity are excluded"}}}};
  out.emplace_back("compare_report.json", dump(report));

  std::string sc = head +
                   "scenario,family,weight,xl_failed,proportional_failed,xl_n_defaults,proportional_n_defaults,"
                   "xl_uncovered_primary,proportional_uncovered_primary,xl_algorithm,proportional_algorithm,"
                   "xl_iterations,proportional_iterations\n";
  for (const auto& s : rep.scenarios)
    sc += std::to_string(s.index) + "," + s.family + "," + decimal(s.weight) + "," + (s.xl.failed ? "1" : "0") + "," +
          (s.proportional.failed ? "1" : "0") + "," + std::to_string(s.xl.n_defaults) + "," +
          std::to_string(s.proportional.n_defaults) + "," + decimal(s.xl.uncovered_primary) + "," +
          decimal(s.proportional.uncovered_primary) + "," + std::to_string(static_cast<int>(s.xl.algorithm)) + "," +
          std::to_string(static_cast<int>(s.proportional.algorithm)) + "," + std::to_string(s.xl.iterations) + "," +
          std::to_string(s.proportional.iterations) + "\n";
  out.emplace_back("compare_scenarios.csv", sc);

  const auto& h = rep.histogram;
  std::string hist = head + "bin_lo,bin_hi,xl_weight,proportional_weight\n";
  for (std::size_t b = 0; b < h.xl.size(); ++b)
    hist += decimal(h.edge(h.first_bin + static_cast<long>(b))) + "," +
            decimal(h.edge(h.first_bin + static_cast<long>(b) + 1)) + "," + decimal(h.xl[b]) + "," +
            decimal(h.proportional[b]) + "\n";
  out.emplace_back("compare_histogram.csv", hist);

  std::string ret = head + "scenario,firm,xl_return,proportional_return,difference\n";
  for (const auto& s : rep.scenarios) {
    if (s.xl.failed || s.proportional.failed) continue;
    for (std::size_t i = 0; i < rep.firm_ids.size(); ++i) {
      const auto& a = s.xl.returns[i];
      const auto& b = s.proportional.returns[i];
      if (!a && !b) continue;
      ret += std::to_string(s.index) + "," + io::csv_field(rep.firm_ids[i]) + "," + optional_decimal(a) + "," +
             optional_decimal(b) + "," + (a && b ? decimal(*b - *a) : std::string()) + "\n";
    }
  }
  out.emplace_back("compare_returns.csv", ret);
  return out;
}

// ---- commands -------------------------------------------------------------

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
};

struct Loaded {
  SynthesisConfig config;
  io::RunManifest manifest;
};

inline Loaded load_config(const GlobalOptions& g, const std::string& command) {
  Loaded l;
  l.manifest.command = command;
  if (!g.config_path.empty()) {
    const auto text = io::read_file(g.config_path);
    l.config = io::parse_config(text);
    l.manifest.add_input(g.config_path, text);
  }
  if (g.seed) l.config.seed = *g.seed;
  l.manifest.seed = l.config.seed;
  l.manifest.config = io::config_json(l.config);
  return l;
}

inline std::vector<CessionRecord> load_cessions(const std::string& path, io::RunManifest& manifest) {
  const auto text = io::read_file(path);
  manifest.add_input(path, text);
  return io::parse_cessions(text);
}

inline ReinsuranceNetwork load_network(const std::string& path, io::RunManifest& manifest) {
  const auto text = io::read_file(path);
  manifest.add_input(path, text);
  return io::network_from_json(io::parse_json(text, path));
}

inline std::string output_path(const GlobalOptions& g, const std::string& explicit_path, const std::string& name) {
  if (!explicit_path.empty()) return explicit_path;
  if (!g.out_dir.empty()) return (std::filesystem::path(g.out_dir) / name).string();
  return {};
}

/// Writes `content` to `path`, or to `out` when the path is empty.
inline void emit(const std::string& path, const std::string& content, std::ostream& out, std::ostream& log,
                 bool quiet) {
  if (path.empty()) {
    out << content;
    return;
  }
  io::write_file(path, content);
  if (!quiet) log << "wrote " << path << "\n";
}

inline void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create directory " + dir + ": " + ec.message());
}

struct SynthArgs {
  int firms = 100;
  int reinsurers = 20;
  std::string out;
};

inline int cmd_synth(const GlobalOptions& g, const SynthArgs& a, std::ostream& out, std::ostream& log) {
  io::RunManifest m;
  m.command = "synth";
  m.seed = g.seed.value_or(0);
  m.options = {{"firms", a.firms}, {"reinsurers", a.reinsurers}};
  SyntheticSpec spec;
  spec.n_firms = a.firms;
  spec.n_reinsurers = a.reinsurers;
  spec.n_core = std::max(1, std::min(spec.n_core, a.reinsurers));
  const auto records = synthetic_cessions(m.seed, spec);
  ensure_dir(g.out_dir);
  emit(output_path(g, a.out, "cessions.csv"), io::manifest_comment(m) + io::format_cessions(records), out, log,
       g.quiet);
  return ok;
}

struct BuildArgs {
  std::string cessions;
  std::string kind = "xl";
  std::string out;
};

inline int cmd_build(const GlobalOptions& g, const BuildArgs& a, std::ostream& out, std::ostream& log) {
  auto l = load_config(g, "build");
  l.manifest.options = {{"kind", a.kind}};
  const auto cessions = aggregate_cessions(load_cessions(a.cessions, l.manifest));
  const auto firms = calibrate_firms(cessions, l.config);
  const auto net = a.kind == "xl" ? build_xl_network(cessions, firms, l.config).network
                                  : build_proportional_network(cessions, firms);
  ordered_json doc{{"manifest", l.manifest.to_json()}};
  doc.update(io::network_json(net, a.kind));
  ensure_dir(g.out_dir);
  emit(output_path(g, a.out, "network.json"), dump(doc), out, log, g.quiet);
  if (!g.quiet)
    log << a.kind << " network: " << net.size() << " firms, " << net.contracts.size() << " contracts\n";
  return ok;
}

struct SolveArgs {
  std::string network;
  std::string shock;
  std::string algorithm = "auto";
  double tol = 1e-9;
  std::optional<int> max_iters;
  std::string out;
};

inline int cmd_solve(const GlobalOptions& g, const SolveArgs& a, std::ostream& out, std::ostream& log) {
  auto l = load_config(g, "solve");
  auto net = load_network(a.network, l.manifest);
  l.manifest.options = {{"algorithm", a.algorithm}, {"tol", decimal(a.tol)}, {"shock", a.shock}};
  if (a.max_iters) l.manifest.options["max_iters"] = *a.max_iters;
  if (!a.shock.empty()) {
    double aggregate = 0.0;
    bool is_number = true;
    try {
      aggregate = io::parse_double(a.shock, "--shock");
    } catch (const io::InputError&) {
      is_number = false;
    }
    if (is_number) {
      Rng rng = Rng::stream(l.config.seed, Stream::fixed_shock);
      net.shock = generate_shock(net.firms, aggregate, rng);
    } else {
      const auto text = io::read_file(a.shock);
      l.manifest.add_input(a.shock, text);
      net.shock = io::parse_shock(text, net.firms);
    }
  }
  const auto sys = build_line_graph(net);
  SolverOptions opt;
  opt.tol = a.tol;
  opt.max_iters = a.max_iters;

  ordered_json doc{{"manifest", l.manifest.to_json()}};
  LiabilitySolution sol;
  std::optional<StructureReport> structure;
  bool cross_checked = false;
  std::string failure;
  try {
    if (a.algorithm == "auto") {
      auto r = solve_auto(sys, opt);
      sol = std::move(r.solution);
      structure = r.structure;
      cross_checked = r.cross_checked;
    } else if (a.algorithm == "1") {
      sol = solve_fixed_point_iteration(sys, opt);
    } else if (a.algorithm == "2") {
      sol = solve_no_caps(sys, opt);
    } else {
      sol = solve_with_caps(sys, opt);
    }
  } catch (const StructuralFailure& err) {
    failure = err.what();
  }
  const bool good = failure.empty() && sol.converged();
  if (!good && !structure) structure = omega_certificate(sys);
  if (failure.empty()) {
    doc["solution"] = solution_json(sol, sys, net.firms);
    doc["solution"]["cross_checked"] = cross_checked;
  } else {
    doc["solution"] = {{"status", "structural_failure"}, {"note", failure}};
  }
  if (structure) doc["structure"] = structure_json(*structure, sys, net.firms);
  ensure_dir(g.out_dir);
  emit(output_path(g, a.out, "solution.json"), dump(doc), out, log, g.quiet);
  if (!good) {
    log << "liabilities did not converge: " << (failure.empty() ? to_string(sol.status) : failure) << "\n";
    return diverged;
  }
  return ok;
}

struct DiagnoseArgs {
  std::string network;
  std::size_t omega_limit = kDefaultOmegaLimit;
  std::string out;
};

inline int cmd_diagnose(const GlobalOptions& g, const DiagnoseArgs& a, std::ostream& out, std::ostream& log) {
  io::RunManifest m;
  m.command = "diagnose";
  m.options = {{"omega_limit", a.omega_limit}};
  const auto net = load_network(a.network, m);
  const auto sys = build_line_graph(net);
  const auto rep = omega_certificate(sys, a.omega_limit);
  ordered_json doc{{"manifest", m.to_json()}, {"structure", structure_json(rep, sys, net.firms)}};
  ensure_dir(g.out_dir);
  emit(output_path(g, a.out, "structure.json"), dump(doc), out, log, g.quiet);
  if (!g.quiet) log << "certificate: " << to_string(rep.certificate) << "\n";
  return rep.certificate == Certificate::no_certificate ? diverged : ok;
}

struct StudyArgs {
  std::string cessions;
  std::string mode = "perturbation";
  double delta = 0.025;
  int samples = 50;
  int scenarios = 50;  // per shock family
  std::optional<double> shock_aggregate;
  unsigned threads = 0;
};

inline int cmd_study(const GlobalOptions& g, const StudyArgs& a, std::ostream& log) {
  auto l = load_config(g, "study");
  const auto cessions = load_cessions(a.cessions, l.manifest);
  Outputs files;
  std::size_t failed = 0;
  if (a.mode == "perturbation") {
    const double aggregate = a.shock_aggregate.value_or(l.config.shock_aggregate_1_in_100);
    l.manifest.options = {{"mode", a.mode},
                          {"delta", decimal(a.delta)},
                          {"samples", a.samples},
                          {"shock_aggregate", decimal(aggregate)}};
    const auto base = make_xl_base(cessions, l.config);
    PerturbationConfig pc;
    pc.delta = a.delta;
    pc.samples = a.samples;
    pc.seed = l.config.seed;
    pc.shock = fixed_shock(base, aggregate, l.config.seed);
    pc.threads = a.threads;
    const auto rep = perturbation_study(base, pc);
    failed = rep.n_failed;
    files = perturbation_outputs(rep, l.manifest);
  } else {
    l.manifest.options = {{"mode", a.mode}, {"scenarios_per_family", a.scenarios}};
    auto families = default_shock_families(l.config, a.scenarios);
    if (a.shock_aggregate) {
      l.manifest.options["shock_aggregate"] = decimal(*a.shock_aggregate);
      for (auto& f : families) f.aggregate = *a.shock_aggregate;
    }
    const auto rep = compare_systems(cessions, l.config, families, a.threads);
    failed = rep.n_failed;
    files = compare_outputs(rep, l.manifest);
  }
  const std::string dir = g.out_dir.empty() ? "." : g.out_dir;
  ensure_dir(dir);
  for (const auto& [name, content] : files) {
    const auto path = (std::filesystem::path(dir) / name).string();
    io::write_file(path, content);
    if (!g.quiet) log << "wrote " << path << "\n";
  }
  if (failed > 0) log << failed << " scenario(s) failed; see the report for diagnoses\n";
  return ok;
}

/// Parses `args` (without the program name) and runs the selected command.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contagion in reinsurance networks: equilibrium liabilities, diagnostics, clearing and studies",
               "reinsure"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(io::kToolVersion));

  GlobalOptions g;
  app.add_option("--seed", g.seed, "RNG seed (overrides the config file)");
  app.add_option("--config", g.config_path, "synthesis config file (key = value)");
  app.add_option("--out-dir", g.out_dir, "directory for output files");
  app.add_flag("--quiet", g.quiet, "suppress progress messages");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a synthetic core-periphery cession CSV");
  s->add_option("--firms", synth.firms, "number of firms")->check(CLI::Range(2, 100000));
  s->add_option("--reinsurers", synth.reinsurers, "firms that only receive cessions")->check(CLI::Range(1, 100000));
  s->add_option("--out", synth.out, "output CSV (default: stdout or <out-dir>/cessions.csv)");

  BuildArgs build;
  auto* b = app.add_subcommand("build", "build an XL or proportional network from cession data");
  b->add_option("--cessions", build.cessions, "cession CSV")->required();
  b->add_option("--kind", build.kind, "xl or proportional")->check(CLI::IsMember({"xl", "proportional"}));
  b->add_option("--out", build.out, "output JSON (default: stdout or <out-dir>/network.json)");

  SolveArgs solve;
  auto* v = app.add_subcommand("solve", "compute equilibrium contract liabilities");
  v->add_option("network", solve.network, "network JSON")->required();
  v->add_option("--shock", solve.shock, "aggregate loss to distribute, or a firm,shock CSV file");
  v->add_option("--algorithm", solve.algorithm, "1, 2, 3 or auto")->check(CLI::IsMember({"1", "2", "3", "auto"}));
  v->add_option("--tol", solve.tol, "convergence tolerance")->check(CLI::PositiveNumber);
  v->add_option("--max-iters", solve.max_iters, "iteration limit for fixed-point iteration")
      ->check(CLI::PositiveNumber);
  v->add_option("--out", solve.out, "output JSON (default: stdout or <out-dir>/solution.json)");

  DiagnoseArgs diag;
  auto* d = app.add_subcommand("diagnose", "spectral uniqueness certificates and 100% cycle detection");
  d->add_option("network", diag.network, "network JSON")->required();
  d->add_option("--omega-limit", diag.omega_limit, "largest contract count for activation enumeration");
  d->add_option("--out", diag.out, "output JSON (default: stdout or <out-dir>/structure.json)");

  StudyArgs study;
  auto* t = app.add_subcommand("study", "perturbation or XL vs proportional comparison study");
  t->add_option("--cessions", study.cessions, "cession CSV")->required();
  t->add_option("--mode", study.mode, "perturbation or compare")->check(CLI::IsMember({"perturbation", "compare"}));
  t->add_option("--delta", study.delta, "perturbation half-width")->check(CLI::Range(0.0, 0.999999));
  t->add_option("--samples", study.samples, "perturbation samples")->check(CLI::Range(1, 1000000));
  t->add_option("--scenarios", study.scenarios, "shock scenarios per family")->check(CLI::Range(0, 1000000));
  t->add_option("--shock-aggregate", study.shock_aggregate, "aggregate loss (overrides the config)")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--threads", study.threads, "worker threads, 0 = all cores");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << io::kToolVersion << "\n";
    return ok;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return invalid_input;
  }

  try {
    if (s->parsed()) return cmd_synth(g, synth, out, err);
    if (b->parsed()) return cmd_build(g, build, out, err);
    if (v->parsed()) return cmd_solve(g, solve, out, err);
    if (d->parsed()) return cmd_diagnose(g, diag, out, err);
    return cmd_study(g, study, err);
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << "\n";
    return io_failure;
  } catch (const io::InputError& e) {
    err << "error: " << e.what() << "\n";
    return invalid_input;
  } catch (const ValidationError& e) {
    err << "error: " << e.what();
    return invalid_input;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return invalid_input;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return failure;
  }
}

}  // namespace reinsurance::cli
