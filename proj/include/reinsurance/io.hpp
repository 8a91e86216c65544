#pragma once

// File formats: cession CSV, key-value synthesis config, network and report
// JSON, CSV tables, and the run manifest embedded in every output.
//
// Real numbers are written as decimal strings using the shortest
// round-trip representation (std::to_chars), which is locale independent;
// unlimited caps are written as "inf". Readers accept either strings or JSON
// numbers.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "reinsurance/network.hpp"
#include "reinsurance/synthesis.hpp"

namespace reinsurance::io {

using nlohmann::ordered_json;

inline constexpr const char* kToolName = "reinsure";
inline constexpr const char* kToolVersion = "0.1.0";

/// Malformed input content (bad CSV row, unknown config key, bad JSON).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string decimal(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds -0
  std::array<char, 64> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || std::isnan(v))
    throw InputError(what + ": '" + std::string(s) + "' is not a number");
  return v;
}

inline std::uint64_t parse_u64(std::string_view s, const std::string& what) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError(what + ": '" + std::string(s) + "' is not a nonnegative integer");
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw IoError("error writing " + path);
}

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

// ---- CSV ------------------------------------------------------------------

/// Splits one CSV line into fields. Double quotes may wrap a field; "" inside
/// quotes is a literal quote.
inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += ch;
    }
  }
  if (quoted) throw InputError("line " + std::to_string(line_no) + ": unterminated quoted field");
  fields.push_back(std::move(cur));
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

/// Parses cession CSV text with header `ceding_firm,reinsurer,premium_ceded`.
/// Blank lines and lines starting with '#' are skipped.
/// Rows are returned as written; duplicates are merged later.
inline std::vector<CessionRecord> parse_cessions(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<CessionRecord> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos || line.front() == '#') continue;
    const auto fields = split_csv_line(line, line_no);
    const std::string where = "line " + std::to_string(line_no);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"ceding_firm", "reinsurer", "premium_ceded"})
        throw InputError(where + ": expected header ceding_firm,reinsurer,premium_ceded");
      header_seen = true;
      continue;
    }
    if (fields.size() != 3)
      throw InputError(where + ": expected 3 fields, found " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) throw InputError(where + ": empty firm id");
    if (fields[0] == fields[1]) throw InputError(where + ": firm " + fields[0] + " cedes to itself");
    const double p = parse_double(fields[2], where + ": premium_ceded");
    if (!(p > 0.0) || !std::isfinite(p)) throw InputError(where + ": premium_ceded must be positive and finite");
    out.push_back({fields[0], fields[1], p});
  }
  if (!header_seen) throw InputError("cession file is empty");
  return out;
}

inline std::string format_cessions(const std::vector<CessionRecord>& records) {
  std::string out = "ceding_firm,reinsurer,premium_ceded\n";
  for (const auto& r : records)
    out += csv_field(r.ceding_firm) + "," + csv_field(r.reinsurer) + "," + decimal(r.premium_ceded) + "\n";
  return out;
}

/// Shock CSV with header `firm,shock`; firms not listed get zero. Lines
/// starting with '#' are skipped.
inline std::vector<double> parse_shock(std::string_view text, const std::vector<Firm>& firms) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < firms.size(); ++i) idx[firms[i].id] = i;
  std::vector<double> sh(firms.size(), 0.0);
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos || line.front() == '#') continue;
    const auto fields = split_csv_line(line, line_no);
    const std::string where = "line " + std::to_string(line_no);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"firm", "shock"}) throw InputError(where + ": expected header firm,shock");
      header_seen = true;
      continue;
    }
    if (fields.size() != 2) throw InputError(where + ": expected 2 fields");
    auto it = idx.find(fields[0]);
    if (it == idx.end()) throw InputError(where + ": unknown firm " + fields[0]);
    const double v = parse_double(fields[1], where + ": shock");
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError(where + ": shock must be nonnegative and finite");
    sh[it->second] = v;
  }
  if (!header_seen) throw InputError("shock file is empty");
  return sh;
}

// ---- config ---------------------------------------------------------------

/// Flat `key = value` file; `#` starts a comment. Bounds are written `lo, hi`.
/// Every key is required and unknown keys are rejected.
inline SynthesisConfig parse_config(std::string_view text) {
  static const std::vector<std::string> keys = {"premium_to_limit",
                                                "limit_to_deductible",
                                                "top_layer_premium_share",
                                                "n_layers",
                                                "primary_cede_ratio_bounds",
                                                "reinsurer_cede_ratio_bounds",
                                                "leverage_bounds",
                                                "shock_aggregate_1_in_100",
                                                "shock_aggregate_1_in_250",
                                                "seed"};
  std::map<std::string, std::pair<std::string, std::size_t>> values;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string line(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string::npos) throw InputError(where + ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw InputError(where + ": unknown key '" + key + "'");
    if (values.count(key)) throw InputError(where + ": duplicate key '" + key + "'");
    values[key] = {trim(line.substr(eq + 1)), line_no};
  }
  for (const auto& k : keys)
    if (!values.count(k)) throw InputError("config is missing key '" + k + "'");

  auto num = [&](const std::string& k) { return parse_double(values[k].first, "config key " + k); };
  auto bounds = [&](const std::string& k) {
    const auto& v = values[k].first;
    const auto comma = v.find(',');
    if (comma == std::string::npos) throw InputError("config key " + k + ": expected 'lo, hi'");
    return Bounds{parse_double(v.substr(0, comma), "config key " + k), parse_double(v.substr(comma + 1), "config key " + k)};
  };
  SynthesisConfig c;
  c.premium_to_limit = num("premium_to_limit");
  c.limit_to_deductible = num("limit_to_deductible");
  c.top_layer_premium_share = num("top_layer_premium_share");
  const auto layers = parse_u64(values["n_layers"].first, "config key n_layers");
  if (layers < 1 || layers > 100) throw InputError("config key n_layers: must lie in [1, 100]");
  c.n_layers = static_cast<int>(layers);
  c.primary_cede_ratio_bounds = bounds("primary_cede_ratio_bounds");
  c.reinsurer_cede_ratio_bounds = bounds("reinsurer_cede_ratio_bounds");
  c.leverage_bounds = bounds("leverage_bounds");
  c.shock_aggregate_1_in_100 = num("shock_aggregate_1_in_100");
  c.shock_aggregate_1_in_250 = num("shock_aggregate_1_in_250");
  c.seed = parse_u64(values["seed"].first, "config key seed");
  try {
    c.validate();
  } catch (const std::invalid_argument& err) {
    throw InputError(err.what());
  }
  return c;
}

inline std::string format_config(const SynthesisConfig& c) {
  auto b = [](const Bounds& x) { return decimal(x.lo) + ", " + decimal(x.hi); };
  std::string out;
  out += "premium_to_limit = " + decimal(c.premium_to_limit) + "\n";
  out += "limit_to_deductible = " + decimal(c.limit_to_deductible) + "\n";
  out += "top_layer_premium_share = " + decimal(c.top_layer_premium_share) + "\n";
  out += "n_layers = " + std::to_string(c.n_layers) + "\n";
  out += "primary_cede_ratio_bounds = " + b(c.primary_cede_ratio_bounds) + "\n";
  out += "reinsurer_cede_ratio_bounds = " + b(c.reinsurer_cede_ratio_bounds) + "\n";
  out += "leverage_bounds = " + b(c.leverage_bounds) + "\n";
  out += "shock_aggregate_1_in_100 = " + decimal(c.shock_aggregate_1_in_100) + "\n";
  out += "shock_aggregate_1_in_250 = " + decimal(c.shock_aggregate_1_in_250) + "\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  return out;
}

inline ordered_json config_json(const SynthesisConfig& c) {
  auto b = [](const Bounds& x) { return ordered_json::array({decimal(x.lo), decimal(x.hi)}); };
  return ordered_json{{"premium_to_limit", decimal(c.premium_to_limit)},
                      {"limit_to_deductible", decimal(c.limit_to_deductible)},
                      {"top_layer_premium_share", decimal(c.top_layer_premium_share)},
                      {"n_layers", c.n_layers},
                      {"primary_cede_ratio_bounds", b(c.primary_cede_ratio_bounds)},
                      {"reinsurer_cede_ratio_bounds", b(c.reinsurer_cede_ratio_bounds)},
                      {"leverage_bounds", b(c.leverage_bounds)},
                      {"shock_aggregate_1_in_100", decimal(c.shock_aggregate_1_in_100)},
                      {"shock_aggregate_1_in_250", decimal(c.shock_aggregate_1_in_250)},
                      {"seed", c.seed}};
}

// ---- manifest -------------------------------------------------------------

struct InputDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  ordered_json config;   // snapshot, null when no config applies
  ordered_json options;  // command options that affect the output
  std::vector<InputDigest> inputs;

  void add_input(const std::string& path, std::string_view content) { inputs.push_back({path, sha256_hex(content)}); }

  ordered_json to_json() const {
    ordered_json in = ordered_json::array();
    for (const auto& i : inputs) in.push_back({{"path", i.path}, {"sha256", i.sha256}});
    return ordered_json{{"tool", kToolName},   {"version", kToolVersion}, {"command", command},
                        {"seed", seed},        {"config", config},        {"options", options},
                        {"inputs", in}};
  }
};

/// Prefix line for CSV outputs.
inline std::string manifest_comment(const RunManifest& m) { return "# manifest " + m.to_json().dump() + "\n"; }

// ---- JSON numbers ---------------------------------------------------------

inline double json_number(const ordered_json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>(), what);
  throw InputError(what + ": expected a number or decimal string");
}

inline const ordered_json& require_key(const ordered_json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline ordered_json parse_json(const std::string& text, const std::string& what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw InputError(what + ": " + err.what());
  }
}

// ---- network --------------------------------------------------------------

inline ordered_json network_json(const ReinsuranceNetwork& net, const std::string& kind) {
  ordered_json firms = ordered_json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& f = net.firms[i];
    firms.push_back({{"id", f.id},
                     {"role", to_string(f.role)},
                     {"equity", decimal(f.equity)},
                     {"primary_premiums", decimal(f.primary_premiums)},
                     {"foreign_reins_premiums", decimal(f.foreign_reins_premiums)},
                     {"shock", decimal(i < net.shock.size() ? net.shock[i] : 0.0)}});
  }
  ordered_json contracts = ordered_json::array();
  for (const auto& c : net.contracts)
    contracts.push_back({{"reinsurer", net.firms[c.reinsurer].id},
                         {"reinsured", net.firms[c.reinsured].id},
                         {"layer", c.layer},
                         {"rate", decimal(c.rate)},
                         {"deductible", decimal(c.deductible)},
                         {"cap", decimal(c.cap.value())},
                         {"premium_ceded", decimal(c.premium_ceded)}});
  return ordered_json{{"kind", kind}, {"firms", firms}, {"contracts", contracts}};
}

/// Reads a network object. Numeric fields other than ids are optional and
/// default to zero (caps default to unlimited).
inline ReinsuranceNetwork network_from_json(const ordered_json& j) {
  const auto& firms_j = require_key(j, "firms", "network");
  const auto& contracts_j = require_key(j, "contracts", "network");
  if (!firms_j.is_array() || !contracts_j.is_array()) throw InputError("network: firms and contracts must be arrays");
  ReinsuranceNetwork net;
  std::map<std::string, FirmIndex> idx;
  auto opt_num = [](const ordered_json& o, const char* key, double def, const std::string& where) {
    return o.contains(key) ? json_number(o.at(key), where + "." + key) : def;
  };
  for (std::size_t i = 0; i < firms_j.size(); ++i) {
    const auto& f = firms_j[i];
    const std::string where = "firms[" + std::to_string(i) + "]";
    Firm firm;
    const auto& id = require_key(f, "id", where);
    if (!id.is_string() || id.get<std::string>().empty()) throw InputError(where + ".id must be a nonempty string");
    firm.id = id.get<std::string>();
    const std::string role = f.value("role", std::string("primary_insurer"));
    if (role == "primary_insurer")
      firm.role = Role::primary_insurer;
    else if (role == "reinsurer")
      firm.role = Role::reinsurer;
    else
      throw InputError(where + ".role must be primary_insurer or reinsurer");
    firm.equity = opt_num(f, "equity", 0.0, where);
    firm.primary_premiums = opt_num(f, "primary_premiums", 0.0, where);
    firm.foreign_reins_premiums = opt_num(f, "foreign_reins_premiums", 0.0, where);
    if (!idx.emplace(firm.id, i).second) throw InputError(where + ": duplicate firm id " + firm.id);
    net.firms.push_back(firm);
    net.shock.push_back(opt_num(f, "shock", 0.0, where));
  }
  auto firm_ref = [&](const ordered_json& c, const char* key, const std::string& where) {
    const auto& v = require_key(c, key, where);
    if (!v.is_string()) throw InputError(where + "." + key + " must be a firm id");
    auto it = idx.find(v.get<std::string>());
    if (it == idx.end()) throw InputError(where + "." + key + ": unknown firm " + v.get<std::string>());
    return it->second;
  };
  for (std::size_t k = 0; k < contracts_j.size(); ++k) {
    const auto& c = contracts_j[k];
    const std::string where = "contracts[" + std::to_string(k) + "]";
    Contract con;
    con.reinsurer = firm_ref(c, "reinsurer", where);
    con.reinsured = firm_ref(c, "reinsured", where);
    if (c.contains("layer")) {
      if (!c.at("layer").is_number_integer()) throw InputError(where + ".layer must be an integer");
      con.layer = c.at("layer").get<int>();
    }
    con.rate = json_number(require_key(c, "rate", where), where + ".rate");
    con.deductible = opt_num(c, "deductible", 0.0, where);
    const double cap = opt_num(c, "cap", std::numeric_limits<double>::infinity(), where);
    con.cap = std::isinf(cap) && cap > 0 ? Cap::infinite() : Cap::finite(cap);
    con.premium_ceded = opt_num(c, "premium_ceded", 0.0, where);
    net.contracts.push_back(con);
  }
  return net;
}

}  // namespace reinsurance::io
