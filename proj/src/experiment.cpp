#include "cachenet/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "cachenet/errors.hpp"

namespace cachenet {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config schema

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

std::string type_name(const json& j) { return j.type_name(); }

double as_number(const std::string& path, const json& j, std::string_view unit) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    // "43 dBm", "20MHz" and friends: the unit belongs in the key, not the value.
    schema_error(path, "expected a plain number in " + std::string(unit) + ", got the string \"" +
                           j.get<std::string>() + "\"; units are fixed by the key name");
  }
  schema_error(path, "expected a number, got " + type_name(j));
}

std::size_t as_count(const std::string& path, const json& j) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer()) {
    if (j.get<long long>() < 0) schema_error(path, "must be >= 0");
    return static_cast<std::size_t>(j.get<long long>());
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 9.0e15) return static_cast<std::size_t>(v);
    schema_error(path, "expected a nonnegative integer, got " + j.dump());
  }
  schema_error(path, "expected a nonnegative integer, got " + type_name(j));
}

bool as_bool(const std::string& path, const json& j) {
  if (!j.is_boolean()) schema_error(path, "expected true or false, got " + type_name(j));
  return j.get<bool>();
}

std::string as_string(const std::string& path, const json& j) {
  if (!j.is_string()) schema_error(path, "expected a string, got " + type_name(j));
  return j.get<std::string>();
}

struct NetworkField {
  const char* unit;
  bool integer;
  std::function<void(Scenario&, double)> set;
  std::function<json(const Scenario&)> get;
};

const std::map<std::string, NetworkField>& network_fields() {
  static const std::map<std::string, NetworkField> fields = {
      {"user_intensity",
       {"nodes/m^2", false, [](Scenario& s, double v) { s.user_intensity = v; },
        [](const Scenario& s) { return json(s.user_intensity); }}},
      {"bs_intensity",
       {"nodes/m^2", false, [](Scenario& s, double v) { s.bs_intensity = v; },
        [](const Scenario& s) { return json(s.bs_intensity); }}},
      {"cell_shape_k",
       {"(dimensionless)", false, [](Scenario& s, double v) { s.cell_shape_k = v; },
        [](const Scenario& s) { return json(s.cell_shape_k); }}},
      {"path_loss",
       {"(dimensionless)", false, [](Scenario& s, double v) { s.path_loss = v; },
        [](const Scenario& s) { return json(s.path_loss); }}},
      {"tx_power_dbm",
       {"dBm", false, [](Scenario& s, double v) { s.tx_power_dbm = v; },
        [](const Scenario& s) { return json(s.tx_power_dbm); }}},
      {"bandwidth_hz",
       {"Hz", false, [](Scenario& s, double v) { s.bandwidth_hz = v; },
        [](const Scenario& s) { return json(s.bandwidth_hz); }}},
      {"slot_duration_s",
       {"s", false, [](Scenario& s, double v) { s.slot_duration_s = v; },
        [](const Scenario& s) { return json(s.slot_duration_s); }}},
      {"packet_size_mbit",
       {"Mbit", false, [](Scenario& s, double v) { s.packet_size_mbit = v; },
        [](const Scenario& s) { return json(s.packet_size_mbit); }}},
      {"request_rate",
       {"packets/s", false, [](Scenario& s, double v) { s.request_rate = v; },
        [](const Scenario& s) { return json(s.request_rate); }}},
      {"alpha",
       {"(fraction)", false, [](Scenario& s, double v) { s.alpha = v; },
        [](const Scenario& s) { return json(s.alpha); }}},
      {"cache_slots",
       {"packets", true, [](Scenario& s, double v) { s.cache_slots = static_cast<std::size_t>(v); },
        [](const Scenario& s) { return json(s.cache_slots); }}},
      {"zipf_exponent",
       {"(dimensionless)", false, [](Scenario& s, double v) { s.zipf_exponent = v; },
        [](const Scenario& s) { return json(s.zipf_exponent); }}},
      {"catalog_size",
       {"packets", true, [](Scenario& s, double v) { s.catalog_size = static_cast<std::size_t>(v); },
        [](const Scenario& s) { return json(s.catalog_size); }}},
      {"noise_figure_db",
       {"dB", false, [](Scenario& s, double v) { s.noise_figure_db = v; },
        [](const Scenario& s) { return s.noise_figure_db ? json(*s.noise_figure_db) : json(nullptr); }}},
  };
  return fields;
}

const std::vector<std::string> kSimKeys = {"area_side_m", "deployments",        "slots",   "warmup",
                                           "seed",        "edge",               "cancellation",
                                           "measure_sinr", "receivers_per_slot", "receivers", "threads",
                                           "time_budget_s"};
const std::vector<std::string> kSweepKeys = {"key", "values"};
const std::vector<std::string> kOutputKeys = {"dir", "format"};
const std::vector<std::string> kAnalysisKeys = {"averaging", "rel_tol", "abs_tol", "max_subdivisions"};
const std::vector<std::string> kSections = {"network", "sim", "sweep", "output", "analysis"};

// Keys people plausibly write with a different unit than the one we take.
const std::map<std::string, std::string>& unit_hints() {
  static const std::map<std::string, std::string> hints = {
      {"tx_power", "network.tx_power_dbm (dBm)"},
      {"tx_power_w", "network.tx_power_dbm (dBm)"},
      {"tx_power_watts", "network.tx_power_dbm (dBm)"},
      {"tx_power_mw", "network.tx_power_dbm (dBm)"},
      {"power", "network.tx_power_dbm (dBm)"},
      {"bandwidth", "network.bandwidth_hz (Hz)"},
      {"bandwidth_mhz", "network.bandwidth_hz (Hz)"},
      {"bandwidth_khz", "network.bandwidth_hz (Hz)"},
      {"slot_duration", "network.slot_duration_s (s)"},
      {"slot_duration_ms", "network.slot_duration_s (s)"},
      {"packet_size", "network.packet_size_mbit (Mbit)"},
      {"packet_size_bits", "network.packet_size_mbit (Mbit)"},
      {"packet_size_mb", "network.packet_size_mbit (Mbit)"},
      {"packet_size_kbit", "network.packet_size_mbit (Mbit)"},
      {"noise_power", "network.noise_figure_db (dB above -174 dBm/Hz thermal noise)"},
      {"noise_power_w", "network.noise_figure_db (dB above -174 dBm/Hz thermal noise)"},
      {"noise_power_dbm", "network.noise_figure_db (dB above -174 dBm/Hz thermal noise)"},
      {"noise_figure", "network.noise_figure_db (dB)"},
      {"area_side", "sim.area_side_m (m)"},
      {"area_side_km", "sim.area_side_m (m)"},
  };
  return hints;
}

bool contains(const std::vector<std::string>& keys, const std::string& k) {
  return std::find(keys.begin(), keys.end(), k) != keys.end();
}

const std::vector<std::string>& section_keys(const std::string& section) {
  static const std::vector<std::string> network = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : network_fields()) v.push_back(k);
    return v;
  }();
  if (section == "network") return network;
  if (section == "sim") return kSimKeys;
  if (section == "sweep") return kSweepKeys;
  if (section == "output") return kOutputKeys;
  return kAnalysisKeys;
}

[[noreturn]] void unknown_key(const std::string& path, const std::string& key) {
  const auto hint = unit_hints().find(key);
  if (hint != unit_hints().end())
    schema_error(path, "unit-suffixed or unit-less key is not accepted; use " + hint->second);
  schema_error(path, "unknown key");
}

double check_sweep_value(const std::string& path, const std::string& key, const json& j) {
  const auto& field = network_fields().at(key);
  const double v = as_number(path, j, field.unit);
  if (field.integer && !(v >= 0.0 && v == std::floor(v)))
    schema_error(path, key + " takes nonnegative integers, got " + j.dump());
  return v;
}

std::string sweep_label(const std::string& key, std::optional<double> value) {
  if (!value) return "default";
  return key + "=" + format_number(*value);
}

// ---------------------------------------------------------------------------
// CSV

struct Column {
  const char* name;
  std::function<std::optional<double>(const ResultRow&)> get;
  std::function<void(ResultRow&, std::optional<double>)> set;
  bool required;
};

SimulatedColumns& sim_of(ResultRow& r) {
  if (!r.sim) r.sim.emplace();
  return *r.sim;
}

const std::vector<Column>& analytic_columns() {
  static const std::vector<Column> cols = {
      {"p_full", [](const ResultRow& r) { return std::optional(r.p_full); },
       [](ResultRow& r, std::optional<double> v) { r.p_full = *v; }, true},
      {"p_free", [](const ResultRow& r) { return std::optional(r.p_free); },
       [](ResultRow& r, std::optional<double> v) { r.p_free = *v; }, true},
      {"p_modest", [](const ResultRow& r) { return std::optional(r.p_modest); },
       [](ResultRow& r, std::optional<double> v) { r.p_modest = *v; }, true},
      {"phi_a", [](const ResultRow& r) { return std::optional(r.phi_a); },
       [](ResultRow& r, std::optional<double> v) { r.phi_a = *v; }, true},
      {"t_bar", [](const ResultRow& r) { return std::optional(r.t_bar); },
       [](ResultRow& r, std::optional<double> v) { r.t_bar = *v; }, true},
      {"plr_untenable", [](const ResultRow& r) { return r.plr_untenable; },
       [](ResultRow& r, std::optional<double> v) { r.plr_untenable = v; }, false},
      {"plr_cache", [](const ResultRow& r) { return r.plr_cache; },
       [](ResultRow& r, std::optional<double> v) { r.plr_cache = v; }, false},
      {"avg_plr_air", [](const ResultRow& r) { return r.avg_plr_air; },
       [](ResultRow& r, std::optional<double> v) { r.avg_plr_air = v; }, false},
      {"avg_plr_all", [](const ResultRow& r) { return r.avg_plr_all; },
       [](ResultRow& r, std::optional<double> v) { r.avg_plr_all = v; }, false},
  };
  return cols;
}

const std::vector<Column>& simulated_columns() {
  static const std::vector<Column> cols = [] {
    std::vector<Column> c = analytic_columns();
    auto sim_get = [](auto member) {
      return [member](const ResultRow& r) -> std::optional<double> {
        if (!r.sim) return std::nullopt;
        return (*r.sim).*member;
      };
    };
    auto sim_set = [](auto member) {
      return [member](ResultRow& r, std::optional<double> v) { sim_of(r).*member = *v; };
    };
    auto sim_set_opt = [](auto member) {
      return [member](ResultRow& r, std::optional<double> v) { sim_of(r).*member = v; };
    };
    c.push_back({"se_p_full", sim_get(&SimulatedColumns::se_p_full), sim_set(&SimulatedColumns::se_p_full), true});
    c.push_back({"se_p_free", sim_get(&SimulatedColumns::se_p_free), sim_set(&SimulatedColumns::se_p_free), true});
    c.push_back(
        {"se_p_modest", sim_get(&SimulatedColumns::se_p_modest), sim_set(&SimulatedColumns::se_p_modest), true});
    c.push_back({"se_phi_a", sim_get(&SimulatedColumns::se_phi_a), sim_set(&SimulatedColumns::se_phi_a), true});
    c.push_back({"se_plr_untenable", sim_get(&SimulatedColumns::se_plr_untenable),
                 sim_set_opt(&SimulatedColumns::se_plr_untenable), false});
    c.push_back({"se_plr_cache", sim_get(&SimulatedColumns::se_plr_cache),
                 sim_set_opt(&SimulatedColumns::se_plr_cache), false});
    c.push_back({"se_avg_plr_air", sim_get(&SimulatedColumns::se_avg_plr_air),
                 sim_set_opt(&SimulatedColumns::se_avg_plr_air), false});
    c.push_back({"se_avg_plr_all", sim_get(&SimulatedColumns::se_avg_plr_all),
                 sim_set_opt(&SimulatedColumns::se_avg_plr_all), false});
    return c;
  }();
  return cols;
}

std::string format_count(std::uint64_t v) { return std::to_string(v); }

std::uint64_t parse_count(std::string_view s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ValidationError("bad integer in column " + what);
  return v;
}

std::optional<double> parse_cell(std::string_view s, const Column& c) {
  if (s.empty()) {
    if (c.required) throw ValidationError(std::string("missing value in column ") + c.name);
    return std::nullopt;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ValidationError(std::string("bad number '") + std::string(s) + "' in column " + c.name);
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

std::vector<std::optional<double>> sweep_points(const ExperimentSpec& spec) {
  if (spec.sweep.key.empty()) return {std::nullopt};
  std::vector<std::optional<double>> pts;
  for (double v : spec.sweep.values) pts.emplace_back(v);
  return pts;
}

// ---------------------------------------------------------------------------
// Comparison file

std::string compare_csv(const Comparison& c) {
  const auto& cols = analytic_columns();
  std::string out = "sweep_key";
  for (const auto& col : cols) {
    out += std::string(",") + col.name + "_analytic";
    out += std::string(",") + col.name + "_simulated";
    out += std::string(",") + col.name + "_abs_diff";
  }
  out += '\n';
  for (std::size_t i = 0; i < c.analytic.size(); ++i) {
    const ResultRow& a = c.analytic[i];
    const ResultRow& s = c.simulated[i];
    out += a.sweep_key;
    for (const auto& col : cols) {
      const auto va = col.get(a);
      const auto vs = col.get(s);
      out += ',' + (va ? format_number(*va) : std::string());
      out += ',' + (vs ? format_number(*vs) : std::string());
      out += ',' + (va && vs ? format_number(std::fabs(*va - *vs)) : std::string());
    }
    out += '\n';
  }
  return out;
}

std::string summary_csv(const Comparison& c) {
  std::string out = "metric,sweep_key,value\n";
  for (const auto& d : c.deviations)
    out += "max_abs_dev_" + d.column + "," + d.at + "," + format_number(d.max_abs_deviation) + "\n";
  for (const auto& [key, r] : c.reductions) out += "analytic_plr_reduction," + key + "," + format_number(r) + "\n";
  return out;
}

json summary_json(const Comparison& c, const ExperimentSpec& spec) {
  json j;
  j["version"] = std::string(kVersion);
  j["averaging"] = std::string(to_string(spec.averaging));
  j["max_abs_deviation"] = json::object();
  for (const auto& d : c.deviations) j["max_abs_deviation"][d.column] = {{"value", d.max_abs_deviation}, {"at", d.at}};
  j["analytic_plr_reduction"] = json::object();
  for (const auto& [key, r] : c.reductions) j["analytic_plr_reduction"][key] = r;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentSpec spec_from_json(const json& doc) {
  if (!doc.is_object()) schema_error("<root>", "expected an object, got " + type_name(doc));
  ExperimentSpec spec;
  for (const auto& [section, body] : doc.items()) {
    if (!contains(kSections, section)) {
      if (unit_hints().count(section) || network_fields().count(section) || contains(kSimKeys, section))
        schema_error(section, "settings belong inside a section, e.g. \"network\": {\"" + section + "\": ...}");
      schema_error(section, "unknown section (expected network, sim, sweep, output or analysis)");
    }
    if (!body.is_object()) schema_error(section, "expected an object, got " + type_name(body));
  }

  if (doc.contains("network")) {
    for (const auto& [key, value] : doc["network"].items()) {
      const std::string path = "network." + key;
      const auto it = network_fields().find(key);
      if (it == network_fields().end()) unknown_key(path, key);
      if (key == "noise_figure_db" && value.is_null()) {
        spec.network.noise_figure_db.reset();
        continue;
      }
      if (it->second.integer)
        it->second.set(spec.network, static_cast<double>(as_count(path, value)));
      else
        it->second.set(spec.network, as_number(path, value, it->second.unit));
    }
  }

  if (doc.contains("sim")) {
    auto& sim = spec.sim;
    for (const auto& [key, value] : doc["sim"].items()) {
      const std::string path = "sim." + key;
      if (key == "area_side_m")
        sim.area_side = as_number(path, value, "m");
      else if (key == "deployments")
        sim.deployments = as_count(path, value);
      else if (key == "slots")
        sim.slots = as_count(path, value);
      else if (key == "warmup")
        sim.warmup = as_count(path, value);
      else if (key == "seed")
        sim.seed = as_count(path, value);
      else if (key == "edge")
        sim.edge = sim::parse_edge_mode(as_string(path, value));
      else if (key == "cancellation")
        sim.cancellation = as_bool(path, value);
      else if (key == "measure_sinr")
        sim.measure_sinr = as_bool(path, value);
      else if (key == "receivers_per_slot")
        sim.receivers_per_slot = as_count(path, value);
      else if (key == "receivers")
        sim.receivers = sim::parse_receiver_sampling(as_string(path, value));
      else if (key == "threads")
        sim.threads = as_count(path, value);
      else if (key == "time_budget_s")
        sim.time_budget_s = as_number(path, value, "s");
      else
        unknown_key(path, key);
    }
  }

  if (doc.contains("sweep")) {
    const json& sw = doc["sweep"];
    for (const auto& [key, _] : sw.items())
      if (!contains(kSweepKeys, key)) unknown_key("sweep." + key, key);
    if (sw.contains("key")) spec.sweep.key = as_string("sweep.key", sw["key"]);
    if (!spec.sweep.key.empty() && !network_fields().count(spec.sweep.key))
      schema_error("sweep.key", "'" + spec.sweep.key + "' is not a network parameter");
    // Changing the catalog changes what every cache size means; sweep M or gamma instead.
    if (spec.sweep.key == "catalog_size") schema_error("sweep.key", "catalog_size cannot be swept");
    if (sw.contains("values")) {
      const json& vals = sw["values"];
      if (!vals.is_array()) schema_error("sweep.values", "expected an array, got " + type_name(vals));
      if (spec.sweep.key.empty()) schema_error("sweep.values", "given without sweep.key");
      for (std::size_t i = 0; i < vals.size(); ++i)
        spec.sweep.values.push_back(
            check_sweep_value("sweep.values[" + std::to_string(i) + "]", spec.sweep.key, vals[i]));
    }
    if (!spec.sweep.key.empty() && spec.sweep.values.empty())
      schema_error("sweep.values", "sweep.key is set but no values are given");
  }

  if (doc.contains("output")) {
    for (const auto& [key, value] : doc["output"].items()) {
      const std::string path = "output." + key;
      if (key == "dir") {
        spec.out_dir = as_string(path, value);
      } else if (key == "format") {
        const std::string f = as_string(path, value);
        if (f == "csv")
          spec.format = OutputFormat::Csv;
        else if (f == "json")
          spec.format = OutputFormat::Json;
        else
          schema_error(path, "expected csv or json, got '" + f + "'");
      } else {
        unknown_key(path, key);
      }
    }
  }

  if (doc.contains("analysis")) {
    for (const auto& [key, value] : doc["analysis"].items()) {
      const std::string path = "analysis." + key;
      if (key == "averaging")
        spec.averaging = parse_averaging_convention(as_string(path, value));
      else if (key == "rel_tol")
        spec.quadrature.rel_tol = as_number(path, value, "(relative)");
      else if (key == "abs_tol")
        spec.quadrature.abs_tol = as_number(path, value, "(absolute)");
      else if (key == "max_subdivisions")
        spec.quadrature.max_subdivisions = as_count(path, value);
      else
        unknown_key(path, key);
    }
  }

  // Whole-spec validation: every sweep point must describe a valid network.
  try {
    spec.quadrature.validate();
  } catch (const std::exception& e) {
    throw ValidationError(std::string("analysis: ") + e.what());
  }
  spec.sim.validate();
  for (const auto& v : sweep_points(spec)) {
    const std::string where = v ? "sweep point " + sweep_label(spec.sweep.key, v) : std::string("network");
    try {
      make_network_params(scenario_at(spec, v));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const DomainError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return spec;
}

json spec_to_json(const ExperimentSpec& spec) {
  json doc;
  for (const auto& [key, field] : network_fields()) doc["network"][key] = field.get(spec.network);
  const auto& s = spec.sim;
  doc["sim"] = {{"area_side_m", s.area_side},
                {"deployments", s.deployments},
                {"slots", s.slots},
                {"warmup", s.warmup},
                {"seed", s.seed},
                {"edge", std::string(sim::to_string(s.edge))},
                {"cancellation", s.cancellation},
                {"measure_sinr", s.measure_sinr},
                {"receivers_per_slot", s.receivers_per_slot},
                {"receivers", std::string(sim::to_string(s.receivers))},
                {"threads", s.threads},
                {"time_budget_s", s.time_budget_s}};
  if (!spec.sweep.key.empty()) doc["sweep"] = {{"key", spec.sweep.key}, {"values", spec.sweep.values}};
  doc["output"] = {{"dir", spec.out_dir.string()}, {"format", spec.format == OutputFormat::Csv ? "csv" : "json"}};
  doc["analysis"] = {{"averaging", std::string(to_string(spec.averaging))},
                     {"rel_tol", spec.quadrature.rel_tol},
                     {"abs_tol", spec.quadrature.abs_tol},
                     {"max_subdivisions", spec.quadrature.max_subdivisions}};
  return doc;
}

namespace {

json parse_set_value(const std::string& section, const std::string& key, const std::string& raw) {
  if (section == "sweep" && key == "values" && !raw.empty() && raw.front() != '[') {
    // Allow the shell-friendly form sweep.values=0,5,10.
    json arr = json::array();
    for (auto part : split(raw, ',')) {
      try {
        arr.push_back(json::parse(part));
      } catch (const json::parse_error&) {
        arr.push_back(std::string(part));
      }
    }
    return arr;
  }
  try {
    return json::parse(raw);
  } catch (const json::parse_error&) {
    return raw;
  }
}

void apply_set(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("--set '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  std::string section;
  std::string name;
  if (const auto dot = key.find('.'); dot != std::string::npos) {
    section = key.substr(0, dot);
    name = key.substr(dot + 1);
    if (!contains(kSections, section)) schema_error(key, "unknown section '" + section + "'");
    if (!contains(section_keys(section), name)) unknown_key(key, name);
  } else {
    std::vector<std::string> owners;
    for (const auto& s : kSections)
      if (contains(section_keys(s), key)) owners.push_back(s);
    if (owners.empty()) unknown_key(key, key);
    if (owners.size() > 1) schema_error(key, "ambiguous; prefix it with its section (e.g. " + owners[0] + "." + key + ")");
    section = owners[0];
    name = key;
  }
  doc[section][name] = parse_set_value(section, name, raw);
}

}  // namespace

ExperimentSpec parse_config(const std::optional<std::filesystem::path>& path, const CliOverrides& flags) {
  json doc = json::object();
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path->string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (!text.empty() && text.find_first_not_of(" \t\r\n") != std::string::npos) {
      try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
      } catch (const json::parse_error& e) {
        throw ValidationError(path->string() + ": " + e.what());
      }
    }
    if (!doc.is_object()) throw ValidationError(path->string() + ": top level must be an object");
  }
  for (const auto& s : flags.sets) apply_set(doc, s);
  if (flags.seed) doc["sim"]["seed"] = *flags.seed;
  if (flags.no_cancellation) doc["sim"]["cancellation"] = false;
  if (flags.noise_figure_db) doc["network"]["noise_figure_db"] = *flags.noise_figure_db;
  if (flags.edge) doc["sim"]["edge"] = *flags.edge;
  if (flags.out_dir) doc["output"]["dir"] = *flags.out_dir;
  if (flags.format) doc["output"]["format"] = *flags.format;
  return spec_from_json(doc);
}

Scenario scenario_at(const ExperimentSpec& spec, std::optional<double> sweep_value) {
  Scenario s = spec.network;
  if (sweep_value && !spec.sweep.key.empty()) network_fields().at(spec.sweep.key).set(s, *sweep_value);
  return s;
}

// ---------------------------------------------------------------------------
// Commands

std::vector<ResultRow> cmd_analyze(const ExperimentSpec& spec) {
  std::vector<ResultRow> rows;
  for (const auto& v : sweep_points(spec)) {
    const NetworkParams params = make_network_params(scenario_at(spec, v));
    const AnalysisResult a = analyze(params, spec.averaging, spec.quadrature);
    ResultRow r;
    r.sweep_key = sweep_label(spec.sweep.key, v);
    r.p_full = a.loads.p_full;
    r.p_free = a.loads.p_free;
    r.p_modest = a.loads.p_modest;
    r.phi_a = a.plr.active_density;
    r.t_bar = a.plr.sinr_threshold;
    r.plr_untenable = a.plr.plr_untenable;
    r.plr_cache = a.plr.plr_cache_enabled;
    r.avg_plr_air = a.plr.avg_plr_over_air;
    r.avg_plr_all = a.plr.avg_plr_all_requests;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> cmd_simulate(const ExperimentSpec& spec) {
  std::vector<ResultRow> rows;
  for (const auto& v : sweep_points(spec)) {
    const NetworkParams params = make_network_params(scenario_at(spec, v));
    const sim::SimReport rep = sim::run_simulation(params, spec.sim, spec.averaging);
    if (rep.stopped_early) std::cerr << "warning: " << sweep_label(spec.sweep.key, v) << ": " << rep.warning << '\n';
    ResultRow r;
    r.sweep_key = sweep_label(spec.sweep.key, v);
    r.p_full = rep.p_full.mean;
    r.p_free = rep.p_free.mean;
    r.p_modest = rep.p_modest.mean;
    r.phi_a = rep.active_fraction.mean * params.bs_intensity;
    r.t_bar = params.sinr_threshold();
    SimulatedColumns s;
    s.se_p_full = rep.p_full.std_error;
    s.se_p_free = rep.p_free.std_error;
    s.se_p_modest = rep.p_modest.std_error;
    s.se_phi_a = rep.active_fraction.std_error * params.bs_intensity;
    auto take = [](const std::optional<sim::Estimate>& e, std::optional<double>& mean, std::optional<double>& se) {
      if (!e) return;
      mean = e->mean;
      se = e->std_error;
    };
    take(rep.plr_untenable, r.plr_untenable, s.se_plr_untenable);
    take(rep.plr_cache_enabled, r.plr_cache, s.se_plr_cache);
    take(rep.avg_plr_over_air, r.avg_plr_air, s.se_avg_plr_air);
    take(rep.avg_plr_all_requests, r.avg_plr_all, s.se_avg_plr_all);
    s.seed = spec.sim.seed;
    s.deployments = rep.deployments_run;
    s.slots = spec.sim.slots;
    r.sim = s;
    rows.push_back(std::move(r));
  }
  return rows;
}

Comparison cmd_compare(const ExperimentSpec& spec) {
  Comparison c;
  c.analytic = cmd_analyze(spec);
  c.simulated = cmd_simulate(spec);
  for (const auto& col : analytic_columns()) {
    if (std::string_view(col.name) == "t_bar") continue;
    ColumnDeviation d{col.name, 0.0, ""};
    bool any = false;
    for (std::size_t i = 0; i < c.analytic.size(); ++i) {
      const auto a = col.get(c.analytic[i]);
      const auto s = col.get(c.simulated[i]);
      if (!a || !s) continue;
      const double dev = std::fabs(*a - *s);
      if (!any || dev > d.max_abs_deviation) {
        d.max_abs_deviation = dev;
        d.at = c.analytic[i].sweep_key;
      }
      any = true;
    }
    if (any) c.deviations.push_back(d);
  }
  for (const auto& v : sweep_points(spec)) {
    Scenario base = scenario_at(spec, v);
    const Scenario cached = base;
    base.alpha = 0.0;
    const auto with = analyze(make_network_params(cached), spec.averaging, spec.quadrature);
    const auto without = analyze(make_network_params(base), spec.averaging, spec.quadrature);
    c.reductions.emplace_back(sweep_label(spec.sweep.key, v), 1.0 - with.plr.avg_plr / without.plr.avg_plr);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Output

std::vector<std::string> csv_header(RowKind kind) {
  std::vector<std::string> h = {"sweep_key"};
  const auto& cols = kind == RowKind::Analytic ? analytic_columns() : simulated_columns();
  for (const auto& c : cols) h.emplace_back(c.name);
  if (kind == RowKind::Simulated) {
    h.emplace_back("seed");
    h.emplace_back("deployments");
    h.emplace_back("slots");
  }
  return h;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::logic_error("format_number: buffer too small");
  return std::string(buf, ptr);
}

std::string to_csv(const std::vector<ResultRow>& rows, RowKind kind) {
  const auto header = csv_header(kind);
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  const auto& cols = kind == RowKind::Analytic ? analytic_columns() : simulated_columns();
  for (const auto& r : rows) {
    if (r.sweep_key.find_first_of(",\"\n") != std::string::npos)
      throw ValidationError("sweep key '" + r.sweep_key + "' cannot be written to CSV");
    out += r.sweep_key;
    for (const auto& c : cols) {
      out += ',';
      if (const auto v = c.get(r)) out += format_number(*v);
    }
    if (kind == RowKind::Simulated) {
      const SimulatedColumns s = r.sim.value_or(SimulatedColumns{});
      out += ',' + format_count(s.seed) + ',' + format_count(s.deployments) + ',' + format_count(s.slots);
    }
    out += '\n';
  }
  return out;
}

std::vector<ResultRow> parse_csv(std::string_view text, RowKind kind) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n'))
    if (!line.empty()) lines.push_back(line);
  if (lines.empty()) throw ValidationError("CSV is empty (no header)");
  const auto header = csv_header(kind);
  const auto got = split(lines[0], ',');
  if (got.size() != header.size() || !std::equal(got.begin(), got.end(), header.begin()))
    throw ValidationError("CSV header does not match the expected columns");
  const auto& cols = kind == RowKind::Analytic ? analytic_columns() : simulated_columns();
  std::vector<ResultRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split(lines[li], ',');
    if (cells.size() != header.size())
      throw ValidationError("CSV line " + std::to_string(li + 1) + " has " + std::to_string(cells.size()) +
                            " fields, expected " + std::to_string(header.size()));
    ResultRow r;
    r.sweep_key = std::string(cells[0]);
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i].set(r, parse_cell(cells[i + 1], cols[i]));
    if (kind == RowKind::Simulated) {
      auto& s = sim_of(r);
      const std::size_t base = cols.size() + 1;
      s.seed = parse_count(cells[base], "seed");
      s.deployments = parse_count(cells[base + 1], "deployments");
      s.slots = parse_count(cells[base + 2], "slots");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

json to_json(const std::vector<ResultRow>& rows, RowKind kind) {
  json j;
  j["version"] = std::string(kVersion);
  j["columns"] = csv_header(kind);
  j["rows"] = json::array();
  const auto& cols = kind == RowKind::Analytic ? analytic_columns() : simulated_columns();
  for (const auto& r : rows) {
    json row;
    row["sweep_key"] = r.sweep_key;
    for (const auto& c : cols) {
      const auto v = c.get(r);
      row[c.name] = v && std::isfinite(*v) ? json(*v) : json(nullptr);
    }
    if (kind == RowKind::Simulated) {
      const SimulatedColumns s = r.sim.value_or(SimulatedColumns{});
      row["seed"] = s.seed;
      row["deployments"] = s.deployments;
      row["slots"] = s.slots;
    }
    j["rows"].push_back(std::move(row));
  }
  return j;
}

std::vector<std::filesystem::path> emit_results(const std::vector<ResultRow>& rows, RowKind kind,
                                                OutputFormat format, const std::filesystem::path& dir,
                                                const std::string& stem) {
  ensure_dir(dir);
  std::vector<std::filesystem::path> written;
  const auto csv_path = dir / (stem + ".csv");
  write_file(csv_path, to_csv(rows, kind));
  written.push_back(csv_path);
  if (format == OutputFormat::Json) {
    const auto json_path = dir / (stem + ".json");
    write_file(json_path, to_json(rows, kind).dump(2) + "\n");
    written.push_back(json_path);
  }
  return written;
}

std::string output_stem(const ExperimentSpec& spec, std::string_view mode) {
  return std::string(mode) + "_" + (spec.sweep.key.empty() ? std::string("default") : spec.sweep.key);
}

std::vector<std::filesystem::path> run_command(std::string_view command, const ExperimentSpec& spec) {
  std::vector<std::filesystem::path> written;
  auto append = [&written](std::vector<std::filesystem::path> more) {
    written.insert(written.end(), more.begin(), more.end());
  };
  if (command == "analyze") {
    append(emit_results(cmd_analyze(spec), RowKind::Analytic, spec.format, spec.out_dir,
                        output_stem(spec, "analytic")));
  } else if (command == "simulate") {
    append(emit_results(cmd_simulate(spec), RowKind::Simulated, spec.format, spec.out_dir,
                        output_stem(spec, "simulated")));
  } else if (command == "compare") {
    const Comparison c = cmd_compare(spec);
    append(emit_results(c.analytic, RowKind::Analytic, spec.format, spec.out_dir, output_stem(spec, "analytic")));
    append(emit_results(c.simulated, RowKind::Simulated, spec.format, spec.out_dir, output_stem(spec, "simulated")));
    const auto merged = spec.out_dir / (output_stem(spec, "compare") + ".csv");
    write_file(merged, compare_csv(c));
    written.push_back(merged);
    const auto summary = spec.out_dir / (output_stem(spec, "compare_summary") + ".csv");
    write_file(summary, summary_csv(c));
    written.push_back(summary);
    if (spec.format == OutputFormat::Json) {
      const auto sj = spec.out_dir / (output_stem(spec, "compare_summary") + ".json");
      write_file(sj, summary_json(c, spec).dump(2) + "\n");
      written.push_back(sj);
    }
  } else if (command == "sweep") {
    ExperimentSpec s = spec;
    if (s.sweep.key.empty()) s.sweep = {"cache_slots", {0, 5, 10, 15, 20}};
    for (double v : s.sweep.values) make_network_params(scenario_at(s, v));
    append(emit_results(cmd_analyze(s), RowKind::Analytic, s.format, s.out_dir, output_stem(s, "analytic")));
    append(emit_results(cmd_simulate(s), RowKind::Simulated, s.format, s.out_dir, output_stem(s, "simulated")));
  } else {
    throw ValidationError("unknown command '" + std::string(command) + "' (expected analyze, simulate, compare or sweep)");
  }
  return written;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 3;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DegenerateInputError*>(&e) ||
      dynamic_cast<const nlohmann::json::exception*>(&e))
    return 1;
  return 2;
}

}  // namespace cachenet
