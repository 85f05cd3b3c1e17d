#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cachenet/analytical.hpp"
#include "cachenet/simulator.hpp"
#include "json.hpp"

namespace cachenet {

inline constexpr std::string_view kVersion = "0.1.0";

enum class OutputFormat {
  Csv,
  /// CSV plus a JSON mirror with the same rows.
  Json,
};

struct SweepSpec {
  /// Name of a network key (e.g. "cache_slots"); empty runs the single configured point.
  std::string key;
  std::vector<double> values;
};

struct ExperimentSpec {
  Scenario network;
  sim::SimConfig sim;
  SweepSpec sweep;
  std::filesystem::path out_dir = "results";
  OutputFormat format = OutputFormat::Csv;
  AveragingConvention averaging = kDefaultAveraging;
  special::QuadratureConfig quadrature;
};

/// Command-line settings layered on top of the config file. Flags win.
struct CliOverrides {
  /// Raw "key=value" assignments; the key is a dotted path ("network.alpha")
  /// or a bare key that is unique across sections ("alpha").
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool no_cancellation = false;
  std::optional<double> noise_figure_db;
  std::optional<std::string> edge;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
};

/// Validated spec from a JSON document. Absent keys keep the reference defaults;
/// unknown keys, wrongly typed values and unit-suffixed keys are rejected with
/// their field path.
ExperimentSpec spec_from_json(const nlohmann::json& doc);

/// The experiment as a JSON document accepted by spec_from_json.
nlohmann::json spec_to_json(const ExperimentSpec& spec);

ExperimentSpec parse_config(const std::optional<std::filesystem::path>& path, const CliOverrides& flags = {});

/// The scenario of one sweep point.
Scenario scenario_at(const ExperimentSpec& spec, std::optional<double> sweep_value);

struct SimulatedColumns {
  double se_p_full = 0.0;
  double se_p_free = 0.0;
  double se_p_modest = 0.0;
  double se_phi_a = 0.0;
  std::optional<double> se_plr_untenable;
  std::optional<double> se_plr_cache;
  std::optional<double> se_avg_plr_air;
  std::optional<double> se_avg_plr_all;
  std::uint64_t seed = 0;
  std::size_t deployments = 0;
  std::size_t slots = 0;
};

struct ResultRow {
  std::string sweep_key;
  double p_full = 0.0;
  double p_free = 0.0;
  double p_modest = 0.0;
  double phi_a = 0.0;
  double t_bar = 0.0;
  std::optional<double> plr_untenable;
  std::optional<double> plr_cache;
  std::optional<double> avg_plr_air;
  std::optional<double> avg_plr_all;
  std::optional<SimulatedColumns> sim;
};

enum class RowKind { Analytic, Simulated };

std::vector<ResultRow> cmd_analyze(const ExperimentSpec& spec);
std::vector<ResultRow> cmd_simulate(const ExperimentSpec& spec);

struct ColumnDeviation {
  std::string column;
  double max_abs_deviation = 0.0;
  /// Sweep key where the maximum occurs.
  std::string at;
};

struct Comparison {
  std::vector<ResultRow> analytic;
  std::vector<ResultRow> simulated;
  std::vector<ColumnDeviation> deviations;
  /// Analytic loss reduction against the alpha = 0 network, per sweep point,
  /// under the configured averaging convention. Fractions, not percent.
  std::vector<std::pair<std::string, double>> reductions;
};

Comparison cmd_compare(const ExperimentSpec& spec);

/// Column names in file order.
std::vector<std::string> csv_header(RowKind kind);

std::string format_number(double v);
std::string to_csv(const std::vector<ResultRow>& rows, RowKind kind);
/// Parses a CSV produced by to_csv.
std::vector<ResultRow> parse_csv(std::string_view text, RowKind kind);
nlohmann::json to_json(const std::vector<ResultRow>& rows, RowKind kind);

/// Writes `<stem>.csv` (and `<stem>.json` for the JSON format) under `dir`,
/// creating it when needed. Returns the written paths.
std::vector<std::filesystem::path> emit_results(const std::vector<ResultRow>& rows, RowKind kind,
                                                OutputFormat format, const std::filesystem::path& dir,
                                                const std::string& stem);

/// File stem for a mode ("analytic", "simulated", ...) of this spec's sweep.
std::string output_stem(const ExperimentSpec& spec, std::string_view mode);

/// Runs a subcommand end to end and writes its files. Returns the written paths.
std::vector<std::filesystem::path> run_command(std::string_view command, const ExperimentSpec& spec);

/// Process exit code for an exception escaping run_command.
int exit_code_for(const std::exception& e);

}  // namespace cachenet
