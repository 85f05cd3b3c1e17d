#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "cachenet/special_functions.hpp"
#include "cachenet/traffic_model.hpp"

namespace cachenet {

/// User-facing scenario description. Units are the ones people write in
/// configs (dBm, MHz-free Hz, Mbit); conversion to SI happens once in
/// make_network_params. Defaults are the reference deployment: 4 BSs and
/// 400 users per pi*500^2 m^2, 43 dBm, 20 MHz, beta = 4, 0.025 packets/s,
/// alpha = 0.25, tau = 0.5 s, Zipf(0.8) over 200 packets of 10 Mbit, M = 10.
struct Scenario {
  double user_intensity = 400.0 / (3.14159265358979323846 * 500.0 * 500.0);  // nodes/m^2
  double bs_intensity = 4.0 / (3.14159265358979323846 * 500.0 * 500.0);      // nodes/m^2
  double cell_shape_k = 3.575;
  double path_loss = 4.0;
  double tx_power_dbm = 43.0;
  double bandwidth_hz = 20e6;
  double slot_duration_s = 0.5;
  double packet_size_mbit = 10.0;
  double request_rate = 0.025;  // packets/s per user
  double alpha = 0.25;
  std::size_t cache_slots = 10;
  double zipf_exponent = 0.8;
  std::size_t catalog_size = 200;
  /// Receiver noise figure; absent means interference-limited (sigma^2 = 0).
  std::optional<double> noise_figure_db;
};

/// Validated, SI-unit network description.
struct NetworkParams {
  double user_intensity = 0.0;  // nodes/m^2
  double bs_intensity = 0.0;    // nodes/m^2
  double cell_shape_k = 3.575;
  double path_loss = 4.0;
  double tx_power = 0.0;      // W
  double noise_power = 0.0;   // W
  double bandwidth = 0.0;     // Hz
  double packet_bits = 0.0;   // bits
  CacheConfig cache;
  PopularityModel popularity;
  TrafficParams traffic;

  double slot_duration() const { return traffic.slot_duration; }
  /// Per-user BS load per slot, lambda_bar * tau.
  double per_user_load() const { return traffic.effective_rate * traffic.slot_duration; }
  /// T_bar = 2^(T / (tau B)) - 1.
  double sinr_threshold() const;
  /// ceil(1 / (lambda_bar tau)): cells with at least this many users are full-load.
  /// Returns SIZE_MAX when there is no BS traffic at all.
  std::size_t full_load_threshold() const;
};

double dbm_to_watts(double dbm);

/// Thermal noise -174 dBm/Hz over the bandwidth plus the noise figure, in W.
double thermal_noise_watts(double bandwidth_hz, double noise_figure_db);

NetworkParams make_network_params(const Scenario& s);

struct CellLoadProbabilities {
  double p_full = 0.0;    // p_t
  double p_free = 0.0;    // p_0
  double p_modest = 0.0;  // p_m
};

enum class AveragingConvention {
  /// Loss averaged over requests actually sent over the air.
  OverAirRequests,
  /// Loss averaged over every request; cache hits count as successes.
  AllRequests,
};

std::string_view to_string(AveragingConvention c);
AveragingConvention parse_averaging_convention(std::string_view name);

/// The convention that reproduces the reported caching gains.
inline constexpr AveragingConvention kDefaultAveraging = AveragingConvention::AllRequests;

struct PlrReport {
  double plr_untenable = 0.0;
  /// Absent when no user is cache-enabled (alpha = 0).
  std::optional<double> plr_cache_enabled;
  double avg_plr = 0.0;
  double avg_plr_over_air = 0.0;
  double avg_plr_all_requests = 0.0;
  double sinr_threshold = 0.0;
  double active_density = 0.0;
  AveragingConvention averaging_convention = kDefaultAveraging;
};

struct AnalysisResult {
  CellLoadProbabilities loads;
  PlrReport plr;
};

// Cell loads.

/// ln P(N = n), the number of users in a typical cell (negative binomial with
/// shape K from the gamma cell-size law).
double log_user_count_pmf(std::size_t n, const NetworkParams& params);
double user_count_pmf(std::size_t n, const NetworkParams& params);
/// Smallest n with P(N <= n) >= 1 - 1e-12, capped at 1e5.
std::size_t user_count_truncation(const NetworkParams& params);

double full_load_prob(const NetworkParams& params);
double empty_queue_prob_conditional(std::size_t n, const NetworkParams& params);
double free_load_prob(const NetworkParams& params);
double modest_load_prob(const NetworkParams& params);
CellLoadProbabilities load_probabilities(const NetworkParams& params);

// Interference and loss.

double active_density(const NetworkParams& params, const CellLoadProbabilities& loads);
double interference_laplace(double r, double t_bar, double beta, double density);
double serving_distance_pdf(double r, double bs_intensity);

double plr_untenable(const NetworkParams& params, double active,
                     const special::QuadratureConfig& quad = {});
double plr_cache_enabled(const NetworkParams& params, double active, double w_uncached,
                         const special::QuadratureConfig& quad = {});

/// Interference-limited beta = 4 closed forms.
double plr_untenable_closed(double t_bar, double p_free, double p_full);
double plr_cache_enabled_closed(double t_bar, double p_free, double p_full, double alpha, double delta);

double average_plr(double alpha, double delta, std::optional<double> plr_c, double plr_u,
                   AveragingConvention convention);

AnalysisResult analyze(const NetworkParams& params, AveragingConvention convention = kDefaultAveraging,
                       const special::QuadratureConfig& quad = {});

}  // namespace cachenet
