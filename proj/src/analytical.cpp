#include "cachenet/analytical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "cachenet/errors.hpp"

namespace cachenet {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

double NetworkParams::sinr_threshold() const {
  return std::expm1(std::numbers::ln2 * packet_bits / (traffic.slot_duration * bandwidth));
}

std::size_t NetworkParams::full_load_threshold() const {
  const double rho = per_user_load();
  if (!(rho > 0.0)) return std::numeric_limits<std::size_t>::max();
  if (rho >= 1.0) return 1;
  const double x = 1.0 / rho;
  // 1/(lambda_bar tau) is frequently an integer in exact arithmetic (e.g. 80);
  // do not let a last-bit rounding error move the ceiling.
  const double nearest = std::round(x);
  if (std::fabs(x - nearest) <= 1e-12 * x) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(x));
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double thermal_noise_watts(double bandwidth_hz, double noise_figure_db) {
  return dbm_to_watts(-174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db);
}

NetworkParams make_network_params(const Scenario& s) {
  require(s.user_intensity > 0.0, "user_intensity must be > 0");
  require(s.bs_intensity > 0.0, "bs_intensity must be > 0");
  require(s.cell_shape_k > 0.0, "cell_shape_k must be > 0");
  require(s.path_loss > 2.0, "path_loss must be > 2");
  require(std::isfinite(s.tx_power_dbm), "tx_power_dbm must be finite");
  require(s.bandwidth_hz > 0.0, "bandwidth_hz must be > 0");
  require(s.slot_duration_s > 0.0, "slot_duration_s must be > 0");
  require(s.packet_size_mbit > 0.0, "packet_size_mbit must be > 0");
  require(s.request_rate > 0.0, "request_rate must be > 0");
  require(s.alpha >= 0.0 && s.alpha <= 1.0, "alpha must lie in [0, 1]");
  require(s.zipf_exponent >= 0.0, "zipf_exponent must be >= 0");
  require(s.catalog_size >= 1, "catalog_size must be >= 1");
  require(s.cache_slots <= s.catalog_size, "cache_slots must not exceed catalog_size");
  if (s.noise_figure_db) require(std::isfinite(*s.noise_figure_db), "noise_figure_db must be finite");

  NetworkParams p;
  p.user_intensity = s.user_intensity;
  p.bs_intensity = s.bs_intensity;
  p.cell_shape_k = s.cell_shape_k;
  p.path_loss = s.path_loss;
  p.tx_power = dbm_to_watts(s.tx_power_dbm);
  p.noise_power = s.noise_figure_db ? thermal_noise_watts(s.bandwidth_hz, *s.noise_figure_db) : 0.0;
  p.bandwidth = s.bandwidth_hz;
  p.packet_bits = s.packet_size_mbit * 1e6;
  p.cache = {s.alpha, s.cache_slots};
  p.popularity = zipf_popularity(s.zipf_exponent, s.catalog_size);
  p.traffic = make_traffic_params(s.request_rate, s.slot_duration_s, p.cache, p.popularity);
  return p;
}

std::string_view to_string(AveragingConvention c) {
  switch (c) {
    case AveragingConvention::OverAirRequests:
      return "over_air";
    case AveragingConvention::AllRequests:
      return "all_requests";
  }
  return "unknown";
}

AveragingConvention parse_averaging_convention(std::string_view name) {
  if (name == "over_air") return AveragingConvention::OverAirRequests;
  if (name == "all_requests") return AveragingConvention::AllRequests;
  throw ValidationError("unknown averaging convention '" + std::string(name) +
                        "' (expected over_air or all_requests)");
}

double log_user_count_pmf(std::size_t n, const NetworkParams& params) {
  const double k = params.cell_shape_k;
  const double ratio = params.user_intensity / (k * params.bs_intensity);
  // Negative binomial with success probability 1/(1 + ratio).
  const double log_p = -std::log1p(ratio);
  const double log_q = -std::log1p(1.0 / ratio);
  const double nn = static_cast<double>(n);
  const double log_binom =
      special::ln_gamma(k + nn) - special::ln_gamma(nn + 1.0) - special::ln_gamma(k);
  return log_binom + k * log_p + (n == 0 ? 0.0 : nn * log_q);
}

double user_count_pmf(std::size_t n, const NetworkParams& params) {
  return std::exp(log_user_count_pmf(n, params));
}

std::size_t user_count_truncation(const NetworkParams& params) {
  constexpr std::size_t kCap = 100000;
  double cumulative = 0.0;
  for (std::size_t n = 0; n < kCap; ++n) {
    cumulative += user_count_pmf(n, params);
    if (cumulative >= 1.0 - 1e-12) return n;
  }
  return kCap;
}

namespace {

// Sum of PMF(n) * weight(n) over the equilibrium cells n < threshold.
template <typename Weight>
double equilibrium_sum(const NetworkParams& params, Weight weight) {
  const std::size_t threshold = params.full_load_threshold();
  const std::size_t last = std::min(threshold, user_count_truncation(params) + 1);
  double sum = 0.0;
  for (std::size_t n = 0; n < last; ++n) sum += user_count_pmf(n, params) * weight(n);
  return sum;
}

}  // namespace

double full_load_prob(const NetworkParams& params) {
  const double head = equilibrium_sum(params, [](std::size_t) { return 1.0; });
  return std::clamp(1.0 - head, 0.0, 1.0);
}

double empty_queue_prob_conditional(std::size_t n, const NetworkParams& params) {
  const double load = conditional_arrival_rate(n, params.traffic.effective_rate) * params.slot_duration();
  if (n >= params.full_load_threshold() || load >= 1.0)
    throw StabilityError("empty_queue_prob_conditional: cell with " + std::to_string(n) +
                         " users is not stable (load " + std::to_string(load) + ")");
  return 1.0 - load;
}

double free_load_prob(const NetworkParams& params) {
  const double rho = params.per_user_load();
  return equilibrium_sum(params, [rho](std::size_t n) { return 1.0 - static_cast<double>(n) * rho; });
}

double modest_load_prob(const NetworkParams& params) { return load_probabilities(params).p_modest; }

CellLoadProbabilities load_probabilities(const NetworkParams& params) {
  CellLoadProbabilities loads;
  loads.p_full = full_load_prob(params);
  loads.p_free = free_load_prob(params);
  const double rest = 1.0 - loads.p_full - loads.p_free;
  if (rest < -1e-9)
    throw std::logic_error("load_probabilities: p_full + p_free exceeds 1 by " + std::to_string(-rest));
  loads.p_modest = std::max(rest, 0.0);
  return loads;
}

double active_density(const NetworkParams& params, const CellLoadProbabilities& loads) {
  return (1.0 - loads.p_free + loads.p_free * loads.p_full) * params.bs_intensity;
}

double interference_laplace(double r, double t_bar, double beta, double density) {
  if (!(r > 0.0)) throw DomainError("interference_laplace: r must be > 0");
  if (!(density >= 0.0)) throw DomainError("interference_laplace: density must be >= 0");
  return std::exp(-kPi * density * r * r * special::z1(t_bar, beta));
}

double serving_distance_pdf(double r, double bs_intensity) {
  if (!(r >= 0.0)) throw DomainError("serving_distance_pdf: r must be >= 0");
  if (!(bs_intensity > 0.0)) throw DomainError("serving_distance_pdf: intensity must be > 0");
  return 2.0 * kPi * bs_intensity * r * std::exp(-kPi * bs_intensity * r * r);
}

namespace {

// 1 - E_r[exp(-noise term) L_I(r)], integrated in s = pi phi_b r^2 where the
// integrand becomes exp(-s) (1 - exp(-k s - c s^(beta/2))).
double loss_integral(const NetworkParams& params, double interferer_density,
                     const special::QuadratureConfig& quad) {
  if (!(interferer_density >= 0.0)) throw DomainError("interferer density must be >= 0");
  const double t_bar = params.sinr_threshold();
  if (t_bar == 0.0) return 0.0;
  const double beta = params.path_loss;
  const double k = interferer_density / params.bs_intensity * special::z1(t_bar, beta);
  const double c = params.noise_power * t_bar / params.tx_power *
                   std::pow(kPi * params.bs_intensity, -0.5 * beta);
  const double half_beta = 0.5 * beta;
  auto integrand = [&](double s) {
    const double exponent = k * s + (c > 0.0 ? c * std::pow(s, half_beta) : 0.0);
    return std::exp(-s) * -std::expm1(-exponent);
  };
  return std::clamp(special::integrate_semi_infinite(integrand, quad), 0.0, 1.0);
}

double closed_form_loss(double t_bar, double density_factor) {
  if (!(t_bar >= 0.0)) throw DomainError("closed-form PLR: threshold must be >= 0");
  if (t_bar == 0.0) return 0.0;
  const double root = std::sqrt(t_bar);
  const double x = density_factor * root * std::atan(root);
  return x / (1.0 + x);
}

}  // namespace

double plr_untenable(const NetworkParams& params, double active, const special::QuadratureConfig& quad) {
  return loss_integral(params, active, quad);
}

double plr_cache_enabled(const NetworkParams& params, double active, double w_uncached,
                         const special::QuadratureConfig& quad) {
  check_probability(w_uncached, "plr_cache_enabled: w_uncached");
  return loss_integral(params, w_uncached * active, quad);
}

double plr_untenable_closed(double t_bar, double p_free, double p_full) {
  return closed_form_loss(t_bar, 1.0 - p_free + p_free * p_full);
}

double plr_cache_enabled_closed(double t_bar, double p_free, double p_full, double alpha, double delta) {
  const SplitFractions w = split_fractions(alpha, delta);
  return closed_form_loss(t_bar, (1.0 - p_free + p_free * p_full) * w.uncached);
}

double average_plr(double alpha, double delta, std::optional<double> plr_c, double plr_u,
                   AveragingConvention convention) {
  check_probability(alpha, "average_plr: alpha");
  check_probability(delta, "average_plr: delta");
  check_probability(plr_u, "average_plr: plr_u");
  double cache_term = 0.0;
  if (alpha > 0.0) {
    if (!plr_c) throw DomainError("average_plr: cache-enabled loss rate required when alpha > 0");
    check_probability(*plr_c, "average_plr: plr_c");
    cache_term = alpha * (1.0 - delta) * *plr_c;
  }
  const double all = cache_term + (1.0 - alpha) * plr_u;
  if (convention == AveragingConvention::AllRequests) return all;
  const double over_air = 1.0 - alpha * delta;
  if (over_air <= 0.0) throw DegenerateInputError("average_plr: no over-the-air requests when alpha * delta = 1");
  return all / over_air;
}

AnalysisResult analyze(const NetworkParams& params, AveragingConvention convention,
                       const special::QuadratureConfig& quad) {
  AnalysisResult out;
  out.loads = load_probabilities(params);
  PlrReport& r = out.plr;
  r.averaging_convention = convention;
  r.sinr_threshold = params.sinr_threshold();
  r.active_density = active_density(params, out.loads);
  r.plr_untenable = plr_untenable(params, r.active_density, quad);
  const double alpha = params.cache.alpha;
  const double delta = params.traffic.hit_ratio;
  if (alpha > 0.0) {
    const SplitFractions w = split_fractions(alpha, delta);
    r.plr_cache_enabled = plr_cache_enabled(params, r.active_density, w.uncached, quad);
  }
  r.avg_plr_all_requests =
      average_plr(alpha, delta, r.plr_cache_enabled, r.plr_untenable, AveragingConvention::AllRequests);
  r.avg_plr_over_air =
      average_plr(alpha, delta, r.plr_cache_enabled, r.plr_untenable, AveragingConvention::OverAirRequests);
  r.avg_plr = convention == AveragingConvention::AllRequests ? r.avg_plr_all_requests : r.avg_plr_over_air;
  return out;
}

}  // namespace cachenet
