#include "cachenet/traffic_model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cachenet/errors.hpp"

namespace cachenet {

namespace {

void check_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

PopularityModel zipf_popularity(double gamma, std::size_t catalog_size) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("zipf_popularity: exponent must be >= 0");
  if (catalog_size == 0) throw DomainError("zipf_popularity: catalog must be non-empty");

  PopularityModel pop;
  pop.exponent = gamma;
  pop.catalog_size = catalog_size;
  pop.probs.resize(catalog_size);
  for (std::size_t i = 0; i < catalog_size; ++i)
    pop.probs[i] = std::pow(static_cast<double>(i + 1), -gamma);
  // Sum smallest-first for a tighter normalizer.
  double norm = 0.0;
  for (auto it = pop.probs.rbegin(); it != pop.probs.rend(); ++it) norm += *it;
  for (double& p : pop.probs) p /= norm;
  return pop;
}

double hit_ratio(const PopularityModel& pop, std::size_t cache_slots) {
  if (cache_slots > pop.catalog_size)
    throw DomainError("hit_ratio: cache_slots " + std::to_string(cache_slots) + " exceeds catalog size " +
                      std::to_string(pop.catalog_size));
  if (cache_slots == pop.catalog_size) return 1.0;
  const double delta = std::accumulate(pop.probs.begin(), pop.probs.begin() + cache_slots, 0.0);
  return std::min(delta, 1.0);
}

double effective_rate(double lambda, double alpha, double delta) {
  if (!(lambda > 0.0)) throw DomainError("effective_rate: lambda must be > 0");
  check_unit_interval(alpha, "effective_rate: alpha");
  check_unit_interval(delta, "effective_rate: delta");
  return (1.0 - alpha * delta) * lambda;
}

double conditional_arrival_rate(std::size_t n, double lambda_bar) {
  return static_cast<double>(n) * lambda_bar;
}

SplitFractions split_fractions(double alpha, double delta) {
  check_unit_interval(alpha, "split_fractions: alpha");
  check_unit_interval(delta, "split_fractions: delta");
  const double bs_share = 1.0 - alpha * delta;
  if (bs_share <= 0.0) throw DegenerateInputError("split_fractions: alpha * delta = 1 leaves no BS traffic");
  const double cached = (1.0 - alpha) * delta / bs_share;
  return {1.0 - cached, cached};
}

TrafficParams make_traffic_params(double lambda, double tau, const CacheConfig& cache,
                                  const PopularityModel& pop) {
  if (!(tau > 0.0)) throw DomainError("slot duration must be > 0");
  check_unit_interval(cache.alpha, "alpha");
  TrafficParams t;
  t.request_rate = lambda;
  t.slot_duration = tau;
  t.hit_ratio = hit_ratio(pop, cache.cache_slots);
  t.effective_rate = effective_rate(lambda, cache.alpha, t.hit_ratio);
  return t;
}

}  // namespace cachenet
