#pragma once

#include <cstddef>
#include <vector>

namespace cachenet {

/// Ranked catalog popularity f_1 >= f_2 >= ... >= f_C.
struct PopularityModel {
  double exponent = 0.0;
  std::size_t catalog_size = 0;
  std::vector<double> probs;
};

struct CacheConfig {
  double alpha = 0.0;            ///< fraction of cache-enabled users
  std::size_t cache_slots = 0;   ///< M, the top-M packets are cached
};

/// Request-level traffic scalars; hit_ratio and effective_rate are derived once.
struct TrafficParams {
  double request_rate = 0.0;    ///< lambda [packets/s] per user
  double slot_duration = 0.0;   ///< tau [s]
  double hit_ratio = 0.0;       ///< delta
  double effective_rate = 0.0;  ///< (1 - alpha delta) lambda [packets/s]
};

/// Intensity weights of the interferers carrying uncached / cached packets.
struct SplitFractions {
  double uncached = 1.0;
  double cached = 0.0;
};

PopularityModel zipf_popularity(double gamma, std::size_t catalog_size);

double hit_ratio(const PopularityModel& pop, std::size_t cache_slots);

double effective_rate(double lambda, double alpha, double delta);

double conditional_arrival_rate(std::size_t n, double lambda_bar);

SplitFractions split_fractions(double alpha, double delta);

/// Validates the inputs and fills in the derived fields.
TrafficParams make_traffic_params(double lambda, double tau, const CacheConfig& cache,
                                  const PopularityModel& pop);

}  // namespace cachenet
