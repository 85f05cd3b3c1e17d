#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cachenet/analytical.hpp"

namespace cachenet::sim {

using Rng = std::mt19937_64;

/// Independent random streams. One master seed fans out to one stream per
/// (deployment, purpose) pair through std::seed_seq, so results do not depend
/// on how deployments are scheduled across threads.
enum class StreamPurpose : std::uint32_t { Geometry = 0, Arrivals = 1, Fading = 2, Packets = 3 };

Rng make_stream(std::uint64_t master_seed, std::uint64_t deployment, StreamPurpose purpose);

enum class EdgeMode {
  /// Wrap-around distances on the square.
  Torus,
  /// Plain distances; statistics only from the central square inset by
  /// 5 / sqrt(pi phi_b) on every side.
  Guard,
};

std::string_view to_string(EdgeMode mode);
EdgeMode parse_edge_mode(std::string_view name);

/// Which receivers the loss-rate estimator looks at.
enum class ReceiverSampling {
  /// Requests actually on the air: one per active cell and slot.
  ServedRequests,
  /// Users drawn uniformly among those whose BS transmits this slot, each
  /// evaluated as if its BS were serving it. Weights cells by population,
  /// as a typical user does.
  ActiveCellUsers,
};

std::string_view to_string(ReceiverSampling mode);
ReceiverSampling parse_receiver_sampling(std::string_view name);

struct SimConfig {
  double area_side = 1e4;  // m
  std::size_t deployments = 200;
  std::size_t slots = 2000;  // measured slots per deployment, after warm-up
  std::size_t warmup = 500;
  std::uint64_t seed = 1;
  EdgeMode edge = EdgeMode::Torus;
  bool cancellation = true;
  bool measure_sinr = true;
  /// Served requests whose SINR is evaluated per slot; 0 evaluates all of them.
  std::size_t receivers_per_slot = 16;
  ReceiverSampling receivers = ReceiverSampling::ActiveCellUsers;
  /// Worker threads; 0 uses std::thread::hardware_concurrency().
  std::size_t threads = 0;
  /// Stop launching new deployments after this many seconds; 0 disables.
  /// Results are then partial and no longer reproducible.
  double time_budget_s = 0.0;

  void validate() const;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Deployment {
  double area_side = 0.0;
  EdgeMode edge = EdgeMode::Torus;
  std::vector<Point> bs_positions;
  std::vector<Point> user_positions;
  std::vector<std::uint8_t> cache_enabled;
  std::vector<std::uint32_t> serving_bs;
  std::vector<std::vector<std::uint32_t>> members;
  /// Inside the measurement region (always true for Torus).
  std::vector<std::uint8_t> measured_bs;
  std::vector<std::uint8_t> measured_user;

  double distance_squared(Point a, Point b) const;
};

/// A queued request; packet is the 1-based catalog rank.
struct Request {
  std::uint32_t user = 0;
  std::uint32_t packet = 0;
};

struct SimState {
  Deployment deployment;
  std::vector<std::deque<Request>> queues;
  /// ceil(1 / (lambda_bar tau)); cells at or above it are full-load.
  std::size_t full_load_threshold = 0;
  std::size_t slot_index = 0;
  /// Catalog popularity, 0-based rank.
  std::discrete_distribution<std::uint32_t> popularity_draw;
  /// Packet mix of BS traffic: rank i <= M weighted (1 - alpha) f_i, others f_i.
  /// Absent when every request is a cache hit.
  std::optional<std::discrete_distribution<std::uint32_t>> bs_traffic_draw;
  Rng arrivals_rng;
  Rng fading_rng;
  Rng packets_rng;
};

/// What a BS puts on the air in one slot.
struct Transmission {
  bool active = false;
  /// Packet rank on the air (0 when silent).
  std::uint32_t packet = 0;
  /// The queued request being served, if the transmission carries one.
  std::optional<Request> served;
};

/// How a request's requester cache status is decided.
enum class ArrivalModel {
  /// Requester drawn uniformly from the cell's users; their fixed cache flag applies.
  FixedUsers,
  /// Each request independently comes from a cache-enabled user with probability alpha,
  /// so a cell with n users receives exactly Poisson(n lambda_bar tau) requests per slot.
  Annealed,
};

struct Arrivals {
  std::vector<std::pair<std::uint32_t, Request>> enqueued;  // (bs, request)
  std::size_t cache_hits = 0;
  std::size_t generated = 0;
};

struct CellCounts {
  std::size_t full = 0;
  std::size_t free = 0;
  std::size_t modest = 0;
};

/// Point estimate with the standard error across deployments.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

struct SimReport {
  Estimate p_full;
  Estimate p_free;
  Estimate p_modest;
  /// Fraction of BS-slots with a transmission.
  Estimate active_fraction;
  /// Fraction of active transmissions carrying a cached (rank <= M) packet.
  std::optional<Estimate> cached_tx_fraction;
  std::optional<Estimate> plr_untenable;
  /// Absent when alpha = 0 or when no cache-enabled request was measured.
  std::optional<Estimate> plr_cache_enabled;
  std::optional<Estimate> avg_plr_over_air;
  std::optional<Estimate> avg_plr_all_requests;
  Estimate users_per_cell;
  std::size_t deployments_run = 0;
  std::size_t slots_run = 0;
  std::uint64_t measured_untenable = 0;
  std::uint64_t measured_cache_enabled = 0;
  bool stopped_early = false;
  std::string warning;
};

std::vector<Point> sample_ppp(double intensity, double area_side, Rng& rng);

/// Width of the excluded border in Guard mode.
double guard_width(const NetworkParams& params);

/// Samples BSs (retrying when none land), users and cache flags, then
/// associates each user with its nearest BS.
Deployment build_deployment(const NetworkParams& params, const SimConfig& cfg, Rng& rng);

/// Deployment from fixed point sets; associates users and draws cache flags.
Deployment make_deployment(std::vector<Point> bs, std::vector<Point> users, double area_side, EdgeMode edge,
                           double alpha, Rng& rng, double guard = 0.0);

/// Users per measured cell.
std::vector<std::size_t> cell_user_counts(const Deployment& d);

SimState make_state(Deployment deployment, const NetworkParams& params, std::uint64_t seed,
                    std::uint64_t deployment_index);

/// Start-of-slot service decision for every BS. Queued requests are served
/// FIFO; full-load cells transmit every slot, drawing a packet from the
/// BS-traffic mix when their queue happens to be empty.
std::vector<Transmission> schedule_slot(SimState& state, const NetworkParams& params);

/// New requests of the current slot. Cache hits of cache-enabled users are
/// counted and dropped.
void generate_arrivals(SimState& state, const NetworkParams& params, Arrivals& out,
                       ArrivalModel model = ArrivalModel::FixedUsers);

/// q_{k+1} = max(q_k - 1, 0) + a_{k+1}: drop every head that was on the air,
/// then append the slot's arrivals.
void advance_queues(SimState& state, const Arrivals& arrivals);

/// SINR of `receiver` served by its BS this slot. Rayleigh power gains are
/// drawn per link from the fading stream. A cache-enabled receiver with
/// cancellation on ignores interferers sending a packet it has cached.
double compute_slot_sinr(SimState& state, const std::vector<Transmission>& tx,
                         const std::vector<std::uint32_t>& active, std::uint32_t receiver,
                         const NetworkParams& params, bool cancellation);

/// Loss iff the slot cannot carry the packet: SINR < T_bar.
bool record_loss(double sinr, const NetworkParams& params);

/// Full-load is structural (user count); other cells are free when the queue
/// is empty at the service instant, modest otherwise. Only measured BSs count.
CellCounts classify_cells_empirical(const SimState& state, const std::vector<Transmission>& tx);

SimReport run_simulation(const NetworkParams& params, const SimConfig& cfg,
                         AveragingConvention convention = kDefaultAveraging);

struct IsolatedCellStats {
  std::size_t slots = 0;
  std::size_t empty_slots = 0;
  std::size_t arrivals = 0;
  double empty_fraction() const { return slots ? static_cast<double>(empty_slots) / slots : 0.0; }
};

/// Runs one cell with n users through the same queue machinery (annealed
/// cache flags) and counts slots that start with an empty queue.
IsolatedCellStats simulate_isolated_cell(std::size_t n, const NetworkParams& params, std::size_t slots,
                                         std::size_t warmup, std::uint64_t seed);

}  // namespace cachenet::sim
