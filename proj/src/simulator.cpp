#include "cachenet/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "cachenet/errors.hpp"

namespace cachenet::sim {

namespace {

// Uniform bucket grid for nearest-BS queries.
class BsGrid {
 public:
  BsGrid(const std::vector<Point>& bs, double side, EdgeMode edge) : bs_(bs), side_(side), edge_(edge) {
    const double per_cell = 2.0;
    dim_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(bs.size()) / per_cell)));
    cell_ = side / dim_;
    buckets_.resize(static_cast<std::size_t>(dim_) * dim_);
    for (std::uint32_t i = 0; i < bs.size(); ++i) buckets_[index(cell_of(bs[i].x), cell_of(bs[i].y))].push_back(i);
  }

  std::uint32_t nearest(Point p, const Deployment& d) const {
    const int cx = cell_of(p.x);
    const int cy = cell_of(p.y);
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_idx = 0;
    auto consider = [&](std::uint32_t i) {
      const double d2 = d.distance_squared(p, bs_[i]);
      if (d2 < best || (d2 == best && i < best_idx)) {
        best = d2;
        best_idx = i;
      }
    };
    for (int k = 0;; ++k) {
      if (2 * k + 1 >= dim_) {
        // The ring reaches every bucket; finish by exhaustive search.
        for (std::uint32_t i = 0; i < bs_.size(); ++i) consider(i);
        return best_idx;
      }
      for (int dx = -k; dx <= k; ++dx) {
        for (int dy = -k; dy <= k; ++dy) {
          if (std::max(std::abs(dx), std::abs(dy)) != k) continue;
          int x = cx + dx;
          int y = cy + dy;
          if (edge_ == EdgeMode::Torus) {
            x = (x % dim_ + dim_) % dim_;
            y = (y % dim_ + dim_) % dim_;
          } else if (x < 0 || y < 0 || x >= dim_ || y >= dim_) {
            continue;
          }
          for (std::uint32_t i : buckets_[index(x, y)]) consider(i);
        }
      }
      // Anything in ring k + 1 or beyond is at least k cells away.
      const double reach = k * cell_;
      if (best <= reach * reach) return best_idx;
    }
  }

 private:
  int cell_of(double v) const { return std::clamp(static_cast<int>(v / cell_), 0, dim_ - 1); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * dim_ + x; }

  const std::vector<Point>& bs_;
  double side_;
  EdgeMode edge_;
  int dim_ = 1;
  double cell_ = 1.0;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

double path_gain(double d2, double beta) {
  if (beta == 4.0) return 1.0 / (d2 * d2);
  return std::pow(d2, -0.5 * beta);
}

struct DeploymentStats {
  CellCounts cells;
  std::uint64_t bs_slots = 0;
  std::uint64_t active_bs_slots = 0;
  std::uint64_t cached_tx = 0;
  std::uint64_t served_untenable = 0;
  std::uint64_t lost_untenable = 0;
  std::uint64_t served_cache = 0;
  std::uint64_t lost_cache = 0;
  double users_per_cell = 0.0;
};

DeploymentStats run_deployment(const NetworkParams& params, const SimConfig& cfg, std::uint64_t index) {
  Rng geometry = make_stream(cfg.seed, index, StreamPurpose::Geometry);
  SimState state = make_state(build_deployment(params, cfg, geometry), params, cfg.seed, index);
  const Deployment& d = state.deployment;
  const std::uint32_t cached_ranks = static_cast<std::uint32_t>(params.cache.cache_slots);

  DeploymentStats stats;
  {
    const auto counts = cell_user_counts(d);
    std::size_t users = 0;
    for (auto c : counts) users += c;
    stats.users_per_cell = counts.empty() ? 0.0 : static_cast<double>(users) / counts.size();
  }

  Arrivals arrivals;
  std::vector<std::uint32_t> active;
  std::vector<std::uint32_t> candidates;
  const std::size_t total = cfg.warmup + cfg.slots;
  for (std::size_t k = 0; k < total; ++k) {
    const auto tx = schedule_slot(state, params);
    if (k >= cfg.warmup) {
      const CellCounts c = classify_cells_empirical(state, tx);
      stats.cells.full += c.full;
      stats.cells.free += c.free;
      stats.cells.modest += c.modest;

      active.clear();
      for (std::uint32_t b = 0; b < tx.size(); ++b) {
        if (!tx[b].active) continue;
        active.push_back(b);
        if (!d.measured_bs[b]) continue;
        ++stats.active_bs_slots;
        if (tx[b].packet <= cached_ranks) ++stats.cached_tx;
      }
      stats.bs_slots += c.full + c.free + c.modest;

      if (cfg.measure_sinr) {
        candidates.clear();
        std::size_t take = 0;
        if (cfg.receivers == ReceiverSampling::ServedRequests) {
          for (std::uint32_t b : active)
            if (tx[b].served && d.measured_user[tx[b].served->user]) candidates.push_back(tx[b].served->user);
          take = candidates.size();
          if (cfg.receivers_per_slot != 0 && cfg.receivers_per_slot < take) {
            take = cfg.receivers_per_slot;
            // Partial Fisher-Yates: the first `take` entries become a uniform sample.
            for (std::size_t i = 0; i < take; ++i) {
              std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
              std::swap(candidates[i], candidates[pick(state.fading_rng)]);
            }
          }
        } else {
          for (std::uint32_t b : active)
            for (std::uint32_t u : d.members[b])
              if (d.measured_user[u]) candidates.push_back(u);
          take = candidates.size();
          if (cfg.receivers_per_slot != 0 && cfg.receivers_per_slot < take) {
            take = cfg.receivers_per_slot;
            for (std::size_t i = 0; i < take; ++i) {
              std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
              std::swap(candidates[i], candidates[pick(state.fading_rng)]);
            }
          }
        }
        for (std::size_t i = 0; i < take; ++i) {
          const std::uint32_t user = candidates[i];
          const double sinr = compute_slot_sinr(state, tx, active, user, params, cfg.cancellation);
          const bool lost = record_loss(sinr, params);
          if (d.cache_enabled[user]) {
            ++stats.served_cache;
            stats.lost_cache += lost;
          } else {
            ++stats.served_untenable;
            stats.lost_untenable += lost;
          }
        }
      }
    }
    generate_arrivals(state, params, arrivals);
    advance_queues(state, arrivals);
  }
  return stats;
}

Estimate make_estimate(const std::vector<double>& values) {
  Estimate e;
  e.samples = values.size();
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.std_error = std::sqrt(ss / (values.size() - 1) / values.size());
  }
  return e;
}

std::optional<Estimate> optional_estimate(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  return make_estimate(values);
}

}  // namespace

Rng make_stream(std::uint64_t master_seed, std::uint64_t deployment, StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(deployment), static_cast<std::uint32_t>(deployment >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

std::string_view to_string(EdgeMode mode) { return mode == EdgeMode::Torus ? "torus" : "guard"; }

EdgeMode parse_edge_mode(std::string_view name) {
  if (name == "torus") return EdgeMode::Torus;
  if (name == "guard") return EdgeMode::Guard;
  throw ValidationError("unknown edge mode '" + std::string(name) + "' (expected torus or guard)");
}

std::string_view to_string(ReceiverSampling mode) {
  return mode == ReceiverSampling::ServedRequests ? "served" : "active_cell_users";
}

ReceiverSampling parse_receiver_sampling(std::string_view name) {
  if (name == "served") return ReceiverSampling::ServedRequests;
  if (name == "active_cell_users") return ReceiverSampling::ActiveCellUsers;
  throw ValidationError("unknown receiver sampling '" + std::string(name) + "' (expected served or active_cell_users)");
}

void SimConfig::validate() const {
  if (!(area_side > 0.0)) throw ValidationError("sim.area_side must be > 0");
  if (deployments == 0) throw ValidationError("sim.deployments must be >= 1");
  if (slots == 0) throw ValidationError("sim.slots must be >= 1");
  if (!(time_budget_s >= 0.0)) throw ValidationError("sim.time_budget_s must be >= 0");
}

double Deployment::distance_squared(Point a, Point b) const {
  double dx = std::fabs(a.x - b.x);
  double dy = std::fabs(a.y - b.y);
  if (edge == EdgeMode::Torus) {
    dx = std::min(dx, area_side - dx);
    dy = std::min(dy, area_side - dy);
  }
  return dx * dx + dy * dy;
}

std::vector<Point> sample_ppp(double intensity, double area_side, Rng& rng) {
  if (!(intensity >= 0.0)) throw DomainError("sample_ppp: intensity must be >= 0");
  if (!(area_side > 0.0)) throw DomainError("sample_ppp: area side must be > 0");
  const double mean = intensity * area_side * area_side;
  std::vector<Point> pts;
  if (mean == 0.0) return pts;
  const auto count = std::poisson_distribution<long long>(mean)(rng);
  pts.reserve(static_cast<std::size_t>(count));
  std::uniform_real_distribution<double> coord(0.0, area_side);
  for (long long i = 0; i < count; ++i) {
    const double x = coord(rng);
    const double y = coord(rng);
    pts.push_back({x, y});
  }
  return pts;
}

double guard_width(const NetworkParams& params) {
  return 5.0 / std::sqrt(std::numbers::pi * params.bs_intensity);
}

Deployment make_deployment(std::vector<Point> bs, std::vector<Point> users, double area_side, EdgeMode edge,
                           double alpha, Rng& rng, double guard) {
  if (bs.empty()) throw DomainError("make_deployment: at least one BS is required");
  Deployment d;
  d.area_side = area_side;
  d.edge = edge;
  d.bs_positions = std::move(bs);
  d.user_positions = std::move(users);

  const std::size_t nu = d.user_positions.size();
  d.cache_enabled.resize(nu);
  std::bernoulli_distribution flag(alpha);
  for (auto& c : d.cache_enabled) c = flag(rng);

  BsGrid grid(d.bs_positions, area_side, edge);
  d.serving_bs.resize(nu);
  d.members.assign(d.bs_positions.size(), {});
  for (std::uint32_t u = 0; u < nu; ++u) {
    d.serving_bs[u] = grid.nearest(d.user_positions[u], d);
    d.members[d.serving_bs[u]].push_back(u);
  }

  auto inside = [&](Point p) {
    if (edge == EdgeMode::Torus) return true;
    return p.x >= guard && p.x <= area_side - guard && p.y >= guard && p.y <= area_side - guard;
  };
  d.measured_bs.resize(d.bs_positions.size());
  for (std::size_t b = 0; b < d.bs_positions.size(); ++b) d.measured_bs[b] = inside(d.bs_positions[b]);
  d.measured_user.resize(nu);
  for (std::size_t u = 0; u < nu; ++u) d.measured_user[u] = inside(d.user_positions[u]);
  return d;
}

Deployment build_deployment(const NetworkParams& params, const SimConfig& cfg, Rng& rng) {
  double guard = 0.0;
  if (cfg.edge == EdgeMode::Guard) {
    guard = guard_width(params);
    if (2.0 * guard >= cfg.area_side)
      throw ValidationError("guard edge mode needs area_side > " + std::to_string(2.0 * guard) + " m");
  }
  constexpr int kAttempts = 100;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    auto bs = sample_ppp(params.bs_intensity, cfg.area_side, rng);
    if (bs.empty()) continue;
    auto users = sample_ppp(params.user_intensity, cfg.area_side, rng);
    return make_deployment(std::move(bs), std::move(users), cfg.area_side, cfg.edge, params.cache.alpha, rng,
                           guard);
  }
  throw std::runtime_error("build_deployment: no BS sampled in " + std::to_string(kAttempts) + " attempts");
}

std::vector<std::size_t> cell_user_counts(const Deployment& d) {
  std::vector<std::size_t> counts;
  for (std::size_t b = 0; b < d.members.size(); ++b)
    if (d.measured_bs[b]) counts.push_back(d.members[b].size());
  return counts;
}

SimState make_state(Deployment deployment, const NetworkParams& params, std::uint64_t seed,
                    std::uint64_t deployment_index) {
  SimState s;
  s.queues.resize(deployment.bs_positions.size());
  s.deployment = std::move(deployment);
  s.full_load_threshold = params.full_load_threshold();
  const auto& f = params.popularity.probs;
  s.popularity_draw = std::discrete_distribution<std::uint32_t>(f.begin(), f.end());
  std::vector<double> bs_mix(f);
  const double alpha = params.cache.alpha;
  for (std::size_t i = 0; i < params.cache.cache_slots; ++i) bs_mix[i] *= 1.0 - alpha;
  double mass = 0.0;
  for (double w : bs_mix) mass += w;
  if (mass > 0.0) s.bs_traffic_draw.emplace(bs_mix.begin(), bs_mix.end());
  s.arrivals_rng = make_stream(seed, deployment_index, StreamPurpose::Arrivals);
  s.fading_rng = make_stream(seed, deployment_index, StreamPurpose::Fading);
  s.packets_rng = make_stream(seed, deployment_index, StreamPurpose::Packets);
  return s;
}

std::vector<Transmission> schedule_slot(SimState& state, const NetworkParams& /*params*/) {
  const auto& members = state.deployment.members;
  std::vector<Transmission> tx(state.queues.size());
  for (std::size_t b = 0; b < tx.size(); ++b) {
    const auto& q = state.queues[b];
    if (!q.empty()) {
      tx[b] = {true, q.front().packet, q.front()};
    } else if (members[b].size() >= state.full_load_threshold && state.bs_traffic_draw) {
      tx[b] = {true, (*state.bs_traffic_draw)(state.packets_rng) + 1, std::nullopt};
    }
  }
  return tx;
}

void generate_arrivals(SimState& state, const NetworkParams& params, Arrivals& out, ArrivalModel model) {
  out.enqueued.clear();
  out.cache_hits = 0;
  out.generated = 0;
  const Deployment& d = state.deployment;
  const std::size_t nu = d.user_positions.size();
  if (nu == 0) return;
  // Superposition of the users' Poisson(lambda tau) streams, each request
  // attributed to a uniformly chosen user.
  const double mean = static_cast<double>(nu) * params.traffic.request_rate * params.slot_duration();
  const auto count = std::poisson_distribution<long long>(mean)(state.arrivals_rng);
  out.generated = static_cast<std::size_t>(count);
  std::uniform_int_distribution<std::uint32_t> pick_user(0, static_cast<std::uint32_t>(nu - 1));
  std::bernoulli_distribution annealed_flag(params.cache.alpha);
  const std::size_t cached_ranks = params.cache.cache_slots;
  for (long long i = 0; i < count; ++i) {
    const std::uint32_t user = pick_user(state.arrivals_rng);
    const std::uint32_t packet = state.popularity_draw(state.packets_rng) + 1;
    const bool has_cache =
        model == ArrivalModel::FixedUsers ? d.cache_enabled[user] != 0 : annealed_flag(state.arrivals_rng);
    if (has_cache && packet <= cached_ranks) {
      ++out.cache_hits;
      continue;
    }
    out.enqueued.push_back({d.serving_bs[user], {user, packet}});
  }
}

void advance_queues(SimState& state, const Arrivals& arrivals) {
  for (auto& q : state.queues)
    if (!q.empty()) q.pop_front();
  for (const auto& [bs, request] : arrivals.enqueued) state.queues[bs].push_back(request);
  ++state.slot_index;
}

double compute_slot_sinr(SimState& state, const std::vector<Transmission>& tx,
                         const std::vector<std::uint32_t>& active, std::uint32_t receiver,
                         const NetworkParams& params, bool cancellation) {
  const Deployment& d = state.deployment;
  const std::uint32_t serving = d.serving_bs[receiver];
  const Point at = d.user_positions[receiver];
  const double beta = params.path_loss;
  const double d2 = d.distance_squared(at, d.bs_positions[serving]);
  if (d2 == 0.0) return std::numeric_limits<double>::infinity();

  std::exponential_distribution<double> rayleigh_power(1.0);
  const double signal = params.tx_power * rayleigh_power(state.fading_rng) * path_gain(d2, beta);
  const bool cancels = cancellation && d.cache_enabled[receiver];
  const std::uint32_t cached_ranks = static_cast<std::uint32_t>(params.cache.cache_slots);
  double interference = 0.0;
  for (std::uint32_t k : active) {
    if (k == serving) continue;
    if (cancels && tx[k].packet <= cached_ranks) continue;
    const double dk2 = d.distance_squared(at, d.bs_positions[k]);
    interference += params.tx_power * rayleigh_power(state.fading_rng) * path_gain(dk2, beta);
  }
  const double denom = interference + params.noise_power;
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return signal / denom;
}

bool record_loss(double sinr, const NetworkParams& params) { return sinr < params.sinr_threshold(); }

CellCounts classify_cells_empirical(const SimState& state, const std::vector<Transmission>& tx) {
  const Deployment& d = state.deployment;
  CellCounts c;
  for (std::size_t b = 0; b < tx.size(); ++b) {
    if (!d.measured_bs[b]) continue;
    if (d.members[b].size() >= state.full_load_threshold)
      ++c.full;
    else if (state.queues[b].empty())
      ++c.free;
    else
      ++c.modest;
  }
  return c;
}

SimReport run_simulation(const NetworkParams& params, const SimConfig& cfg, AveragingConvention convention) {
  cfg.validate();
  (void)convention;
  const std::size_t n = cfg.deployments;
  std::vector<std::optional<DeploymentStats>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> out_of_time{false};
  const auto start = std::chrono::steady_clock::now();

  auto worker = [&] {
    for (;;) {
      if (cfg.time_budget_s > 0.0) {
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        if (elapsed.count() > cfg.time_budget_s) {
          out_of_time = true;
          return;
        }
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = run_deployment(params, cfg, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> full, free, modest, active, cached, plr_u, plr_c, avg_air, avg_all, users;
  SimReport report;
  const double alpha = params.cache.alpha;
  const double delta = params.traffic.hit_ratio;
  for (const auto& r : results) {
    if (!r) continue;
    ++report.deployments_run;
    users.push_back(r->users_per_cell);
    if (r->bs_slots > 0) {
      const double slots = static_cast<double>(r->bs_slots);
      full.push_back(r->cells.full / slots);
      free.push_back(r->cells.free / slots);
      modest.push_back(r->cells.modest / slots);
      active.push_back(r->active_bs_slots / slots);
    }
    if (r->active_bs_slots > 0) cached.push_back(static_cast<double>(r->cached_tx) / r->active_bs_slots);
    report.measured_untenable += r->served_untenable;
    report.measured_cache_enabled += r->served_cache;
    std::optional<double> u, c;
    if (r->served_untenable > 0) u = static_cast<double>(r->lost_untenable) / r->served_untenable;
    if (alpha > 0.0 && r->served_cache > 0) c = static_cast<double>(r->lost_cache) / r->served_cache;
    if (u) plr_u.push_back(*u);
    if (c) plr_c.push_back(*c);
    if (u && (alpha == 0.0 || c)) {
      avg_all.push_back(average_plr(alpha, delta, c, *u, AveragingConvention::AllRequests));
      if (alpha * delta < 1.0)
        avg_air.push_back(average_plr(alpha, delta, c, *u, AveragingConvention::OverAirRequests));
    }
  }
  report.p_full = make_estimate(full);
  report.p_free = make_estimate(free);
  report.p_modest = make_estimate(modest);
  report.active_fraction = make_estimate(active);
  report.cached_tx_fraction = optional_estimate(cached);
  report.plr_untenable = optional_estimate(plr_u);
  report.plr_cache_enabled = optional_estimate(plr_c);
  report.avg_plr_over_air = optional_estimate(avg_air);
  report.avg_plr_all_requests = optional_estimate(avg_all);
  report.users_per_cell = make_estimate(users);
  report.slots_run = report.deployments_run * cfg.slots;
  if (out_of_time || report.deployments_run < n) {
    report.stopped_early = true;
    report.warning = "time budget exhausted after " + std::to_string(report.deployments_run) + " of " +
                     std::to_string(n) + " deployments";
  }
  return report;
}

IsolatedCellStats simulate_isolated_cell(std::size_t n, const NetworkParams& params, std::size_t slots,
                                         std::size_t warmup, std::uint64_t seed) {
  Rng geometry = make_stream(seed, 0, StreamPurpose::Geometry);
  const Point centre{0.5, 0.5};
  SimState state = make_state(
      make_deployment({centre}, std::vector<Point>(n, centre), 1.0, EdgeMode::Torus, params.cache.alpha, geometry),
      params, seed, 0);
  IsolatedCellStats stats;
  Arrivals arrivals;
  for (std::size_t k = 0; k < warmup + slots; ++k) {
    if (k >= warmup) {
      ++stats.slots;
      stats.empty_slots += state.queues[0].empty();
    }
    schedule_slot(state, params);
    generate_arrivals(state, params, arrivals, ArrivalModel::Annealed);
    if (k >= warmup) stats.arrivals += arrivals.enqueued.size();
    advance_queues(state, arrivals);
  }
  return stats;
}

}  // namespace cachenet::sim
