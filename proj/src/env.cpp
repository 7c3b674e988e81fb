#include "adados/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace adados::env {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void RewardParams::validate() const {
  require(congestion_reward > 0 && detected_penalty > 0 && living_penalty > 0,
          "reward constants must be positive");
  require(z0 > 0, "z0 must be positive");
  require(b_max > 0 && b_threshold > 0, "bandwidth parameters must be positive");
  require(b_threshold < b_max, "bandwidth threshold must be below the maximum");
  require(cost_ceiling > 0, "cost ceiling must be positive");
  require(discount > 0 && discount < 1, "discount must be in (0,1)");
}

double congestion_rate(double b, const RewardParams& params) {
  require(std::isfinite(b) && b >= 0, "bandwidth must be >= 0");
  require(b <= params.b_max + 1e-9, "bandwidth above the link maximum");
  if (b <= params.b_threshold) return params.z0;
  return 1.0 - b / params.b_max;
}

double relative_cost(const AttackAction& action, const RewardParams& params) {
  require(params.cost_ceiling > 0, "cost ceiling must be positive");
  return action.a_dur * action.a_rate / params.cost_ceiling;
}

double reward(const AttackAction& action, double snapshot_b, int f_d,
              const RewardParams& params) {
  require(f_d == 0 || f_d == 1, "detection flag must be 0 or 1");
  if (action.a_dec == 1) {
    if (f_d == 1) return -params.detected_penalty;
    const double z = congestion_rate(snapshot_b, params);
    const double c = relative_cost(action, params);
    return (z - c * c) * params.congestion_reward;
  }
  if (f_d == 1) return -params.detected_penalty - params.living_penalty;
  return -params.living_penalty;
}

std::vector<double> FullState::vectorize(const RewardParams& params, double floor_delay,
                                         double delay_span, double interval) const {
  std::vector<double> v;
  v.reserve(6 + delays.size());
  v.push_back(m1);
  v.push_back(m2);
  v.push_back(m3);
  const double vol_scale = params.b_max * interval;
  v.push_back(v_tcp / vol_scale);
  v.push_back(v_udp / vol_scale);
  v.push_back(b / params.b_max);
  for (double d : delays) v.push_back((d - floor_delay) / delay_span);
  return v;
}

std::vector<double> PartialObservation::vectorize(double floor_delay,
                                                  double delay_span) const {
  std::vector<double> v;
  v.reserve(delays.size());
  for (double d : delays) v.push_back((d - floor_delay) / delay_span);
  return v;
}

void EnvConfig::validate() const {
  link.validate();
  clock.validate();
  reward.validate();
  require(episode_slots > 0, "episode must have at least one slot");
  require(window_len >= 2, "feature window must have at least 2 samples");
  require(n_delays > 0, "delay window must be positive");
  require(n_delays_partial > 0 && n_delays_partial <= n_delays,
          "partial delay window must be in [1, n]");
  require(reward_delay >= 0, "reward delay must be >= 0");
  require(reward_delay <= clock.decision_slot,
          "reward delay beyond one slot is not supported");
  require(obs_noise_sigma >= 0, "observation noise must be >= 0");
}

DetectorFn make_detector_fn(const detector::DetectorModel& model) {
  return [&model](const features::FeatureVector& f,
                  std::span<const netsim::TrafficSample>) { return model.predict(f); };
}

AttackEnv::AttackEnv(EnvConfig config, netsim::BackgroundTrace trace, DetectorFn detector,
                     std::uint64_t seed)
    : config_(config),
      detector_(std::move(detector)),
      sim_(config.link, std::move(trace), config.tcp_backoff_beta),
      rng_(Rng(seed).split("env-obs")) {
  config_.validate();
  require(static_cast<bool>(detector_), "a detector hook is required");
}

double AttackEnv::delay_span() const {
  return config_.link.queue_limit / config_.link.capacity_bmax;
}

FullState AttackEnv::build_state() const {
  FullState s;
  const auto f = features::featurize(samples_, config_.window_len, config_.peak_multiplier);
  s.m1 = f.m1;
  s.m2 = f.m2;
  s.m3 = f.m3;
  const auto& last = samples_.back();
  s.v_tcp = last.v_tcp;
  s.v_udp = last.v_udp;
  s.b = last.b;
  const int n = config_.n_delays;
  s.delays.assign(n, config_.link.floor_delay());
  const auto have = static_cast<int>(measured_delays_.size());
  for (int i = 0; i < std::min(n, have); ++i) {
    s.delays[n - 1 - i] = measured_delays_[have - 1 - i];
  }
  return s;
}

void AttackEnv::record_boundary_delay() {
  delay_history_.push_back(samples_.back().tau);
  measured_delays_.push_back(netsim::measure_delay(
      samples_.back(), config_.obs_noise_sigma, config_.link.floor_delay(), rng_));
}

FullState AttackEnv::reset() {
  sim_ = netsim::LinkSimulator(config_.link, sim_.trace(), config_.tcp_backoff_beta);
  samples_.clear();
  detections_.clear();
  pending_.clear();
  delay_history_.clear();
  measured_delays_.clear();
  records_.clear();
  slot_ = 0;
  done_ = false;
  episode_active_ = true;

  // warmup: enough background-only samples to fill the feature window
  for (int i = 0; i < config_.window_len; ++i) {
    samples_.push_back(sim_.advance(config_.clock.controller_interval, {}));
  }
  record_boundary_delay();
  state_ = build_state();
  return state_;
}

double AttackEnv::resolve_reward(const Pending& p, double* snapshot_b, int* f_d_out) const {
  // snapshot: first controller sample at or past the due time
  const netsim::TrafficSample* snap = nullptr;
  for (const auto& s : samples_) {
    if (s.t >= p.due - 1e-9) {
      snap = &s;
      break;
    }
  }
  require(snap != nullptr, "reward snapshot outside the simulated horizon");

  // detection flag from the first slot boundary at or past the due time
  int f_d = 0;
  for (const auto& [t, flag] : detections_) {
    if (t >= p.due - 1e-9) {
      f_d = flag;
      break;
    }
  }
  *snapshot_b = snap->b;
  *f_d_out = f_d;
  return reward(p.action, snap->b, f_d, config_.reward);
}

void AttackEnv::release_due(std::vector<ReleasedReward>& out, double up_to_time) {
  while (!pending_.empty() && pending_.front().due <= up_to_time + 1e-9) {
    const Pending p = pending_.front();
    pending_.pop_front();
    double snapshot_b = 0.0;
    int f_d = 0;
    const double r = resolve_reward(p, &snapshot_b, &f_d);
    out.push_back({p.slot, r});
    auto& rec = records_[static_cast<std::size_t>(p.slot)];
    rec.reward = r;
    rec.reward_set = true;
    rec.f_d = f_d;
    rec.snapshot_b = snapshot_b;
  }
}

StepOutput AttackEnv::step(const AttackAction& action) {
  require(episode_active_ && !done_, "cannot step a finished episode");
  require(action.a_dec == 0 || action.a_dec == 1, "attack decision must be 0 or 1");
  require(std::isfinite(action.a_rate) && action.a_rate >= 0, "attack rate must be >= 0");
  require(std::isfinite(action.a_dur) && action.a_dur >= 0 &&
              action.a_dur <= config_.clock.decision_slot + 1e-9,
          "attack duration must fit the decision slot");

  const double slot_start = sim_.now();

  StepOutput out;
  // rewards whose snapshot time falls at or before this slot's start
  release_due(out.released, slot_start);

  StepRecord rec;
  rec.slot = slot_;
  rec.t = slot_start;
  rec.state = state_;
  rec.observation = observe_partial(config_.n_delays_partial, config_.obs_noise_sigma);
  rec.action = action;

  std::vector<netsim::AttackBurst> bursts;
  if (action.a_dec == 1 && action.a_dur > 0 && action.a_rate > 0) {
    bursts.push_back({slot_start, action.a_dur, action.a_rate});
  }

  const int per_slot = config_.clock.samples_per_slot();
  double b_sum = 0.0;
  for (int i = 0; i < per_slot; ++i) {
    samples_.push_back(sim_.advance(config_.clock.controller_interval, bursts));
    b_sum += samples_.back().b;
  }
  rec.slot_mean_b = b_sum / per_slot;

  record_boundary_delay();

  const auto fvec =
      features::featurize(samples_, config_.window_len, config_.peak_multiplier);
  const auto window = std::span<const netsim::TrafficSample>(samples_).subspan(
      samples_.size() - config_.window_len);
  const int f_d_slot = detector_(fvec, window);
  detections_.emplace_back(sim_.now(), f_d_slot);

  pending_.push_back({slot_, action, slot_start + config_.reward_delay});

  state_ = build_state();
  rec.next_state = state_;
  records_.push_back(std::move(rec));

  ++slot_;
  if (slot_ >= config_.episode_slots) {
    done_ = true;
    records_.back().done = true;
    // flush everything still pending into the final step
    release_due(out.released, sim_.now() + config_.reward_delay);
    require(pending_.empty(), "pending rewards survived the terminal flush");
  }

  out.state = state_;
  out.observation = observe_partial(config_.n_delays_partial, config_.obs_noise_sigma);
  out.f_d = f_d_slot;
  out.done = done_;
  return out;
}

PartialObservation AttackEnv::observe_partial(int n_partial, double noise_sigma) {
  require(n_partial >= 1 && n_partial <= config_.n_delays,
          "partial window must be in [1, n]");
  PartialObservation obs;
  obs.delays.assign(n_partial, config_.link.floor_delay());
  const auto have = static_cast<int>(delay_history_.size());
  for (int i = 0; i < std::min(n_partial, have); ++i) {
    obs.delays[n_partial - 1 - i] = delay_history_[have - 1 - i];
  }
  if (noise_sigma > 0) {
    netsim::TrafficSample s;
    for (double& d : obs.delays) {
      s.tau = d;
      d = netsim::measure_delay(s, noise_sigma, config_.link.floor_delay(), rng_);
    }
  }
  return obs;
}

std::optional<double> AttackEnv::peek_pending_reward() const {
  if (pending_.empty()) return std::nullopt;
  const Pending& p = pending_.back();
  if (samples_.empty() || samples_.back().t < p.due - 1e-9) return std::nullopt;
  double snapshot_b = 0.0;
  int f_d = 0;
  return resolve_reward(p, &snapshot_b, &f_d);
}

StepRecord AttackEnv::last_record_resolved() const {
  require(!records_.empty(), "no steps have been taken");
  StepRecord rec = records_.back();
  if (rec.reward_set) return rec;
  require(!pending_.empty() && pending_.back().slot == rec.slot,
          "pending queue does not cover the last step");
  double snapshot_b = 0.0;
  int f_d = 0;
  rec.reward = resolve_reward(pending_.back(), &snapshot_b, &f_d);
  rec.reward_set = true;
  rec.snapshot_b = snapshot_b;
  rec.f_d = f_d;
  return rec;
}

std::vector<double> AttackEnv::vectorize_state() const {
  return state_.vectorize(config_.reward, config_.link.floor_delay(), delay_span(),
                          config_.clock.controller_interval);
}

std::vector<double> AttackEnv::vectorize_partial(const PartialObservation& obs) const {
  return obs.vectorize(config_.link.floor_delay(), delay_span());
}

int AttackEnv::state_dim() const { return 6 + config_.n_delays; }

EpisodeMetrics metrics(std::span<const StepRecord> records) {
  require(!records.empty(), "metrics need at least one record");
  EpisodeMetrics m;
  double dur_sum = 0.0, rate_sum = 0.0;
  for (const auto& r : records) {
    m.avg_bandwidth += r.slot_mean_b;
    m.total_reward += r.reward;
    if (r.action.a_dec == 1) {
      ++m.attacks;
      if (r.f_d == 0) ++m.undetected_attacks;
      m.attack_cost += r.action.volume();
      dur_sum += r.action.a_dur;
      rate_sum += r.action.a_rate;
    }
  }
  m.avg_bandwidth /= static_cast<double>(records.size());
  m.trigger_rate = static_cast<double>(m.attacks) / static_cast<double>(records.size());
  if (m.attacks == 0) {
    m.zero_attacks = true;
    m.attack_success_rate = 1.0;
  } else {
    m.attack_success_rate =
        static_cast<double>(m.undetected_attacks) / static_cast<double>(m.attacks);
    m.avg_duration = dur_sum / m.attacks;
    m.avg_rate = rate_sum / m.attacks;
  }
  return m;
}

void write_records_jsonl(std::span<const StepRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& r : records) {
    nlohmann::json j;
    j["slot"] = r.slot;
    j["t"] = r.t;
    j["state"] = {{"m1", r.state.m1},   {"m2", r.state.m2},       {"m3", r.state.m3},
                  {"v_tcp", r.state.v_tcp}, {"v_udp", r.state.v_udp}, {"b", r.state.b},
                  {"delays", r.state.delays}};
    j["observation"] = r.observation.delays;
    j["action"] = {{"a_dec", r.action.a_dec},
                   {"a_rate", r.action.a_rate},
                   {"a_dur", r.action.a_dur}};
    j["reward"] = r.reward;
    j["f_d"] = r.f_d;
    j["snapshot_b"] = r.snapshot_b;
    j["slot_mean_b"] = r.slot_mean_b;
    j["next_state"] = {{"m1", r.next_state.m1}, {"m2", r.next_state.m2},
                       {"m3", r.next_state.m3}, {"v_tcp", r.next_state.v_tcp},
                       {"v_udp", r.next_state.v_udp}, {"b", r.next_state.b},
                       {"delays", r.next_state.delays}};
    j["done"] = r.done;
    out << j.dump() << '\n';
  }
}

}  // namespace adados::env
