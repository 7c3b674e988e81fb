#pragma once

// The attacker's decision environment. One instance drives one episode,
// single-threaded; independent instances (own seeds, shared read-only
// detector) are safe to run concurrently. Each decision slot the agent picks
// an (attack?, rate, duration) action; the simulator advances one slot; the
// detector classifies the latest feature window; and the reward for an
// action is computed from a link snapshot taken a fixed delay after the
// action, released through a FIFO at the next slot boundary at or past the
// snapshot time. Rewards still pending at episode end are flushed into the
// final step.

#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adados/detector.hpp"
#include "adados/features.hpp"
#include "adados/netsim.hpp"
#include "adados/rng.hpp"

namespace adados::env {

struct AttackAction {
  int a_dec = 0;        // 1 = attack this slot
  double a_rate = 0.0;  // Mbps
  double a_dur = 0.0;   // seconds, within the decision slot

  double volume() const { return a_dec * a_dur * a_rate; }  // Mbit
};

struct RewardParams {
  double congestion_reward = 80.0;  // payout scale of an undetected attack
  double detected_penalty = 100.0;
  double living_penalty = 5.0;
  double z0 = 1.0;              // congestion rate below the bandwidth threshold
  double b_threshold = 1.0;     // Mbps
  double b_max = 10.0;          // Mbps
  double cost_ceiling = 10.0;   // Mbit per attack (defaults to b_max * slot)
  double discount = 0.95;

  void validate() const;
};

// Eq-style clipped congestion measure: linear depletion above the
// threshold, pinned at z0 at or below it.
double congestion_rate(double b, const RewardParams& params);

// transmitted volume relative to the per-attack ceiling
double relative_cost(const AttackAction& action, const RewardParams& params);

double reward(const AttackAction& action, double snapshot_b, int f_d,
              const RewardParams& params);

struct FullState {
  double m1 = 0.0, m2 = 0.0, m3 = 0.0;       // gram moments of aggregate flow
  double v_tcp = 0.0, v_udp = 0.0, b = 0.0;  // latest sample
  std::vector<double> delays;                // last n delays, oldest first

  // flat normalized vector for policy input
  std::vector<double> vectorize(const RewardParams& params, double floor_delay,
                                double delay_span, double interval) const;
};

struct PartialObservation {
  std::vector<double> delays;  // last n' delays, oldest first

  std::vector<double> vectorize(double floor_delay, double delay_span) const;
};

struct StepRecord {
  int slot = 0;
  double t = 0.0;  // slot start time
  FullState state;
  PartialObservation observation;
  AttackAction action;
  double reward = 0.0;      // filled in when the deferred reward is released
  bool reward_set = false;
  int f_d = 0;              // detector flag used for this action's reward
  double snapshot_b = 0.0;  // available bandwidth at the reward snapshot
  double slot_mean_b = 0.0; // mean b over this slot's controller samples
  FullState next_state;
  bool done = false;
};

struct ReleasedReward {
  int slot = 0;  // slot whose action this reward belongs to
  double value = 0.0;
};

struct StepOutput {
  FullState state;  // state after the step
  PartialObservation observation;
  std::vector<ReleasedReward> released;
  int f_d = 0;  // detection flag of this slot
  bool done = false;
};

struct EnvConfig {
  netsim::LinkProfile link;
  netsim::SimClock clock;
  RewardParams reward;
  int episode_slots = 100;
  int window_len = 10;       // feature window in controller samples
  int n_delays = 10;         // teacher delay window
  int n_delays_partial = 3;  // student delay window
  double reward_delay = 0.5; // seconds between action and its snapshot
  double obs_noise_sigma = 0.0;
  double tcp_backoff_beta = 0.8;
  double peak_multiplier = 2.0;

  void validate() const;
};

// detector hook: feature vector plus the raw window it came from
using DetectorFn =
    std::function<int(const features::FeatureVector&, std::span<const netsim::TrafficSample>)>;

DetectorFn make_detector_fn(const detector::DetectorModel& model);

class AttackEnv {
 public:
  AttackEnv(EnvConfig config, netsim::BackgroundTrace trace, DetectorFn detector,
            std::uint64_t seed);

  // start a new episode; runs a feature-window warmup of background traffic
  FullState reset();

  StepOutput step(const AttackAction& action);

  PartialObservation observe_partial(int n_partial, double noise_sigma);

  bool done() const { return done_; }
  double now() const { return sim_.now(); }
  int slot() const { return slot_; }
  const EnvConfig& config() const { return config_; }
  const FullState& state() const { return state_; }
  const std::vector<StepRecord>& records() const { return records_; }
  const std::vector<netsim::TrafficSample>& samples() const { return samples_; }

  // Reward the FIFO will release for the most recent action, computable as
  // soon as its snapshot lies within the simulated horizon.
  std::optional<double> peek_pending_reward() const;

  // Most recent step's record with its deferred reward resolved in place
  // (the FIFO itself still releases it at the next boundary).
  StepRecord last_record_resolved() const;

  std::vector<double> vectorize_state() const;
  std::vector<double> vectorize_partial(const PartialObservation& obs) const;
  int state_dim() const;

  // value-semantic copies are used for paired-environment synchronisation
  AttackEnv(const AttackEnv&) = default;
  AttackEnv& operator=(const AttackEnv&) = default;

 private:
  struct Pending {
    int slot;
    AttackAction action;
    double due;  // snapshot time
  };

  FullState build_state() const;
  void record_boundary_delay();
  double delay_span() const;
  void release_due(std::vector<ReleasedReward>& out, double up_to_time);
  double resolve_reward(const Pending& p, double* snapshot_b, int* f_d_out) const;

  EnvConfig config_;
  DetectorFn detector_;
  netsim::LinkSimulator sim_;
  Rng rng_;
  bool episode_active_ = false;
  bool done_ = false;
  int slot_ = 0;

  std::vector<netsim::TrafficSample> samples_;       // full episode history
  std::vector<std::pair<double, int>> detections_;   // (boundary time, f_d)
  std::deque<Pending> pending_;
  std::vector<double> delay_history_;        // true taus at slot boundaries
  std::vector<double> measured_delays_;      // one noisy measurement per boundary
  FullState state_;
  std::vector<StepRecord> records_;
};

struct EpisodeMetrics {
  double attack_success_rate = 0.0;
  bool zero_attacks = false;
  double avg_bandwidth = 0.0;
  double attack_cost = 0.0;  // Mbit transmitted by the attacker
  double trigger_rate = 0.0;
  double avg_duration = 0.0;
  double avg_rate = 0.0;
  double total_reward = 0.0;
  int attacks = 0;
  int undetected_attacks = 0;
};

EpisodeMetrics metrics(std::span<const StepRecord> records);

void write_records_jsonl(std::span<const StepRecord> records, const std::string& path);

}  // namespace adados::env
