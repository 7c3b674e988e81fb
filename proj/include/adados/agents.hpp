#pragma once

// The two-stage attacker: a decider (Bernoulli head, whether to attack this
// slot) and a shaper (squashed-Gaussian head over rate and duration), plus
// a critic. The decider trains on the whole trajectory; the shaper trains
// only on the slots where it actually acted. Fixed periodic schedules
// provide the baseline attackers.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adados/env.hpp"
#include "adados/nets.hpp"
#include "adados/rng.hpp"

namespace adados::agents {

struct PpoConfig {
  double clip_ratio = 0.2;
  double gae_lambda = 0.95;
  int epochs = 4;
  int minibatch = 32;
  double lr_decider = 3e-4;
  double lr_shaper = 5e-4;
  double lr_critic = 1e-3;
  double discount = 0.95;
  double ent_coef_decider = 0.01;
  double ent_coef_shaper = 0.003;
  std::vector<int> hidden = {64, 64};
  int rollout_episodes = 5;
  // initial shaper head biases on the pre-squash axis: start exploration at
  // a gentle operating point (low rate, full-slot duration) so early
  // rollouts are not dominated by detection penalties
  double init_u_rate = -1.2;
  double init_u_dur = 2.0;
  double init_log_std = -0.7;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// --- heads -------------------------------------------------------------------

struct DeciderPolicy {
  nets::MlpNet net;  // state -> 1 logit

  double prob(std::span<const double> state, nets::ForwardTrace* trace = nullptr) const;
  double log_prob(std::span<const double> state, int a_dec) const;
};

struct ShaperPolicy {
  nets::MlpNet net;  // state -> [mu_rate, mu_dur, logstd_rate, logstd_dur]
  double rate_max = 30.0;
  double dur_max = 1.0;

  // log density of the squashed action identified by pre-squash values u
  double log_prob_u(std::span<const double> state, const std::array<double, 2>& u) const;
};

struct Critic {
  nets::MlpNet net;  // state -> scalar value

  double value(std::span<const double> state, nets::ForwardTrace* trace = nullptr) const;
};

struct ActionSample {
  env::AttackAction action;
  double logp_dec = 0.0;
  std::optional<double> logp_shape;  // absent when the shaper was not sampled
  std::array<double, 2> u = {0.0, 0.0};

  double total_logp() const { return logp_dec + logp_shape.value_or(0.0); }
};

double squash(double u, double bound);
double unsquash(double a, double bound);

// log density of the squashed value a = squash(u, bound) under a Gaussian
// with the given mean and log-std on the pre-squash axis
double squashed_gauss_log_pdf(double u, double mu, double log_std, double bound);

ActionSample act(const DeciderPolicy& decider, const ShaperPolicy& shaper,
                 std::span<const double> state, Rng& rng);

// --- agent -------------------------------------------------------------------

struct TwoStageAgent {
  DeciderPolicy decider;
  ShaperPolicy shaper;
  Critic critic;
  nets::Adam opt_decider, opt_shaper, opt_critic;
  int input_dim = 0;

  static TwoStageAgent make(int input_dim, const PpoConfig& config, double rate_max,
                            double dur_max, Rng& rng);

  ActionSample sample(std::span<const double> state, Rng& rng) const {
    return act(decider, shaper, state, rng);
  }
  double log_prob(std::span<const double> state, const ActionSample& a) const;
};

void save_checkpoint(const TwoStageAgent& agent, const std::string& kind, int n_delays,
                     const std::string& path, const std::string& config_hash = "");

struct Checkpoint {
  TwoStageAgent agent;
  std::string kind;
  int n_delays = 0;
  std::string config_hash;
};

Checkpoint load_checkpoint(const std::string& path, const PpoConfig& config);

// --- advantage estimation ------------------------------------------------------

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              double bootstrap_value, double gamma, double lambda);

// --- ppo update ----------------------------------------------------------------

struct TrajStep {
  std::vector<double> state;
  ActionSample act;
  double reward = 0.0;
  double value = 0.0;
  bool terminal = false;  // last step of an episode within the rollout
};

struct UpdateDiagnostics {
  double decider_loss = 0.0;
  double shaper_loss = 0.0;
  double critic_loss = 0.0;
  double first_epoch_max_ratio_dev = 0.0;  // max |ratio - 1| before any update
  bool shaper_skipped = false;
  int clip_violations = 0;  // minibatches where clipped > unclipped objective
};

UpdateDiagnostics update_decoupled(std::span<const TrajStep> trajectory,
                                   TwoStageAgent& agent, const PpoConfig& config,
                                   Rng& rng);

// --- periodic baselines ----------------------------------------------------------

enum class LdosVariant { single, double_train, randomized };

struct LdosSchedule {
  double duration = 0.15;  // seconds
  double period = 1.0;     // seconds
  double rate = 15.0;      // Mbps
  LdosVariant variant = LdosVariant::single;
  std::uint64_t seed = 0;  // randomized variant only

  // parameter sets drawn per cycle by the randomized variant
  std::vector<double> rand_durations = {0.1, 0.15, 0.2};
  std::vector<double> rand_periods = {1.0, 1.5, 2.0};
  std::vector<double> rand_rates = {15.0, 20.0, 25.0, 30.0};

  void validate() const;
};

// action observed at continuous time t: attack while a pulse is active
env::AttackAction ldos_actions(const LdosSchedule& schedule, double t);

// explicit burst train covering [0, horizon)
std::vector<netsim::AttackBurst> schedule_bursts(const LdosSchedule& schedule,
                                                 double horizon);

// the nine-row single-LDoS parameter grid used for baseline sweeps
std::vector<LdosSchedule> default_ldos_grid();

}  // namespace adados::agents
