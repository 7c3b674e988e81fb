#pragma once

// Mutual teacher-student training over paired environments. Each slot both
// agents act in synchronised copies of the world; whichever earns the lower
// reward has its reward rectified toward the other policy, weighted by a
// sampled policy KL divergence; both actor-critic pairs then take one-step
// temporal-difference updates, and the teacher's environment state is
// re-synchronised from the student's.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adados/agents.hpp"
#include "adados/env.hpp"
#include "adados/rng.hpp"

namespace adados::reciprocal {

enum class UpdateMode { one_step_ac, ppo };

struct ReciprocalParams {
  double lambda_s = 0.2;   // student transfer rate
  double lambda_t = 0.05;  // teacher transfer rate
  double k = 0.9;          // teacher reward scale (adaptive fine-tune)
  double alpha_s = 1e-3;   // student critic rate
  double alpha_t = 1e-3;   // teacher critic rate
  double beta_s = 1e-5;    // student actor rate
  double beta_t = 1e-6;    // teacher actor rate
  double discount = 0.95;
  double kl_ema_halflife = 10.0;  // slots
  double td_clip = 20.0;          // clamp |delta| when > 0
  UpdateMode mode = UpdateMode::one_step_ac;

  void validate() const;
};

// Sampled KL divergence between two policies from per-sample log densities
// evaluated on actions drawn from p. Clamped below at zero; non-finite
// inputs are rejected.
double kl_policy(std::span<const double> logp_p, std::span<const double> logp_q);

// Reward rectification. When the teacher is ahead the student is pulled
// toward it (scaled by the student->teacher KL); otherwise the student is
// boosted and the teacher is pulled toward the student.
struct RectifiedRewards {
  double r_s_rec = 0.0;
  double r_t_rec = 0.0;
};

RectifiedRewards rectify(double r_s, double r_t, double r_d, double r_prime_d,
                         const ReciprocalParams& params);

// exponential smoother for the per-slot one-sample KL estimates
struct KlSmoother {
  double halflife = 10.0;
  double value = 0.0;
  bool primed = false;

  void add(double sample);
};

struct PolicyPair {
  agents::TwoStageAgent teacher;  // full-state input
  agents::TwoStageAgent student;  // delay-window input
  int n_partial = 3;

  // student policies consume the delay suffix of a full state vector
  std::vector<double> student_view(std::span<const double> full_vec) const;
};

struct PairedStep {
  std::vector<double> teacher_obs, teacher_next_obs;
  std::vector<double> student_obs, student_next_obs;
  agents::ActionSample teacher_action, student_action;
  double r_t = 0.0, r_s = 0.0;
  double kl_st = 0.0;  // D(student || teacher), smoothed
  double kl_ts = 0.0;  // D(teacher || student), smoothed
  double r_s_rec = 0.0, r_t_rec = 0.0;
  bool done = false;
};

// One synchronised slot: both agents act, both environments advance, raw
// rewards are resolved, KL terms estimated and rewards rectified.
PairedStep paired_step(const PolicyPair& pair, env::AttackEnv& env_s,
                       env::AttackEnv& env_t, const ReciprocalParams& params,
                       KlSmoother& kl_st, KlSmoother& kl_ts, Rng& rng);

struct UpdateDeltas {
  double delta_s = 0.0;
  double delta_t = 0.0;
};

// One-step actor-critic updates from the rectified rewards.
UpdateDeltas reciprocal_update(const PairedStep& step, PolicyPair& pair,
                               const ReciprocalParams& params);

struct EpisodeCurve {
  int episode = 0;
  env::EpisodeMetrics teacher;
  env::EpisodeMetrics student;
};

struct TrainStudentResult {
  PolicyPair pair;
  std::vector<EpisodeCurve> curves;
};

// Paired training for a fixed number of episodes. The factory builds the
// per-episode environment (fresh trace, fresh seed); the teacher starts from
// a pre-trained agent and is only ever touched by reciprocal_update.
using EnvFactory = std::function<env::AttackEnv(int episode)>;

TrainStudentResult train_student(agents::TwoStageAgent teacher, int n_partial,
                                 const EnvFactory& env_factory,
                                 const ReciprocalParams& params,
                                 const agents::PpoConfig& ppo_config, int episodes,
                                 Rng& rng);

}  // namespace adados::reciprocal
