#include "adados/reciprocal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adados::reciprocal {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// in-place params += scale * grad
void axpy(std::vector<double>& params, double scale, std::span<const double> grad) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += scale * grad[i];
}

// gradient of log pi(a|obs) with respect to one agent's actor parameters,
// applied as theta += scale * grad
void apply_actor_step(agents::TwoStageAgent& agent, std::span<const double> obs,
                      const agents::ActionSample& a, double scale) {
  nets::ForwardTrace trace;
  const double logit = agent.decider.net.forward(obs, &trace)[0];
  const double p = sigmoid(logit);
  const double upstream = a.action.a_dec - p;
  const auto grad = agent.decider.net.backward(trace, std::span(&upstream, 1));
  axpy(agent.decider.net.params(), scale, grad);

  if (a.action.a_dec != 1) return;
  nets::ForwardTrace strace;
  const auto out = agent.shaper.net.forward(obs, &strace);
  double up[4];
  for (int d = 0; d < 2; ++d) {
    const double ls_raw = out[2 + d];
    const double ls = std::clamp(ls_raw, agents::kLogStdMin, agents::kLogStdMax);
    const double sigma = std::exp(ls);
    const double z = (a.u[d] - out[d]) / sigma;
    up[d] = z / sigma;
    up[2 + d] = (ls_raw < agents::kLogStdMin || ls_raw > agents::kLogStdMax)
                    ? 0.0
                    : z * z - 1.0;
  }
  const auto sgrad = agent.shaper.net.backward(strace, std::span(up, 4));
  axpy(agent.shaper.net.params(), scale, sgrad);
}

void apply_critic_step(agents::TwoStageAgent& agent, std::span<const double> obs,
                       double scale) {
  nets::ForwardTrace trace;
  agent.critic.net.forward(obs, &trace);
  const double upstream = 1.0;
  const auto grad = agent.critic.net.backward(trace, std::span(&upstream, 1));
  axpy(agent.critic.net.params(), scale, grad);
}

}  // namespace

void ReciprocalParams::validate() const {
  require(k >= 0.0 && k <= 1.0, "reward scale rate k must be in [0,1]");
  require(lambda_s >= 0 && lambda_t >= 0, "transfer rates must be >= 0");
  require(alpha_s >= 0 && alpha_t >= 0 && beta_s >= 0 && beta_t >= 0,
          "learning rates must be >= 0");
  require(discount > 0 && discount < 1, "discount must be in (0,1)");
  require(kl_ema_halflife > 0, "KL smoother half-life must be > 0");
}

double kl_policy(std::span<const double> logp_p, std::span<const double> logp_q) {
  require(!logp_p.empty() && logp_p.size() == logp_q.size(),
          "log-prob sample sets must be non-empty and aligned");
  double sum = 0.0;
  for (std::size_t i = 0; i < logp_p.size(); ++i) {
    const double d = logp_p[i] - logp_q[i];
    if (!std::isfinite(d)) throw std::invalid_argument("non-finite log-prob in KL estimate");
    sum += d;
  }
  return std::max(0.0, sum / static_cast<double>(logp_p.size()));
}

RectifiedRewards rectify(double r_s, double r_t, double r_d, double r_prime_d,
                         const ReciprocalParams& params) {
  require(std::isfinite(r_s) && std::isfinite(r_t) && std::isfinite(r_d) &&
              std::isfinite(r_prime_d),
          "rectify inputs must be finite");
  RectifiedRewards out;
  if (r_t >= r_s) {
    out.r_s_rec = r_s - params.lambda_s * (r_t - r_s) * r_d;
    out.r_t_rec = params.k * r_t;
  } else {
    out.r_s_rec = r_s + params.lambda_s * (r_s - r_t);
    out.r_t_rec = params.k * r_t - params.lambda_t * (r_s - r_t) * r_prime_d;
  }
  return out;
}

void KlSmoother::add(double sample) {
  const double clamped = std::max(0.0, sample);
  if (!primed) {
    value = clamped;
    primed = true;
    return;
  }
  const double rho = std::pow(0.5, 1.0 / halflife);
  value = rho * value + (1.0 - rho) * clamped;
}

std::vector<double> PolicyPair::student_view(std::span<const double> full_vec) const {
  require(static_cast<int>(full_vec.size()) >= n_partial,
          "state vector shorter than the student window");
  return {full_vec.end() - n_partial, full_vec.end()};
}

PairedStep paired_step(const PolicyPair& pair, env::AttackEnv& env_s,
                       env::AttackEnv& env_t, const ReciprocalParams& params,
                       KlSmoother& kl_st, KlSmoother& kl_ts, Rng& rng) {
  require(std::abs(env_s.now() - env_t.now()) < 1e-9,
          "paired environments out of sync");
  require(!env_s.done() && !env_t.done(), "paired environments must be active");

  PairedStep step;

  const auto obs_s =
      env_s.observe_partial(pair.n_partial, env_s.config().obs_noise_sigma);
  step.student_obs = env_s.vectorize_partial(obs_s);
  const auto state_s_vec = env_s.vectorize_state();
  step.teacher_obs = env_t.vectorize_state();

  step.student_action = pair.student.sample(step.student_obs, rng);
  step.teacher_action = pair.teacher.sample(step.teacher_obs, rng);

  const auto out_s = env_s.step(step.student_action.action);
  const auto out_t = env_t.step(step.teacher_action.action);

  // the deferred reward of the action just taken, resolved in place (the
  // environment's own FIFO releases it at the next boundary)
  step.r_s = env_s.last_record_resolved().reward;
  step.r_t = env_t.last_record_resolved().reward;

  // one-sample KL estimates on this slot's actions, then smoothed.
  // student-side: the teacher density is evaluated on the student
  // environment's full state; teacher-side: the student density is
  // evaluated on the delay suffix of the teacher's state.
  const double lp_s_own = step.student_action.total_logp();
  const double lp_s_under_t = pair.teacher.log_prob(state_s_vec, step.student_action);
  kl_st.add(lp_s_own - lp_s_under_t);

  const double lp_t_own = step.teacher_action.total_logp();
  const double lp_t_under_s =
      pair.student.log_prob(pair.student_view(step.teacher_obs), step.teacher_action);
  kl_ts.add(lp_t_own - lp_t_under_s);

  step.kl_st = kl_st.value;
  step.kl_ts = kl_ts.value;

  const auto rec = rectify(step.r_s, step.r_t, step.kl_st, step.kl_ts, params);
  step.r_s_rec = rec.r_s_rec;
  step.r_t_rec = rec.r_t_rec;

  step.student_next_obs = env_s.vectorize_partial(out_s.observation);
  step.teacher_next_obs = env_t.vectorize_state();
  step.done = out_s.done;
  return step;
}

UpdateDeltas reciprocal_update(const PairedStep& step, PolicyPair& pair,
                               const ReciprocalParams& params) {
  const double cont = step.done ? 0.0 : 1.0;

  const double v_s = pair.student.critic.value(step.student_obs);
  const double v_s_next = pair.student.critic.value(step.student_next_obs);
  double delta_s = step.r_s_rec + params.discount * cont * v_s_next - v_s;

  const double v_t = pair.teacher.critic.value(step.teacher_obs);
  const double v_t_next = pair.teacher.critic.value(step.teacher_next_obs);
  double delta_t = step.r_t_rec + params.discount * cont * v_t_next - v_t;

  if (params.td_clip > 0) {
    delta_s = std::clamp(delta_s, -params.td_clip, params.td_clip);
    delta_t = std::clamp(delta_t, -params.td_clip, params.td_clip);
  }

  apply_critic_step(pair.student, step.student_obs, params.alpha_s * delta_s);
  apply_critic_step(pair.teacher, step.teacher_obs, params.alpha_t * delta_t);
  apply_actor_step(pair.student, step.student_obs, step.student_action,
                   params.beta_s * delta_s);
  apply_actor_step(pair.teacher, step.teacher_obs, step.teacher_action,
                   params.beta_t * delta_t);

  return {delta_s, delta_t};
}

TrainStudentResult train_student(agents::TwoStageAgent teacher, int n_partial,
                                 const EnvFactory& env_factory,
                                 const ReciprocalParams& params,
                                 const agents::PpoConfig& ppo_config, int episodes,
                                 Rng& rng) {
  params.validate();
  require(episodes >= 0, "episode count must be >= 0");

  TrainStudentResult result;
  result.pair.n_partial = n_partial;
  result.pair.teacher = std::move(teacher);
  Rng init_rng = rng.split("student-init");
  result.pair.student = agents::TwoStageAgent::make(
      n_partial, ppo_config, result.pair.teacher.shaper.rate_max,
      result.pair.teacher.shaper.dur_max, init_rng);

  Rng act_rng = rng.split("paired-act");

  for (int ep = 0; ep < episodes; ++ep) {
    env::AttackEnv env_s = env_factory(ep);
    require(result.pair.teacher.input_dim == env_s.state_dim(),
            "teacher checkpoint does not match the environment state dimension");
    env_s.reset();
    env::AttackEnv env_t = env_s;

    KlSmoother kl_st{params.kl_ema_halflife};
    KlSmoother kl_ts{params.kl_ema_halflife};

    std::vector<env::StepRecord> teacher_records;
    std::vector<agents::TrajStep> student_traj;  // ppo mode

    while (!env_s.done()) {
      PairedStep step =
          paired_step(result.pair, env_s, env_t, params, kl_st, kl_ts, act_rng);

      // teacher record for metrics, resolved before the sync wipes env_t
      teacher_records.push_back(env_t.last_record_resolved());

      if (params.mode == UpdateMode::one_step_ac) {
        reciprocal_update(step, result.pair, params);
      } else {
        // ppo mode: student collects rectified rewards for a post-episode
        // update; the teacher still takes its one-step reciprocal update
        agents::TrajStep ts;
        ts.state = step.student_obs;
        ts.act = step.student_action;
        ts.reward = step.r_s_rec;
        ts.value = result.pair.student.critic.value(step.student_obs);
        ts.terminal = step.done;
        student_traj.push_back(std::move(ts));

        PairedStep teacher_only = step;
        ReciprocalParams frozen_student = params;
        frozen_student.alpha_s = 0.0;
        frozen_student.beta_s = 0.0;
        reciprocal_update(teacher_only, result.pair, frozen_student);
      }

      env_t = env_s;  // re-synchronise the teacher's world
    }

    if (params.mode == UpdateMode::ppo && !student_traj.empty()) {
      Rng update_rng = rng.split("ppo-update").split(static_cast<std::uint64_t>(ep));
      agents::update_decoupled(student_traj, result.pair.student, ppo_config, update_rng);
    }

    EpisodeCurve curve;
    curve.episode = ep;
    curve.student = env::metrics(env_s.records());
    curve.teacher = env::metrics(teacher_records);
    result.curves.push_back(curve);
  }
  return result;
}

}  // namespace adados::reciprocal
