#include "adados/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace adados::agents {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

double gauss_log_pdf(double u, double mu, double log_std) {
  const double z = (u - mu) / std::exp(log_std);
  return -0.5 * z * z - log_std - kHalfLog2Pi;
}

// log |da/du| for a = bound * (tanh(u) + 1) / 2
double squash_log_jacobian(double u, double bound) {
  // log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u))
  return std::log(bound / 2.0) + 2.0 * (std::log(2.0) - u - softplus(-2.0 * u));
}

}  // namespace

double squash(double u, double bound) { return bound * (std::tanh(u) + 1.0) / 2.0; }

double unsquash(double a, double bound) {
  const double y = std::clamp(2.0 * a / bound - 1.0, -1.0 + 1e-12, 1.0 - 1e-12);
  return std::atanh(y);
}

double squashed_gauss_log_pdf(double u, double mu, double log_std, double bound) {
  return gauss_log_pdf(u, mu, log_std) - squash_log_jacobian(u, bound);
}

double DeciderPolicy::prob(std::span<const double> state, nets::ForwardTrace* trace) const {
  return sigmoid(net.forward(state, trace)[0]);
}

double DeciderPolicy::log_prob(std::span<const double> state, int a_dec) const {
  const double logit = net.forward(state)[0];
  return a_dec == 1 ? -softplus(-logit) : -softplus(logit);
}

double ShaperPolicy::log_prob_u(std::span<const double> state,
                                const std::array<double, 2>& u) const {
  const auto out = net.forward(state);
  double logp = 0.0;
  const double bounds[2] = {rate_max, dur_max};
  for (int d = 0; d < 2; ++d) {
    const double ls = std::clamp(out[2 + d], kLogStdMin, kLogStdMax);
    logp += squashed_gauss_log_pdf(u[d], out[d], ls, bounds[d]);
  }
  return logp;
}

double Critic::value(std::span<const double> state, nets::ForwardTrace* trace) const {
  return net.forward(state, trace)[0];
}

ActionSample act(const DeciderPolicy& decider, const ShaperPolicy& shaper,
                 std::span<const double> state, Rng& rng) {
  ActionSample s;
  const double logit = decider.net.forward(state)[0];
  const double p = sigmoid(logit);
  s.action.a_dec = rng.bernoulli(p) ? 1 : 0;
  // same expression as DeciderPolicy::log_prob so that ratio recomputation
  // is bit-exact
  s.logp_dec = s.action.a_dec == 1 ? -softplus(-logit) : -softplus(logit);
  if (s.action.a_dec == 0) return s;

  const auto out = shaper.net.forward(state);
  const double bounds[2] = {shaper.rate_max, shaper.dur_max};
  double logp = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double ls = std::clamp(out[2 + d], kLogStdMin, kLogStdMax);
    s.u[d] = out[d] + std::exp(ls) * rng.gaussian();
    logp += squashed_gauss_log_pdf(s.u[d], out[d], ls, bounds[d]);
  }
  s.action.a_rate = squash(s.u[0], shaper.rate_max);
  s.action.a_dur = squash(s.u[1], shaper.dur_max);
  s.logp_shape = logp;
  return s;
}

TwoStageAgent TwoStageAgent::make(int input_dim, const PpoConfig& config, double rate_max,
                                  double dur_max, Rng& rng) {
  TwoStageAgent a;
  a.input_dim = input_dim;

  std::vector<int> dec_sizes{input_dim};
  dec_sizes.insert(dec_sizes.end(), config.hidden.begin(), config.hidden.end());
  dec_sizes.push_back(1);
  auto shp_sizes = dec_sizes;
  shp_sizes.back() = 4;
  auto cri_sizes = dec_sizes;

  Rng r1 = rng.split("decider"), r2 = rng.split("shaper"), r3 = rng.split("critic");
  a.decider.net = nets::MlpNet(dec_sizes, r1);
  a.shaper.net = nets::MlpNet(shp_sizes, r2);
  a.shaper.rate_max = rate_max;
  a.shaper.dur_max = dur_max;
  a.critic.net = nets::MlpNet(cri_sizes, r3);

  // output biases are the last four parameters of the shaper net
  auto& sp = a.shaper.net.params();
  sp[sp.size() - 4] = config.init_u_rate;
  sp[sp.size() - 3] = config.init_u_dur;
  sp[sp.size() - 2] = config.init_log_std;
  sp[sp.size() - 1] = config.init_log_std;

  a.opt_decider = nets::Adam(a.decider.net.param_count(), config.lr_decider);
  a.opt_shaper = nets::Adam(a.shaper.net.param_count(), config.lr_shaper);
  a.opt_critic = nets::Adam(a.critic.net.param_count(), config.lr_critic);
  return a;
}

double TwoStageAgent::log_prob(std::span<const double> state, const ActionSample& a) const {
  double logp = decider.log_prob(state, a.action.a_dec);
  if (a.action.a_dec == 1) logp += shaper.log_prob_u(state, a.u);
  return logp;
}

// --- checkpoints ---------------------------------------------------------------

void save_checkpoint(const TwoStageAgent& agent, const std::string& kind, int n_delays,
                     const std::string& path, const std::string& config_hash) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  j["n_delays"] = n_delays;
  j["input_dim"] = agent.input_dim;
  j["rate_max"] = agent.shaper.rate_max;
  j["dur_max"] = agent.shaper.dur_max;
  j["decider"] = {{"sizes", agent.decider.net.layer_sizes()},
                  {"params", agent.decider.net.params()}};
  j["shaper"] = {{"sizes", agent.shaper.net.layer_sizes()},
                 {"params", agent.shaper.net.params()}};
  j["critic"] = {{"sizes", agent.critic.net.layer_sizes()},
                 {"params", agent.critic.net.params()}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path, const PpoConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("format_version").get<int>() != 1) {
    throw std::runtime_error("unsupported checkpoint format version");
  }

  Checkpoint c;
  c.kind = j.at("kind").get<std::string>();
  c.config_hash = j.value("config_hash", "");
  c.n_delays = j.at("n_delays").get<int>();
  c.agent.input_dim = j.at("input_dim").get<int>();

  auto load_net = [&](const char* key) {
    const auto sizes = j.at(key).at("sizes").get<std::vector<int>>();
    const auto params = j.at(key).at("params").get<std::vector<double>>();
    Rng dummy(0);
    nets::MlpNet net(sizes, dummy);
    if (net.param_count() != params.size()) {
      throw std::runtime_error("checkpoint parameter count mismatch");
    }
    net.params() = params;
    return net;
  };
  c.agent.decider.net = load_net("decider");
  c.agent.shaper.net = load_net("shaper");
  c.agent.shaper.rate_max = j.at("rate_max").get<double>();
  c.agent.shaper.dur_max = j.at("dur_max").get<double>();
  c.agent.critic.net = load_net("critic");

  c.agent.opt_decider = nets::Adam(c.agent.decider.net.param_count(), config.lr_decider);
  c.agent.opt_shaper = nets::Adam(c.agent.shaper.net.param_count(), config.lr_shaper);
  c.agent.opt_critic = nets::Adam(c.agent.critic.net.param_count(), config.lr_critic);
  return c;
}

// --- advantage estimation ---------------------------------------------------------

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              double bootstrap_value, double gamma, double lambda) {
  require(rewards.size() == values.size(), "rewards and values must align");
  const auto n = rewards.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double last = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_v = t + 1 < n ? values[t + 1] : bootstrap_value;
    const double delta = rewards[t] + gamma * next_v - values[t];
    last = delta + gamma * lambda * last;
    out.advantages[t] = last;
    out.returns[t] = last + values[t];
  }
  return out;
}

// --- ppo update -------------------------------------------------------------------

namespace {

void normalize(std::vector<double>& v) {
  if (v.size() < 2) return;
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double std = std::sqrt(var / static_cast<double>(v.size()));
  for (double& x : v) x = (x - mean) / (std + 1e-8);
}

struct ClipGrad {
  double objective;
  double unclipped;
  double d_logp;  // d objective / d logp_new
};

ClipGrad clipped_objective(double ratio, double advantage, double clip) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  if (unclipped <= clipped) {
    return {unclipped, unclipped, ratio * advantage};
  }
  return {clipped, unclipped, 0.0};
}

}  // namespace

UpdateDiagnostics update_decoupled(std::span<const TrajStep> trajectory,
                                   TwoStageAgent& agent, const PpoConfig& config,
                                   Rng& rng) {
  require(!trajectory.empty(), "empty trajectory");
  UpdateDiagnostics diag;

  const auto n = trajectory.size();

  // per-episode segments for advantage estimation
  std::vector<double> adv_full(n), ret_full(n);
  std::vector<int> attack_idx;
  {
    std::size_t seg_start = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const bool last = t + 1 == n || trajectory[t].terminal;
      if (!last) continue;
      std::vector<double> rews, vals;
      for (std::size_t i = seg_start; i <= t; ++i) {
        rews.push_back(trajectory[i].reward);
        vals.push_back(trajectory[i].value);
      }
      const auto g = gae(rews, vals, 0.0, config.discount, config.gae_lambda);
      for (std::size_t i = seg_start; i <= t; ++i) {
        adv_full[i] = g.advantages[i - seg_start];
        ret_full[i] = g.returns[i - seg_start];
      }
      seg_start = t + 1;
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (trajectory[t].act.action.a_dec == 1) attack_idx.push_back(static_cast<int>(t));
    }
  }

  // shaper advantages over the attack-step subsequence, per episode segment
  std::vector<double> adv_attack(attack_idx.size());
  {
    std::size_t pos = 0;
    while (pos < attack_idx.size()) {
      // attack steps belonging to one episode segment
      std::size_t end = pos;
      std::vector<double> rews, vals;
      while (end < attack_idx.size()) {
        const auto t = static_cast<std::size_t>(attack_idx[end]);
        rews.push_back(trajectory[t].reward);
        vals.push_back(trajectory[t].value);
        ++end;
        if (trajectory[t].terminal) break;
        if (end < attack_idx.size()) {
          // stop at episode boundary: any terminal between t and next index
          const auto next_t = static_cast<std::size_t>(attack_idx[end]);
          bool crossed = false;
          for (std::size_t i = t; i < next_t; ++i) {
            if (trajectory[i].terminal) crossed = true;
          }
          if (crossed) break;
        }
      }
      const auto g = gae(rews, vals, 0.0, config.discount, config.gae_lambda);
      for (std::size_t i = pos; i < end; ++i) adv_attack[i] = g.advantages[i - pos];
      pos = end;
    }
  }

  normalize(adv_full);
  normalize(adv_attack);

  // ratio sanity before any update: freshly recomputed log-probs equal the
  // sampling-time ones, so every ratio must be exactly 1
  for (std::size_t t = 0; t < n; ++t) {
    const auto& step = trajectory[t];
    const double lp = agent.decider.log_prob(step.state, step.act.action.a_dec);
    diag.first_epoch_max_ratio_dev = std::max(
        diag.first_epoch_max_ratio_dev, std::abs(std::exp(lp - step.act.logp_dec) - 1.0));
    if (step.act.logp_shape) {
      const double lps = agent.shaper.log_prob_u(step.state, step.act.u);
      diag.first_epoch_max_ratio_dev = std::max(
          diag.first_epoch_max_ratio_dev, std::abs(std::exp(lps - *step.act.logp_shape) - 1.0));
    }
  }

  diag.shaper_skipped = attack_idx.empty();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> attack_order(attack_idx.size());
  std::iota(attack_order.begin(), attack_order.end(), 0);

  const auto mb = static_cast<std::size_t>(config.minibatch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    rng.shuffle(attack_order);

    // decider + critic over all steps
    for (std::size_t start = 0; start < n; start += mb) {
      const auto stop = std::min(n, start + mb);
      const auto count = static_cast<double>(stop - start);
      std::vector<double> grad_dec(agent.decider.net.param_count(), 0.0);
      std::vector<double> grad_cri(agent.critic.net.param_count(), 0.0);
      double dec_loss = 0.0, cri_loss = 0.0;
      double sum_clipped = 0.0, sum_unclipped = 0.0;

      for (std::size_t row = start; row < stop; ++row) {
        const auto& step = trajectory[static_cast<std::size_t>(order[row])];
        const double adv = adv_full[static_cast<std::size_t>(order[row])];
        const double ret = ret_full[static_cast<std::size_t>(order[row])];

        nets::ForwardTrace trace;
        const double logit = agent.decider.net.forward(step.state, &trace)[0];
        const double p = sigmoid(logit);
        const double lp = step.act.action.a_dec == 1 ? -softplus(-logit) : -softplus(logit);
        const double ratio = std::exp(lp - step.act.logp_dec);
        const auto cg = clipped_objective(ratio, adv, config.clip_ratio);
        sum_clipped += cg.objective;
        sum_unclipped += cg.unclipped;
        dec_loss -= cg.objective / count;

        // d logp / d logit = a - p; entropy bonus pushes the logit toward 0
        const double d_obj_d_logit = cg.d_logp * (step.act.action.a_dec - p);
        const double d_ent_d_logit = -logit * p * (1.0 - p);
        const double upstream =
            -(d_obj_d_logit + config.ent_coef_decider * d_ent_d_logit) / count;
        agent.decider.net.accumulate_backward(trace, std::span(&upstream, 1), grad_dec);

        nets::ForwardTrace vtrace;
        const double v = agent.critic.net.forward(step.state, &vtrace)[0];
        cri_loss += (v - ret) * (v - ret) / count;
        const double vup = 2.0 * (v - ret) / count;
        agent.critic.net.accumulate_backward(vtrace, std::span(&vup, 1), grad_cri);
      }

      if (sum_clipped > sum_unclipped + 1e-9) ++diag.clip_violations;
      agent.opt_decider.step(agent.decider.net.params(), grad_dec);
      agent.opt_critic.step(agent.critic.net.params(), grad_cri);
      diag.decider_loss = dec_loss;
      diag.critic_loss = cri_loss;
    }

    // shaper over attack steps only
    for (std::size_t start = 0; start < attack_order.size(); start += mb) {
      const auto stop = std::min(attack_order.size(), start + mb);
      const auto count = static_cast<double>(stop - start);
      std::vector<double> grad_shp(agent.shaper.net.param_count(), 0.0);
      double shp_loss = 0.0;
      double sum_clipped = 0.0, sum_unclipped = 0.0;

      for (std::size_t row = start; row < stop; ++row) {
        const int sub = attack_order[row];
        const auto& step = trajectory[static_cast<std::size_t>(attack_idx[sub])];
        const double adv = adv_attack[static_cast<std::size_t>(sub)];

        nets::ForwardTrace trace;
        const auto out = agent.shaper.net.forward(step.state, &trace);
        const double bounds[2] = {agent.shaper.rate_max, agent.shaper.dur_max};
        double lp = 0.0;
        double d_mu[2], d_ls[2];
        bool clamped[2];
        for (int d = 0; d < 2; ++d) {
          const double ls_raw = out[2 + d];
          const double ls = std::clamp(ls_raw, kLogStdMin, kLogStdMax);
          clamped[d] = ls_raw < kLogStdMin || ls_raw > kLogStdMax;
          const double sigma = std::exp(ls);
          const double z = (step.act.u[d] - out[d]) / sigma;
          lp += squashed_gauss_log_pdf(step.act.u[d], out[d], ls, bounds[d]);
          d_mu[d] = z / sigma;
          d_ls[d] = z * z - 1.0;
        }
        const double ratio = std::exp(lp - step.act.logp_shape.value());
        const auto cg = clipped_objective(ratio, adv, config.clip_ratio);
        sum_clipped += cg.objective;
        sum_unclipped += cg.unclipped;
        shp_loss -= cg.objective / count;

        double upstream[4];
        for (int d = 0; d < 2; ++d) {
          upstream[d] = -cg.d_logp * d_mu[d] / count;
          upstream[2 + d] = clamped[d]
                                ? 0.0
                                : -(cg.d_logp * d_ls[d] + config.ent_coef_shaper) / count;
        }
        agent.shaper.net.accumulate_backward(trace, std::span(upstream, 4), grad_shp);
      }

      if (sum_clipped > sum_unclipped + 1e-9) ++diag.clip_violations;
      agent.opt_shaper.step(agent.shaper.net.params(), grad_shp);
      diag.shaper_loss = shp_loss;
    }
  }

  return diag;
}

// --- periodic baselines -------------------------------------------------------------

void LdosSchedule::validate() const {
  require(duration >= 0, "duration must be >= 0");
  require(period > 0, "period must be > 0");
  require(duration <= period, "duration must not exceed the period");
  require(rate >= 0, "rate must be >= 0");
  if (variant == LdosVariant::randomized) {
    require(!rand_durations.empty() && !rand_periods.empty() && !rand_rates.empty(),
            "randomized schedule needs non-empty parameter sets");
  }
}

namespace {

// deterministic per-cycle parameter draw for the randomized variant
struct RandCycle {
  double duration, period, rate;
};

RandCycle rand_cycle(const LdosSchedule& s, std::uint64_t cycle) {
  Rng rng(Rng::mix(s.seed, cycle));
  return {s.rand_durations[rng.uniform_index(s.rand_durations.size())],
          s.rand_periods[rng.uniform_index(s.rand_periods.size())],
          s.rand_rates[rng.uniform_index(s.rand_rates.size())]};
}

}  // namespace

env::AttackAction ldos_actions(const LdosSchedule& schedule, double t) {
  require(t >= 0, "time must be >= 0");
  schedule.validate();

  if (schedule.variant == LdosVariant::randomized) {
    double start = 0.0;
    std::uint64_t cycle = 0;
    while (true) {
      const RandCycle c = rand_cycle(schedule, cycle);
      if (t < start + c.period) {
        const double phase = t - start;
        if (phase < c.duration) return {1, c.rate, c.duration};
        return {};
      }
      start += c.period;
      ++cycle;
    }
  }

  const double phase = std::fmod(t, schedule.period);
  if (phase < schedule.duration) return {1, schedule.rate, schedule.duration};
  if (schedule.variant == LdosVariant::double_train) {
    const double shifted = phase - schedule.period / 2.0;
    if (shifted >= 0 && shifted < schedule.duration) {
      return {1, schedule.rate, schedule.duration};
    }
  }
  return {};
}

std::vector<netsim::AttackBurst> schedule_bursts(const LdosSchedule& schedule,
                                                 double horizon) {
  schedule.validate();
  std::vector<netsim::AttackBurst> bursts;

  if (schedule.variant == LdosVariant::randomized) {
    double start = 0.0;
    std::uint64_t cycle = 0;
    while (start < horizon) {
      const RandCycle c = rand_cycle(schedule, cycle);
      bursts.push_back({start, c.duration, c.rate});
      start += c.period;
      ++cycle;
    }
    return bursts;
  }

  for (double start = 0.0; start < horizon; start += schedule.period) {
    bursts.push_back({start, schedule.duration, schedule.rate});
    if (schedule.variant == LdosVariant::double_train) {
      const double mid = start + schedule.period / 2.0;
      if (mid < horizon) bursts.push_back({mid, schedule.duration, schedule.rate});
    }
  }
  return bursts;
}

std::vector<LdosSchedule> default_ldos_grid() {
  std::vector<LdosSchedule> grid;
  const double params[9][3] = {{0.15, 1.0, 15}, {0.15, 1.5, 15}, {0.20, 1.5, 15},
                               {0.15, 1.0, 20}, {0.15, 1.5, 20}, {0.20, 1.5, 20},
                               {0.15, 2.0, 25}, {0.15, 2.0, 30}, {0.10, 2.0, 30}};
  for (const auto& p : params) {
    LdosSchedule s;
    s.duration = p[0];
    s.period = p[1];
    s.rate = p[2];
    grid.push_back(s);
  }
  return grid;
}

}  // namespace adados::agents
