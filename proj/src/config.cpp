#include "adados/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace adados::config {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::vector<agents::LdosSchedule> make_grid(
    std::initializer_list<std::array<double, 3>> rows) {
  std::vector<agents::LdosSchedule> grid;
  for (const auto& r : rows) {
    agents::LdosSchedule s;
    s.duration = r[0];
    s.period = r[1];
    s.rate = r[2];
    grid.push_back(s);
  }
  return grid;
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

env::EnvConfig ExperimentConfig::env_config() const {
  env::EnvConfig ec;
  ec.link = link;
  ec.clock = clock;
  ec.reward = reward;
  if (ec.reward.cost_ceiling <= 0) {
    ec.reward.cost_ceiling = reward.b_max * clock.decision_slot;
  }
  ec.episode_slots = episode_slots;
  ec.window_len = window_len;
  ec.n_delays = n_delays;
  ec.n_delays_partial = n_delays_partial;
  ec.reward_delay = reward_delay;
  ec.obs_noise_sigma = obs_noise_sigma;
  ec.tcp_backoff_beta = tcp_backoff_beta;
  ec.peak_multiplier = peak_multiplier;
  return ec;
}

std::vector<double> ExperimentConfig::resolved_noise_sigmas() const {
  if (!noise_sigmas.empty()) return noise_sigmas;
  const double fd = link.floor_delay();
  return {0.0, 0.1 * fd, 0.5 * fd, 1.0 * fd};
}

void ExperimentConfig::validate() const {
  env_config().validate();  // link, clock, reward, windows, n' <= n
  require(!seeds.empty(), "at least one seed is required");
  require(episodes >= 0 && eval_episodes > 0, "episode counts out of range");
  require(benign_runs > 0, "benign run count must be > 0");
  require(rate_max > 0, "rate_max must be > 0");
  require(detector_source == "ldos" || detector_source == "adados" ||
              detector_source == "mixed",
          "detector source must be ldos, adados, or mixed");
  detector::model_kind_from_string(detector_kind);
  for (const auto& s : ldos_grid) s.validate();  // duration <= period
  for (const auto& s : ldos_double_grid) s.validate();
  for (double sigma : noise_sigmas) {
    require(sigma >= 0, "noise sigmas must be >= 0");
  }
  if (trace_path.empty()) {
    require(trace_spec.intervals > 0, "synthetic trace must have intervals");
  }
  for (const std::string& p : {trace_path, detector_model_path, teacher_checkpoint_path}) {
    if (!p.empty()) {
      require(std::filesystem::exists(p), "referenced file does not exist: " + p);
    }
  }
}

ExperimentConfig scenario_preset(const std::string& name) {
  ExperimentConfig c;
  c.scenario = name;

  if (name == "simple") {
    // defaults already describe the 10 Mbps bottleneck
    return c;
  }

  auto scale_to = [&](double capacity, double base_delay, int hops,
                      std::initializer_list<std::array<double, 3>> rows) {
    c.link.capacity_bmax = capacity;
    c.link.base_delay = base_delay;
    c.link.hop_count = hops;
    c.link.queue_limit = capacity / 2.0;
    c.reward.b_max = capacity;
    c.reward.b_threshold = 0.1 * capacity;
    c.reward.cost_ceiling = capacity * c.clock.decision_slot;
    c.rate_max = 3.0 * capacity;
    const double load_scale = capacity / 10.0;
    c.trace_spec.mean_tcp_mbps *= load_scale;
    c.trace_spec.mean_udp_mbps *= load_scale;
    c.ldos_grid = make_grid(rows);
  };

  if (name == "aarnet") {
    scale_to(155.0, 0.008, 6,
             {{{0.15, 1.0, 232.5}}, {{0.20, 1.5, 310.0}}, {{0.10, 2.0, 465.0}}});
  } else if (name == "ansnet") {
    scale_to(50.0, 0.006, 3,
             {{{0.15, 1.0, 75.0}}, {{0.20, 1.5, 100.0}}, {{0.10, 2.0, 150.0}}});
  } else if (name == "yorknet") {
    scale_to(150.0, 0.01, 5,
             {{{0.15, 1.0, 225.0}}, {{0.20, 1.5, 300.0}}, {{0.10, 2.0, 450.0}}});
  } else {
    throw std::invalid_argument("unknown scenario: " + name);
  }
  return c;
}

namespace {

agents::LdosSchedule schedule_from_json(const nlohmann::json& j) {
  agents::LdosSchedule s;
  maybe(j, "duration_s", s.duration);
  maybe(j, "period_s", s.period);
  maybe(j, "rate_mbps", s.rate);
  if (j.contains("variant")) {
    const auto v = j.at("variant").get<std::string>();
    if (v == "single") {
      s.variant = agents::LdosVariant::single;
    } else if (v == "double") {
      s.variant = agents::LdosVariant::double_train;
    } else if (v == "randomized") {
      s.variant = agents::LdosVariant::randomized;
    } else {
      throw std::invalid_argument("unknown ldos variant: " + v);
    }
  }
  maybe(j, "seed", s.seed);
  return s;
}

nlohmann::json schedule_to_json(const agents::LdosSchedule& s) {
  nlohmann::json j;
  j["duration_s"] = s.duration;
  j["period_s"] = s.period;
  j["rate_mbps"] = s.rate;
  j["variant"] = s.variant == agents::LdosVariant::single          ? "single"
                 : s.variant == agents::LdosVariant::double_train ? "double"
                                                                  : "randomized";
  j["seed"] = s.seed;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  std::string scenario = "simple";
  if (j.contains("scenario")) scenario = j.at("scenario").get<std::string>();
  ExperimentConfig c = scenario_preset(scenario);

  if (j.contains("link")) {
    const auto& l = j.at("link");
    maybe(l, "capacity_mbps", c.link.capacity_bmax);
    maybe(l, "base_delay_s", c.link.base_delay);
    maybe(l, "queue_limit_mbit", c.link.queue_limit);
    maybe(l, "hop_count", c.link.hop_count);
    // keep the reward bandwidth parameters in step with the link unless
    // explicitly overridden below
    c.reward.b_max = c.link.capacity_bmax;
    c.reward.b_threshold = 0.1 * c.link.capacity_bmax;
    c.reward.cost_ceiling = 0.0;
  }
  maybe(j, "trace_path", c.trace_path);
  if (j.contains("trace")) {
    const auto& t = j.at("trace");
    maybe(t, "intervals", c.trace_spec.intervals);
    maybe(t, "interval_s", c.trace_spec.interval);
    maybe(t, "mean_tcp_mbps", c.trace_spec.mean_tcp_mbps);
    maybe(t, "mean_udp_mbps", c.trace_spec.mean_udp_mbps);
    maybe(t, "burstiness", c.trace_spec.burstiness);
    maybe(t, "ar_coeff", c.trace_spec.ar_coeff);
    maybe(t, "ramp_amplitude", c.trace_spec.ramp_amplitude);
    maybe(t, "ramp_period_s", c.trace_spec.ramp_period);
  }
  if (j.contains("clock")) {
    const auto& k = j.at("clock");
    maybe(k, "controller_interval_s", c.clock.controller_interval);
    maybe(k, "decision_slot_s", c.clock.decision_slot);
  }
  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    maybe(r, "congestion_reward", c.reward.congestion_reward);
    maybe(r, "detected_penalty", c.reward.detected_penalty);
    maybe(r, "living_penalty", c.reward.living_penalty);
    maybe(r, "z0", c.reward.z0);
    maybe(r, "b_max_mbps", c.reward.b_max);
    maybe(r, "b_threshold_mbps", c.reward.b_threshold);
    maybe(r, "cost_ceiling_mbit", c.reward.cost_ceiling);
    maybe(r, "discount", c.reward.discount);
  }
  maybe(j, "episode_slots", c.episode_slots);
  maybe(j, "window_len", c.window_len);
  maybe(j, "n_delays", c.n_delays);
  maybe(j, "n_delays_partial", c.n_delays_partial);
  maybe(j, "reward_delay_s", c.reward_delay);
  maybe(j, "obs_noise_sigma_s", c.obs_noise_sigma);
  maybe(j, "tcp_backoff_beta", c.tcp_backoff_beta);
  maybe(j, "peak_multiplier", c.peak_multiplier);
  maybe(j, "rate_max_mbps", c.rate_max);

  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    maybe(p, "clip_ratio", c.ppo.clip_ratio);
    maybe(p, "gae_lambda", c.ppo.gae_lambda);
    maybe(p, "epochs", c.ppo.epochs);
    maybe(p, "minibatch", c.ppo.minibatch);
    maybe(p, "lr_decider", c.ppo.lr_decider);
    maybe(p, "lr_shaper", c.ppo.lr_shaper);
    maybe(p, "lr_critic", c.ppo.lr_critic);
    maybe(p, "ent_coef_decider", c.ppo.ent_coef_decider);
    maybe(p, "ent_coef_shaper", c.ppo.ent_coef_shaper);
    maybe(p, "hidden", c.ppo.hidden);
    maybe(p, "rollout_episodes", c.ppo.rollout_episodes);
    maybe(p, "init_u_rate", c.ppo.init_u_rate);
    maybe(p, "init_u_dur", c.ppo.init_u_dur);
    maybe(p, "init_log_std", c.ppo.init_log_std);
  }
  c.ppo.discount = c.reward.discount;

  if (j.contains("reciprocal")) {
    const auto& r = j.at("reciprocal");
    maybe(r, "lambda_s", c.reciprocal.lambda_s);
    maybe(r, "lambda_t", c.reciprocal.lambda_t);
    maybe(r, "k", c.reciprocal.k);
    maybe(r, "alpha_s", c.reciprocal.alpha_s);
    maybe(r, "alpha_t", c.reciprocal.alpha_t);
    maybe(r, "beta_s", c.reciprocal.beta_s);
    maybe(r, "beta_t", c.reciprocal.beta_t);
    maybe(r, "kl_ema_halflife", c.reciprocal.kl_ema_halflife);
    maybe(r, "td_clip", c.reciprocal.td_clip);
    if (r.contains("mode")) {
      const auto m = r.at("mode").get<std::string>();
      if (m == "one_step_ac") {
        c.reciprocal.mode = reciprocal::UpdateMode::one_step_ac;
      } else if (m == "ppo") {
        c.reciprocal.mode = reciprocal::UpdateMode::ppo;
      } else {
        throw std::invalid_argument("unknown reciprocal mode: " + m);
      }
    }
  }
  c.reciprocal.discount = c.reward.discount;

  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    maybe(d, "kind", c.detector_kind);
    maybe(d, "source", c.detector_source);
    maybe(d, "k", c.detector_hp.k);
    maybe(d, "rounds", c.detector_hp.rounds);
    maybe(d, "learning_rate", c.detector_hp.learning_rate);
    maybe(d, "l2_reg", c.detector_hp.l2_reg);
    maybe(d, "min_samples_leaf", c.detector_hp.min_samples_leaf);
    maybe(d, "threshold", c.detector_hp.threshold);
  }

  maybe(j, "noise_sigmas_s", c.noise_sigmas);
  maybe(j, "seeds", c.seeds);
  maybe(j, "episodes", c.episodes);
  maybe(j, "eval_episodes", c.eval_episodes);
  maybe(j, "benign_runs", c.benign_runs);
  maybe(j, "baseline_include_variants", c.baseline_include_variants);

  if (j.contains("ldos_grid")) {
    c.ldos_grid.clear();
    for (const auto& row : j.at("ldos_grid")) c.ldos_grid.push_back(schedule_from_json(row));
  }
  if (j.contains("ldos_double_grid")) {
    c.ldos_double_grid.clear();
    for (const auto& row : j.at("ldos_double_grid")) {
      c.ldos_double_grid.push_back(schedule_from_json(row));
    }
  }

  maybe(j, "detector_model_path", c.detector_model_path);
  maybe(j, "teacher_checkpoint_path", c.teacher_checkpoint_path);

  if (c.reward.cost_ceiling <= 0) {
    c.reward.cost_ceiling = c.reward.b_max * c.clock.decision_slot;
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  in >> j;
  return parse_config(j);
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["scenario"] = c.scenario;
  j["link"] = {{"capacity_mbps", c.link.capacity_bmax},
               {"base_delay_s", c.link.base_delay},
               {"queue_limit_mbit", c.link.queue_limit},
               {"hop_count", c.link.hop_count}};
  j["trace_path"] = c.trace_path;
  j["trace"] = {{"intervals", c.trace_spec.intervals},
                {"interval_s", c.trace_spec.interval},
                {"mean_tcp_mbps", c.trace_spec.mean_tcp_mbps},
                {"mean_udp_mbps", c.trace_spec.mean_udp_mbps},
                {"burstiness", c.trace_spec.burstiness},
                {"ar_coeff", c.trace_spec.ar_coeff},
                {"ramp_amplitude", c.trace_spec.ramp_amplitude},
                {"ramp_period_s", c.trace_spec.ramp_period}};
  j["clock"] = {{"controller_interval_s", c.clock.controller_interval},
                {"decision_slot_s", c.clock.decision_slot}};
  j["reward"] = {{"congestion_reward", c.reward.congestion_reward},
                 {"detected_penalty", c.reward.detected_penalty},
                 {"living_penalty", c.reward.living_penalty},
                 {"z0", c.reward.z0},
                 {"b_max_mbps", c.reward.b_max},
                 {"b_threshold_mbps", c.reward.b_threshold},
                 {"cost_ceiling_mbit", c.reward.cost_ceiling},
                 {"discount", c.reward.discount}};
  j["episode_slots"] = c.episode_slots;
  j["window_len"] = c.window_len;
  j["n_delays"] = c.n_delays;
  j["n_delays_partial"] = c.n_delays_partial;
  j["reward_delay_s"] = c.reward_delay;
  j["obs_noise_sigma_s"] = c.obs_noise_sigma;
  j["tcp_backoff_beta"] = c.tcp_backoff_beta;
  j["peak_multiplier"] = c.peak_multiplier;
  j["rate_max_mbps"] = c.rate_max;
  j["ppo"] = {{"clip_ratio", c.ppo.clip_ratio},
              {"gae_lambda", c.ppo.gae_lambda},
              {"epochs", c.ppo.epochs},
              {"minibatch", c.ppo.minibatch},
              {"lr_decider", c.ppo.lr_decider},
              {"lr_shaper", c.ppo.lr_shaper},
              {"lr_critic", c.ppo.lr_critic},
              {"ent_coef_decider", c.ppo.ent_coef_decider},
              {"ent_coef_shaper", c.ppo.ent_coef_shaper},
              {"hidden", c.ppo.hidden},
              {"rollout_episodes", c.ppo.rollout_episodes},
              {"init_u_rate", c.ppo.init_u_rate},
              {"init_u_dur", c.ppo.init_u_dur},
              {"init_log_std", c.ppo.init_log_std}};
  j["reciprocal"] = {
      {"lambda_s", c.reciprocal.lambda_s},
      {"lambda_t", c.reciprocal.lambda_t},
      {"k", c.reciprocal.k},
      {"alpha_s", c.reciprocal.alpha_s},
      {"alpha_t", c.reciprocal.alpha_t},
      {"beta_s", c.reciprocal.beta_s},
      {"beta_t", c.reciprocal.beta_t},
      {"kl_ema_halflife", c.reciprocal.kl_ema_halflife},
      {"td_clip", c.reciprocal.td_clip},
      {"mode",
       c.reciprocal.mode == reciprocal::UpdateMode::one_step_ac ? "one_step_ac" : "ppo"}};
  j["detector"] = {{"kind", c.detector_kind},
                   {"source", c.detector_source},
                   {"k", c.detector_hp.k},
                   {"rounds", c.detector_hp.rounds},
                   {"learning_rate", c.detector_hp.learning_rate},
                   {"l2_reg", c.detector_hp.l2_reg},
                   {"min_samples_leaf", c.detector_hp.min_samples_leaf},
                   {"threshold", c.detector_hp.threshold}};
  j["noise_sigmas_s"] = c.noise_sigmas;
  j["seeds"] = c.seeds;
  j["episodes"] = c.episodes;
  j["eval_episodes"] = c.eval_episodes;
  j["benign_runs"] = c.benign_runs;
  j["baseline_include_variants"] = c.baseline_include_variants;
  j["ldos_grid"] = nlohmann::json::array();
  for (const auto& s : c.ldos_grid) j["ldos_grid"].push_back(schedule_to_json(s));
  j["ldos_double_grid"] = nlohmann::json::array();
  for (const auto& s : c.ldos_double_grid) {
    j["ldos_double_grid"].push_back(schedule_to_json(s));
  }
  j["detector_model_path"] = c.detector_model_path;
  j["teacher_checkpoint_path"] = c.teacher_checkpoint_path;
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string dump = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : dump) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["tool_version"] = manifest.tool_version;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config;
  j["config_hash"] = manifest.config_hash;
  j["outputs"] = manifest.outputs;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  nlohmann::json j;
  in >> j;
  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config = j.at("config");
  m.config_hash = j.at("config_hash").get<std::string>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  return m;
}

}  // namespace adados::config
