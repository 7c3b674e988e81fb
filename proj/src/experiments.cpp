#include "adados/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "adados/csv.hpp"

namespace adados::exp {

namespace fs = std::filesystem;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  for (double x : v) out.std += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(out.std / static_cast<double>(v.size()));
  return out;
}

int trivial_detector(const features::FeatureVector&,
                     std::span<const netsim::TrafficSample>) {
  return 0;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void finish_manifest(const std::string& command, const ExperimentConfig& cfg,
                     std::uint64_t seed, const std::string& out_dir,
                     std::vector<std::string>& outputs) {
  config::RunManifest m;
  m.command = command;
  m.seed = seed;
  m.config = config::to_json(cfg);
  m.config_hash = config::config_hash(cfg);
  m.outputs = outputs;
  const std::string path = join(out_dir, "manifest.json");
  config::write_manifest(m, path);
  outputs.push_back(path);
}

double episode_horizon(const ExperimentConfig& config) {
  return config.episode_slots * config.clock.decision_slot;
}

}  // namespace

netsim::BackgroundTrace make_trace(const ExperimentConfig& config, std::uint64_t seed,
                                   std::uint64_t run) {
  if (!config.trace_path.empty()) return netsim::load_trace_csv(config.trace_path);
  return netsim::synth_trace(config.trace_spec, Rng::mix(seed, run));
}

env::AttackEnv make_env(const ExperimentConfig& config, netsim::BackgroundTrace trace,
                        env::DetectorFn detector, std::uint64_t seed) {
  return env::AttackEnv(config.env_config(), std::move(trace), std::move(detector), seed);
}

// --- corpora -----------------------------------------------------------------

namespace {

constexpr std::uint64_t kBenignSalt = 0xBE019;
constexpr std::uint64_t kAttackSalt = 0xA77AC;

void append_benign_windows(const ExperimentConfig& config, std::uint64_t seed,
                           std::vector<detector::LabeledExample>& out) {
  const double horizon = episode_horizon(config);
  const int stride = config.clock.samples_per_slot();
  for (int run = 0; run < config.benign_runs; ++run) {
    const auto trace =
        make_trace(config, Rng::mix(seed, kBenignSalt), static_cast<std::uint64_t>(run));
    const auto samples = netsim::run_window(trace, {}, config.clock, horizon, config.link,
                                            config.tcp_backoff_beta);
    const auto examples = detector::label_windows(samples, {}, config.window_len, stride,
                                                  config.peak_multiplier);
    out.insert(out.end(), examples.begin(), examples.end());
  }
}

}  // namespace

std::vector<detector::LabeledExample> build_ldos_corpus(const ExperimentConfig& config,
                                                        std::uint64_t seed) {
  std::vector<detector::LabeledExample> out;
  append_benign_windows(config, seed, out);

  const double horizon = episode_horizon(config);
  const int stride = config.clock.samples_per_slot();
  for (std::size_t i = 0; i < config.ldos_grid.size(); ++i) {
    const auto trace = make_trace(config, Rng::mix(seed, kAttackSalt), i);
    const auto bursts = agents::schedule_bursts(config.ldos_grid[i], horizon);
    const auto samples = netsim::run_window(trace, bursts, config.clock, horizon,
                                            config.link, config.tcp_backoff_beta);
    const auto examples = detector::label_windows(samples, bursts, config.window_len,
                                                  stride, config.peak_multiplier);
    out.insert(out.end(), examples.begin(), examples.end());
  }
  return out;
}

std::vector<detector::LabeledExample> build_agent_corpus(const ExperimentConfig& config,
                                                         const agents::TwoStageAgent& agent,
                                                         std::uint64_t seed) {
  std::vector<detector::LabeledExample> out;
  append_benign_windows(config, seed, out);

  // detector feedback does not shape the traffic, so corpus episodes run
  // against a silent detector
  Rng act_rng = Rng(seed).split("corpus-act");
  const int stride = config.clock.samples_per_slot();
  for (int run = 0; run < config.benign_runs; ++run) {
    auto env = make_env(config, make_trace(config, Rng::mix(seed, 0xAD0) , run),
                        trivial_detector, Rng::mix(seed, 0xE27 + run));
    env.reset();
    while (!env.done()) {
      const auto state = env.vectorize_state();
      env.step(agent.sample(state, act_rng).action);
    }
    std::vector<netsim::AttackBurst> bursts;
    for (const auto& rec : env.records()) {
      if (rec.action.a_dec == 1 && rec.action.a_dur > 0 && rec.action.a_rate > 0) {
        bursts.push_back({rec.t, rec.action.a_dur, rec.action.a_rate});
      }
    }
    const auto examples = detector::label_windows(env.samples(), bursts, config.window_len,
                                                  stride, config.peak_multiplier);
    out.insert(out.end(), examples.begin(), examples.end());
  }
  return out;
}

void split_corpus(const std::vector<detector::LabeledExample>& corpus,
                  std::vector<detector::LabeledExample>* train,
                  std::vector<detector::LabeledExample>* holdout) {
  train->clear();
  holdout->clear();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (i % 5 == 4 ? holdout : train)->push_back(corpus[i]);
  }
}

// --- evaluation -----------------------------------------------------------------

AgentEvalResult eval_agent(const ExperimentConfig& config, const agents::TwoStageAgent& agent,
                           bool partial, int n_partial, const detector::DetectorModel& model,
                           int episodes, std::uint64_t seed) {
  AgentEvalResult result;
  Rng act_rng = Rng(seed).split("eval-act");
  std::vector<double> asr, bw;
  for (int ep = 0; ep < episodes; ++ep) {
    auto env = make_env(config, make_trace(config, seed, static_cast<std::uint64_t>(ep)),
                        env::make_detector_fn(model), Rng::mix(seed, 0x3AA1 + ep));
    env.reset();
    while (!env.done()) {
      std::vector<double> obs;
      if (partial) {
        obs = env.vectorize_partial(
            env.observe_partial(n_partial, config.obs_noise_sigma));
      } else {
        obs = env.vectorize_state();
      }
      env.step(agent.sample(obs, act_rng).action);
    }
    const auto m = env::metrics(env.records());
    result.episodes.push_back(m);
    asr.push_back(m.attack_success_rate);
    bw.push_back(m.avg_bandwidth);
    result.cost_mean += m.attack_cost;
    result.trigger_mean += m.trigger_rate;
    result.reward_mean += m.total_reward / config.episode_slots;
  }
  const auto a = mean_std(asr);
  const auto b = mean_std(bw);
  result.asr_mean = a.mean;
  result.asr_std = a.std;
  result.bandwidth_mean = b.mean;
  result.bandwidth_std = b.std;
  const auto n = static_cast<double>(std::max(1, episodes));
  result.cost_mean /= n;
  result.trigger_mean /= n;
  result.reward_mean /= n;
  return result;
}

BaselineRow eval_schedule(const ExperimentConfig& config, const agents::LdosSchedule& schedule,
                          const std::string& type, const detector::DetectorModel& model,
                          int episodes, std::uint64_t seed) {
  BaselineRow row;
  row.type = type;
  row.schedule = schedule;

  const double warmup = config.window_len * config.clock.controller_interval;
  const double attack_span = episode_horizon(config);
  const double horizon = warmup + attack_span;
  const int per_slot = config.clock.samples_per_slot();

  std::vector<double> asr, bw;
  double total_cost = 0.0;
  std::size_t total_bursts = 0;

  for (int ep = 0; ep < episodes; ++ep) {
    const auto trace = make_trace(config, seed, static_cast<std::uint64_t>(ep));

    auto bursts = agents::schedule_bursts(schedule, attack_span);
    for (auto& b : bursts) b.start += warmup;

    const auto samples = netsim::run_window(trace, bursts, config.clock, horizon,
                                            config.link, config.tcp_backoff_beta);

    // one detector decision per slot boundary
    std::vector<std::pair<double, int>> detections;
    for (std::size_t i = config.window_len; i <= samples.size(); i += per_slot) {
      const auto window = std::span(samples).subspan(0, i);
      const auto f =
          features::featurize(window, config.window_len, config.peak_multiplier);
      detections.emplace_back(samples[i - 1].t, model.predict(f));
    }

    int undetected = 0;
    for (const auto& b : bursts) {
      const double due = b.start + config.reward_delay;
      int flag = 0;
      for (const auto& [t, f] : detections) {
        if (t >= due - 1e-9) {
          flag = f;
          break;
        }
      }
      undetected += 1 - flag;
      total_cost += b.duration * b.rate;
    }
    total_bursts += bursts.size();
    asr.push_back(bursts.empty() ? 1.0
                                 : static_cast<double>(undetected) /
                                       static_cast<double>(bursts.size()));

    double b_sum = 0.0;
    std::size_t b_count = 0;
    for (const auto& s : samples) {
      if (s.t > warmup + 1e-9) {
        b_sum += s.b;
        ++b_count;
      }
    }
    bw.push_back(b_sum / static_cast<double>(b_count));
  }

  const auto a = mean_std(asr);
  const auto b = mean_std(bw);
  row.asr_mean = a.mean;
  row.asr_std = a.std;
  row.bandwidth_mean = b.mean;
  row.bandwidth_std = b.std;
  row.trigger_rate = 1.0;  // one burst per period by construction
  row.cost_per_cycle =
      total_bursts > 0 ? total_cost / static_cast<double>(total_bursts) : 0.0;
  return row;
}

// --- teacher training ---------------------------------------------------------------

TeacherTrainResult train_teacher_agent(const ExperimentConfig& config,
                                       const detector::DetectorModel& model,
                                       int episodes, std::uint64_t seed) {
  TeacherTrainResult result;
  Rng rng(seed);
  Rng init_rng = rng.split("agent-init");
  Rng act_rng = rng.split("act");
  Rng update_rng = rng.split("update");

  const int state_dim = 6 + config.n_delays;
  result.agent = agents::TwoStageAgent::make(state_dim, config.ppo, config.rate_max,
                                             config.clock.decision_slot, init_rng);

  std::vector<agents::TrajStep> buffer;
  const auto fn = env::make_detector_fn(model);

  for (int ep = 0; ep < episodes; ++ep) {
    auto env = make_env(config, make_trace(config, seed, static_cast<std::uint64_t>(ep)),
                        fn, Rng::mix(seed, 0x5EED + ep));
    env.reset();
    const std::size_t base = buffer.size();
    while (!env.done()) {
      agents::TrajStep step;
      step.state = env.vectorize_state();
      step.act = result.agent.sample(step.state, act_rng);
      step.value = result.agent.critic.value(step.state);
      const auto out = env.step(step.act.action);
      buffer.push_back(std::move(step));
      for (const auto& rel : out.released) {
        buffer[base + static_cast<std::size_t>(rel.slot)].reward = rel.value;
      }
    }
    buffer.back().terminal = true;
    result.curve.push_back(env::metrics(env.records()));

    if ((ep + 1) % config.ppo.rollout_episodes == 0) {
      agents::update_decoupled(buffer, result.agent, config.ppo, update_rng);
      buffer.clear();
    }
  }
  if (!buffer.empty()) {
    agents::update_decoupled(buffer, result.agent, config.ppo, update_rng);
  }
  return result;
}

// --- command drivers ------------------------------------------------------------------

std::vector<std::string> cmd_gen_trace(const ExperimentConfig& config, std::uint64_t seed,
                                       const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto trace = netsim::synth_trace(config.trace_spec, seed);
  const std::string path = join(out_dir, "trace.csv");
  netsim::save_trace_csv(trace, path);
  std::vector<std::string> outputs{path};
  finish_manifest("gen-trace", config, seed, out_dir, outputs);
  return outputs;
}

namespace {

detector::DetectorModel train_model_for_source(const ExperimentConfig& config,
                                               const std::string& source,
                                               std::uint64_t seed,
                                               detector::DetectorReport* report,
                                               std::vector<detector::LabeledExample>* corpus_out) {
  std::vector<detector::LabeledExample> corpus;
  if (source == "ldos") {
    corpus = build_ldos_corpus(config, seed);
  } else {
    require(!config.teacher_checkpoint_path.empty(),
            "missing prerequisite: teacher_checkpoint_path is required for detector "
            "source '" + source + "' (run train-teacher first)");
    const auto ck = agents::load_checkpoint(config.teacher_checkpoint_path, config.ppo);
    corpus = build_agent_corpus(config, ck.agent, seed);
    if (source == "mixed") {
      const auto ldos = build_ldos_corpus(config, seed);
      corpus.insert(corpus.end(), ldos.begin(), ldos.end());
    }
  }

  std::vector<detector::LabeledExample> train, holdout;
  split_corpus(corpus, &train, &holdout);
  const auto kind = detector::model_kind_from_string(config.detector_kind);
  auto model = detector::DetectorModel::train(train, kind, config.detector_hp);
  if (report) *report = detector::evaluate(model, holdout);
  if (corpus_out) *corpus_out = std::move(corpus);
  return model;
}

}  // namespace

std::vector<std::string> cmd_train_detector(const ExperimentConfig& config,
                                            std::uint64_t seed,
                                            const std::string& out_dir) {
  fs::create_directories(out_dir);
  detector::DetectorReport report;
  std::vector<detector::LabeledExample> corpus;
  const auto model =
      train_model_for_source(config, config.detector_source, seed, &report, &corpus);

  const std::string model_path = join(out_dir, "detector_" + config.detector_source + "_" +
                                                   config.detector_kind + ".json");
  model.save(model_path);
  const std::string corpus_path = join(out_dir, "corpus.csv");
  detector::save_examples_csv(corpus, corpus_path);

  nlohmann::json jr;
  jr["accuracy"] = report.accuracy;
  jr["precision"] = report.precision;
  jr["recall"] = report.recall;
  jr["false_positive_rate"] = report.false_positive_rate;
  jr["tp"] = report.tp;
  jr["tn"] = report.tn;
  jr["fp"] = report.fp;
  jr["fn"] = report.fn;
  jr["kind"] = config.detector_kind;
  jr["source"] = config.detector_source;
  const std::string report_path = join(out_dir, "detector_report.json");
  std::ofstream(report_path) << jr.dump(2) << '\n';

  std::vector<std::string> outputs{model_path, corpus_path, report_path};
  finish_manifest("train-detector", config, seed, out_dir, outputs);
  return outputs;
}

std::vector<std::string> cmd_baseline(const ExperimentConfig& config, std::uint64_t seed,
                                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  require(!config.detector_model_path.empty(),
          "missing prerequisite: detector_model_path (run train-detector first)");
  const auto model = detector::DetectorModel::load(config.detector_model_path);

  const std::string path = join(out_dir, "baseline_metrics.csv");
  CsvWriter w(path, {"no", "type", "duration_s", "period_s", "rate_mbps", "trigger_rate",
                     "asr_mean", "asr_std", "avg_bandwidth_mean_mbps",
                     "avg_bandwidth_std_mbps", "attack_cost_mbit"});

  std::vector<std::pair<std::string, agents::LdosSchedule>> rows;
  for (const auto& s : config.ldos_grid) rows.emplace_back("ldos", s);
  if (config.baseline_include_variants) {
    auto doubles = config.ldos_double_grid;
    if (doubles.empty()) {
      for (const auto& s : config.ldos_grid) {
        auto d = s;
        d.variant = agents::LdosVariant::double_train;
        doubles.push_back(d);
      }
    }
    for (const auto& s : doubles) rows.emplace_back("double-ldos", s);
    agents::LdosSchedule rand_s;
    rand_s.variant = agents::LdosVariant::randomized;
    rand_s.seed = seed;
    if (!config.ldos_grid.empty()) {
      // draw from the configured grid's parameter sets
      rand_s.rand_durations.clear();
      rand_s.rand_periods.clear();
      rand_s.rand_rates.clear();
      for (const auto& s : config.ldos_grid) {
        rand_s.rand_durations.push_back(s.duration);
        rand_s.rand_periods.push_back(s.period);
        rand_s.rand_rates.push_back(s.rate);
      }
      auto dedupe = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
      };
      dedupe(rand_s.rand_durations);
      dedupe(rand_s.rand_periods);
      dedupe(rand_s.rand_rates);
    }
    rows.emplace_back("rand-ldos", rand_s);
  }

  int no = 1;
  for (const auto& [type, sched] : rows) {
    const auto row = eval_schedule(config, sched, type, model, config.eval_episodes,
                                   Rng::mix(seed, static_cast<std::uint64_t>(no)));
    w.field(no)
        .field(type)
        .field(sched.duration)
        .field(sched.period)
        .field(sched.rate)
        .field(row.trigger_rate)
        .field(row.asr_mean)
        .field(row.asr_std)
        .field(row.bandwidth_mean)
        .field(row.bandwidth_std)
        .field(row.cost_per_cycle);
    w.end_row();
    ++no;
  }

  std::vector<std::string> outputs{path};
  finish_manifest("baseline", config, seed, out_dir, outputs);
  return outputs;
}

namespace {

void write_curve_csv(const std::string& path,
                     const std::vector<env::EpisodeMetrics>& curve, int slots) {
  CsvWriter w(path, {"episode", "asr", "avg_bandwidth_mbps", "attack_cost_mbit",
                     "trigger_rate", "mean_reward"});
  for (std::size_t ep = 0; ep < curve.size(); ++ep) {
    const auto& m = curve[ep];
    w.field(ep)
        .field(m.attack_success_rate)
        .field(m.avg_bandwidth)
        .field(m.attack_cost)
        .field(m.trigger_rate)
        .field(m.total_reward / slots);
    w.end_row();
  }
}

}  // namespace

std::vector<std::string> cmd_train_teacher(const ExperimentConfig& config, std::uint64_t seed,
                                           const std::string& out_dir) {
  fs::create_directories(out_dir);
  require(!config.detector_model_path.empty(),
          "missing prerequisite: detector_model_path (run train-detector first)");
  const auto model = detector::DetectorModel::load(config.detector_model_path);

  const auto result = train_teacher_agent(config, model, config.episodes, seed);

  const std::string ck_path = join(out_dir, "teacher_checkpoint.json");
  agents::save_checkpoint(result.agent, "teacher", config.n_delays, ck_path,
                          config::config_hash(config));
  const std::string curve_path = join(out_dir, "teacher_curves.csv");
  write_curve_csv(curve_path, result.curve, config.episode_slots);

  std::vector<std::string> outputs{ck_path, curve_path};
  finish_manifest("train-teacher", config, seed, out_dir, outputs);
  return outputs;
}

std::vector<std::string> cmd_train_student(const ExperimentConfig& config, std::uint64_t seed,
                                           const std::string& out_dir) {
  fs::create_directories(out_dir);
  require(!config.detector_model_path.empty(),
          "missing prerequisite: detector_model_path (run train-detector first)");
  require(!config.teacher_checkpoint_path.empty(),
          "missing prerequisite: teacher_checkpoint_path (run train-teacher first)");
  const auto model = detector::DetectorModel::load(config.detector_model_path);
  auto ck = agents::load_checkpoint(config.teacher_checkpoint_path, config.ppo);
  require(ck.agent.input_dim == 6 + config.n_delays,
          "teacher checkpoint input dimension does not match n_delays");

  const auto fn = env::make_detector_fn(model);
  reciprocal::EnvFactory factory = [&](int episode) {
    return make_env(config, make_trace(config, seed, static_cast<std::uint64_t>(episode)),
                    fn, Rng::mix(seed, 0x570d + episode));
  };

  Rng rng(seed);
  auto result = reciprocal::train_student(std::move(ck.agent), config.n_delays_partial,
                                          factory, config.reciprocal, config.ppo,
                                          config.episodes, rng);

  const std::string ck_path = join(out_dir, "student_checkpoint.json");
  agents::save_checkpoint(result.pair.student, "student", config.n_delays_partial, ck_path,
                          config::config_hash(config));

  const std::string curve_path = join(out_dir, "student_curves.csv");
  CsvWriter w(curve_path, {"episode", "agent", "asr", "avg_bandwidth_mbps",
                           "attack_cost_mbit", "trigger_rate", "mean_reward"});
  for (const auto& row : result.curves) {
    for (const auto& [name, m] :
         {std::pair<std::string, const env::EpisodeMetrics&>{"teacher", row.teacher},
          std::pair<std::string, const env::EpisodeMetrics&>{"student", row.student}}) {
      w.field(row.episode)
          .field(name)
          .field(m.attack_success_rate)
          .field(m.avg_bandwidth)
          .field(m.attack_cost)
          .field(m.trigger_rate)
          .field(m.total_reward / config.episode_slots);
      w.end_row();
    }
  }

  std::vector<std::string> outputs{ck_path, curve_path};
  finish_manifest("train-student", config, seed, out_dir, outputs);
  return outputs;
}

std::vector<std::string> cmd_detector_matrix(const ExperimentConfig& config,
                                             std::uint64_t seed,
                                             const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> outputs;

  const auto kind = detector::model_kind_from_string(config.detector_kind);

  // detector trained on periodic attacks
  std::vector<detector::LabeledExample> train, holdout;
  auto ldos_corpus = build_ldos_corpus(config, seed);
  split_corpus(ldos_corpus, &train, &holdout);
  auto ldos_model = detector::DetectorModel::train(train, kind, config.detector_hp);

  // agent trained against it supplies the adaptive-attack corpus
  const auto vs_ldos = train_teacher_agent(config, ldos_model, config.episodes,
                                           Rng::mix(seed, 0x1D05));

  auto agent_corpus = build_agent_corpus(config, vs_ldos.agent, Rng::mix(seed, 0xADA));
  split_corpus(agent_corpus, &train, &holdout);
  auto adados_model = detector::DetectorModel::train(train, kind, config.detector_hp);

  auto mixed_corpus = agent_corpus;
  mixed_corpus.insert(mixed_corpus.end(), ldos_corpus.begin(), ldos_corpus.end());
  split_corpus(mixed_corpus, &train, &holdout);
  auto mixed_model = detector::DetectorModel::train(train, kind, config.detector_hp);

  const std::string curves_path = join(out_dir, "matrix_curves.csv");
  CsvWriter w(curves_path, {"detector", "episode", "asr", "avg_bandwidth_mbps",
                            "attack_cost_mbit", "trigger_rate", "mean_reward"});

  auto emit = [&](const std::string& name, const std::vector<env::EpisodeMetrics>& curve) {
    for (std::size_t ep = 0; ep < curve.size(); ++ep) {
      const auto& m = curve[ep];
      w.field(name)
          .field(ep)
          .field(m.attack_success_rate)
          .field(m.avg_bandwidth)
          .field(m.attack_cost)
          .field(m.trigger_rate)
          .field(m.total_reward / config.episode_slots);
      w.end_row();
    }
  };

  emit("ldos", vs_ldos.curve);
  const auto vs_adados = train_teacher_agent(config, adados_model, config.episodes,
                                             Rng::mix(seed, 0x2D05));
  emit("adados", vs_adados.curve);
  const auto vs_mixed = train_teacher_agent(config, mixed_model, config.episodes,
                                            Rng::mix(seed, 0x3D05));
  emit("mixed", vs_mixed.curve);

  const std::string ldos_path = join(out_dir, "detector_ldos.json");
  const std::string adados_path = join(out_dir, "detector_adados.json");
  const std::string mixed_path = join(out_dir, "detector_mixed.json");
  ldos_model.save(ldos_path);
  adados_model.save(adados_path);
  mixed_model.save(mixed_path);

  outputs = {curves_path, ldos_path, adados_path, mixed_path};
  finish_manifest("detector-matrix", config, seed, out_dir, outputs);
  return outputs;
}

std::vector<std::string> cmd_noise_sweep(const ExperimentConfig& config, std::uint64_t seed,
                                         const std::string& out_dir) {
  fs::create_directories(out_dir);
  require(!config.detector_model_path.empty(),
          "missing prerequisite: detector_model_path (run train-detector first)");
  require(!config.teacher_checkpoint_path.empty(),
          "missing prerequisite: teacher_checkpoint_path (run train-teacher first)");
  const auto model = detector::DetectorModel::load(config.detector_model_path);
  const auto ck = agents::load_checkpoint(config.teacher_checkpoint_path, config.ppo);
  const bool partial = ck.kind == "student";

  const std::string path = join(out_dir, "noise_sweep.csv");
  CsvWriter w(path, {"sigma_s", "episodes", "asr_mean", "asr_std",
                     "avg_bandwidth_mean_mbps", "attack_cost_mean_mbit",
                     "trigger_rate_mean"});

  for (double sigma : config.resolved_noise_sigmas()) {
    ExperimentConfig swept = config;
    swept.obs_noise_sigma = sigma;
    // the same agent, the same worlds, only the observation noise varies
    const auto result = eval_agent(swept, ck.agent, partial, ck.n_delays, model,
                                   config.eval_episodes, seed);
    w.field(sigma)
        .field(config.eval_episodes)
        .field(result.asr_mean)
        .field(result.asr_std)
        .field(result.bandwidth_mean)
        .field(result.cost_mean)
        .field(result.trigger_mean);
    w.end_row();
  }

  std::vector<std::string> outputs{path};
  finish_manifest("noise-sweep", config, seed, out_dir, outputs);
  return outputs;
}

std::vector<std::string> cmd_eval(const ExperimentConfig& config, std::uint64_t seed,
                                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  require(!config.detector_model_path.empty(),
          "missing prerequisite: detector_model_path (run train-detector first)");
  require(!config.teacher_checkpoint_path.empty(),
          "missing prerequisite: teacher_checkpoint_path (point it at any checkpoint "
          "to evaluate)");
  const auto model = detector::DetectorModel::load(config.detector_model_path);
  const auto ck = agents::load_checkpoint(config.teacher_checkpoint_path, config.ppo);
  const bool partial = ck.kind == "student";

  const std::string ep_path = join(out_dir, "eval_episodes.csv");
  const std::string sum_path = join(out_dir, "eval_summary.csv");
  CsvWriter we(ep_path, {"seed", "episode", "asr", "avg_bandwidth_mbps",
                         "attack_cost_mbit", "trigger_rate", "avg_duration_s",
                         "avg_rate_mbps", "mean_reward", "zero_attacks"});
  CsvWriter ws(sum_path, {"seed", "episodes", "asr_mean", "asr_std",
                          "avg_bandwidth_mean_mbps", "avg_bandwidth_std_mbps",
                          "attack_cost_mean_mbit", "trigger_rate_mean"});

  std::vector<double> all_asr, all_bw;
  double all_cost = 0.0, all_trigger = 0.0;
  for (std::uint64_t s : config.seeds) {
    const auto result = eval_agent(config, ck.agent, partial, ck.n_delays, model,
                                   config.eval_episodes, Rng::mix(seed, s));
    for (std::size_t ep = 0; ep < result.episodes.size(); ++ep) {
      const auto& m = result.episodes[ep];
      we.field(std::to_string(s))
          .field(ep)
          .field(m.attack_success_rate)
          .field(m.avg_bandwidth)
          .field(m.attack_cost)
          .field(m.trigger_rate)
          .field(m.avg_duration)
          .field(m.avg_rate)
          .field(m.total_reward / config.episode_slots)
          .field(m.zero_attacks ? 1 : 0);
      we.end_row();
      all_asr.push_back(m.attack_success_rate);
      all_bw.push_back(m.avg_bandwidth);
    }
    all_cost += result.cost_mean;
    all_trigger += result.trigger_mean;
    ws.field(std::to_string(s))
        .field(config.eval_episodes)
        .field(result.asr_mean)
        .field(result.asr_std)
        .field(result.bandwidth_mean)
        .field(result.bandwidth_std)
        .field(result.cost_mean)
        .field(result.trigger_mean);
    ws.end_row();
  }
  // step-level log of the first episode of the first seed
  {
    Rng act_rng = Rng(Rng::mix(seed, config.seeds.front())).split("eval-act");
    auto env = make_env(config, make_trace(config, Rng::mix(seed, config.seeds.front()), 0),
                        env::make_detector_fn(model), Rng::mix(Rng::mix(seed, config.seeds.front()), 0x3AA1));
    env.reset();
    while (!env.done()) {
      std::vector<double> obs = partial ? env.vectorize_partial(env.observe_partial(
                                              ck.n_delays, config.obs_noise_sigma))
                                        : env.vectorize_state();
      env.step(ck.agent.sample(obs, act_rng).action);
    }
    env::write_records_jsonl(env.records(), join(out_dir, "episode0.jsonl"));
  }

  const auto a = mean_std(all_asr);
  const auto b = mean_std(all_bw);
  ws.field(std::string("all"))
      .field(static_cast<int>(all_asr.size()))
      .field(a.mean)
      .field(a.std)
      .field(b.mean)
      .field(b.std)
      .field(all_cost / static_cast<double>(config.seeds.size()))
      .field(all_trigger / static_cast<double>(config.seeds.size()));
  ws.end_row();

  std::vector<std::string> outputs{ep_path, sum_path, join(out_dir, "episode0.jsonl")};
  finish_manifest("eval", config, seed, out_dir, outputs);
  return outputs;
}

}  // namespace adados::exp
