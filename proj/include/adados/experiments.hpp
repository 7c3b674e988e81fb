#pragma once

// Experiment drivers behind the CLI subcommands. Every driver is a pure
// function of (config, seed) and writes its CSV/JSON artifacts plus a run
// manifest into out_dir, so re-running a manifest reproduces the metrics
// byte for byte.

#include <cstdint>
#include <string>
#include <vector>

#include "adados/config.hpp"
#include "adados/detector.hpp"
#include "adados/env.hpp"
#include "adados/reciprocal.hpp"

namespace adados::exp {

using config::ExperimentConfig;

// background trace for one run: the configured file, or a synthetic trace
// derived from (seed, run index)
netsim::BackgroundTrace make_trace(const ExperimentConfig& config, std::uint64_t seed,
                                   std::uint64_t run);

env::AttackEnv make_env(const ExperimentConfig& config, netsim::BackgroundTrace trace,
                        env::DetectorFn detector, std::uint64_t seed);

// labelled corpora -----------------------------------------------------------

// benign + periodic-schedule windows
std::vector<detector::LabeledExample> build_ldos_corpus(const ExperimentConfig& config,
                                                        std::uint64_t seed);

// benign + windows generated by replaying an agent checkpoint
std::vector<detector::LabeledExample> build_agent_corpus(const ExperimentConfig& config,
                                                         const agents::TwoStageAgent& agent,
                                                         std::uint64_t seed);

// deterministic 80/20 split by index
void split_corpus(const std::vector<detector::LabeledExample>& corpus,
                  std::vector<detector::LabeledExample>* train,
                  std::vector<detector::LabeledExample>* holdout);

// evaluation helpers ---------------------------------------------------------

struct AgentEvalResult {
  std::vector<env::EpisodeMetrics> episodes;
  double asr_mean = 0.0, asr_std = 0.0;
  double bandwidth_mean = 0.0, bandwidth_std = 0.0;
  double cost_mean = 0.0;
  double trigger_mean = 0.0;
  double reward_mean = 0.0;
};

// run a trained agent for a number of episodes; partial = act from the
// delay-window observation instead of the full state
AgentEvalResult eval_agent(const ExperimentConfig& config, const agents::TwoStageAgent& agent,
                           bool partial, int n_partial, const detector::DetectorModel& model,
                           int episodes, std::uint64_t seed);

struct BaselineRow {
  int no = 0;
  std::string type;  // ldos | double-ldos | rand-ldos
  agents::LdosSchedule schedule;
  double trigger_rate = 1.0;  // per period
  double asr_mean = 0.0, asr_std = 0.0;
  double bandwidth_mean = 0.0, bandwidth_std = 0.0;
  double cost_per_cycle = 0.0;  // Mbit
};

BaselineRow eval_schedule(const ExperimentConfig& config, const agents::LdosSchedule& schedule,
                          const std::string& type, const detector::DetectorModel& model,
                          int episodes, std::uint64_t seed);

// teacher training ------------------------------------------------------------

struct TeacherTrainResult {
  agents::TwoStageAgent agent;
  std::vector<env::EpisodeMetrics> curve;  // one entry per training episode
};

TeacherTrainResult train_teacher_agent(const ExperimentConfig& config,
                                       const detector::DetectorModel& model,
                                       int episodes, std::uint64_t seed);

// command drivers --------------------------------------------------------------
// Each returns the paths it wrote (first entry is the primary artifact).

std::vector<std::string> cmd_gen_trace(const ExperimentConfig& config, std::uint64_t seed,
                                       const std::string& out_dir);
std::vector<std::string> cmd_train_detector(const ExperimentConfig& config, std::uint64_t seed,
                                            const std::string& out_dir);
std::vector<std::string> cmd_baseline(const ExperimentConfig& config, std::uint64_t seed,
                                      const std::string& out_dir);
std::vector<std::string> cmd_train_teacher(const ExperimentConfig& config, std::uint64_t seed,
                                           const std::string& out_dir);
std::vector<std::string> cmd_train_student(const ExperimentConfig& config, std::uint64_t seed,
                                           const std::string& out_dir);
std::vector<std::string> cmd_detector_matrix(const ExperimentConfig& config, std::uint64_t seed,
                                             const std::string& out_dir);
std::vector<std::string> cmd_noise_sweep(const ExperimentConfig& config, std::uint64_t seed,
                                         const std::string& out_dir);
std::vector<std::string> cmd_eval(const ExperimentConfig& config, std::uint64_t seed,
                                  const std::string& out_dir);

}  // namespace adados::exp
