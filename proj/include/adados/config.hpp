#pragma once

// Experiment configuration: one JSON document drives every subcommand.
// A scenario preset fills in the link profile, traffic scale, and baseline
// grid; any explicitly given key overrides the preset.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adados/agents.hpp"
#include "adados/detector.hpp"
#include "adados/env.hpp"
#include "adados/netsim.hpp"
#include "adados/reciprocal.hpp"

namespace adados::config {

inline constexpr const char* kToolVersion = "0.1.0";

struct ExperimentConfig {
  std::string scenario = "simple";

  netsim::LinkProfile link;
  std::string trace_path;  // empty -> synthetic
  netsim::SyntheticTraceSpec trace_spec;
  netsim::SimClock clock;
  env::RewardParams reward;

  int episode_slots = 100;
  int window_len = 10;
  int n_delays = 10;
  int n_delays_partial = 3;
  double reward_delay = 0.5;
  double obs_noise_sigma = 0.0;
  double tcp_backoff_beta = 0.8;
  double peak_multiplier = 2.0;
  double rate_max = 30.0;

  agents::PpoConfig ppo;
  reciprocal::ReciprocalParams reciprocal;

  std::string detector_kind = "gbdt";
  std::string detector_source = "ldos";  // ldos | adados | mixed
  detector::Hyperparams detector_hp;

  std::vector<double> noise_sigmas;  // empty -> multiples of the floor delay
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int episodes = 800;
  int eval_episodes = 20;
  int benign_runs = 9;

  std::vector<agents::LdosSchedule> ldos_grid = agents::default_ldos_grid();
  std::vector<agents::LdosSchedule> ldos_double_grid;  // filled by defaults
  bool baseline_include_variants = true;

  std::string detector_model_path;
  std::string teacher_checkpoint_path;

  env::EnvConfig env_config() const;
  std::vector<double> resolved_noise_sigmas() const;

  void validate() const;
};

ExperimentConfig scenario_preset(const std::string& name);

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& config);

std::string config_hash(const ExperimentConfig& config);

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::string config_hash;
  std::vector<std::string> outputs;
};

void write_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_manifest(const std::string& path);

}  // namespace adados::config
