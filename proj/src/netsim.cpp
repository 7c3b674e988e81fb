#include "adados/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "adados/csv.hpp"

namespace adados::netsim {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void LinkProfile::validate() const {
  require(finite(capacity_bmax) && capacity_bmax > 0, "link capacity must be > 0");
  require(finite(base_delay) && base_delay >= 0, "base delay must be >= 0");
  require(finite(queue_limit) && queue_limit > 0, "queue limit must be > 0");
  require(hop_count >= 1, "hop count must be >= 1");
}

void BackgroundTrace::validate() const {
  require(finite(interval) && interval > 0, "trace interval must be > 0");
  require(!samples.empty(), "trace must not be empty");
  for (const auto& s : samples) {
    require(finite(s.tcp_mbit) && s.tcp_mbit >= 0, "trace tcp volume must be >= 0");
    require(finite(s.udp_mbit) && s.udp_mbit >= 0, "trace udp volume must be >= 0");
  }
}

TracePoint BackgroundTrace::at_time(double t) const {
  const auto n = static_cast<std::size_t>(samples.size());
  auto idx = static_cast<std::size_t>(std::floor(t / interval + 1e-9)) % n;
  return samples[idx];
}

void SimClock::validate() const {
  require(controller_interval > 0, "controller interval must be > 0");
  require(decision_slot > 0, "decision slot must be > 0");
  const double ratio = decision_slot / controller_interval;
  require(std::abs(ratio - std::round(ratio)) < 1e-9,
          "controller interval must divide the decision slot");
}

int SimClock::samples_per_slot() const {
  return static_cast<int>(std::round(decision_slot / controller_interval));
}

StepResult step_link(const LinkProfile& profile, double queue, double offered_tcp_mbps,
                     double offered_udp_mbps, double dt) {
  require(finite(queue) && finite(offered_tcp_mbps) && finite(offered_udp_mbps) && finite(dt),
          "step_link inputs must be finite");
  require(dt > 0, "dt must be > 0");
  require(offered_tcp_mbps >= 0 && offered_udp_mbps >= 0, "offered load must be >= 0");
  require(queue >= 0 && queue <= profile.queue_limit + 1e-9, "queue out of range");

  const double cap = profile.capacity_bmax;
  const double offered = offered_tcp_mbps + offered_udp_mbps;

  const double raw = queue + (offered - cap) * dt;
  const double next_queue = std::clamp(raw, 0.0, profile.queue_limit);

  const double served_rate = std::min(offered + queue / dt, cap);

  StepResult r;
  r.queue = next_queue;
  r.injected_mbit = offered * dt;
  r.served_mbit = served_rate * dt;
  r.dropped_mbit = std::max(0.0, r.injected_mbit - r.served_mbit - (next_queue - queue));

  double v_tcp = offered_tcp_mbps * dt;
  double v_udp = offered_udp_mbps * dt;
  const double tcp_loss = std::min(v_tcp, r.dropped_mbit);
  v_tcp -= tcp_loss;
  v_udp -= std::min(v_udp, r.dropped_mbit - tcp_loss);

  r.sample.v_tcp = v_tcp;
  r.sample.v_udp = v_udp;
  r.sample.b = std::max(0.0, cap - served_rate);
  r.sample.tau = profile.floor_delay() + next_queue / cap;
  return r;
}

double tcp_backoff(double offered_tcp_mbps, double congestion, double beta) {
  require(finite(congestion) && congestion >= 0 && congestion <= 1,
          "congestion must be in [0,1]");
  require(beta >= 0 && beta <= 1, "backoff beta must be in [0,1]");
  return offered_tcp_mbps * (1.0 - beta * congestion);
}

double measure_delay(const TrafficSample& sample, double noise_sigma, double floor_delay,
                     Rng& rng) {
  require(finite(noise_sigma) && noise_sigma >= 0, "noise sigma must be >= 0");
  if (noise_sigma == 0.0) return sample.tau;
  return std::max(floor_delay, sample.tau + rng.gaussian(0.0, noise_sigma));
}

LinkSimulator::LinkSimulator(LinkProfile profile, BackgroundTrace trace, double tcp_backoff_beta)
    : profile_(profile), trace_(std::move(trace)), tcp_backoff_beta_(tcp_backoff_beta) {
  profile_.validate();
  trace_.validate();
}

TrafficSample LinkSimulator::advance(double dt, std::span<const AttackBurst> bursts) {
  const TracePoint bg = trace_.at_time(now_);
  const double bg_tcp_rate = bg.tcp_mbit / trace_.interval;
  const double bg_udp_rate = bg.udp_mbit / trace_.interval;

  // attack volume overlapping [now, now+dt), spread over the interval
  double attack_mbit = 0.0;
  for (const auto& burst : bursts) {
    const double lo = std::max(now_, burst.start);
    const double hi = std::min(now_ + dt, burst.start + burst.duration);
    if (hi > lo) attack_mbit += (hi - lo) * burst.rate;
  }
  const double attack_rate = attack_mbit / dt;

  const double congestion = std::clamp(queue_ / profile_.queue_limit, 0.0, 1.0);
  const double tcp_rate = tcp_backoff(bg_tcp_rate, congestion, tcp_backoff_beta_);

  StepResult res = step_link(profile_, queue_, tcp_rate, bg_udp_rate + attack_rate, dt);
  queue_ = res.queue;
  now_ += dt;
  total_injected_ += res.injected_mbit;
  total_served_ += res.served_mbit;
  total_dropped_ += res.dropped_mbit;

  res.sample.t = now_;
  return res.sample;
}

std::vector<TrafficSample> run_window(const BackgroundTrace& trace,
                                      std::span<const AttackBurst> bursts,
                                      const SimClock& clock, double horizon,
                                      const LinkProfile& profile, double tcp_backoff_beta) {
  clock.validate();
  const double steps_f = horizon / clock.controller_interval;
  require(std::abs(steps_f - std::round(steps_f)) < 1e-9,
          "horizon must be a multiple of the controller interval");
  const auto steps = static_cast<std::size_t>(std::round(steps_f));

  LinkSimulator sim(profile, trace, tcp_backoff_beta);
  std::vector<TrafficSample> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    out.push_back(sim.advance(clock.controller_interval, bursts));
  }
  return out;
}

BackgroundTrace load_trace_csv(const std::string& path) {
  auto rows = read_csv(path);
  require(!rows.empty(), "trace file is empty");
  require(rows[0].size() == 3 && rows[0][0] == "t_s" && rows[0][1] == "tcp_mbit" &&
              rows[0][2] == "udp_mbit",
          "trace header must be t_s,tcp_mbit,udp_mbit");

  BackgroundTrace trace;
  trace.samples.reserve(rows.size() - 1);
  double prev_t = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    require(rows[i].size() == 3, "trace row must have 3 fields");
    const double t = std::stod(rows[i][0]);
    if (i == 2) trace.interval = t - prev_t;
    prev_t = t;
    trace.samples.push_back({std::stod(rows[i][1]), std::stod(rows[i][2])});
  }
  if (trace.samples.size() == 1) trace.interval = 0.5;
  trace.validate();
  return trace;
}

void save_trace_csv(const BackgroundTrace& trace, const std::string& path) {
  CsvWriter w(path, {"t_s", "tcp_mbit", "udp_mbit"});
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    w.field(static_cast<double>(i) * trace.interval)
        .field(trace.samples[i].tcp_mbit)
        .field(trace.samples[i].udp_mbit);
    w.end_row();
  }
}

BackgroundTrace synth_trace(const SyntheticTraceSpec& spec, std::uint64_t seed) {
  require(spec.intervals > 0, "trace length must be > 0");
  require(spec.interval > 0, "trace interval must be > 0");
  require(spec.mean_tcp_mbps >= 0 && spec.mean_udp_mbps >= 0, "mean load must be >= 0");
  require(spec.burstiness >= 0, "burstiness must be >= 0");
  require(spec.ar_coeff >= 0 && spec.ar_coeff < 1, "AR coefficient must be in [0,1)");

  Rng rng(seed);
  BackgroundTrace trace;
  trace.interval = spec.interval;
  trace.samples.reserve(spec.intervals);

  // stationary AR(1) in log space, mean-corrected so E[modulation] = 1
  const double sigma = spec.burstiness;
  const double innov = sigma * std::sqrt(1.0 - spec.ar_coeff * spec.ar_coeff);
  double z_tcp = sigma > 0 ? rng.gaussian(0.0, sigma) : 0.0;
  double z_udp = sigma > 0 ? rng.gaussian(0.0, sigma) : 0.0;

  for (int i = 0; i < spec.intervals; ++i) {
    const double t = i * spec.interval;
    const double ramp =
        1.0 + spec.ramp_amplitude * std::sin(2.0 * M_PI * t / spec.ramp_period);
    const double mod_tcp = std::exp(z_tcp - 0.5 * sigma * sigma);
    const double mod_udp = std::exp(z_udp - 0.5 * sigma * sigma);
    trace.samples.push_back({spec.mean_tcp_mbps * ramp * mod_tcp * spec.interval,
                             spec.mean_udp_mbps * ramp * mod_udp * spec.interval});
    if (sigma > 0) {
      z_tcp = spec.ar_coeff * z_tcp + rng.gaussian(0.0, innov);
      z_udp = spec.ar_coeff * z_udp + rng.gaussian(0.0, innov);
    }
  }
  return trace;
}

}  // namespace adados::netsim
