#pragma once

// Fluid-flow simulation of a single bottleneck link. Background traffic is
// replayed from a trace; attack traffic is injected as rate bursts. The
// link serves offered load up to capacity, queues the excess up to a limit,
// and drops the rest. Delay is propagation floor plus queueing.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adados/rng.hpp"

namespace adados::netsim {

struct LinkProfile {
  double capacity_bmax = 10.0;  // Mbps
  double base_delay = 0.01;     // seconds, per hop
  double queue_limit = 5.0;     // Mbit
  int hop_count = 2;            // scales the propagation floor

  // propagation delay of the whole path
  double floor_delay() const { return base_delay * hop_count; }

  void validate() const;
};

struct TracePoint {
  double tcp_mbit = 0.0;
  double udp_mbit = 0.0;
};

struct BackgroundTrace {
  double interval = 0.5;  // seconds between samples
  std::vector<TracePoint> samples;

  void validate() const;
  // offered load for the interval starting at time t, wrapping when the
  // trace is shorter than the run
  TracePoint at_time(double t) const;
};

struct AttackBurst {
  double start = 0.0;     // seconds
  double duration = 0.0;  // seconds
  double rate = 0.0;      // Mbps
};

struct TrafficSample {
  double t = 0.0;      // end of the controller interval (seconds)
  double v_tcp = 0.0;  // Mbit carried in the interval
  double v_udp = 0.0;  // Mbit carried in the interval
  double b = 0.0;      // available bandwidth (Mbps)
  double tau = 0.0;    // link delay (seconds)
};

struct SimClock {
  double now = 0.0;
  double controller_interval = 0.5;
  double decision_slot = 1.0;

  void validate() const;
  int samples_per_slot() const;
};

// One fluid step of length dt. Returns the new queue level and the traffic
// sample observed over the interval. Drops are charged to the recorded TCP
// volume first (the responsive protocol is the one that loses under
// congestion).
struct StepResult {
  double queue = 0.0;
  TrafficSample sample;
  double injected_mbit = 0.0;
  double served_mbit = 0.0;
  double dropped_mbit = 0.0;
};

StepResult step_link(const LinkProfile& profile, double queue, double offered_tcp_mbps,
                     double offered_udp_mbps, double dt);

// Multiplicative congestion response of the background TCP share.
// congestion is a [0,1] fraction (queue fill in this artifact).
double tcp_backoff(double offered_tcp_mbps, double congestion, double beta = 0.8);

// Delay measurement with optional Gaussian noise, clamped at the
// propagation floor. sigma = 0 reads exactly and consumes no randomness.
double measure_delay(const TrafficSample& sample, double noise_sigma, double floor_delay,
                     Rng& rng);

// Stateful simulator used by run_window and the RL environment.
class LinkSimulator {
 public:
  LinkSimulator(LinkProfile profile, BackgroundTrace trace, double tcp_backoff_beta = 0.8);

  // advance one controller interval ending at now + dt
  TrafficSample advance(double dt, std::span<const AttackBurst> bursts);

  double now() const { return now_; }
  double queue() const { return queue_; }
  const LinkProfile& profile() const { return profile_; }
  const BackgroundTrace& trace() const { return trace_; }

  // conservation accounting over the lifetime of the simulator (Mbit)
  double total_injected() const { return total_injected_; }
  double total_served() const { return total_served_; }
  double total_dropped() const { return total_dropped_; }

 private:
  LinkProfile profile_;
  BackgroundTrace trace_;
  double tcp_backoff_beta_;
  double now_ = 0.0;
  double queue_ = 0.0;
  double total_injected_ = 0.0;
  double total_served_ = 0.0;
  double total_dropped_ = 0.0;
};

// Simulate horizon seconds and return one sample per controller interval.
// horizon must be a whole number of controller intervals.
std::vector<TrafficSample> run_window(const BackgroundTrace& trace,
                                      std::span<const AttackBurst> bursts,
                                      const SimClock& clock, double horizon,
                                      const LinkProfile& profile,
                                      double tcp_backoff_beta = 0.8);

// --- trace I/O -------------------------------------------------------------
// CSV schema: header "t_s,tcp_mbit,udp_mbit", one row per interval.

BackgroundTrace load_trace_csv(const std::string& path);
void save_trace_csv(const BackgroundTrace& trace, const std::string& path);

struct SyntheticTraceSpec {
  int intervals = 400;
  double interval = 0.5;        // seconds
  double mean_tcp_mbps = 3.6;   // offered TCP rate
  double mean_udp_mbps = 0.9;   // offered UDP rate
  double burstiness = 0.15;     // lognormal sigma of the AR(1) modulation
  double ar_coeff = 0.7;        // AR(1) persistence
  double ramp_amplitude = 0.1;  // relative diurnal swing
  double ramp_period = 120.0;   // seconds
};

BackgroundTrace synth_trace(const SyntheticTraceSpec& spec, std::uint64_t seed);

}  // namespace adados::netsim
