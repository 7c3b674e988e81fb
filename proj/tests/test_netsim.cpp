#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "adados/netsim.hpp"

using namespace adados;
using namespace adados::netsim;

namespace {

BackgroundTrace flat_trace(double tcp_mbps, double udp_mbps, int n = 400,
                           double interval = 0.5) {
  BackgroundTrace t;
  t.interval = interval;
  t.samples.assign(n, {tcp_mbps * interval, udp_mbps * interval});
  return t;
}

LinkProfile simple_link() {
  LinkProfile p;
  p.capacity_bmax = 10.0;
  p.base_delay = 0.01;
  p.queue_limit = 5.0;
  p.hop_count = 2;
  return p;
}

}  // namespace

TEST_CASE("step_link fluid balance") {
  LinkProfile p = simple_link();

  SUBCASE("overload builds queue") {
    auto r = step_link(p, 0.0, 10.0, 5.0, 1.0);
    CHECK(r.queue == doctest::Approx(5.0));
    CHECK(r.sample.tau == doctest::Approx(p.floor_delay() + 0.5));
  }

  SUBCASE("idle link") {
    auto r = step_link(p, 0.0, 0.0, 0.0, 1.0);
    CHECK(r.queue == 0.0);
    CHECK(r.sample.b == doctest::Approx(10.0));
    CHECK(r.sample.tau == doctest::Approx(p.floor_delay()));
  }

  SUBCASE("offered equals capacity holds the queue") {
    auto r = step_link(p, 4.0, 5.0, 5.0, 1.0);
    CHECK(r.queue == doctest::Approx(4.0));
    CHECK(r.sample.tau == doctest::Approx(p.floor_delay() + 0.4));
    CHECK(r.sample.b == doctest::Approx(0.0));
  }

  SUBCASE("drops reduce recorded tcp volume first") {
    auto r = step_link(p, 4.0, 12.0, 8.0, 1.0);
    // raw queue 4 + 10 = 14, clamped to 5; served 10; dropped 20 - 10 - 1 = 9
    CHECK(r.queue == doctest::Approx(5.0));
    CHECK(r.dropped_mbit == doctest::Approx(9.0));
    CHECK(r.sample.v_tcp == doctest::Approx(3.0));
    CHECK(r.sample.v_udp == doctest::Approx(8.0));
  }

  SUBCASE("non-finite inputs rejected") {
    CHECK_THROWS_AS(step_link(p, 0.0, std::nan(""), 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(step_link(p, 0.0, 1.0, 0.0, 0.0), std::invalid_argument);
  }
}

TEST_CASE("tcp_backoff") {
  CHECK(tcp_backoff(10.0, 0.0) == doctest::Approx(10.0));
  CHECK(tcp_backoff(10.0, 1.0, 0.8) == doctest::Approx(2.0));
  CHECK(tcp_backoff(10.0, 0.5, 0.8) == doctest::Approx(6.0));

  // monotone non-increasing in congestion
  double prev = tcp_backoff(10.0, 0.0);
  for (int i = 1; i <= 10; ++i) {
    const double cur = tcp_backoff(10.0, i / 10.0);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  CHECK_THROWS_AS(tcp_backoff(10.0, 1.5), std::invalid_argument);
}

TEST_CASE("run_window basics") {
  LinkProfile p = simple_link();
  SimClock clock;

  SUBCASE("no attack, flat sub-capacity trace: constant tau and b") {
    auto samples = run_window(flat_trace(3.6, 0.9), {}, clock, 100.0, p);
    CHECK(samples.size() == 200);
    for (const auto& s : samples) {
      CHECK(s.tau == doctest::Approx(p.floor_delay()));
      CHECK(s.b == doctest::Approx(10.0 - 4.5));
    }
  }

  SUBCASE("saturating burst congests the link") {
    std::vector<AttackBurst> bursts{{10.0, 5.0, 20.0}};
    auto samples = run_window(flat_trace(3.6, 0.9), bursts, clock, 30.0, p);
    bool saw_congestion = false;
    for (const auto& s : samples) {
      if (s.t > 10.5 && s.t <= 15.0) {
        saw_congestion = true;
        CHECK(s.b == doctest::Approx(0.0));
        CHECK(s.tau > p.floor_delay());
      }
    }
    CHECK(saw_congestion);
  }

  SUBCASE("horizon must align with the controller interval") {
    CHECK_THROWS_AS(run_window(flat_trace(1, 1), {}, clock, 100.3, p),
                    std::invalid_argument);
  }

  SUBCASE("short trace wraps around") {
    auto trace = flat_trace(3.6, 0.9, 10);
    auto samples = run_window(trace, {}, clock, 100.0, p);
    CHECK(samples.size() == 200);
    CHECK(samples.back().b == doctest::Approx(5.5));
  }
}

TEST_CASE("run_window replay determinism") {
  LinkProfile p = simple_link();
  SimClock clock;
  SyntheticTraceSpec spec;
  auto trace = synth_trace(spec, 42);
  std::vector<AttackBurst> bursts{{3.0, 0.5, 12.0}, {7.0, 1.0, 8.0}};

  auto a = run_window(trace, bursts, clock, 50.0, p);
  auto b = run_window(trace, bursts, clock, 50.0, p);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].tau == b[i].tau);  // bit-identical
    CHECK(a[i].b == b[i].b);
    CHECK(a[i].v_tcp == b[i].v_tcp);
    CHECK(a[i].v_udp == b[i].v_udp);
  }
}

TEST_CASE("queue bounds, bandwidth range, and bit conservation over random loads") {
  LinkProfile p = simple_link();
  Rng rng(7);

  for (int trial = 0; trial < 20; ++trial) {
    BackgroundTrace trace;
    trace.interval = 0.5;
    for (int i = 0; i < 100; ++i) {
      trace.samples.push_back({rng.uniform(0.0, 8.0), rng.uniform(0.0, 8.0)});
    }
    LinkSimulator sim(p, trace, 0.8);
    double prev_queue = sim.queue();
    double queue_delta = 0.0;
    for (int i = 0; i < 100; ++i) {
      auto s = sim.advance(0.5, {});
      CHECK(sim.queue() >= 0.0);
      CHECK(sim.queue() <= p.queue_limit + 1e-12);
      CHECK(s.b >= 0.0);
      CHECK(s.b <= p.capacity_bmax + 1e-12);
      queue_delta += sim.queue() - prev_queue;
      prev_queue = sim.queue();
    }
    CHECK(sim.total_injected() - sim.total_served() - sim.total_dropped() ==
          doctest::Approx(queue_delta).epsilon(1e-9));
  }
}

TEST_CASE("measure_delay") {
  TrafficSample s;
  s.tau = 0.3;

  SUBCASE("sigma zero reads exactly") {
    Rng rng(1);
    CHECK(measure_delay(s, 0.0, 0.02, rng) == 0.3);
  }

  SUBCASE("fixed seed reproduces the sequence") {
    Rng r1(5), r2(5);
    for (int i = 0; i < 32; ++i) {
      CHECK(measure_delay(s, 0.05, 0.02, r1) == measure_delay(s, 0.05, 0.02, r2));
    }
  }

  SUBCASE("clamped at the floor delay") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
      CHECK(measure_delay(s, 5.0, 0.02, rng) >= 0.02);
    }
  }

  SUBCASE("law of large numbers") {
    Rng rng(11);
    const double sigma = 0.01;
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += measure_delay(s, sigma, 0.0, rng);
    const double mean = sum / n;
    CHECK(std::abs(mean - s.tau) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("trace csv round trip and synthetic generation") {
  SyntheticTraceSpec spec;
  spec.intervals = 50;
  auto trace = synth_trace(spec, 99);
  REQUIRE(trace.samples.size() == 50);

  const std::string path = "test_trace_tmp.csv";
  save_trace_csv(trace, path);
  auto loaded = load_trace_csv(path);
  REQUIRE(loaded.samples.size() == trace.samples.size());
  CHECK(loaded.interval == doctest::Approx(trace.interval));
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    CHECK(loaded.samples[i].tcp_mbit == trace.samples[i].tcp_mbit);
    CHECK(loaded.samples[i].udp_mbit == trace.samples[i].udp_mbit);
  }
  std::remove(path.c_str());

  SUBCASE("zero load spec gives all-zero volumes") {
    SyntheticTraceSpec zero;
    zero.mean_tcp_mbps = 0.0;
    zero.mean_udp_mbps = 0.0;
    zero.intervals = 20;
    auto z = synth_trace(zero, 1);
    for (const auto& s : z.samples) {
      CHECK(s.tcp_mbit == 0.0);
      CHECK(s.udp_mbit == 0.0);
    }
  }
}
