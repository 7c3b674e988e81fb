#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "adados/env.hpp"

using namespace adados;
using namespace adados::env;

namespace {

RewardParams table_params() {
  RewardParams p;
  p.b_max = 10.0;
  p.b_threshold = 1.0;
  p.cost_ceiling = 10.0;
  return p;
}

EnvConfig small_config() {
  EnvConfig c;
  c.link.capacity_bmax = 10.0;
  c.link.base_delay = 0.01;
  c.link.queue_limit = 5.0;
  c.link.hop_count = 2;
  c.reward = table_params();
  c.episode_slots = 100;
  return c;
}

netsim::BackgroundTrace flat_trace(double tcp_mbps, double udp_mbps) {
  netsim::BackgroundTrace t;
  t.interval = 0.5;
  t.samples.assign(400, {tcp_mbps * 0.5, udp_mbps * 0.5});
  return t;
}

int silent_detector(const features::FeatureVector&,
                    std::span<const netsim::TrafficSample>) {
  return 0;
}

}  // namespace

TEST_CASE("congestion_rate") {
  const auto p = table_params();
  CHECK(congestion_rate(10.0, p) == doctest::Approx(0.0));
  CHECK(congestion_rate(0.5, p) == doctest::Approx(1.0));  // below threshold -> z0
  CHECK(congestion_rate(5.0, p) == doctest::Approx(0.5));
  CHECK_THROWS_AS(congestion_rate(11.0, p), std::invalid_argument);

  SUBCASE("piecewise: constant below the threshold, linear above") {
    for (double b = 0.0; b <= 1.0; b += 0.05) {
      CHECK(congestion_rate(b, p) == p.z0);
    }
    double prev = congestion_rate(1.001, p);
    for (double b = 1.05; b <= 10.0; b += 0.05) {
      const double z = congestion_rate(b, p);
      CHECK(z == doctest::Approx(1.0 - b / 10.0));
      CHECK(z < prev);
      prev = z;
    }
  }
}

TEST_CASE("relative_cost") {
  const auto p = table_params();
  AttackAction a{1, 10.0, 0.5};
  CHECK(relative_cost(a, p) == doctest::Approx(0.5));
  a.a_dur = 0.0;
  CHECK(relative_cost(a, p) == doctest::Approx(0.0));
  a.a_dur = 1.0;
  a.a_rate = 10.0;
  CHECK(relative_cost(a, p) == doctest::Approx(1.0));
}

TEST_CASE("reward branches with the standard constants") {
  const auto p = table_params();

  // undetected attack at full congestion with c = 0.5
  AttackAction attack{1, 10.0, 0.5};
  CHECK(reward(attack, 0.5, 0, p) == doctest::Approx(60.0));  // (1 - 0.25) * 80
  CHECK(reward(attack, 0.5, 1, p) == doctest::Approx(-100.0));

  AttackAction idle{0, 0.0, 0.0};
  CHECK(reward(idle, 5.0, 0, p) == doctest::Approx(-5.0));
  CHECK(reward(idle, 5.0, 1, p) == doctest::Approx(-105.0));
}

TEST_CASE("env_step timing, fifo release, and termination") {
  auto config = small_config();
  AttackEnv env(config, flat_trace(3.6, 0.9), silent_detector, 7);
  env.reset();

  AttackAction idle{0, 0.0, 0.0};
  std::set<int> released_slots;
  std::vector<std::pair<int, int>> arrivals;  // (step index, action slot)
  double total = 0.0;

  for (int slot = 0; slot < 100; ++slot) {
    const auto out = env.step(idle);
    for (const auto& rel : out.released) {
      arrivals.emplace_back(slot, rel.slot);
      CHECK(released_slots.insert(rel.slot).second);  // exactly once
      total += rel.value;
    }
    CHECK(out.done == (slot == 99));
  }

  // reward delay 0.5, slot 1.0: slot k's reward arrives with step k+1 (the
  // first boundary at or past k + 0.5); the final slot flushes at the end
  REQUIRE(arrivals.size() == 100);
  for (const auto& [step, slot] : arrivals) {
    if (slot < 99) {
      CHECK(step == slot + 1);
    } else {
      CHECK(step == 99);
    }
  }
  CHECK(released_slots.size() == 100);
  CHECK(total == doctest::Approx(-500.0));  // all idle, never detected

  CHECK_THROWS_AS(env.step(idle), std::invalid_argument);
  CHECK(env.records().size() == 100);
}

TEST_CASE("fifo order is preserved") {
  auto config = small_config();
  config.episode_slots = 10;
  AttackEnv env(config, flat_trace(3.6, 0.9), silent_detector, 9);
  env.reset();

  int last_released = -1;
  while (!env.done()) {
    const auto out = env.step({0, 0.0, 0.0});
    for (const auto& rel : out.released) {
      CHECK(rel.slot == last_released + 1);
      last_released = rel.slot;
    }
  }
  CHECK(last_released == 9);
}

TEST_CASE("reward recomputes from any step record") {
  auto config = small_config();
  config.episode_slots = 40;
  AttackEnv env(config, flat_trace(3.6, 0.9), silent_detector, 21);
  env.reset();

  Rng rng(5);
  while (!env.done()) {
    AttackAction a;
    a.a_dec = rng.bernoulli(0.5) ? 1 : 0;
    if (a.a_dec) {
      a.a_rate = rng.uniform(0.0, 20.0);
      a.a_dur = rng.uniform(0.0, 1.0);
    }
    env.step(a);
  }
  for (const auto& rec : env.records()) {
    REQUIRE(rec.reward_set);
    CHECK(rec.reward ==
          doctest::Approx(reward(rec.action, rec.snapshot_b, rec.f_d, config.reward)));
  }
}

TEST_CASE("detected attacks and idles use the penalty branches") {
  auto config = small_config();
  config.episode_slots = 6;
  auto alarm = [](const features::FeatureVector&,
                  std::span<const netsim::TrafficSample>) { return 1; };
  AttackEnv env(config, flat_trace(3.6, 0.9), alarm, 3);
  env.reset();

  double total = 0.0;
  int slot = 0;
  while (!env.done()) {
    const auto out = env.step(slot % 2 == 0 ? AttackAction{1, 5.0, 0.5}
                                            : AttackAction{0, 0.0, 0.0});
    for (const auto& rel : out.released) total += rel.value;
    ++slot;
  }
  // alternating attack/idle, all detected: 3 * (-100) + 3 * (-105)
  CHECK(total == doctest::Approx(-615.0));
}

TEST_CASE("observe_partial") {
  auto config = small_config();
  config.episode_slots = 12;
  AttackEnv env(config, flat_trace(3.6, 0.9), silent_detector, 13);
  env.reset();
  for (int i = 0; i < 5; ++i) env.step({1, 8.0, 0.8});

  SUBCASE("full window with zero noise equals the state's delay block") {
    const auto obs = env.observe_partial(config.n_delays, 0.0);
    const auto& s = env.state();
    REQUIRE(obs.delays.size() == s.delays.size());
    for (std::size_t i = 0; i < obs.delays.size(); ++i) {
      CHECK(obs.delays[i] == s.delays[i]);
    }
  }

  SUBCASE("n' = 1 returns only the latest delay") {
    const auto obs = env.observe_partial(1, 0.0);
    REQUIRE(obs.delays.size() == 1);
    CHECK(obs.delays[0] == env.state().delays.back());
  }

  SUBCASE("noise perturbs every element with a fixed seed") {
    AttackEnv env2(config, flat_trace(3.6, 0.9), silent_detector, 13);
    env2.reset();
    for (int i = 0; i < 5; ++i) env2.step({1, 8.0, 0.8});
    const auto clean = env.observe_partial(3, 0.0);
    const auto noisy = env2.observe_partial(3, 0.1);
    REQUIRE(clean.delays.size() == noisy.delays.size());
    for (std::size_t i = 0; i < clean.delays.size(); ++i) {
      CHECK(clean.delays[i] != noisy.delays[i]);
    }
  }

  SUBCASE("width outside [1, n] rejected") {
    CHECK_THROWS_AS(env.observe_partial(0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(env.observe_partial(config.n_delays + 1, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("episode determinism with identical seeds") {
  auto config = small_config();
  config.episode_slots = 20;
  config.obs_noise_sigma = 0.05;

  auto run = [&]() {
    AttackEnv env(config, flat_trace(3.6, 0.9), silent_detector, 99);
    env.reset();
    std::vector<double> rewards;
    while (!env.done()) {
      const auto out = env.step({1, 6.0, 0.9});
      for (const auto& rel : out.released) rewards.push_back(rel.value);
    }
    return std::pair{rewards, env.state().delays};
  };

  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("metrics") {
  auto make_record = [](int a_dec, int f_d, double rate, double dur, double b) {
    StepRecord r;
    r.action = {a_dec, rate, dur};
    r.f_d = f_d;
    r.slot_mean_b = b;
    r.reward = 0.0;
    r.reward_set = true;
    return r;
  };

  SUBCASE("asr and trigger rate") {
    std::vector<StepRecord> recs;
    for (int i = 0; i < 10; ++i) {
      recs.push_back(make_record(1, i < 2 ? 1 : 0, 10.0, 0.5, 5.0));
    }
    for (int i = 0; i < 10; ++i) recs.push_back(make_record(0, 0, 0, 0, 5.0));
    const auto m = metrics(recs);
    CHECK(m.attacks == 10);
    CHECK(m.undetected_attacks == 8);
    CHECK(m.attack_success_rate == doctest::Approx(0.8));
    CHECK(m.trigger_rate == doctest::Approx(0.5));
    CHECK(m.attack_cost == doctest::Approx(10 * 10.0 * 0.5));
  }

  SUBCASE("single attack volume") {
    std::vector<StepRecord> recs{make_record(1, 0, 20.0, 0.5, 3.0)};
    CHECK(metrics(recs).attack_cost == doctest::Approx(10.0));
  }

  SUBCASE("zero attacks flagged") {
    std::vector<StepRecord> recs{make_record(0, 0, 0, 0, 5.0)};
    const auto m = metrics(recs);
    CHECK(m.zero_attacks);
    CHECK(m.attack_success_rate == doctest::Approx(1.0));
  }
}

TEST_CASE("partial observation of the state is its delay suffix") {
  auto config = small_config();
  config.episode_slots = 8;
  AttackEnv env(config, flat_trace(3.6, 0.9), silent_detector, 31);
  env.reset();
  for (int i = 0; i < 4; ++i) env.step({1, 12.0, 0.7});

  const auto obs = env.observe_partial(3, 0.0);
  const auto svec = env.vectorize_state();
  const auto ovec = env.vectorize_partial(obs);
  REQUIRE(svec.size() == static_cast<std::size_t>(env.state_dim()));
  for (int i = 0; i < 3; ++i) {
    CHECK(ovec[static_cast<std::size_t>(i)] ==
          doctest::Approx(svec[svec.size() - 3 + static_cast<std::size_t>(i)]));
  }
}
