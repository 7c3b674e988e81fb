#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "adados/agents.hpp"
#include "adados/nets.hpp"

using namespace adados;
using namespace adados::agents;

namespace {

bool grad_close(double analytic, double numeric, double tol = 1e-4) {
  return std::abs(analytic - numeric) <= tol * std::max({1.0, std::abs(analytic),
                                                         std::abs(numeric)});
}

std::vector<double> random_input(int n, Rng& rng) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(-1.5, 1.5);
  return x;
}

}  // namespace

TEST_CASE("forward basics") {
  Rng rng(1);

  SUBCASE("zero parameters give zero output") {
    nets::MlpNet net({3, 8, 2}, rng);
    std::fill(net.params().begin(), net.params().end(), 0.0);
    const auto out = net.forward(std::vector<double>{0.3, -0.2, 1.0});
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);

    DeciderPolicy dec{nets::MlpNet({3, 8, 1}, rng)};
    std::fill(dec.net.params().begin(), dec.net.params().end(), 0.0);
    CHECK(dec.prob(std::vector<double>{0.3, -0.2, 1.0}) == doctest::Approx(0.5));
  }

  SUBCASE("single linear layer reproduces a hand-computed affine map") {
    nets::MlpNet net({2, 2}, rng);
    // W = [[1, 2], [3, 4]], b = [0.5, -0.5]
    net.params() = {1, 2, 3, 4, 0.5, -0.5};
    const auto out = net.forward(std::vector<double>{1.0, -1.0});
    CHECK(out[0] == doctest::Approx(1 * 1 + 2 * -1 + 0.5));
    CHECK(out[1] == doctest::Approx(3 * 1 + 4 * -1 - 0.5));
  }

  SUBCASE("dimension mismatch rejected") {
    nets::MlpNet net({3, 4, 1}, rng);
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), std::invalid_argument);
  }

  SUBCASE("batched forward equals per-item forward") {
    nets::MlpNet net({4, 16, 3}, rng);
    std::vector<std::vector<double>> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(random_input(4, rng));
    for (const auto& x : batch) {
      const auto once = net.forward(x);
      const auto again = net.forward(x);
      CHECK(once == again);
    }
  }
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    nets::MlpNet net({3, 6, 4, 2}, rng);
    const auto x = random_input(3, rng);
    std::vector<double> upstream{rng.uniform(-1, 1), rng.uniform(-1, 1)};

    nets::ForwardTrace trace;
    net.forward(x, &trace);
    const auto grad = net.backward(trace, upstream);

    const double h = 1e-5;
    for (std::size_t i = 0; i < net.param_count(); i += 7) {  // sample coordinates
      const double saved = net.params()[i];
      net.params()[i] = saved + h;
      const auto up = net.forward(x);
      net.params()[i] = saved - h;
      const auto down = net.forward(x);
      net.params()[i] = saved;
      double numeric = 0.0;
      for (std::size_t o = 0; o < upstream.size(); ++o) {
        numeric += upstream[o] * (up[o] - down[o]) / (2 * h);
      }
      CHECK(grad_close(grad[i], numeric));
    }
  }
}

TEST_CASE("backward linearity and zero upstream") {
  Rng rng(3);
  nets::MlpNet net({2, 5, 1}, rng);
  const auto x1 = random_input(2, rng);
  const auto x2 = random_input(2, rng);

  nets::ForwardTrace t1, t2;
  net.forward(x1, &t1);
  net.forward(x2, &t2);

  SUBCASE("zero upstream gives zero gradient") {
    const double zero = 0.0;
    const auto g = net.backward(t1, std::span(&zero, 1));
    for (double v : g) CHECK(v == 0.0);
  }

  SUBCASE("gradient of a batch sum is the sum of per-item gradients") {
    const double one = 1.0;
    const auto g1 = net.backward(t1, std::span(&one, 1));
    const auto g2 = net.backward(t2, std::span(&one, 1));
    std::vector<double> acc(net.param_count(), 0.0);
    net.accumulate_backward(t1, std::span(&one, 1), acc);
    net.accumulate_backward(t2, std::span(&one, 1), acc);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      CHECK(acc[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("act respects the decider limits") {
  Rng rng(4);
  DeciderPolicy dec{nets::MlpNet({2, 4, 1}, rng)};
  ShaperPolicy shp{nets::MlpNet({2, 4, 4}, rng), 30.0, 1.0};
  const std::vector<double> state{0.2, -0.4};

  SUBCASE("huge positive logit always attacks") {
    std::fill(dec.net.params().begin(), dec.net.params().end(), 0.0);
    dec.net.params().back() = 50.0;  // output bias
    Rng r(5);
    for (int i = 0; i < 64; ++i) {
      const auto s = act(dec, shp, state, r);
      CHECK(s.action.a_dec == 1);
      CHECK(s.logp_shape.has_value());
      CHECK(s.action.a_rate >= 0.0);
      CHECK(s.action.a_rate <= 30.0);
      CHECK(s.action.a_dur >= 0.0);
      CHECK(s.action.a_dur <= 1.0);
    }
  }

  SUBCASE("huge negative logit never attacks and skips the shaper") {
    std::fill(dec.net.params().begin(), dec.net.params().end(), 0.0);
    dec.net.params().back() = -50.0;
    Rng r(6);
    for (int i = 0; i < 64; ++i) {
      const auto s = act(dec, shp, state, r);
      CHECK(s.action.a_dec == 0);
      CHECK(!s.logp_shape.has_value());
      CHECK(s.action.a_rate == 0.0);
      CHECK(s.action.a_dur == 0.0);
    }
  }

  SUBCASE("fixed seed reproduces the action stream") {
    Rng r1(7), r2(7);
    for (int i = 0; i < 32; ++i) {
      const auto a = act(dec, shp, state, r1);
      const auto b = act(dec, shp, state, r2);
      CHECK(a.action.a_dec == b.action.a_dec);
      CHECK(a.action.a_rate == b.action.a_rate);
      CHECK(a.action.a_dur == b.action.a_dur);
      CHECK(a.logp_dec == b.logp_dec);
    }
  }
}

TEST_CASE("squashed gaussian density integrates to one") {
  // quadrature over the open action interval (0, bound)
  const double bound = 1.0;
  for (const auto& [mu, ls] : {std::pair{0.0, 0.0}, {0.5, -0.5}, {-0.3, 0.3}}) {
    const int n = 200000;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = (i + 0.5) * bound / n;
      const double u = unsquash(a, bound);
      mass += std::exp(squashed_gauss_log_pdf(u, mu, ls, bound)) * (bound / n);
    }
    CHECK(std::abs(mass - 1.0) < 1e-3);
  }
}

TEST_CASE("gae") {
  SUBCASE("single step") {
    const auto g = gae(std::vector<double>{1.0}, std::vector<double>{0.0}, 0.0, 0.95, 0.95);
    CHECK(g.advantages[0] == doctest::Approx(1.0));
    CHECK(g.returns[0] == doctest::Approx(1.0));
  }

  SUBCASE("lambda = 1 is the discounted monte-carlo return minus the value") {
    const std::vector<double> r{1.0, -2.0, 3.0};
    const std::vector<double> v{0.3, -0.1, 0.7};
    const double gamma = 0.9;
    const auto g = gae(r, v, 0.0, gamma, 1.0);
    for (int t = 0; t < 3; ++t) {
      double mc = 0.0;
      for (int k = t; k < 3; ++k) mc += std::pow(gamma, k - t) * r[k];
      CHECK(g.advantages[t] == doctest::Approx(mc - v[t]).epsilon(1e-12));
    }
  }

  SUBCASE("lambda = 0 is the one-step td error") {
    const std::vector<double> r{1.0, -2.0, 3.0};
    const std::vector<double> v{0.3, -0.1, 0.7};
    const double gamma = 0.9;
    const auto g = gae(r, v, 0.0, gamma, 0.0);
    CHECK(g.advantages[0] == doctest::Approx(r[0] + gamma * v[1] - v[0]));
    CHECK(g.advantages[1] == doctest::Approx(r[1] + gamma * v[2] - v[1]));
    CHECK(g.advantages[2] == doctest::Approx(r[2] - v[2]));
  }
}

namespace {

std::vector<TrajStep> make_trajectory(TwoStageAgent& agent, int steps, Rng& rng) {
  std::vector<TrajStep> traj;
  for (int i = 0; i < steps; ++i) {
    TrajStep s;
    s.state = random_input(agent.input_dim, rng);
    s.act = agent.sample(s.state, rng);
    s.reward = rng.uniform(-5, 5);
    s.value = agent.critic.value(s.state);
    traj.push_back(std::move(s));
  }
  traj.back().terminal = true;
  return traj;
}

}  // namespace

TEST_CASE("update_decoupled") {
  PpoConfig config;
  config.hidden = {8, 8};
  config.minibatch = 8;

  SUBCASE("zero attacks leave the shaper untouched") {
    Rng rng(8);
    auto agent = TwoStageAgent::make(4, config, 30.0, 1.0, rng);
    // strongly negative decider bias so sampling yields only idle actions
    agent.decider.net.params().back() = -30.0;

    Rng traj_rng(9);
    auto traj = make_trajectory(agent, 40, traj_rng);
    const auto before = agent.shaper.net.params();
    Rng update_rng(10);
    const auto diag = update_decoupled(traj, agent, config, update_rng);
    CHECK(diag.shaper_skipped);
    CHECK(agent.shaper.net.params() == before);
  }

  SUBCASE("first-epoch ratios equal one and clipping never helps") {
    Rng rng(11);
    auto agent = TwoStageAgent::make(4, config, 30.0, 1.0, rng);
    Rng traj_rng(12);
    auto traj = make_trajectory(agent, 64, traj_rng);
    Rng update_rng(13);
    const auto diag = update_decoupled(traj, agent, config, update_rng);
    CHECK(diag.first_epoch_max_ratio_dev == 0.0);
    CHECK(diag.clip_violations == 0);
  }

  SUBCASE("idle-step rewards do not influence the shaper update") {
    Rng rng(14);
    auto agent_a = TwoStageAgent::make(4, config, 30.0, 1.0, rng);
    auto agent_b = agent_a;

    Rng traj_rng(15);
    auto traj_a = make_trajectory(agent_a, 64, traj_rng);
    auto traj_b = traj_a;
    for (auto& s : traj_b) {
      if (s.act.action.a_dec == 0) s.reward += 100.0;  // perturb idle rewards only
    }

    Rng u1(16), u2(16);
    update_decoupled(traj_a, agent_a, config, u1);
    update_decoupled(traj_b, agent_b, config, u2);
    CHECK(agent_a.shaper.net.params() == agent_b.shaper.net.params());
    // the decider and critic do see those rewards
    CHECK(agent_a.decider.net.params() != agent_b.decider.net.params());
  }
}

TEST_CASE("ldos schedules") {
  LdosSchedule s;
  s.duration = 0.15;
  s.period = 1.0;
  s.rate = 15.0;

  SUBCASE("pinned actions") {
    const auto a0 = ldos_actions(s, 0.0);
    CHECK(a0.a_dec == 1);
    CHECK(a0.a_dur == doctest::Approx(0.15));
    CHECK(a0.a_rate == doctest::Approx(15.0));
    CHECK(ldos_actions(s, 0.5).a_dec == 0);  // between pulses
  }

  SUBCASE("exact periodicity") {
    Rng rng(17);
    for (const double period : {1.0, 1.5, 2.0}) {
      LdosSchedule p = s;
      p.period = period;
      for (int i = 0; i < 200; ++i) {
        const double t = rng.uniform(0.0, 50.0);
        const auto a = ldos_actions(p, t);
        const auto b = ldos_actions(p, t + period);
        CHECK(a.a_dec == b.a_dec);
        CHECK(a.a_rate == b.a_rate);
        CHECK(a.a_dur == b.a_dur);
      }
    }
  }

  SUBCASE("burst trains") {
    CHECK(schedule_bursts(s, 10.0).size() == 10);  // one per period

    LdosSchedule d = s;
    d.variant = LdosVariant::double_train;
    const auto bursts = schedule_bursts(d, 10.0);
    CHECK(bursts.size() == 20);  // two offset trains
    CHECK(bursts[1].start == doctest::Approx(0.5));

    LdosSchedule r = s;
    r.variant = LdosVariant::randomized;
    r.seed = 5;
    const auto b1 = schedule_bursts(r, 50.0);
    const auto b2 = schedule_bursts(r, 50.0);
    REQUIRE(b1.size() == b2.size());
    for (std::size_t i = 0; i < b1.size(); ++i) {
      CHECK(b1[i].start == b2[i].start);
      CHECK(b1[i].rate == b2[i].rate);
    }
    // drawn parameters stay inside the declared sets
    for (const auto& b : b1) {
      CHECK((b.duration == 0.1 || b.duration == 0.15 || b.duration == 0.2));
      CHECK((b.rate == 15.0 || b.rate == 20.0 || b.rate == 25.0 || b.rate == 30.0));
    }
  }

  SUBCASE("invalid schedules rejected") {
    LdosSchedule bad = s;
    bad.duration = 2.0;  // longer than the period
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("checkpoint round trip") {
  PpoConfig config;
  config.hidden = {8, 8};
  Rng rng(18);
  auto agent = TwoStageAgent::make(16, config, 30.0, 1.0, rng);

  const std::string path = "test_checkpoint_tmp.json";
  save_checkpoint(agent, "teacher", 10, path);
  const auto loaded = load_checkpoint(path, config);
  std::remove(path.c_str());

  CHECK(loaded.kind == "teacher");
  CHECK(loaded.n_delays == 10);
  CHECK(loaded.agent.input_dim == 16);
  CHECK(loaded.agent.decider.net.params() == agent.decider.net.params());
  CHECK(loaded.agent.shaper.net.params() == agent.shaper.net.params());
  CHECK(loaded.agent.critic.net.params() == agent.critic.net.params());
  CHECK(loaded.agent.shaper.rate_max == agent.shaper.rate_max);
}
