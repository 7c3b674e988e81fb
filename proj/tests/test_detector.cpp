#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>

#include "adados/detector.hpp"
#include "adados/rng.hpp"

using namespace adados;
using namespace adados::detector;

namespace {

features::FeatureVector fv(double m1, double m2, double m3, double cv, int peaks) {
  features::FeatureVector f;
  f.m1 = m1;
  f.m2 = m2;
  f.m3 = m3;
  f.tcp_cv = cv;
  f.udp_peaks = peaks;
  return f;
}

// two well-separated gaussian blobs in feature space
std::vector<LabeledExample> blob_corpus(int n_per_class, Rng& rng) {
  std::vector<LabeledExample> out;
  for (int i = 0; i < n_per_class; ++i) {
    out.push_back({fv(rng.gaussian(-0.5, 0.15), rng.gaussian(0.2, 0.05),
                      rng.gaussian(0.0, 0.1), rng.gaussian(0.1, 0.05), 0),
                   0});
    out.push_back({fv(rng.gaussian(0.4, 0.15), rng.gaussian(0.7, 0.05),
                      rng.gaussian(0.3, 0.1), rng.gaussian(0.6, 0.05), 2),
                   1});
  }
  return out;
}

}  // namespace

TEST_CASE("train rejects degenerate corpora") {
  std::vector<LabeledExample> one_class{{fv(0, 0, 0, 0, 0), 0}, {fv(1, 1, 1, 1, 1), 0}};
  CHECK_THROWS_AS(DetectorModel::train(one_class, ModelKind::knn), std::invalid_argument);
  CHECK_THROWS_AS(DetectorModel::train(one_class, ModelKind::gbdt), std::invalid_argument);
  CHECK_THROWS_AS(DetectorModel::train({}, ModelKind::knn), std::invalid_argument);
}

TEST_CASE("separable blobs reach 0.95 held-out accuracy") {
  Rng rng(40);
  const auto train_set = blob_corpus(120, rng);
  const auto holdout = blob_corpus(40, rng);

  for (auto kind : {ModelKind::knn, ModelKind::gbdt}) {
    const auto model = DetectorModel::train(train_set, kind);
    const auto report = evaluate(model, holdout);
    CHECK(report.accuracy >= 0.95);
  }
}

TEST_CASE("knn returns the label of an exact training point at k = 1") {
  Rng rng(41);
  auto corpus = blob_corpus(20, rng);
  Hyperparams hp;
  hp.k = 1;
  const auto model = DetectorModel::train(corpus, ModelKind::knn, hp);
  for (const auto& e : corpus) {
    CHECK(model.predict(e.features) == e.label);
  }
}

TEST_CASE("knn prediction is invariant under duplicating the training set") {
  Rng rng(42);
  auto corpus = blob_corpus(30, rng);
  auto doubled = corpus;
  doubled.insert(doubled.end(), corpus.begin(), corpus.end());

  const auto m1 = DetectorModel::train(corpus, ModelKind::knn);
  const auto m2 = DetectorModel::train(doubled, ModelKind::knn);

  for (int i = 0; i < 100; ++i) {
    const auto q = fv(rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(-1, 1),
                      rng.uniform(0, 1), static_cast<int>(rng.uniform_index(3)));
    CHECK(m1.predict(q) == m2.predict(q));
  }
}

TEST_CASE("gbdt training loss is monotone non-increasing on random labels") {
  Rng rng(43);
  std::vector<LabeledExample> corpus;
  for (int i = 0; i < 200; ++i) {
    corpus.push_back({fv(rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(-1, 1),
                         rng.uniform(0, 2), static_cast<int>(rng.uniform_index(4))),
                      static_cast<int>(rng.uniform_index(2))});
  }
  const auto model = DetectorModel::train(corpus, ModelKind::gbdt);
  const auto& losses = model.training_losses();
  REQUIRE(losses.size() >= 2);
  for (std::size_t i = 1; i < losses.size(); ++i) {
    CHECK(losses[i] <= losses[i - 1] + 1e-12);
  }
}

TEST_CASE("prediction is deterministic") {
  Rng rng(44);
  const auto corpus = blob_corpus(50, rng);
  const auto model = DetectorModel::train(corpus, ModelKind::gbdt);
  const auto q = fv(0.1, 0.4, 0.1, 0.3, 1);
  CHECK(model.predict(q) == model.predict(q));
  CHECK(model.predict_proba(q) == model.predict_proba(q));
}

TEST_CASE("evaluate") {
  Rng rng(45);
  const auto corpus = blob_corpus(50, rng);
  const auto model = DetectorModel::train(corpus, ModelKind::knn);

  SUBCASE("all predictions correct gives accuracy 1") {
    std::vector<LabeledExample> self;
    for (int i = 0; i < 20; ++i) {
      auto e = corpus[static_cast<std::size_t>(i)];
      e.label = model.predict(e.features);
      self.push_back(e);
    }
    CHECK(evaluate(model, self).accuracy == doctest::Approx(1.0));
  }

  SUBCASE("all predictions flipped gives accuracy 0") {
    std::vector<LabeledExample> flipped;
    for (int i = 0; i < 20; ++i) {
      auto e = corpus[static_cast<std::size_t>(i)];
      e.label = 1 - model.predict(e.features);
      flipped.push_back(e);
    }
    CHECK(evaluate(model, flipped).accuracy == doctest::Approx(0.0));
  }

  SUBCASE("hand-computed confusion matrix on ten examples") {
    // predictions via a threshold stub: build a fixture whose predictions we
    // can enumerate exactly with a k=1 model trained on two points
    Hyperparams hp;
    hp.k = 1;
    std::vector<LabeledExample> anchors{{fv(0, 0, 0, 0, 0), 0}, {fv(1, 1, 1, 1, 1), 1}};
    const auto nn = DetectorModel::train(anchors, ModelKind::knn, hp);

    // 10 queries: 6 near the benign anchor (4 labelled 0, 2 labelled 1),
    // 4 near the attack anchor (3 labelled 1, 1 labelled 0)
    std::vector<LabeledExample> fixture;
    for (int i = 0; i < 4; ++i) fixture.push_back({fv(0.01 * i, 0, 0, 0, 0), 0});
    for (int i = 0; i < 2; ++i) fixture.push_back({fv(0.01 * i, 0.1, 0, 0, 0), 1});
    for (int i = 0; i < 3; ++i) fixture.push_back({fv(1, 1, 1, 0.9 + 0.01 * i, 1), 1});
    fixture.push_back({fv(1, 1, 0.95, 1, 1), 0});

    // hand count: tn=4, fn=2, tp=3, fp=1
    const auto r = evaluate(nn, fixture);
    CHECK(r.tn == 4);
    CHECK(r.fn == 2);
    CHECK(r.tp == 3);
    CHECK(r.fp == 1);
    CHECK(r.accuracy == doctest::Approx(0.7));
    CHECK(r.precision == doctest::Approx(3.0 / 4.0));
    CHECK(r.recall == doctest::Approx(3.0 / 5.0));
    CHECK(r.false_positive_rate == doctest::Approx(1.0 / 5.0));
  }
}

TEST_CASE("label_windows") {
  auto make_samples = [](int n) {
    std::vector<netsim::TrafficSample> s(n);
    for (int i = 0; i < n; ++i) {
      s[i].t = (i + 1) * 0.5;
      s[i].v_tcp = 1.0 + 0.01 * i;
      s[i].v_udp = 0.4;
    }
    return s;
  };

  SUBCASE("no bursts, all labels zero") {
    const auto ex = label_windows(make_samples(30), {}, 10);
    REQUIRE(ex.size() == 21);
    for (const auto& e : ex) CHECK(e.label == 0);
  }

  SUBCASE("burst covering the whole run, all labels one") {
    std::vector<netsim::AttackBurst> bursts{{0.0, 100.0, 5.0}};
    const auto ex = label_windows(make_samples(30), bursts, 10);
    for (const auto& e : ex) CHECK(e.label == 1);
  }

  SUBCASE("mid-run burst matches a brute-force interval-overlap oracle") {
    Rng rng(46);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<netsim::AttackBurst> bursts;
      const auto n_bursts = 1 + rng.uniform_index(3);
      for (std::size_t i = 0; i < n_bursts; ++i) {
        bursts.push_back({rng.uniform(0, 12), rng.uniform(0.1, 2.0), 5.0});
      }
      const int window_len = 6;
      const auto samples = make_samples(30);
      const auto ex = label_windows(samples, bursts, window_len);

      for (std::size_t w = 0; w < ex.size(); ++w) {
        // window w covers samples [w, w + window_len)
        const double t_lo = samples[w].t - 0.5;
        const double t_hi = samples[w + window_len - 1].t;
        int expect = 0;
        for (const auto& b : bursts) {
          const double b_lo = b.start, b_hi = b.start + b.duration;
          if (std::max(b_lo, t_lo) < std::min(b_hi, t_hi)) expect = 1;
        }
        CHECK(ex[w].label == expect);
      }
    }
  }
}

TEST_CASE("model persistence round trip") {
  Rng rng(47);
  const auto corpus = blob_corpus(40, rng);
  const auto holdout = blob_corpus(20, rng);

  for (auto kind : {ModelKind::knn, ModelKind::gbdt}) {
    const auto model = DetectorModel::train(corpus, kind);
    const std::string path = "test_model_tmp.json";
    model.save(path);
    const auto loaded = DetectorModel::load(path);
    std::remove(path.c_str());

    CHECK(loaded.kind() == model.kind());
    for (const auto& e : holdout) {
      CHECK(loaded.predict(e.features) == model.predict(e.features));
      CHECK(loaded.predict_proba(e.features) ==
            doctest::Approx(model.predict_proba(e.features)).epsilon(1e-12));
    }
  }
}

TEST_CASE("periodicity rule flags strong pulse trains only") {
  std::vector<netsim::TrafficSample> periodic(20), flat(20);
  for (int i = 0; i < 20; ++i) {
    periodic[i].v_udp = (i % 4 == 0) ? 3.0 : 0.4;
    flat[i].v_udp = 0.4;
  }
  PeriodicityRule rule;
  CHECK(rule.predict(periodic) == 1);
  CHECK(rule.predict(flat) == 0);
}
