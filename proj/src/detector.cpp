#include "adados/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "adados/csv.hpp"

namespace adados::detector {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logistic_loss(std::span<const double> scores, std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    // numerically stable log(1 + exp(-y*f)) with y in {-1,+1}
    const double yf = (labels[i] == 1 ? 1.0 : -1.0) * scores[i];
    loss += yf > 0 ? std::log1p(std::exp(-yf)) : -yf + std::log1p(std::exp(yf));
  }
  return loss / static_cast<double>(scores.size());
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct TreeBuilder {
  std::span<const std::vector<double>> x;
  std::span<const double> grad;
  std::span<const double> hess;
  double l2;
  int min_leaf;
  std::vector<TreeNode> nodes;

  double leaf_value(std::span<const int> idx) const {
    double g = 0.0, h = 0.0;
    for (int i : idx) {
      g += grad[i];
      h += hess[i];
    }
    return -g / (h + l2);
  }

  SplitChoice best_split(std::span<const int> idx) const {
    SplitChoice best;
    const int dim = static_cast<int>(x[0].size());
    double g_all = 0.0, h_all = 0.0;
    for (int i : idx) {
      g_all += grad[i];
      h_all += hess[i];
    }
    const double base = g_all * g_all / (h_all + l2);

    std::vector<int> order(idx.begin(), idx.end());
    for (int f = 0; f < dim; ++f) {
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (x[a][f] != x[b][f]) return x[a][f] < x[b][f];
        return a < b;
      });
      double g_left = 0.0, h_left = 0.0;
      for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        const int i = order[pos];
        g_left += grad[i];
        h_left += hess[i];
        if (x[i][f] == x[order[pos + 1]][f]) continue;  // not a boundary
        const auto n_left = static_cast<int>(pos + 1);
        const auto n_right = static_cast<int>(order.size() - pos - 1);
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double g_right = g_all - g_left;
        const double h_right = h_all - h_left;
        const double gain = g_left * g_left / (h_left + l2) +
                            g_right * g_right / (h_right + l2) - base;
        if (gain > best.gain + 1e-12) {
          best.feature = f;
          best.threshold = 0.5 * (x[i][f] + x[order[pos + 1]][f]);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  int build(std::span<const int> idx, int depth) {
    const int node_id = static_cast<int>(nodes.size());
    nodes.push_back({});
    if (depth == 0 || static_cast<int>(idx.size()) < 2 * min_leaf) {
      nodes[node_id].value = leaf_value(idx);
      return node_id;
    }
    const SplitChoice split = best_split(idx);
    if (split.feature < 0) {
      nodes[node_id].value = leaf_value(idx);
      return node_id;
    }
    std::vector<int> left, right;
    for (int i : idx) {
      (x[i][split.feature] <= split.threshold ? left : right).push_back(i);
    }
    nodes[node_id].feature = split.feature;
    nodes[node_id].split = split.threshold;
    const int l = build(left, depth - 1);
    const int r = build(right, depth - 1);
    nodes[node_id].left = l;
    nodes[node_id].right = r;
    return node_id;
  }
};

}  // namespace

std::string to_string(ModelKind kind) {
  return kind == ModelKind::knn ? "knn" : "gbdt";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "knn") return ModelKind::knn;
  if (s == "gbdt") return ModelKind::gbdt;
  throw std::invalid_argument("unknown detector kind: " + s);
}

double BoostedTree::predict(std::span<const double> x) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    node = x[nodes[node].feature] <= nodes[node].split ? nodes[node].left
                                                       : nodes[node].right;
  }
  return nodes[node].value;
}

std::vector<double> DetectorModel::zscore(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    z[i] = (x[i] - feat_mean_[i]) / feat_std_[i];
  }
  return z;
}

DetectorModel DetectorModel::train(std::span<const LabeledExample> examples, ModelKind kind,
                                   const Hyperparams& hp) {
  require(!examples.empty(), "training set is empty");
  require(hp.threshold >= 0.0 && hp.threshold <= 1.0, "threshold must be in [0,1]");

  int n_pos = 0;
  for (const auto& e : examples) {
    require(e.label == 0 || e.label == 1, "labels must be 0 or 1");
    n_pos += e.label;
    for (double v : e.features.as_vector()) {
      require(std::isfinite(v), "features must be finite");
    }
  }
  require(n_pos > 0 && n_pos < static_cast<int>(examples.size()),
          "training set must contain both classes");

  DetectorModel m;
  m.kind_ = kind;
  m.hp_ = hp;

  // z-scoring parameters from the full training set
  const int dim = features::kFeatureDim;
  m.feat_mean_.assign(dim, 0.0);
  m.feat_std_.assign(dim, 0.0);
  std::vector<std::vector<double>> raw;
  raw.reserve(examples.size());
  for (const auto& e : examples) raw.push_back(e.features.as_vector());
  for (int f = 0; f < dim; ++f) {
    for (const auto& r : raw) m.feat_mean_[f] += r[f];
    m.feat_mean_[f] /= static_cast<double>(raw.size());
    for (const auto& r : raw) {
      m.feat_std_[f] += (r[f] - m.feat_mean_[f]) * (r[f] - m.feat_mean_[f]);
    }
    m.feat_std_[f] = std::sqrt(m.feat_std_[f] / static_cast<double>(raw.size()));
    if (m.feat_std_[f] == 0.0) m.feat_std_[f] = 1.0;
  }

  std::vector<std::vector<double>> xs;
  xs.reserve(raw.size());
  for (const auto& r : raw) xs.push_back(m.zscore(r));

  if (kind == ModelKind::knn) {
    // exact duplicates are stored once, so duplicating a corpus is a no-op
    std::set<std::pair<std::vector<double>, int>> seen;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (seen.insert({xs[i], examples[i].label}).second) {
        m.points_.push_back(xs[i]);
        m.labels_.push_back(examples[i].label);
      }
    }
    m.trained_ = true;
    return m;
  }

  // gbdt with logistic loss
  const auto n = xs.size();
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = examples[i].label;

  const double prior = static_cast<double>(n_pos) / static_cast<double>(n);
  m.bias_ = std::log(prior / (1.0 - prior));

  std::vector<double> scores(n, m.bias_);
  std::vector<double> grad(n), hess(n);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);

  double prev_loss = logistic_loss(scores, labels);
  m.round_losses_.push_back(prev_loss);

  for (int round = 0; round < hp.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(scores[i]);
      grad[i] = p - labels[i];
      hess[i] = std::max(p * (1.0 - p), 1e-12);
    }
    TreeBuilder builder{xs, grad, hess, hp.l2_reg, hp.min_samples_leaf, {}};
    builder.build(all, 2);

    BoostedTree tree{std::move(builder.nodes)};
    double scale = hp.learning_rate;
    std::vector<double> contrib(n);
    for (std::size_t i = 0; i < n; ++i) contrib[i] = tree.predict(xs[i]);

    // shrink the round if it would increase training loss
    std::vector<double> trial(n);
    double new_loss = prev_loss;
    for (int attempt = 0; attempt < 12; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = scores[i] + scale * contrib[i];
      new_loss = logistic_loss(trial, labels);
      if (new_loss <= prev_loss) break;
      scale *= 0.5;
    }
    if (new_loss > prev_loss) {
      m.round_losses_.push_back(prev_loss);  // drop the round entirely
      continue;
    }
    for (auto& node : tree.nodes) node.value *= scale;
    for (std::size_t i = 0; i < n; ++i) scores[i] += scale * contrib[i];
    m.trees_.push_back(std::move(tree));
    prev_loss = new_loss;
    m.round_losses_.push_back(new_loss);
  }

  m.trained_ = true;
  return m;
}

double DetectorModel::predict_proba(const features::FeatureVector& f) const {
  require(trained_, "model is not trained");
  const auto z = zscore(f.as_vector());

  if (kind_ == ModelKind::knn) {
    const int k = std::min<int>(hp_.k, static_cast<int>(points_.size()));
    std::vector<std::pair<double, int>> dist;
    dist.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) {
        d += (points_[i][j] - z[j]) * (points_[i][j] - z[j]);
      }
      dist.emplace_back(d, static_cast<int>(i));
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    int votes = 0;
    for (int i = 0; i < k; ++i) votes += labels_[dist[i].second];
    return static_cast<double>(votes) / static_cast<double>(k);
  }

  double score = bias_;
  for (const auto& tree : trees_) score += tree.predict(z);
  return sigmoid(score);
}

int DetectorModel::predict(const features::FeatureVector& f) const {
  return predict_proba(f) >= hp_.threshold ? 1 : 0;
}

DetectorReport evaluate(const DetectorModel& model, std::span<const LabeledExample> examples) {
  require(!examples.empty(), "evaluation set is empty");
  DetectorReport r;
  for (const auto& e : examples) {
    const int pred = model.predict(e.features);
    if (pred == 1 && e.label == 1) ++r.tp;
    if (pred == 0 && e.label == 0) ++r.tn;
    if (pred == 1 && e.label == 0) ++r.fp;
    if (pred == 0 && e.label == 1) ++r.fn;
  }
  const auto total = static_cast<double>(examples.size());
  r.accuracy = (r.tp + r.tn) / total;
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
  r.false_positive_rate = r.fp + r.tn > 0 ? static_cast<double>(r.fp) / (r.fp + r.tn) : 0.0;
  return r;
}

std::vector<LabeledExample> label_windows(std::span<const netsim::TrafficSample> samples,
                                          std::span<const netsim::AttackBurst> bursts,
                                          int window_len, int stride,
                                          double peak_multiplier) {
  require(window_len > 0 && stride > 0, "window length and stride must be > 0");
  std::vector<LabeledExample> out;
  if (samples.size() < static_cast<std::size_t>(window_len)) return out;

  const double interval =
      samples.size() > 1 ? samples[1].t - samples[0].t : samples[0].t;

  for (std::size_t end = window_len; end <= samples.size();
       end += static_cast<std::size_t>(stride)) {
    const auto window = samples.subspan(0, end);
    const double t_hi = samples[end - 1].t;
    const double t_lo = samples[end - window_len].t - interval;

    int label = 0;
    for (const auto& b : bursts) {
      if (b.duration <= 0) continue;
      if (b.start < t_hi && b.start + b.duration > t_lo) {
        label = 1;
        break;
      }
    }
    out.push_back({features::featurize(window, window_len, peak_multiplier), label});
  }
  return out;
}

int PeriodicityRule::predict(std::span<const netsim::TrafficSample> window) const {
  if (window.size() < 4) return 0;
  std::vector<double> udp(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) udp[i] = window[i].v_udp;

  double mean = 0.0;
  for (double v : udp) mean += v;
  mean /= static_cast<double>(udp.size());
  double var = 0.0;
  for (double v : udp) var += (v - mean) * (v - mean);
  var /= static_cast<double>(udp.size());
  if (std::sqrt(var) < min_std_mbit) return 0;

  const auto n = udp.size();
  for (std::size_t lag = 2; lag <= n / 2; ++lag) {
    double acf = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) {
      acf += (udp[i] - mean) * (udp[i + lag] - mean);
    }
    acf /= var * static_cast<double>(n - lag);
    if (acf > autocorr_threshold) return 1;
  }
  return 0;
}

// --- persistence -------------------------------------------------------------

struct ModelSerde {
  static nlohmann::json to_json(const DetectorModel& m) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = to_string(m.kind_);
    j["threshold"] = m.hp_.threshold;
    j["k"] = m.hp_.k;
    j["feat_mean"] = m.feat_mean_;
    j["feat_std"] = m.feat_std_;
    if (m.kind_ == ModelKind::knn) {
      j["points"] = m.points_;
      j["labels"] = m.labels_;
    } else {
      j["bias"] = m.bias_;
      nlohmann::json trees = nlohmann::json::array();
      for (const auto& t : m.trees_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) {
          nodes.push_back({{"f", n.feature},
                           {"s", n.split},
                           {"v", n.value},
                           {"l", n.left},
                           {"r", n.right}});
        }
        trees.push_back(std::move(nodes));
      }
      j["trees"] = std::move(trees);
    }
    return j;
  }

  static DetectorModel from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1) {
      throw std::runtime_error("unsupported detector model format version");
    }
    DetectorModel m;
    m.kind_ = model_kind_from_string(j.at("kind").get<std::string>());
    m.hp_.threshold = j.at("threshold").get<double>();
    m.hp_.k = j.at("k").get<int>();
    m.feat_mean_ = j.at("feat_mean").get<std::vector<double>>();
    m.feat_std_ = j.at("feat_std").get<std::vector<double>>();
    if (m.kind_ == ModelKind::knn) {
      m.points_ = j.at("points").get<std::vector<std::vector<double>>>();
      m.labels_ = j.at("labels").get<std::vector<int>>();
    } else {
      m.bias_ = j.at("bias").get<double>();
      for (const auto& tj : j.at("trees")) {
        BoostedTree t;
        for (const auto& nj : tj) {
          t.nodes.push_back({nj.at("f").get<int>(), nj.at("s").get<double>(),
                             nj.at("v").get<double>(), nj.at("l").get<int>(),
                             nj.at("r").get<int>()});
        }
        m.trees_.push_back(std::move(t));
      }
    }
    m.trained_ = true;
    return m;
  }
};

void DetectorModel::save(const std::string& path) const {
  require(trained_, "cannot save an untrained model");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << ModelSerde::to_json(*this).dump(2) << '\n';
}

DetectorModel DetectorModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j;
  in >> j;
  return ModelSerde::from_json(j);
}

void save_examples_csv(std::span<const LabeledExample> examples, const std::string& path) {
  CsvWriter w(path, {"m1", "m2", "m3", "tcp_cv", "udp_peaks", "label"});
  for (const auto& e : examples) {
    w.field(e.features.m1)
        .field(e.features.m2)
        .field(e.features.m3)
        .field(e.features.tcp_cv)
        .field(e.features.udp_peaks)
        .field(e.label);
    w.end_row();
  }
}

std::vector<LabeledExample> load_examples_csv(const std::string& path) {
  auto rows = read_csv(path);
  require(!rows.empty() && rows[0].size() == 6, "bad feature csv header");
  std::vector<LabeledExample> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    LabeledExample e;
    e.features.m1 = std::stod(rows[i][0]);
    e.features.m2 = std::stod(rows[i][1]);
    e.features.m3 = std::stod(rows[i][2]);
    e.features.tcp_cv = std::stod(rows[i][3]);
    e.features.udp_peaks = std::stoi(rows[i][4]);
    e.label = std::stoi(rows[i][5]);
    out.push_back(e);
  }
  return out;
}

}  // namespace adados::detector
