#pragma once

// Small dense networks with hand-derived backpropagation. Hidden layers use
// tanh; the output layer is linear and task heads (Bernoulli, Gaussian,
// value) are applied by the callers. Parameters live in one flat vector so
// optimisers and checkpoints can treat every net uniformly.

#include <cstdint>
#include <span>
#include <vector>

#include "adados/rng.hpp"

namespace adados::nets {

struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // input, hidden..., output
};

class MlpNet {
 public:
  MlpNet() = default;
  MlpNet(std::vector<int> layer_sizes, Rng& rng, double out_scale = 0.01);

  std::vector<double> forward(std::span<const double> input,
                              ForwardTrace* trace = nullptr) const;

  // gradient of <upstream, output> with respect to the flat parameters
  std::vector<double> backward(const ForwardTrace& trace,
                               std::span<const double> upstream) const;

  void accumulate_backward(const ForwardTrace& trace, std::span<const double> upstream,
                           std::vector<double>& grad_out) const;

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;  // per layer: weights row-major, then biases
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n_params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  // apply one step of minimising along grad
  void step(std::vector<double>& params, std::span<const double> grad);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace adados::nets
