#include "adados/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace adados::nets {

MlpNet::MlpNet(std::vector<int> layer_sizes, Rng& rng, double out_scale)
    : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("net needs input and output sizes");
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    count += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.resize(count);

  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    const bool last = l + 2 == sizes_.size();
    const double scale = (last ? out_scale : 1.0) / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_in * fan_out; ++i) {
      params_[off++] = rng.uniform(-scale, scale);
    }
    off += fan_out;  // biases start at zero
  }
}

std::vector<double> MlpNet::forward(std::span<const double> input,
                                    ForwardTrace* trace) const {
  if (static_cast<int>(input.size()) != sizes_.front()) {
    throw std::invalid_argument("input dimension mismatch");
  }
  std::vector<double> act(input.begin(), input.end());
  if (trace) {
    trace->activations.clear();
    trace->activations.push_back(act);
  }

  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    const bool last = l + 2 == sizes_.size();
    std::vector<double> next(fan_out);
    for (int o = 0; o < fan_out; ++o) {
      double z = params_[off + static_cast<std::size_t>(fan_in) * fan_out + o];  // bias
      const std::size_t row = off + static_cast<std::size_t>(o) * fan_in;
      for (int i = 0; i < fan_in; ++i) z += params_[row + i] * act[i];
      next[o] = last ? z : std::tanh(z);
    }
    off += static_cast<std::size_t>(fan_in) * fan_out + fan_out;
    act = std::move(next);
    if (trace) trace->activations.push_back(act);
  }
  return act;
}

void MlpNet::accumulate_backward(const ForwardTrace& trace,
                                 std::span<const double> upstream,
                                 std::vector<double>& grad_out) const {
  if (trace.activations.size() != sizes_.size()) {
    throw std::invalid_argument("forward trace does not match the net");
  }
  if (static_cast<int>(upstream.size()) != sizes_.back()) {
    throw std::invalid_argument("upstream dimension mismatch");
  }
  if (grad_out.size() != params_.size()) grad_out.resize(params_.size());

  // offsets of each layer's parameter block
  std::vector<std::size_t> offsets(sizes_.size() - 1);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    const auto& below = trace.activations[l];
    const std::size_t base = offsets[l];
    const std::size_t bias_base = base + static_cast<std::size_t>(fan_in) * fan_out;

    for (int o = 0; o < fan_out; ++o) {
      const std::size_t row = base + static_cast<std::size_t>(o) * fan_in;
      for (int i = 0; i < fan_in; ++i) grad_out[row + i] += delta[o] * below[i];
      grad_out[bias_base + o] += delta[o];
    }

    if (l == 0) break;
    std::vector<double> prev_delta(fan_in, 0.0);
    for (int i = 0; i < fan_in; ++i) {
      double s = 0.0;
      for (int o = 0; o < fan_out; ++o) {
        s += params_[base + static_cast<std::size_t>(o) * fan_in + i] * delta[o];
      }
      // below is post-tanh for hidden layers
      prev_delta[i] = s * (1.0 - below[i] * below[i]);
    }
    delta = std::move(prev_delta);
  }
}

std::vector<double> MlpNet::backward(const ForwardTrace& trace,
                                     std::span<const double> upstream) const {
  std::vector<double> grad(params_.size(), 0.0);
  accumulate_backward(trace, upstream, grad);
  return grad;
}

Adam::Adam(std::size_t n_params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0),
      v_(n_params, 0.0) {}

void Adam::step(std::vector<double>& params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("optimizer size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
  }
}

}  // namespace adados::nets
