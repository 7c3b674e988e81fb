#include "adados/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adados::features {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pop_std(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::vector<double> minmax_scale(std::span<const double> window) {
  require(!window.empty(), "window must not be empty");
  double lo = window[0], hi = window[0];
  for (double x : window) {
    require(std::isfinite(x), "window values must be finite");
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<double> out(window.size());
  if (hi == lo) return out;  // constant window maps to the range midpoint
  const double span = hi - lo;
  for (std::size_t i = 0; i < window.size(); ++i) {
    out[i] = (window[i] - lo) * 2.0 / span - 1.0;
  }
  return out;
}

double polar_angle(double x_scaled) {
  require(std::isfinite(x_scaled), "scaled value must be finite");
  require(x_scaled >= -1.0 - 1e-9 && x_scaled <= 1.0 + 1e-9,
          "scaled value outside [-1,1]");
  return std::acos(std::clamp(x_scaled, -1.0, 1.0));
}

GasfMatrix gasf(std::span<const double> window) {
  const auto scaled = minmax_scale(window);
  const int n = static_cast<int>(scaled.size());
  std::vector<double> phi(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) phi[i] = polar_angle(scaled[i]);

  GasfMatrix g;
  g.n = n;
  g.entries.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = std::cos(phi[i] + phi[j]);
      g.entries[static_cast<std::size_t>(i) * n + j] = v;
      g.entries[static_cast<std::size_t>(j) * n + i] = v;
    }
  }
  return g;
}

GramMoments gram_moments(const GasfMatrix& g) {
  require(g.n > 0 && g.entries.size() == static_cast<std::size_t>(g.n) * g.n,
          "malformed gasf matrix");
  const auto count = static_cast<double>(g.entries.size());

  GramMoments m;
  for (double v : g.entries) m.m1 += v;
  m.m1 /= count;

  double s2 = 0.0, s3 = 0.0;
  for (double v : g.entries) {
    const double d = v - m.m1;
    s2 += d * d;
    s3 += d * d * d;
  }
  m.m2 = std::sqrt(s2 / count);
  m.m3 = std::cbrt(s3 / count);  // cbrt keeps the sign for negative skew
  return m;
}

double tcp_cv(std::span<const double> tcp_volumes) {
  require(!tcp_volumes.empty(), "window must not be empty");
  const double mean = mean_of(tcp_volumes);
  if (mean <= 0.0) return 0.0;
  return pop_std(tcp_volumes, mean) / mean;
}

int udp_peaks(std::span<const double> udp_volumes, double multiplier) {
  require(udp_volumes.size() >= 2, "peak counting needs at least 2 samples");
  const double mean = mean_of(udp_volumes);
  const double threshold = mean + multiplier * pop_std(udp_volumes, mean);
  int count = 0;
  for (double x : udp_volumes) {
    if (x > threshold) ++count;
  }
  return count;
}

FeatureVector featurize(std::span<const netsim::TrafficSample> samples, int window_len,
                        double peak_multiplier) {
  require(window_len > 0, "window length must be > 0");
  require(samples.size() >= static_cast<std::size_t>(window_len),
          "not enough samples for the feature window");

  const auto tail = samples.subspan(samples.size() - window_len);
  std::vector<double> aggregate(tail.size()), tcp(tail.size()), udp(tail.size());
  for (std::size_t i = 0; i < tail.size(); ++i) {
    tcp[i] = tail[i].v_tcp;
    udp[i] = tail[i].v_udp;
    aggregate[i] = tail[i].v_tcp + tail[i].v_udp;
  }

  const auto moments = gram_moments(gasf(aggregate));
  FeatureVector f;
  f.m1 = moments.m1;
  f.m2 = moments.m2;
  f.m3 = moments.m3;
  f.tcp_cv = tcp_cv(tcp);
  f.udp_peaks = udp_peaks(udp, peak_multiplier);
  return f;
}

}  // namespace adados::features
