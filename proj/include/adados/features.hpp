#pragma once

// Traffic-window feature extraction. A sliding window of scalar readings is
// min-max scaled to [-1,1], mapped to polar angles, and expanded into a
// Gramian angular summation matrix whose first three moments summarise the
// window shape. Together with the TCP coefficient of variation and a UDP
// abnormal-peak count these form the five-dimensional detector input.

#include <span>
#include <vector>

#include "adados/netsim.hpp"

namespace adados::features {

struct GasfMatrix {
  int n = 0;
  std::vector<double> entries;  // row-major n x n

  double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * n + j]; }
};

struct FeatureVector {
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double tcp_cv = 0.0;
  int udp_peaks = 0;

  std::vector<double> as_vector() const {
    return {m1, m2, m3, tcp_cv, static_cast<double>(udp_peaks)};
  }
};

inline constexpr int kFeatureDim = 5;

// Scale a window to [-1, 1]; a constant window maps to all zeros.
std::vector<double> minmax_scale(std::span<const double> window);

// arccos of a scaled value; values outside [-1,1] by more than 1e-9 are
// rejected, closer overshoot is clamped.
double polar_angle(double x_scaled);

GasfMatrix gasf(std::span<const double> window);

struct GramMoments {
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;  // signed cube root of the third central moment
};

GramMoments gram_moments(const GasfMatrix& g);

// population std / mean; zero when the mean is not positive
double tcp_cv(std::span<const double> tcp_volumes);

// count of samples strictly above mean + multiplier * population std
int udp_peaks(std::span<const double> udp_volumes, double multiplier = 2.0);

// Five features over the trailing window_len samples: GASF moments of the
// aggregate (tcp+udp) volume series, CV of the TCP series, peak count of
// the UDP series.
FeatureVector featurize(std::span<const netsim::TrafficSample> samples, int window_len,
                        double peak_multiplier = 2.0);

}  // namespace adados::features
