#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace multiscout {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;
using Vector = Eigen::VectorXd;

inline constexpr double kSpeedOfLight = 299'792'458.0;
inline constexpr double kPi = std::numbers::pi;

// Raised when an echo cannot be found or an association cannot be formed.
class DetectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised on malformed scenario files or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Wraps to (-180, 180].
inline double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

// Wraps to (-pi, pi].
inline double wrap_radians(double rad) {
  double w = std::fmod(rad, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  if (w > kPi) w -= 2.0 * kPi;
  return w;
}

}  // namespace multiscout
