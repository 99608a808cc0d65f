#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace bogen {

/// A point (z1, z2) on the 2-D exploration map.
struct LatentPoint2D {
  double z1 = 0.0;
  double z2 = 0.0;

  bool operator==(const LatentPoint2D&) const = default;
};

inline double distance(const LatentPoint2D& a, const LatentPoint2D& b) {
  return std::hypot(a.z1 - b.z1, a.z2 - b.z2);
}

inline double squared_distance(const LatentPoint2D& a, const LatentPoint2D& b) {
  const double d1 = a.z1 - b.z1, d2 = a.z2 - b.z2;
  return d1 * d1 + d2 * d2;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Axis-aligned box on the exploration map.
struct Bounds {
  Interval z1{0.0, 1.5};
  Interval z2{-0.1, 0.7};

  bool contains(const LatentPoint2D& p) const {
    return p.z1 >= z1.lo && p.z1 <= z1.hi && p.z2 >= z2.lo && p.z2 <= z2.hi;
  }
  LatentPoint2D clamp(const LatentPoint2D& p) const;
  /// Throws ConfigError if either interval is empty or inverted.
  void validate() const;
  bool operator==(const Bounds&) const = default;
};

enum class BoundsMode { fixed, auto_fit };

struct BoundsConfig {
  BoundsMode mode = BoundsMode::fixed;
  Bounds box{};
  /// Tail mass trimmed from each end of each axis in auto-fit mode.
  double auto_fit_tail = 0.0025;
};

/// Lower and upper empirical quantiles (tail mass trimmed from each end) with
/// no interpolation, so the interval covers the order statistics between them.
Interval quantile_interval(std::vector<double> values, double tail);

/// Fixed mode returns the configured box (default z1 in [0,1.5], z2 in
/// [-0.1,0.7]); auto-fit mode returns the per-axis quantile box of the given
/// map points, which contains at least 1 - 4*tail of them.
Bounds latent_bounds(const BoundsConfig& config = {}, std::span<const LatentPoint2D> map_points = {});

} // namespace bogen
