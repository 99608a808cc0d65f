#include "bogen/latent.hpp"

#include "bogen/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bogen {

LatentPoint2D Bounds::clamp(const LatentPoint2D& p) const {
  return {std::clamp(p.z1, z1.lo, z1.hi), std::clamp(p.z2, z2.lo, z2.hi)};
}

void Bounds::validate() const {
  if (!(z1.lo < z1.hi) || !(z2.lo < z2.hi)) {
    throw ConfigError("bounds: min must be < max on both axes (z1 [" + std::to_string(z1.lo) + ", " +
                      std::to_string(z1.hi) + "], z2 [" + std::to_string(z2.lo) + ", " + std::to_string(z2.hi) +
                      "])");
  }
}

Interval quantile_interval(std::vector<double> v, double tail) {
  if (v.empty()) {
    throw InvalidArgument("quantile_interval: no values");
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const auto lo = static_cast<std::size_t>(std::floor(tail * static_cast<double>(n)));
  const std::size_t hi = n - 1 - lo;
  return {v[std::min(lo, n - 1)], v[std::max(hi, std::min(lo, n - 1))]};
}

Bounds latent_bounds(const BoundsConfig& config, std::span<const LatentPoint2D> map_points) {
  if (config.mode == BoundsMode::fixed) {
    config.box.validate();
    return config.box;
  }
  if (map_points.empty()) {
    throw InvalidArgument("latent_bounds: auto-fit needs map points");
  }
  std::vector<double> a, b;
  a.reserve(map_points.size());
  b.reserve(map_points.size());
  for (const auto& p : map_points) {
    a.push_back(p.z1);
    b.push_back(p.z2);
  }
  Bounds out{quantile_interval(std::move(a), config.auto_fit_tail),
             quantile_interval(std::move(b), config.auto_fit_tail)};
  out.validate();
  return out;
}

} // namespace bogen
