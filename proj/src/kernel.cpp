#include "bogen/kernel.hpp"

#include "bogen/error.hpp"

#include <cmath>

namespace bogen {

namespace {
const double kSqrt5 = std::sqrt(5.0);
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "matern52") return KernelKind::matern52;
  if (name == "rbf") return KernelKind::rbf;
  throw ConfigError("unknown kernel kind: " + name);
}

std::string to_string(KernelKind kind) { return kind == KernelKind::matern52 ? "matern52" : "rbf"; }

void KernelConfig::validate() const {
  if (!(lengthscales(0) > 0.0) || !(lengthscales(1) > 0.0)) {
    throw ConfigError("kernel: lengthscales must be > 0");
  }
  if (!(signal_variance > 0.0)) {
    throw ConfigError("kernel: signal_variance must be > 0");
  }
  if (!std::isfinite(prior_mean)) {
    throw ConfigError("kernel: prior_mean must be finite");
  }
}

double KernelConfig::operator()(const LatentPoint2D& a, const LatentPoint2D& b) const {
  const double u = (a.z1 - b.z1) / lengthscales(0);
  const double v = (a.z2 - b.z2) / lengthscales(1);
  const double r2 = u * u + v * v;
  if (kind == KernelKind::rbf) {
    return signal_variance * std::exp(-0.5 * r2);
  }
  const double r = std::sqrt(r2);
  return signal_variance * (1.0 + kSqrt5 * r + 5.0 * r2 / 3.0) * std::exp(-kSqrt5 * r);
}

Eigen::Vector2d KernelConfig::gradient(const LatentPoint2D& a, const LatentPoint2D& b) const {
  const Eigen::Vector2d d((a.z1 - b.z1) / (lengthscales(0) * lengthscales(0)),
                          (a.z2 - b.z2) / (lengthscales(1) * lengthscales(1)));
  const double u = (a.z1 - b.z1) / lengthscales(0);
  const double v = (a.z2 - b.z2) / lengthscales(1);
  const double r2 = u * u + v * v;
  if (kind == KernelKind::rbf) {
    return -signal_variance * std::exp(-0.5 * r2) * d;
  }
  // d/dr of the Matern 5/2 profile is -(5r/3)(1 + sqrt5 r) e^{-sqrt5 r}; the
  // r in the numerator cancels dr/da = d / r, so this is smooth at r = 0.
  const double r = std::sqrt(r2);
  return -signal_variance * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r) * d;
}

Eigen::MatrixXd gram_matrix(const KernelConfig& kernel, std::span<const LatentPoint2D> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = kernel.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      k(i, j) = k(j, i) = kernel(points[i], points[j]);
    }
  }
  return k;
}

Eigen::VectorXd cross_covariance(const KernelConfig& kernel, std::span<const LatentPoint2D> points,
                                 const LatentPoint2D& x) {
  Eigen::VectorXd k(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    k(static_cast<Eigen::Index>(i)) = kernel(x, points[i]);
  }
  return k;
}

} // namespace bogen
