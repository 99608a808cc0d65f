#pragma once

#include "bogen/latent.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>

namespace bogen {

enum class KernelKind { matern52, rbf };

KernelKind parse_kernel_kind(const std::string& name);
std::string to_string(KernelKind kind);

/// Stationary GP prior over the goodness function on the 2-D map.
struct KernelConfig {
  KernelKind kind = KernelKind::matern52;
  Eigen::Vector2d lengthscales = Eigen::Vector2d::Constant(0.15);
  double signal_variance = 1.0;
  double prior_mean = 0.0;

  /// Throws ConfigError unless lengthscales and signal_variance are positive.
  void validate() const;

  double operator()(const LatentPoint2D& a, const LatentPoint2D& b) const;
  /// d k(a, b) / d a.
  Eigen::Vector2d gradient(const LatentPoint2D& a, const LatentPoint2D& b) const;
};

Eigen::MatrixXd gram_matrix(const KernelConfig& kernel, std::span<const LatentPoint2D> points);
Eigen::VectorXd cross_covariance(const KernelConfig& kernel, std::span<const LatentPoint2D> points,
                                 const LatentPoint2D& x);

} // namespace bogen
