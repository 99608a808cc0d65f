#pragma once

#include "bogen/latent.hpp"
#include "bogen/pbo.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace bogen {

struct AcquisitionConfig {
  double beta = 0.5;
  std::size_t batch_k = 16;
  Bounds bounds{};
  std::size_t grid = 64;        // coarse grid points per axis
  std::size_t grid_starts = 8;  // best grid cells refined by ascent
  std::size_t random_starts = 4;

  /// Throws ConfigError for beta < 0, batch_k < 1, grid < 2 or bad bounds.
  void validate() const;
};

/// Diagonal of one coarse-grid cell over the bounds.
double coarse_cell_diagonal(const AcquisitionConfig& config);

/// Coarse-grid quantities that stay fixed while a batch is hallucinated.
struct GridCache {
  std::vector<LatentPoint2D> points;
  Eigen::MatrixXd ks; // K(support, points)
  Eigen::VectorXd base_mu;
  Eigen::VectorXd base_sigma2;
};

GridCache make_grid_cache(const GoodnessModel& model, const AcquisitionConfig& config);

/// GoodnessModel posterior further conditioned on noise-free observations at
/// hallucinated points equal to their predicted means. The mean is unchanged;
/// only the variance collapses around the hallucinated points.
class BatchPosterior {
public:
  explicit BatchPosterior(const GoodnessModel& model);

  void hallucinate(const LatentPoint2D& x);
  const std::vector<LatentPoint2D>& hallucinated() const { return pending_; }
  const GoodnessModel& model() const { return *model_; }

  Prediction predict(const LatentPoint2D& x) const;
  PredictionGradient predict_with_gradient(const LatentPoint2D& x) const;
  /// Vectorized predict over many points (OpenMP).
  void predict_many(std::span<const LatentPoint2D> points, Eigen::VectorXd& mu, Eigen::VectorXd& sigma2) const;
  /// Same over a cached grid built from this posterior's model.
  void predict_many(const GridCache& grid, Eigen::VectorXd& mu, Eigen::VectorXd& sigma2) const;

  double ucb(const LatentPoint2D& x, double beta) const;

private:
  Eigen::VectorXd posterior_cov(const LatentPoint2D& x) const; // Cov(x, H) under the base model
  void refactor();

  const GoodnessModel* model_;
  std::vector<LatentPoint2D> pending_;
  Eigen::MatrixXd corr_kxh_; // M K(X, H)
  Eigen::MatrixXd cov_hh_;
  Eigen::LLT<Eigen::MatrixXd> cov_hh_llt_;
};

/// Maximizes UCB over the bounds with projected gradient ascent started from
/// the best coarse-grid cells and a few seeded random points.
LatentPoint2D maximize_ucb(const BatchPosterior& posterior, const AcquisitionConfig& config, std::uint64_t seed);
LatentPoint2D maximize_ucb(const BatchPosterior& posterior, const AcquisitionConfig& config, const GridCache& grid,
                           std::uint64_t seed);

/// Kriging-believer batch: k sequential UCB maximizations, each pick
/// hallucinated before the next. Deterministic for a fixed seed.
std::vector<LatentPoint2D> sample_batch(const GoodnessModel& model, const AcquisitionConfig& config,
                                        std::uint64_t seed);

} // namespace bogen
