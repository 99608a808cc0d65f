#pragma once

// Hot loops in two flavours: `serial` is the straightforward reference used
// by the tests, `omp` is the OpenMP version the engine calls. Both must agree
// to rounding.

#include "bogen/kernel.hpp"
#include "bogen/latent.hpp"
#include "bogen/pbo.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace bogen::kernels {

struct PredictionBatch {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma2;
};

namespace serial {

/// K(i, j) = k(rows[i], cols[j]).
Eigen::MatrixXd cross_matrix(const KernelConfig& kernel, std::span<const LatentPoint2D> rows,
                             std::span<const LatentPoint2D> cols);
/// GoodnessModel::predict at every point.
PredictionBatch predict_many(const GoodnessModel& model, std::span<const LatentPoint2D> points);
/// d2[i] = min(d2[i], |points[i] - center|^2).
void update_min_distances(std::span<const LatentPoint2D> points, const LatentPoint2D& center,
                          std::span<double> d2);
/// Distance from each point to its k-th nearest other point.
std::vector<double> k_distances(std::span<const LatentPoint2D> points, std::size_t k);
/// Indices within eps of each point, itself included, ascending.
std::vector<std::vector<std::size_t>> neighbor_lists(std::span<const LatentPoint2D> points, double eps);

} // namespace serial

namespace omp {

Eigen::MatrixXd cross_matrix(const KernelConfig& kernel, std::span<const LatentPoint2D> rows,
                             std::span<const LatentPoint2D> cols);
/// Blocked matrix form: mu = m + Ks' a, sigma2 = s - diag(Ks' M Ks).
PredictionBatch predict_many(const GoodnessModel& model, std::span<const LatentPoint2D> points);
void update_min_distances(std::span<const LatentPoint2D> points, const LatentPoint2D& center,
                          std::span<double> d2);
std::vector<double> k_distances(std::span<const LatentPoint2D> points, std::size_t k);
std::vector<std::vector<std::size_t>> neighbor_lists(std::span<const LatentPoint2D> points, double eps);

} // namespace omp

/// Row-major linspace grid over the bounds, n points per axis, z1 fastest.
std::vector<LatentPoint2D> grid_points(const Bounds& bounds, std::size_t n);

} // namespace bogen::kernels
