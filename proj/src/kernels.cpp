#include "bogen/kernels.hpp"

#include "bogen/error.hpp"

#include <algorithm>

namespace bogen::kernels {

namespace {

constexpr Eigen::Index kBlock = 512;

double kth_distance(std::span<const LatentPoint2D> points, std::size_t i, std::size_t k,
                    std::vector<double>& scratch) {
  scratch.clear();
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j != i) scratch.push_back(squared_distance(points[i], points[j]));
  }
  auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(scratch.begin(), nth, scratch.end());
  return std::sqrt(*nth);
}

void check_k(std::span<const LatentPoint2D> points, std::size_t k) {
  if (k == 0 || k >= points.size()) {
    throw InvalidArgument("k_distances: need 1 <= k < point count");
  }
}

} // namespace

namespace serial {

Eigen::MatrixXd cross_matrix(const KernelConfig& kernel, std::span<const LatentPoint2D> rows,
                             std::span<const LatentPoint2D> cols) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kernel(rows[i], cols[j]);
    }
  }
  return k;
}

PredictionBatch predict_many(const GoodnessModel& model, std::span<const LatentPoint2D> points) {
  PredictionBatch out;
  out.mu.resize(static_cast<Eigen::Index>(points.size()));
  out.sigma2.resize(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Prediction p = model.predict(points[i]);
    out.mu(static_cast<Eigen::Index>(i)) = p.mu;
    out.sigma2(static_cast<Eigen::Index>(i)) = p.sigma2;
  }
  return out;
}

void update_min_distances(std::span<const LatentPoint2D> points, const LatentPoint2D& center,
                          std::span<double> d2) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    d2[i] = std::min(d2[i], squared_distance(points[i], center));
  }
}

std::vector<double> k_distances(std::span<const LatentPoint2D> points, std::size_t k) {
  check_k(points, k);
  std::vector<double> out(points.size());
  std::vector<double> scratch;
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = kth_distance(points, i, k, scratch);
  return out;
}

std::vector<std::vector<std::size_t>> neighbor_lists(std::span<const LatentPoint2D> points, double eps) {
  const double e2 = eps * eps;
  std::vector<std::vector<std::size_t>> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (squared_distance(points[i], points[j]) <= e2) out[i].push_back(j);
    }
  }
  return out;
}

} // namespace serial

namespace omp {

Eigen::MatrixXd cross_matrix(const KernelConfig& kernel, std::span<const LatentPoint2D> rows,
                             std::span<const LatentPoint2D> cols) {
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd k(nr, nc);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < nc; ++j) {
    for (Eigen::Index i = 0; i < nr; ++i) {
      k(i, j) = kernel(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    }
  }
  return k;
}

PredictionBatch predict_many(const GoodnessModel& model, std::span<const LatentPoint2D> points) {
  if (!model.fitted()) {
    throw StateError("predict: model is not fitted");
  }
  const auto m = static_cast<Eigen::Index>(points.size());
  const KernelConfig& kernel = model.kernel();
  PredictionBatch out;
  out.mu = Eigen::VectorXd::Constant(m, kernel.prior_mean);
  out.sigma2 = Eigen::VectorXd::Constant(m, kernel.signal_variance);
  if (model.support().empty() || m == 0) return out;

  const auto& support = model.support();
  const Eigen::MatrixXd& corr = model.variance_correction();
  const Eigen::Index blocks = (m + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index lo = b * kBlock;
    const Eigen::Index len = std::min(kBlock, m - lo);
    Eigen::MatrixXd ks(static_cast<Eigen::Index>(support.size()), len);
    for (Eigen::Index j = 0; j < len; ++j) {
      for (std::size_t i = 0; i < support.size(); ++i) {
        ks(static_cast<Eigen::Index>(i), j) = kernel(points[static_cast<std::size_t>(lo + j)], support[i]);
      }
    }
    out.mu.segment(lo, len).noalias() += ks.transpose() * model.alpha();
    const Eigen::MatrixXd mks = corr * ks;
    out.sigma2.segment(lo, len) -= ks.cwiseProduct(mks).colwise().sum().transpose();
  }
  out.sigma2 = out.sigma2.cwiseMax(0.0);
  return out;
}

void update_min_distances(std::span<const LatentPoint2D> points, const LatentPoint2D& center,
                          std::span<double> d2) {
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    d2[u] = std::min(d2[u], squared_distance(points[u], center));
  }
}

std::vector<double> k_distances(std::span<const LatentPoint2D> points, std::size_t k) {
  check_k(points, k);
  std::vector<double> out(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = kth_distance(points, static_cast<std::size_t>(i), k, scratch);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> neighbor_lists(std::span<const LatentPoint2D> points, double eps) {
  const double e2 = eps * eps;
  std::vector<std::vector<std::size_t>> out(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& row = out[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (squared_distance(points[static_cast<std::size_t>(i)], points[j]) <= e2) row.push_back(j);
    }
  }
  return out;
}

} // namespace omp

std::vector<LatentPoint2D> grid_points(const Bounds& bounds, std::size_t n) {
  if (n < 2) {
    throw InvalidArgument("grid_points: need at least 2 points per axis");
  }
  std::vector<LatentPoint2D> out;
  out.reserve(n * n);
  const double d1 = bounds.z1.width() / static_cast<double>(n - 1);
  const double d2 = bounds.z2.width() / static_cast<double>(n - 1);
  auto at = [n](const Interval& iv, double d, std::size_t i) {
    return i + 1 == n ? iv.hi : iv.lo + d * static_cast<double>(i);
  };
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) out.push_back({at(bounds.z1, d1, c), at(bounds.z2, d2, r)});
  }
  return out;
}

} // namespace bogen::kernels
