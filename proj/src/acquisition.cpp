#include "bogen/acquisition.hpp"

#include "bogen/error.hpp"
#include "bogen/kernels.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bogen {

namespace {

constexpr double kHallucinationJitter = 1e-8;

Eigen::Matrix<double, Eigen::Dynamic, 2> kernel_jacobian(const KernelConfig& kernel, const LatentPoint2D& x,
                                                         std::span<const LatentPoint2D> pts) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> jac(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    jac.row(static_cast<Eigen::Index>(i)) = kernel.gradient(x, pts[i]).transpose();
  }
  return jac;
}

} // namespace

void AcquisitionConfig::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("acquisition: beta must be >= 0");
  if (batch_k < 1) throw ConfigError("acquisition: batch_k must be >= 1");
  if (grid < 2) throw ConfigError("acquisition: grid must be >= 2");
  bounds.validate();
}

double coarse_cell_diagonal(const AcquisitionConfig& config) {
  const double n = static_cast<double>(config.grid - 1);
  return std::hypot(config.bounds.z1.width() / n, config.bounds.z2.width() / n);
}

BatchPosterior::BatchPosterior(const GoodnessModel& model) : model_(&model) {
  if (!model.fitted()) {
    throw StateError("BatchPosterior: model is not fitted");
  }
}

Eigen::VectorXd BatchPosterior::posterior_cov(const LatentPoint2D& x) const {
  const KernelConfig& kernel = model_->kernel();
  Eigen::VectorXd c = cross_covariance(kernel, pending_, x);
  if (!model_->support().empty()) {
    c.noalias() -= corr_kxh_.transpose() * cross_covariance(kernel, model_->support(), x);
  }
  return c;
}

void BatchPosterior::refactor() {
  const KernelConfig& kernel = model_->kernel();
  const auto h = static_cast<Eigen::Index>(pending_.size());
  cov_hh_ = gram_matrix(kernel, pending_);
  if (!model_->support().empty()) {
    const Eigen::MatrixXd kxh = kernels::serial::cross_matrix(kernel, model_->support(), pending_);
    corr_kxh_ = model_->variance_correction() * kxh;
    cov_hh_.noalias() -= kxh.transpose() * corr_kxh_;
  }
  cov_hh_ = 0.5 * (cov_hh_ + cov_hh_.transpose());
  cov_hh_ += kHallucinationJitter * kernel.signal_variance * Eigen::MatrixXd::Identity(h, h);
  cov_hh_llt_.compute(cov_hh_);
  if (cov_hh_llt_.info() != Eigen::Success) {
    throw NumericalFailure("BatchPosterior: hallucinated covariance is not positive definite");
  }
}

void BatchPosterior::hallucinate(const LatentPoint2D& x) {
  pending_.push_back(x);
  refactor();
}

Prediction BatchPosterior::predict(const LatentPoint2D& x) const {
  Prediction p = model_->predict(x);
  if (pending_.empty()) return p;
  const Eigen::VectorXd c = posterior_cov(x);
  p.sigma2 = std::max(0.0, p.sigma2 - c.dot(cov_hh_llt_.solve(c)));
  return p;
}

PredictionGradient BatchPosterior::predict_with_gradient(const LatentPoint2D& x) const {
  PredictionGradient p = model_->predict_with_gradient(x);
  if (pending_.empty()) return p;
  const KernelConfig& kernel = model_->kernel();
  const Eigen::VectorXd c = posterior_cov(x);
  Eigen::Matrix<double, Eigen::Dynamic, 2> dc = kernel_jacobian(kernel, x, pending_);
  if (!model_->support().empty()) {
    dc.noalias() -= corr_kxh_.transpose() * kernel_jacobian(kernel, x, model_->support());
  }
  const Eigen::VectorXd w = cov_hh_llt_.solve(c);
  p.sigma2 -= c.dot(w);
  p.dsigma2 -= 2.0 * dc.transpose() * w;
  if (p.sigma2 < 0.0) {
    p.sigma2 = 0.0;
    p.dsigma2.setZero();
  }
  return p;
}

void BatchPosterior::predict_many(std::span<const LatentPoint2D> points, Eigen::VectorXd& mu,
                                  Eigen::VectorXd& sigma2) const {
  kernels::PredictionBatch base = kernels::omp::predict_many(*model_, points);
  mu = std::move(base.mu);
  sigma2 = std::move(base.sigma2);
  if (pending_.empty() || points.empty()) return;
  const KernelConfig& kernel = model_->kernel();
  Eigen::MatrixXd c = kernels::omp::cross_matrix(kernel, pending_, points);
  if (!model_->support().empty()) {
    c.noalias() -= corr_kxh_.transpose() * kernels::omp::cross_matrix(kernel, model_->support(), points);
  }
  const Eigen::MatrixXd w = cov_hh_llt_.solve(c);
  sigma2 -= c.cwiseProduct(w).colwise().sum().transpose();
  sigma2 = sigma2.cwiseMax(0.0);
}

void BatchPosterior::predict_many(const GridCache& grid, Eigen::VectorXd& mu, Eigen::VectorXd& sigma2) const {
  mu = grid.base_mu;
  sigma2 = grid.base_sigma2;
  if (pending_.empty() || grid.points.empty()) return;
  Eigen::MatrixXd c = kernels::omp::cross_matrix(model_->kernel(), pending_, grid.points);
  if (!model_->support().empty()) c.noalias() -= corr_kxh_.transpose() * grid.ks;
  const Eigen::MatrixXd w = cov_hh_llt_.solve(c);
  sigma2 -= c.cwiseProduct(w).colwise().sum().transpose();
  sigma2 = sigma2.cwiseMax(0.0);
}

GridCache make_grid_cache(const GoodnessModel& model, const AcquisitionConfig& config) {
  GridCache g;
  g.points = kernels::grid_points(config.bounds, config.grid);
  kernels::PredictionBatch base = kernels::omp::predict_many(model, g.points);
  g.base_mu = std::move(base.mu);
  g.base_sigma2 = std::move(base.sigma2);
  if (!model.support().empty()) g.ks = kernels::omp::cross_matrix(model.kernel(), model.support(), g.points);
  return g;
}

double BatchPosterior::ucb(const LatentPoint2D& x, double beta) const {
  const Prediction p = predict(x);
  return p.mu + beta * std::sqrt(p.sigma2);
}

namespace {

struct Scored {
  LatentPoint2D x;
  double value;
};

double ucb_of(const PredictionGradient& p, double beta) { return p.mu + beta * std::sqrt(p.sigma2); }

Scored ascend(const BatchPosterior& post, const AcquisitionConfig& cfg, LatentPoint2D x) {
  const Bounds& b = cfg.bounds;
  const double extent = std::max(b.z1.width(), b.z2.width());
  PredictionGradient gx = post.predict_with_gradient(x);
  double fx = ucb_of(gx, cfg.beta);
  double step = 0.05 * extent;
  for (int it = 0; it < 300 && step > 1e-7 * extent; ++it) {
    Eigen::Vector2d grad = gx.dmu;
    if (gx.sigma2 > 1e-14) grad += cfg.beta * gx.dsigma2 / (2.0 * std::sqrt(gx.sigma2));
    const double norm = grad.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    const LatentPoint2D y = b.clamp({x.z1 + step * grad(0) / norm, x.z2 + step * grad(1) / norm});
    PredictionGradient gy = post.predict_with_gradient(y);
    const double fy = ucb_of(gy, cfg.beta);
    if (fy > fx) {
      x = y;
      gx = std::move(gy);
      fx = fy;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return {x, fx};
}

} // namespace

LatentPoint2D maximize_ucb(const BatchPosterior& posterior, const AcquisitionConfig& config, std::uint64_t seed) {
  config.validate();
  return maximize_ucb(posterior, config, make_grid_cache(posterior.model(), config), seed);
}

LatentPoint2D maximize_ucb(const BatchPosterior& posterior, const AcquisitionConfig& config, const GridCache& cache,
                           std::uint64_t seed) {
  const std::vector<LatentPoint2D>& grid = cache.points;
  Eigen::VectorXd mu, s2;
  posterior.predict_many(cache, mu, s2);
  const Eigen::VectorXd score = mu + config.beta * s2.cwiseSqrt();

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t top = std::min(config.grid_starts, grid.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = score(static_cast<Eigen::Index>(a));
                      const double sb = score(static_cast<Eigen::Index>(b));
                      return sa > sb || (sa == sb && a < b);
                    });

  std::vector<LatentPoint2D> starts;
  for (std::size_t i = 0; i < top; ++i) starts.push_back(grid[order[i]]);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u1(config.bounds.z1.lo, config.bounds.z1.hi);
  std::uniform_real_distribution<double> u2(config.bounds.z2.lo, config.bounds.z2.hi);
  for (std::size_t i = 0; i < config.random_starts; ++i) {
    const double a = u1(rng);
    starts.push_back({a, u2(rng)});
  }

  Scored best{grid[order[0]], score(static_cast<Eigen::Index>(order[0]))};
  for (const LatentPoint2D& s : starts) {
    const Scored r = ascend(posterior, config, s);
    if (r.value > best.value) best = r;
  }
  if (!config.bounds.contains(best.x)) {
    spdlog::warn("maximize_ucb: optimum ({}, {}) left the bounds, clamping", best.x.z1, best.x.z2);
    best.x = config.bounds.clamp(best.x);
  }
  return best.x;
}

std::vector<LatentPoint2D> sample_batch(const GoodnessModel& model, const AcquisitionConfig& config,
                                        std::uint64_t seed) {
  config.validate();
  BatchPosterior post(model);
  const GridCache cache = make_grid_cache(model, config);
  std::mt19937_64 rng(seed);
  std::vector<LatentPoint2D> out;
  out.reserve(config.batch_k);
  for (std::size_t i = 0; i < config.batch_k; ++i) {
    const LatentPoint2D x = maximize_ucb(post, config, cache, rng());
    out.push_back(x);
    if (i + 1 < config.batch_k) post.hallucinate(x);
  }
  return out;
}

} // namespace bogen
