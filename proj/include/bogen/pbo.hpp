#pragma once

#include "bogen/kernel.hpp"
#include "bogen/latent.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <set>
#include <span>
#include <vector>

namespace bogen {

/// One choice event: the preferred point beat every point in others.
struct PreferenceObservation {
  std::size_t preferred = 0;
  std::vector<std::size_t> others;

  bool operator==(const PreferenceObservation&) const = default;
};

/// Index-stable registry of map points plus the observations over them.
class PreferenceDataset {
public:
  /// Points registered within merge_radius of an existing point reuse its
  /// index, which keeps the GP Gram matrix well conditioned.
  explicit PreferenceDataset(double merge_radius = 1e-3) : merge_radius_(merge_radius) {}

  std::size_t register_point(const LatentPoint2D& p);
  /// Throws InvalidArgument if the observation is malformed or references
  /// unregistered points.
  void add_observation(PreferenceObservation obs);

  const std::vector<LatentPoint2D>& points() const { return points_; }
  const std::vector<PreferenceObservation>& observations() const { return observations_; }
  double merge_radius() const { return merge_radius_; }
  bool empty() const { return observations_.empty(); }

  bool operator==(const PreferenceDataset&) const = default;

private:
  double merge_radius_;
  std::vector<LatentPoint2D> points_;
  std::vector<PreferenceObservation> observations_;
};

/// Bradley-Terry-Luce choice probability exp(g_pref) / sum_j exp(g_j) over
/// {preferred} + others, evaluated with log-sum-exp.
double btl_probability(const PreferenceObservation& d, std::span<const double> g);
double btl_log_probability(const PreferenceObservation& d, std::span<const double> g);

struct Prediction {
  double mu = 0.0;
  double sigma2 = 0.0;
};

struct PredictionGradient {
  double mu = 0.0;
  double sigma2 = 0.0;
  Eigen::Vector2d dmu = Eigen::Vector2d::Zero();
  Eigen::Vector2d dsigma2 = Eigen::Vector2d::Zero();
};

struct FitOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 100;
};

/// Laplace-approximated GP posterior over the goodness function.
///
/// With f = g - prior_mean and the mode written as f = K a, the predictive is
///   mu(x)     = prior_mean + k(x)' a
///   sigma2(x) = k(x,x) - k(x)' M k(x),   M = (I + W K)^-1 W = (K + W^-1)^-1
/// where W is the BTL negative log-likelihood Hessian at the mode.
class GoodnessModel {
public:
  /// Unfitted model; predict() throws StateError.
  GoodnessModel() = default;
  /// Posterior with no data: the GP prior itself.
  static GoodnessModel prior(const KernelConfig& kernel);

  bool fitted() const { return fitted_; }
  Prediction predict(const LatentPoint2D& x) const;
  PredictionGradient predict_with_gradient(const LatentPoint2D& x) const;

  const KernelConfig& kernel() const { return kernel_; }
  const std::vector<LatentPoint2D>& support() const { return support_; }
  const Eigen::VectorXd& g_map() const { return g_map_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  /// Gram matrix of the support including the jitter that was needed.
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::MatrixXd& hessian() const { return hessian_; }
  const Eigen::MatrixXd& variance_correction() const { return correction_; }
  double jitter() const { return jitter_; }
  int iterations() const { return iterations_; }
  double gradient_norm() const { return gradient_norm_; }

private:
  friend GoodnessModel fit_map(const PreferenceDataset&, const KernelConfig&, const FitOptions&);

  bool fitted_ = false;
  KernelConfig kernel_;
  std::vector<LatentPoint2D> support_;
  Eigen::VectorXd g_map_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd hessian_;
  Eigen::MatrixXd correction_;
  double jitter_ = 0.0;
  int iterations_ = 0;
  double gradient_norm_ = 0.0;
};

/// MAP estimate of the goodness values by Newton's method on the (convex)
/// negative log posterior. Throws InvalidArgument for an empty dataset and
/// NumericalFailure if the Gram matrix stays indefinite after jitter 1e-5.
GoodnessModel fit_map(const PreferenceDataset& dataset, const KernelConfig& kernel, const FitOptions& options = {});

/// Unnormalized log posterior log P(D|g) + log P(g) of goodness values at the
/// dataset points, using the fitted model's Gram matrix (jitter included).
double log_posterior(const PreferenceDataset& dataset, const GoodnessModel& model, const Eigen::VectorXd& g);
Eigen::VectorXd log_posterior_gradient(const PreferenceDataset& dataset, const GoodnessModel& model,
                                       const Eigen::VectorXd& g);

/// GP-UCB acquisition mu(x) + beta * sigma(x).
double ucb(const GoodnessModel& model, const LatentPoint2D& x, double beta);

/// A card as the preference bookkeeping sees it.
struct CardPoint {
  std::uint64_t card_id = 0;
  LatentPoint2D latent;
  std::vector<std::uint64_t> parents; // synthesis parents, if any
};

enum class PreferenceKind { mark_preferred, request_suggestions };

/// A preference-bearing session event, resolved against the card registry.
struct PreferenceEvent {
  PreferenceKind kind = PreferenceKind::mark_preferred;
  CardPoint chosen;
  std::vector<CardPoint> displayed;
};

/// Bookkeeping that persists between updates.
struct PreferenceBook {
  /// Cards ever used as the preferred design; they never become others again.
  std::set<std::uint64_t> preferred_cards;
  /// Raw acquisition samples of the last batch, waiting to be used as others.
  std::vector<LatentPoint2D> pending_raw_samples;
  /// Registry indices of raw samples that were already used once.
  std::vector<std::size_t> consumed_raw_indices;

  bool operator==(const PreferenceBook&) const = default;
};

/// One multi-way observation per event: the chosen card against every
/// displayed card except itself, its synthesis parents and any previously
/// preferred card. Pending raw samples are appended to the first new
/// observation as others and then marked consumed.
PreferenceDataset update_from_events(const PreferenceDataset& dataset, PreferenceBook& book,
                                     std::span<const PreferenceEvent> events);

} // namespace bogen
