#include "bogen/pbo.hpp"

#include "bogen/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bogen {

std::size_t PreferenceDataset::register_point(const LatentPoint2D& p) {
  if (!std::isfinite(p.z1) || !std::isfinite(p.z2)) {
    throw InvalidArgument("register_point: non-finite latent");
  }
  const double r2 = merge_radius_ * merge_radius_;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (squared_distance(points_[i], p) <= r2) return i;
  }
  points_.push_back(p);
  return points_.size() - 1;
}

void PreferenceDataset::add_observation(PreferenceObservation obs) {
  if (obs.others.empty()) {
    throw InvalidArgument("observation needs at least one other point");
  }
  const std::size_t n = points_.size();
  if (obs.preferred >= n) {
    throw InvalidArgument("observation references unregistered point " + std::to_string(obs.preferred));
  }
  for (std::size_t j : obs.others) {
    if (j >= n) throw InvalidArgument("observation references unregistered point " + std::to_string(j));
    if (j == obs.preferred) throw InvalidArgument("preferred point also listed among others");
  }
  observations_.push_back(std::move(obs));
}

namespace {

double value_at(std::span<const double> g, std::size_t i) {
  if (i >= g.size()) {
    throw InvalidArgument("btl: goodness undefined for point " + std::to_string(i));
  }
  return g[i];
}

double log_sum_exp(const PreferenceObservation& d, std::span<const double> g) {
  double hi = value_at(g, d.preferred);
  for (std::size_t j : d.others) hi = std::max(hi, value_at(g, j));
  double s = std::exp(g[d.preferred] - hi);
  for (std::size_t j : d.others) s += std::exp(g[j] - hi);
  return hi + std::log(s);
}

struct Likelihood {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd neg_hessian;
};

// Log-likelihood of all observations with gradient and negative Hessian
// W = sum_d (diag(s_d) - s_d s_d') over each observation's index set.
Likelihood btl_likelihood(const std::vector<PreferenceObservation>& obs, const Eigen::VectorXd& g) {
  const Eigen::Index n = g.size();
  Likelihood out;
  out.gradient = Eigen::VectorXd::Zero(n);
  out.neg_hessian = Eigen::MatrixXd::Zero(n, n);
  std::span<const double> gs(g.data(), static_cast<std::size_t>(n));
  std::vector<std::size_t> set;
  std::vector<double> prob;
  for (const auto& d : obs) {
    const double lse = log_sum_exp(d, gs);
    out.value += g(static_cast<Eigen::Index>(d.preferred)) - lse;
    set.assign(1, d.preferred);
    set.insert(set.end(), d.others.begin(), d.others.end());
    prob.resize(set.size());
    for (std::size_t a = 0; a < set.size(); ++a) prob[a] = std::exp(gs[set[a]] - lse);
    out.gradient(static_cast<Eigen::Index>(d.preferred)) += 1.0;
    for (std::size_t a = 0; a < set.size(); ++a) {
      const auto ia = static_cast<Eigen::Index>(set[a]);
      out.gradient(ia) -= prob[a];
      out.neg_hessian(ia, ia) += prob[a];
      for (std::size_t b = 0; b < set.size(); ++b) {
        out.neg_hessian(ia, static_cast<Eigen::Index>(set[b])) -= prob[a] * prob[b];
      }
    }
  }
  return out;
}

} // namespace

double btl_log_probability(const PreferenceObservation& d, std::span<const double> g) {
  return value_at(g, d.preferred) - log_sum_exp(d, g);
}

double btl_probability(const PreferenceObservation& d, std::span<const double> g) {
  return std::exp(btl_log_probability(d, g));
}

GoodnessModel GoodnessModel::prior(const KernelConfig& kernel) {
  kernel.validate();
  GoodnessModel m;
  m.fitted_ = true;
  m.kernel_ = kernel;
  return m;
}

Prediction GoodnessModel::predict(const LatentPoint2D& x) const {
  if (!fitted_) {
    throw StateError("predict: model is not fitted");
  }
  Prediction p{kernel_.prior_mean, kernel_.signal_variance};
  if (support_.empty()) return p;
  const Eigen::VectorXd k = cross_covariance(kernel_, support_, x);
  p.mu += k.dot(alpha_);
  p.sigma2 -= k.dot(correction_ * k);
  if (p.sigma2 < 0.0) {
    if (p.sigma2 < -1e-9) {
      spdlog::warn("predict: negative predictive variance {:.3e} clamped to 0", p.sigma2);
    }
    p.sigma2 = 0.0;
  }
  return p;
}

PredictionGradient GoodnessModel::predict_with_gradient(const LatentPoint2D& x) const {
  if (!fitted_) {
    throw StateError("predict: model is not fitted");
  }
  PredictionGradient p;
  p.mu = kernel_.prior_mean;
  p.sigma2 = kernel_.signal_variance;
  if (support_.empty()) return p;
  const auto n = static_cast<Eigen::Index>(support_.size());
  Eigen::VectorXd k(n);
  Eigen::Matrix<double, Eigen::Dynamic, 2> jac(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i) = kernel_(x, support_[static_cast<std::size_t>(i)]);
    jac.row(i) = kernel_.gradient(x, support_[static_cast<std::size_t>(i)]).transpose();
  }
  const Eigen::VectorXd mk = correction_ * k;
  p.mu += k.dot(alpha_);
  p.sigma2 -= k.dot(mk);
  p.dmu = jac.transpose() * alpha_;
  p.dsigma2 = -2.0 * jac.transpose() * mk;
  if (p.sigma2 < 0.0) {
    p.sigma2 = 0.0;
    p.dsigma2.setZero();
  }
  return p;
}

GoodnessModel fit_map(const PreferenceDataset& dataset, const KernelConfig& kernel, const FitOptions& options) {
  kernel.validate();
  if (dataset.empty()) {
    throw InvalidArgument("fit_map: dataset has no observations");
  }
  const auto& pts = dataset.points();
  const auto n = static_cast<Eigen::Index>(pts.size());
  const Eigen::MatrixXd k0 = gram_matrix(kernel, pts);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

  // Smallest jitter in 1e-9 .. 1e-5 (relative to the signal variance) that
  // makes the Gram matrix numerically positive definite.
  double jitter = 0.0;
  Eigen::MatrixXd k;
  for (double rel = 1e-9;; rel *= 10.0) {
    if (rel > 1e-5 * 1.0001) {
      throw NumericalFailure("fit_map: Gram matrix not positive definite after jitter 1e-5");
    }
    jitter = rel * kernel.signal_variance;
    k = k0 + jitter * eye;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success) break;
    spdlog::warn("fit_map: escalating jitter past {:.0e}", jitter);
  }

  auto objective = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& f) {
    const Likelihood l = btl_likelihood(dataset.observations(), f);
    return l.value - 0.5 * a.dot(f);
  };

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  double psi = objective(a, f);
  Likelihood lik = btl_likelihood(dataset.observations(), f);
  double grad_norm = (lik.gradient - a).cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < options.max_iterations && grad_norm >= options.gradient_tolerance; ++it) {
    const Eigen::VectorXd b = lik.neg_hessian * f + lik.gradient;
    const Eigen::VectorXd a_newton = (eye + lik.neg_hessian * k).partialPivLu().solve(b);
    const Eigen::VectorXd step = a_newton - a;

    double t = 1.0;
    Eigen::VectorXd a_next, f_next;
    double psi_next = -std::numeric_limits<double>::infinity();
    for (int halvings = 0; halvings < 40; ++halvings, t *= 0.5) {
      a_next = a + t * step;
      f_next = k * a_next;
      psi_next = objective(a_next, f_next);
      if (psi_next >= psi - 1e-12 * std::abs(psi)) break;
    }
    a = std::move(a_next);
    f = std::move(f_next);
    psi = psi_next;
    lik = btl_likelihood(dataset.observations(), f);
    grad_norm = (lik.gradient - a).cwiseAbs().maxCoeff();
  }
  if (grad_norm >= options.gradient_tolerance) {
    spdlog::warn("fit_map: stopped after {} iterations with gradient norm {:.3e}", it, grad_norm);
  }

  GoodnessModel m;
  m.fitted_ = true;
  m.kernel_ = kernel;
  m.support_ = pts;
  m.alpha_ = a;
  m.g_map_ = f.array() + kernel.prior_mean;
  m.gram_ = std::move(k);
  m.hessian_ = lik.neg_hessian;
  Eigen::MatrixXd corr = (eye + m.hessian_ * m.gram_).partialPivLu().solve(m.hessian_);
  m.correction_ = 0.5 * (corr + corr.transpose());
  m.jitter_ = jitter;
  m.iterations_ = it;
  m.gradient_norm_ = grad_norm;
  return m;
}

namespace {

void check_posterior_args(const PreferenceDataset& dataset, const GoodnessModel& model, const Eigen::VectorXd& g) {
  if (!model.fitted() || model.support().size() != dataset.points().size()) {
    throw InvalidArgument("log_posterior: model was not fitted on this dataset");
  }
  if (g.size() != static_cast<Eigen::Index>(dataset.points().size())) {
    throw InvalidArgument("log_posterior: goodness vector has wrong size");
  }
}

} // namespace

double log_posterior(const PreferenceDataset& dataset, const GoodnessModel& model, const Eigen::VectorXd& g) {
  check_posterior_args(dataset, model, g);
  const Eigen::VectorXd f = g.array() - model.kernel().prior_mean;
  const Eigen::VectorXd a = model.gram().llt().solve(f);
  return btl_likelihood(dataset.observations(), g).value - 0.5 * f.dot(a);
}

Eigen::VectorXd log_posterior_gradient(const PreferenceDataset& dataset, const GoodnessModel& model,
                                       const Eigen::VectorXd& g) {
  check_posterior_args(dataset, model, g);
  const Eigen::VectorXd f = g.array() - model.kernel().prior_mean;
  return btl_likelihood(dataset.observations(), g).gradient - model.gram().llt().solve(f);
}

double ucb(const GoodnessModel& model, const LatentPoint2D& x, double beta) {
  if (beta < 0.0) {
    throw InvalidArgument("ucb: beta must be >= 0");
  }
  const Prediction p = model.predict(x);
  return p.mu + beta * std::sqrt(p.sigma2);
}

PreferenceDataset update_from_events(const PreferenceDataset& dataset, PreferenceBook& book,
                                     std::span<const PreferenceEvent> events) {
  PreferenceDataset out = dataset;
  bool raw_pending = !book.pending_raw_samples.empty();
  for (const PreferenceEvent& e : events) {
    std::set<std::uint64_t> excluded = book.preferred_cards;
    excluded.insert(e.chosen.card_id);
    excluded.insert(e.chosen.parents.begin(), e.chosen.parents.end());

    PreferenceObservation obs;
    obs.preferred = out.register_point(e.chosen.latent);
    std::vector<std::size_t> others;
    for (const CardPoint& c : e.displayed) {
      if (excluded.contains(c.card_id)) continue;
      others.push_back(out.register_point(c.latent));
    }
    std::vector<std::size_t> raw_indices;
    if (raw_pending) {
      for (const auto& p : book.pending_raw_samples) {
        raw_indices.push_back(out.register_point(p));
      }
      others.insert(others.end(), raw_indices.begin(), raw_indices.end());
    }
    // Distinct cards can share a registry slot; keep each index once.
    std::vector<std::size_t> unique;
    for (std::size_t j : others) {
      if (j != obs.preferred && std::find(unique.begin(), unique.end(), j) == unique.end()) unique.push_back(j);
    }
    obs.others = std::move(unique);
    book.preferred_cards.insert(e.chosen.card_id);
    if (obs.others.empty()) {
      spdlog::warn("update_from_events: card {} has no comparable others, no observation added", e.chosen.card_id);
      continue;
    }
    out.add_observation(std::move(obs));
    if (raw_pending) {
      book.consumed_raw_indices.insert(book.consumed_raw_indices.end(), raw_indices.begin(), raw_indices.end());
      book.pending_raw_samples.clear();
      raw_pending = false;
    }
  }
  return out;
}

} // namespace bogen
