#include "bogen/metrics.hpp"

#include "bogen/error.hpp"
#include "bogen/kernels.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>

namespace bogen {

void ClusteringConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("clustering: epsilon must be > 0");
  if (min_pts < 1) throw ConfigError("clustering: min_pts must be >= 1");
}

double mean_uncertainty(const GoodnessModel& model, std::span<const LatentPoint2D> space) {
  if (space.empty()) {
    throw InvalidArgument("mean_uncertainty: information space is empty");
  }
  return kernels::omp::predict_many(model, space).sigma2.mean();
}

MeanProbability mean_probability(std::span<const ProbabilityEntry> history) {
  MeanProbability out;
  if (history.empty()) return out;
  double total = 0.0;
  for (const auto& e : history) {
    if (!e.model_before) throw InvalidArgument("mean_probability: entry without a model");
    total += e.model_before->predict(e.point).mu;
  }
  out.value = total / static_cast<double>(history.size());
  out.empty = false;
  return out;
}

namespace {

double cross(const LatentPoint2D& o, const LatentPoint2D& a, const LatentPoint2D& b) {
  return (a.z1 - o.z1) * (b.z2 - o.z2) - (a.z2 - o.z2) * (b.z1 - o.z1);
}

} // namespace

std::vector<LatentPoint2D> convex_hull(std::span<const LatentPoint2D> points) {
  std::vector<LatentPoint2D> p(points.begin(), points.end());
  std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a.z1 < b.z1 || (a.z1 == b.z1 && a.z2 < b.z2); });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) return p;
  std::vector<LatentPoint2D> hull(2 * p.size());
  std::size_t k = 0;
  for (const auto& q : p) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], q) <= 0) --k;
    hull[k++] = q;
  }
  for (std::size_t i = p.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
    hull[k++] = p[i];
  }
  hull.resize(k - 1);
  return hull;
}

double explored_area(std::span<const LatentPoint2D> points) {
  const auto hull = convex_hull(points);
  if (hull.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    twice += a.z1 * b.z2 - b.z1 * a.z2;
  }
  return 0.5 * std::abs(twice);
}

ElbowResult elbow_epsilon(std::span<const LatentPoint2D> points, std::size_t min_pts, double curvature_ceiling) {
  if (min_pts < 1 || points.size() < min_pts + 1) {
    throw InvalidArgument("elbow_epsilon: need at least min_pts + 1 points");
  }
  std::vector<double> d = kernels::omp::k_distances(points, min_pts);
  std::sort(d.begin(), d.end());
  ElbowResult out;
  const double lo = d.front(), hi = d.back();
  if (hi <= 0.0) {
    out.degenerate = true;
    return out;
  }
  const std::size_t n = d.size();
  if (hi == lo || n < 3) {
    out.epsilon = d.front();
    return out;
  }
  const double h = 1.0 / static_cast<double>(n - 1);
  std::vector<double> kappa(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double y0 = (d[i - 1] - lo) / (hi - lo), y1 = (d[i] - lo) / (hi - lo), y2 = (d[i + 1] - lo) / (hi - lo);
    const double dy = (y2 - y0) / (2 * h);
    const double ddy = (y2 - 2 * y1 + y0) / (h * h);
    kappa[i] = std::abs(ddy) / std::pow(1.0 + dy * dy, 1.5);
  }
  std::size_t best = n, global = 1;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (kappa[i] > kappa[global]) global = i;
    if (kappa[i] <= curvature_ceiling && (best == n || kappa[i] > kappa[best])) best = i;
  }
  if (best == n) {
    best = global;
    out.used_fallback = true;
  }
  out.index = best;
  out.curvature = kappa[best];
  out.epsilon = d[best];
  return out;
}

ClusterResult cluster_count(std::span<const LatentPoint2D> points, const ClusteringConfig& config) {
  config.validate();
  const std::size_t n = points.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].z1 < points[b].z1 || (points[a].z1 == points[b].z1 && points[a].z2 < points[b].z2);
  });
  std::vector<LatentPoint2D> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = points[order[i]];

  const auto nbrs = kernels::omp::neighbor_lists(sorted, config.epsilon);
  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    if (nbrs[i].size() < config.min_pts) {
      label[i] = kNoise;
      continue;
    }
    const int c = next++;
    label[i] = c;
    std::deque<std::size_t> queue(nbrs[i].begin(), nbrs[i].end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (label[j] == kNoise) label[j] = c; // border point
      if (label[j] != kUnvisited) continue;
      label[j] = c;
      if (nbrs[j].size() >= config.min_pts) queue.insert(queue.end(), nbrs[j].begin(), nbrs[j].end());
    }
  }
  ClusterResult out;
  out.count = static_cast<std::size_t>(next);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[order[i]] = label[i];
  return out;
}

nlohmann::json to_json(const SessionMetrics& m) {
  nlohmann::json j;
  j["mean_uncertainty_series"] = m.mean_uncertainty_series;
  j["mean_uncertainty"] = m.mean_uncertainty_series.empty() ? nlohmann::json(nullptr)
                                                            : nlohmann::json(m.mean_uncertainty_series.back());
  j["mean_probability"] = m.mean_probability.value;
  j["mean_probability_empty"] = m.mean_probability.empty;
  j["explored_area"] = m.explored_area;
  j["cluster_count"] = m.cluster_count;
  j["epsilon_used"] = m.epsilon_used;
  j["explored_points"] = m.explored_points;
  return j;
}

void write_metrics_json(const SessionMetrics& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FileError(path.string(), "cannot open for writing");
  out << to_json(m).dump(2) << '\n';
}

void write_metrics_csv(const SessionMetrics& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FileError(path.string(), "cannot open for writing");
  out.precision(12);
  out << "step,mean_uncertainty\n";
  for (std::size_t i = 0; i < m.mean_uncertainty_series.size(); ++i) {
    out << i << ',' << m.mean_uncertainty_series[i] << '\n';
  }
}

} // namespace bogen
