#pragma once

#include "bogen/latent.hpp"
#include "bogen/pbo.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace bogen {

struct ClusteringConfig {
  double epsilon = 0.039;
  std::size_t min_pts = 3;
  double curvature_ceiling = 0.05;

  /// Throws ConfigError unless epsilon > 0 and min_pts >= 1.
  void validate() const;
};

/// Mean predictive variance over the information space (landmarks plus
/// every user-generated point). Throws InvalidArgument if it is empty.
double mean_uncertainty(const GoodnessModel& model, std::span<const LatentPoint2D> space);

/// A preferred point paired with the model as it stood just before the
/// update that consumed it.
struct ProbabilityEntry {
  std::shared_ptr<const GoodnessModel> model_before;
  LatentPoint2D point;
};

struct MeanProbability {
  double value = 0.0;
  bool empty = true; // no preferences yet; value is 0 by definition
};

/// Mean of the pre-update mu at each preferred point. This is a raw GP mean,
/// not a normalized probability.
MeanProbability mean_probability(std::span<const ProbabilityEntry> history);

/// Convex hull (monotone chain), counter-clockwise, no collinear points.
std::vector<LatentPoint2D> convex_hull(std::span<const LatentPoint2D> points);
/// Shoelace area of the convex hull; 0 for fewer than 3 non-collinear points.
double explored_area(std::span<const LatentPoint2D> points);

struct ElbowResult {
  double epsilon = 0.0;
  std::size_t index = 0;       // position on the sorted k-distance curve
  double curvature = 0.0;
  bool degenerate = false;     // every k-distance is zero
  bool used_fallback = false;  // no point passed the curvature ceiling
};

/// Sorted k-distance curve (k = min_pts, self excluded), normalized to the
/// unit square; curvature from central differences. Picks the largest
/// curvature not above the ceiling (ties to the lowest index), else the
/// global maximum. Throws InvalidArgument with fewer than min_pts + 1 points.
ElbowResult elbow_epsilon(std::span<const LatentPoint2D> points, std::size_t min_pts,
                          double curvature_ceiling = 0.05);

struct ClusterResult {
  std::size_t count = 0;
  std::vector<int> labels; // -1 for noise, in input order
};

/// DBSCAN. A point is core when at least min_pts points (itself included) lie
/// within epsilon. Points are visited in lexicographic (z1, z2) order so the
/// partition does not depend on input order.
ClusterResult cluster_count(std::span<const LatentPoint2D> points, const ClusteringConfig& config = {});

/// Per-session metrics report.
struct SessionMetrics {
  std::vector<double> mean_uncertainty_series; // one value per flush point
  MeanProbability mean_probability;
  double explored_area = 0.0;
  std::size_t cluster_count = 0;
  double epsilon_used = 0.0;
  std::size_t explored_points = 0;
};

nlohmann::json to_json(const SessionMetrics& m);
void write_metrics_json(const SessionMetrics& m, const std::filesystem::path& path);
/// CSV time series: step,mean_uncertainty.
void write_metrics_csv(const SessionMetrics& m, const std::filesystem::path& path);

} // namespace bogen
