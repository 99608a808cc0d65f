#include "bogen/analysis.hpp"

#include "bogen/error.hpp"

#include <spdlog/spdlog.h>

namespace bogen {

SessionMetrics analyze_session(const SessionRecord& record, const AnalysisOptions& options) {
  options.clustering.validate();
  record.kernel.validate();

  SessionMetrics out;
  PreferenceDataset dataset;
  PreferenceBook book;
  std::vector<PreferenceEvent> pending;
  std::vector<ProbabilityEntry> history;
  auto model = std::make_shared<const GoodnessModel>(GoodnessModel::prior(record.kernel));

  std::vector<LatentPoint2D> space = record.landmarks;
  std::size_t explored_in_space = 0;

  for (const TimelineEntry& e : record.timeline) {
    if (e.type == TimelineEntry::Type::preference) {
      pending.push_back(e.preference);
      continue;
    }
    if (e.explored_count > record.explored.size()) {
      throw InvalidData("analysis: flush refers to more explored points than recorded");
    }
    if (!pending.empty()) {
      for (const PreferenceEvent& p : pending) history.push_back({model, p.chosen.latent});
      const std::size_t before = dataset.observations().size();
      dataset = update_from_events(dataset, book, pending);
      pending.clear();
      if (dataset.observations().size() != before) {
        model = std::make_shared<const GoodnessModel>(fit_map(dataset, record.kernel, options.fit));
      }
    }
    if (!e.raw_samples.empty()) book.pending_raw_samples = e.raw_samples;
    for (; explored_in_space < e.explored_count; ++explored_in_space) {
      space.push_back(record.explored[explored_in_space]);
    }
    if (!space.empty()) out.mean_uncertainty_series.push_back(mean_uncertainty(*model, space));
  }

  out.mean_probability = mean_probability(history);
  out.explored_points = record.explored.size();
  out.explored_area = explored_area(record.explored);

  ClusteringConfig cc = options.clustering;
  if (options.per_session_epsilon) {
    if (record.explored.size() > cc.min_pts) {
      const ElbowResult elbow = elbow_epsilon(record.explored, cc.min_pts, cc.curvature_ceiling);
      if (elbow.degenerate) {
        spdlog::warn("analysis: degenerate k-distance curve, keeping epsilon {}", cc.epsilon);
      } else {
        cc.epsilon = elbow.epsilon;
      }
    } else {
      spdlog::warn("analysis: too few explored points for an elbow, keeping epsilon {}", cc.epsilon);
    }
  }
  out.epsilon_used = cc.epsilon;
  out.cluster_count = record.explored.empty() ? 0 : cluster_count(record.explored, cc).count;
  return out;
}

} // namespace bogen
