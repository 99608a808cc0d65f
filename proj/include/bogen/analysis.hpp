#pragma once

#include "bogen/metrics.hpp"
#include "bogen/session.hpp"

namespace bogen {

struct AnalysisOptions {
  ClusteringConfig clustering{};
  /// Recompute epsilon from this session's own k-distance elbow instead of
  /// using clustering.epsilon.
  bool per_session_epsilon = false;
  FitOptions fit{};
};

/// Offline metrics for one session. Walks the timeline: preferences queue up
/// and each flush consumes them into the dataset, refits, and records the mean
/// uncertainty over landmarks plus the points explored so far. The same walk
/// runs for both modes, so a uionly session gets shadow fits that never
/// touched the live session.
SessionMetrics analyze_session(const SessionRecord& record, const AnalysisOptions& options = {});

} // namespace bogen
