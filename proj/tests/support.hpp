#pragma once

// Shared fixtures for the unit tests.

#include "bogen/artifacts.hpp"
#include "bogen/latent.hpp"
#include "bogen/pbo.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace bogen::testing {

inline LatentPoint2D random_point(std::mt19937_64& rng, const Bounds& b = {}) {
  std::uniform_real_distribution<double> u1(b.z1.lo, b.z1.hi), u2(b.z2.lo, b.z2.hi);
  const double a = u1(rng);
  return {a, u2(rng)};
}

/// Random dataset: n points spread over the default bounds, m observations of
/// 1..others_max others each.
inline PreferenceDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t m,
                                        std::size_t others_max = 4) {
  PreferenceDataset d;
  while (d.points().size() < n) d.register_point(random_point(rng));
  std::uniform_int_distribution<std::size_t> pick(0, d.points().size() - 1);
  std::uniform_int_distribution<std::size_t> count(1, others_max);
  for (std::size_t o = 0; o < m; ++o) {
    PreferenceObservation obs;
    obs.preferred = pick(rng);
    const std::size_t c = count(rng);
    while (obs.others.size() < c) {
      const std::size_t j = pick(rng);
      if (j != obs.preferred && std::find(obs.others.begin(), obs.others.end(), j) == obs.others.end()) {
        obs.others.push_back(j);
      }
    }
    d.add_observation(obs);
  }
  return d;
}

/// Small end-to-end pipeline shared by the session, service and simulation
/// tests. Built once per test binary.
inline std::shared_ptr<const Artifacts> small_artifacts() {
  static const std::shared_ptr<const Artifacts> a = [] {
    PipelineOptions o;
    o.corpus_size = 500;
    o.corpus_seed = 3;
    o.vae.epochs = 8;
    o.vae.seed = 3;
    o.landmark_count = 50;
    o.landmark_seed = 3;
    return build_artifacts(o);
  }();
  return a;
}

} // namespace bogen::testing
