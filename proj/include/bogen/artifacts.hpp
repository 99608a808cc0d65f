#pragma once

#include "bogen/corpus.hpp"
#include "bogen/landmarks.hpp"
#include "bogen/vae.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace bogen {

/// Everything a session needs from the offline pipeline. Immutable once built
/// and shared by all sessions.
struct Artifacts {
  Corpus corpus;
  VaeModel vae;
  LandmarkSet landmarks;
  /// Map position of every corpus shape (encoder mean).
  std::vector<LatentPoint2D> corpus_latents;
  /// Corpus indices per tag, ascending.
  std::map<std::string, std::vector<std::size_t>> tag_index;
  /// Mean map position of each tag's shapes.
  std::map<std::string, LatentPoint2D> tag_centroids;

  const ShapeExtrinsic* find_shape(const std::string& id) const;
};

std::shared_ptr<const Artifacts> make_artifacts(Corpus corpus, VaeModel vae, LandmarkSet landmarks);

struct ArtifactPaths {
  std::filesystem::path corpus;
  std::filesystem::path vae;
  std::filesystem::path landmarks;
};

/// Throws MissingArtifact naming the first absent file.
std::shared_ptr<const Artifacts> load_artifacts(const ArtifactPaths& paths);

/// Whole offline pipeline in memory: generate the corpus, train the VAE, pick
/// landmarks. Used by tests and the simulation harness.
struct PipelineOptions {
  std::size_t corpus_size = 5000;
  std::uint64_t corpus_seed = 1;
  VaeHyperparams vae{};
  std::size_t landmark_count = 500;
  std::uint64_t landmark_seed = 1;
};

std::shared_ptr<const Artifacts> build_artifacts(const PipelineOptions& options);

} // namespace bogen
