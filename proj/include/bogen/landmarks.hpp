#pragma once

#include "bogen/latent.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bogen {

struct Landmark {
  LatentPoint2D point;
  std::string shape_id;
  std::size_t corpus_index = 0;

  bool operator==(const Landmark&) const = default;
};

/// Characteristic corpus points that seed the exploration map.
struct LandmarkSet {
  std::vector<Landmark> landmarks;
  std::uint64_t seed = 0;

  std::size_t size() const { return landmarks.size(); }
  std::vector<LatentPoint2D> points() const;
  bool operator==(const LandmarkSet&) const = default;
};

/// kmeans++ seeding (D^2 sampling) on the map: the first pick is uniform, each
/// further pick is drawn with probability proportional to its squared
/// distance to the nearest pick so far. Picks never repeat; once every
/// remaining point coincides with a pick the rest are drawn uniformly.
/// Throws InvalidArgument if k is 0 or exceeds the corpus.
LandmarkSet select_landmarks(std::span<const LatentPoint2D> map_points, std::span<const std::string> ids,
                             std::size_t k, std::uint64_t seed);

void save_landmarks(const LandmarkSet& set, const std::filesystem::path& path);
/// Throws MissingArtifact if absent and FileError if malformed.
LandmarkSet load_landmarks(const std::filesystem::path& path);

} // namespace bogen
