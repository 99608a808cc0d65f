#include "bogen/landmarks.hpp"

#include "bogen/error.hpp"
#include "bogen/kernels.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <limits>
#include <random>

namespace bogen {

std::vector<LatentPoint2D> LandmarkSet::points() const {
  std::vector<LatentPoint2D> out;
  out.reserve(landmarks.size());
  for (const auto& l : landmarks) out.push_back(l.point);
  return out;
}

LandmarkSet select_landmarks(std::span<const LatentPoint2D> map_points, std::span<const std::string> ids,
                             std::size_t k, std::uint64_t seed) {
  const std::size_t n = map_points.size();
  if (ids.size() != n) {
    throw InvalidArgument("select_landmarks: ids and points differ in length");
  }
  if (k == 0 || k > n) {
    throw InvalidArgument("select_landmarks: k must be in 1.." + std::to_string(n) + ", got " + std::to_string(k));
  }
  std::mt19937_64 rng(seed);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  LandmarkSet out;
  out.seed = seed;

  auto take = [&](std::size_t i) {
    taken[i] = 1;
    out.landmarks.push_back({map_points[i], ids[i], i});
    kernels::omp::update_min_distances(map_points, map_points[i], d2);
  };

  take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  while (out.landmarks.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      std::size_t last = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || d2[i] <= 0.0) continue;
        last = i;
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last; // rounding at the tail
    } else {
      std::size_t free = 0;
      for (char t : taken) free += t ? 0 : 1;
      std::size_t r = std::uniform_int_distribution<std::size_t>(0, free - 1)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (r-- == 0) {
          pick = i;
          break;
        }
      }
    }
    take(pick);
  }
  return out;
}

void save_landmarks(const LandmarkSet& set, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "bogen-landmarks";
  j["version"] = 1;
  j["seed"] = set.seed;
  j["landmarks"] = nlohmann::json::array();
  for (const auto& l : set.landmarks) {
    j["landmarks"].push_back({{"id", l.shape_id}, {"index", l.corpus_index}, {"z1", l.point.z1}, {"z2", l.point.z2}});
  }
  std::ofstream out(path);
  if (!out) throw FileError(path.string(), "cannot open for writing");
  out << j.dump(1) << '\n';
  if (!out) throw FileError(path.string(), "write failed");
}

LandmarkSet load_landmarks(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifact(path.string());
  std::ifstream in(path);
  if (!in) throw FileError(path.string(), "cannot open for reading");
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "bogen-landmarks") throw FileError(path.string(), "not a landmarks file");
    LandmarkSet s;
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& l : j.at("landmarks")) {
      s.landmarks.push_back({{l.at("z1").get<double>(), l.at("z2").get<double>()},
                             l.at("id").get<std::string>(),
                             l.at("index").get<std::size_t>()});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FileError(path.string(), std::string("malformed landmarks file (") + e.what() + ")");
  }
}

} // namespace bogen
