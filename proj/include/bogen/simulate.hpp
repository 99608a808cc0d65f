#pragma once

#include "bogen/analysis.hpp"
#include "bogen/session.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace bogen {

enum class UserPolicy { pbo_user, random_user };
std::string to_string(UserPolicy p);
/// Throws InvalidArgument for anything but "pbo_user" or "random_user".
UserPolicy parse_user_policy(const std::string& s);

/// Stand-in participant with a hidden target on the map. Chooses only among
/// the cards on screen: softmax(-distance / noise_temp) for pbo_user, uniform
/// for random_user.
class SimulatedUser {
public:
  SimulatedUser(LatentPoint2D target, double noise_temp, UserPolicy policy, std::uint64_t seed);

  const LatentPoint2D& target() const { return target_; }
  /// Index into candidates, or nullopt when there are none.
  std::optional<std::size_t> choose(const std::vector<Card>& candidates);
  std::mt19937_64& rng() { return rng_; }

private:
  LatentPoint2D target_;
  double noise_temp_;
  UserPolicy policy_;
  std::mt19937_64 rng_;
};

struct SimulationOptions {
  std::size_t rounds = 15;
  /// Synthesize the two cards nearest the target every this many rounds (0: never).
  std::size_t synth_every = 4;
  double noise_temp = 0.1;
  UserPolicy policy = UserPolicy::pbo_user;
  SessionConfig session{};
  AnalysisOptions analysis{};

  void validate() const;
};

struct RunResult {
  std::uint64_t seed = 0;
  Mode mode = Mode::bogen;
  LatentPoint2D target;
  std::string target_shape;
  SessionMetrics metrics;
  /// Mean distance to the target of the cards each round put on screen.
  std::vector<double> round_distance;
  Counters counters;
  std::size_t syntheses = 0;
  std::uint64_t state_hash = 0;
};

struct SimulatedSession {
  std::unique_ptr<Session> session;
  RunResult result;
};

/// One seeded session driven by a simulated user. The target is the map
/// position of a corpus shape drawn from the seed, so paired runs with the
/// same seed chase the same target.
SimulatedSession run_simulated_session(std::shared_ptr<const Artifacts> artifacts, Mode mode, std::uint64_t seed,
                                       const SimulationOptions& options);

struct PairedSummary {
  std::size_t pairs = 0;
  double lower_uncertainty = 0.0;   // fraction of seeds where bogen ends below uionly
  double higher_probability = 0.0;  // fraction where bogen's mean probability is higher
  double distance_decreasing = 0.0; // fraction of bogen runs whose last round is nearer the target than the first
};

struct StudyReport {
  SimulationOptions options;
  std::vector<RunResult> runs;
  std::optional<PairedSummary> paired;
};

/// Runs seeds first_seed .. first_seed + seeds - 1 for every mode. Seeds run
/// in parallel; results are ordered by mode, then seed.
StudyReport run_study(std::shared_ptr<const Artifacts> artifacts, const std::vector<Mode>& modes, std::size_t seeds,
                      std::uint64_t first_seed, const SimulationOptions& options,
                      const std::optional<std::filesystem::path>& export_dir = std::nullopt);

PairedSummary paired_summary(const std::vector<RunResult>& runs);

nlohmann::json to_json(const RunResult& r);
nlohmann::json to_json(const StudyReport& r);
void write_report_json(const StudyReport& r, const std::filesystem::path& path);
/// One row per run.
void write_report_csv(const StudyReport& r, const std::filesystem::path& path);

} // namespace bogen
