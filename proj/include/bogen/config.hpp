#pragma once

#include "bogen/acquisition.hpp"
#include "bogen/artifacts.hpp"
#include "bogen/kernel.hpp"
#include "bogen/latent.hpp"
#include "bogen/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace bogen {

/// Per-session engine parameters; recorded in every session export so a
/// replay runs with the same settings.
struct SessionConfig {
  KernelConfig kernel{};
  AcquisitionConfig acquisition{};
  std::size_t page_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Service configuration file (JSON). Every field is optional.
struct ServiceConfig {
  ArtifactPaths artifacts{"artifacts/corpus.jsonl", "artifacts/vae.json", "artifacts/landmarks.json"};
  std::string host = "127.0.0.1";
  int port = 8080;
  SessionConfig session{};
  BoundsConfig bounds{};
  std::optional<std::filesystem::path> snapshot_dir;
};

nlohmann::json to_json(const KernelConfig& k);
KernelConfig kernel_from_json(const nlohmann::json& j, KernelConfig base = {});
nlohmann::json to_json(const Bounds& b);
Bounds bounds_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AcquisitionConfig& a);
AcquisitionConfig acquisition_from_json(const nlohmann::json& j, AcquisitionConfig base = {});
nlohmann::json to_json(const SessionConfig& s);
SessionConfig session_config_from_json(const nlohmann::json& j);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Parses a config document, then applies BOGEN_PORT, BOGEN_CORPUS, BOGEN_VAE
/// and BOGEN_LANDMARKS from env. Relative artifact paths resolve against
/// base_dir. Throws ConfigError on bad values.
ServiceConfig parse_service_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                   const EnvLookup& env = process_env);
/// Throws MissingArtifact if the file is absent.
ServiceConfig load_service_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

} // namespace bogen
