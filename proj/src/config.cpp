#include "bogen/config.hpp"

#include "bogen/error.hpp"

#include <cstdlib>
#include <fstream>

namespace bogen {

void SessionConfig::validate() const {
  kernel.validate();
  acquisition.validate();
  if (page_size < 1) throw ConfigError("session: page_size must be >= 1");
}

nlohmann::json to_json(const KernelConfig& k) {
  return {{"kind", to_string(k.kind)},
          {"lengthscales", {k.lengthscales(0), k.lengthscales(1)}},
          {"signal_variance", k.signal_variance},
          {"prior_mean", k.prior_mean}};
}

KernelConfig kernel_from_json(const nlohmann::json& j, KernelConfig k) {
  if (j.contains("kind")) k.kind = parse_kernel_kind(j.at("kind").get<std::string>());
  if (j.contains("lengthscales")) {
    const auto& l = j.at("lengthscales");
    if (l.is_number()) {
      k.lengthscales.setConstant(l.get<double>());
    } else {
      if (l.size() != 2) throw ConfigError("kernel.lengthscales needs 2 values");
      k.lengthscales = {l.at(0).get<double>(), l.at(1).get<double>()};
    }
  }
  if (j.contains("signal_variance")) k.signal_variance = j.at("signal_variance").get<double>();
  if (j.contains("prior_mean")) k.prior_mean = j.at("prior_mean").get<double>();
  k.validate();
  return k;
}

nlohmann::json to_json(const Bounds& b) { return {{"z1", {b.z1.lo, b.z1.hi}}, {"z2", {b.z2.lo, b.z2.hi}}}; }

Bounds bounds_from_json(const nlohmann::json& j) {
  Bounds b;
  if (j.contains("z1")) b.z1 = {j.at("z1").at(0).get<double>(), j.at("z1").at(1).get<double>()};
  if (j.contains("z2")) b.z2 = {j.at("z2").at(0).get<double>(), j.at("z2").at(1).get<double>()};
  b.validate();
  return b;
}

nlohmann::json to_json(const AcquisitionConfig& a) {
  return {{"beta", a.beta},
          {"batch_k", a.batch_k},
          {"bounds", to_json(a.bounds)},
          {"grid", a.grid},
          {"grid_starts", a.grid_starts},
          {"random_starts", a.random_starts}};
}

AcquisitionConfig acquisition_from_json(const nlohmann::json& j, AcquisitionConfig a) {
  if (j.contains("beta")) a.beta = j.at("beta").get<double>();
  if (j.contains("batch_k")) a.batch_k = j.at("batch_k").get<std::size_t>();
  if (j.contains("bounds")) a.bounds = bounds_from_json(j.at("bounds"));
  if (j.contains("grid")) a.grid = j.at("grid").get<std::size_t>();
  if (j.contains("grid_starts")) a.grid_starts = j.at("grid_starts").get<std::size_t>();
  if (j.contains("random_starts")) a.random_starts = j.at("random_starts").get<std::size_t>();
  a.validate();
  return a;
}

nlohmann::json to_json(const SessionConfig& s) {
  return {{"kernel", to_json(s.kernel)},
          {"acquisition", to_json(s.acquisition)},
          {"page_size", s.page_size},
          {"seed", s.seed}};
}

SessionConfig session_config_from_json(const nlohmann::json& j) {
  SessionConfig s;
  try {
    if (j.contains("kernel")) s.kernel = kernel_from_json(j.at("kernel"));
    if (j.contains("acquisition")) s.acquisition = acquisition_from_json(j.at("acquisition"));
    if (j.contains("page_size")) s.page_size = j.at("page_size").get<std::size_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("session config: ") + e.what());
  }
  s.validate();
  return s;
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

int parse_port(const std::string& s) {
  std::size_t used = 0;
  int port = 0;
  try {
    port = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("port is not a number: " + s);
  }
  if (used != s.size() || port < 0 || port > 65535) throw ConfigError("port out of range: " + s);
  return port;
}

} // namespace

ServiceConfig parse_service_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                   const EnvLookup& env) {
  ServiceConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("corpus")) c.artifacts.corpus = j.at("corpus").get<std::string>();
    if (j.contains("vae")) c.artifacts.vae = j.at("vae").get<std::string>();
    if (j.contains("landmarks")) c.artifacts.landmarks = j.at("landmarks").get<std::string>();
    if (j.contains("host")) c.host = j.at("host").get<std::string>();
    if (j.contains("port")) c.port = j.at("port").get<int>();
    if (j.contains("kernel")) c.session.kernel = kernel_from_json(j.at("kernel"));
    if (j.contains("acquisition")) c.session.acquisition = acquisition_from_json(j.at("acquisition"));
    if (j.contains("bounds")) {
      const auto& b = j.at("bounds");
      if (b.is_string()) {
        if (b.get<std::string>() != "auto") throw ConfigError("bounds must be an object or \"auto\"");
        c.bounds.mode = BoundsMode::auto_fit;
      } else {
        c.bounds.box = bounds_from_json(b);
        c.session.acquisition.bounds = c.bounds.box;
      }
    }
    if (j.contains("page_size")) c.session.page_size = j.at("page_size").get<std::size_t>();
    if (j.contains("seed")) c.session.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("snapshot_dir") && !j.at("snapshot_dir").is_null()) {
      c.snapshot_dir = resolve(j.at("snapshot_dir").get<std::string>(), base_dir);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (auto v = env("BOGEN_PORT")) c.port = parse_port(*v);
  if (auto v = env("BOGEN_CORPUS")) c.artifacts.corpus = *v;
  if (auto v = env("BOGEN_VAE")) c.artifacts.vae = *v;
  if (auto v = env("BOGEN_LANDMARKS")) c.artifacts.landmarks = *v;
  c.artifacts.corpus = resolve(c.artifacts.corpus, base_dir);
  c.artifacts.vae = resolve(c.artifacts.vae, base_dir);
  c.artifacts.landmarks = resolve(c.artifacts.landmarks, base_dir);
  if (c.port < 0 || c.port > 65535) throw ConfigError("port out of range: " + std::to_string(c.port));
  c.session.validate();
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path, const EnvLookup& env) {
  if (!std::filesystem::exists(path)) throw MissingArtifact(path.string());
  std::ifstream in(path);
  if (!in) throw FileError(path.string(), "cannot open for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_service_config(j, path.parent_path(), env);
}

} // namespace bogen
