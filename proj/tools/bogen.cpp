// bogen: offline pipeline, service and simulation front end.

#include "bogen/analysis.hpp"
#include "bogen/artifacts.hpp"
#include "bogen/config.hpp"
#include "bogen/error.hpp"
#include "bogen/service.hpp"
#include "bogen/simulate.hpp"

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

using namespace bogen;
using nlohmann::json;

namespace {

enum Exit { ok = 0, failure = 1, bad_args = 2, missing_artifact = 3, numerical = 4 };

struct ArtifactArgs {
  std::string config;
  std::string corpus, vae, landmarks;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "service config file (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--corpus", corpus, "corpus JSON-lines");
    cmd->add_option("--vae", vae, "VAE checkpoint");
    cmd->add_option("--landmarks", landmarks, "landmarks file");
  }
  bool given() const { return !config.empty() || !corpus.empty() || !vae.empty() || !landmarks.empty(); }

  ServiceConfig resolve() const {
    ServiceConfig c = config.empty() ? parse_service_config(json::object(), std::filesystem::current_path())
                                     : load_service_config(config);
    if (!corpus.empty()) c.artifacts.corpus = corpus;
    if (!vae.empty()) c.artifacts.vae = vae;
    if (!landmarks.empty()) c.artifacts.landmarks = landmarks;
    return c;
  }
};

int gen_corpus(std::size_t size, std::uint64_t seed, const std::string& out) {
  if (size == 0) throw InvalidArgument("--size must be positive");
  const Corpus c = generate_corpus(size, seed);
  save_corpus(c, out);
  spdlog::info("wrote {} shapes to {}", c.size(), out);
  return ok;
}

int train(const std::string& corpus_path, const VaeHyperparams& hp, const std::string& out,
          const std::string& report) {
  const Corpus corpus = load_corpus(corpus_path);
  const TrainedVae t = train_vae(corpus.vectors(), hp);
  save_vae(t.model, out);
  if (!report.empty()) t.report.write_csv(report);
  std::cout << json{{"checkpoint", out},
                    {"train_size", t.report.train_size},
                    {"eval_size", t.report.eval_size},
                    {"final_eval_mse", t.report.final_eval_mse}}
                   .dump()
            << '\n';
  return ok;
}

int landmarks(const std::string& corpus_path, const std::string& vae_path, std::size_t k, std::uint64_t seed,
              const std::string& out) {
  const Corpus corpus = load_corpus(corpus_path);
  const VaeModel vae = load_vae(vae_path);
  const auto points = encode_means(corpus.vectors(), vae);
  std::vector<std::string> ids;
  for (const auto& s : corpus.shapes) ids.push_back(s.id);
  save_landmarks(select_landmarks(points, ids, k, seed), out);
  spdlog::info("wrote {} landmarks to {}", k, out);
  return ok;
}

int serve(const ArtifactArgs& args, int port_override) {
  ServiceConfig cfg = args.resolve();
  if (port_override >= 0) cfg.port = port_override;
  const auto artifacts = load_artifacts(cfg.artifacts);

  // Block the stop signals before any server thread starts, then wait for
  // them on a dedicated thread.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  Service service(artifacts, cfg);
  const int port = service.bind(cfg.host, cfg.port);
  if (port < 0) throw InvalidArgument("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    spdlog::info("signal {}, stopping", sig);
    service.stop();
  });
  spdlog::info("listening on http://{}:{}", cfg.host, port);
  service.listen_after_bind();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return ok;
}

struct SimulateArgs {
  std::string mode = "both";
  std::size_t seeds = 20;
  std::uint64_t first_seed = 1;
  std::size_t iters = 15;
  std::size_t synth_every = 4;
  double noise_temp = 0.1;
  std::string policy = "pbo_user";
  std::string report, export_dir;
  bool per_session_epsilon = false;
  int threads = 0;
};

std::filesystem::path with_extension(std::filesystem::path p, const char* ext) { return p.replace_extension(ext); }

int simulate(const ArtifactArgs& art, const SimulateArgs& a) {
  const ServiceConfig cfg = art.resolve();
  const auto artifacts = load_artifacts(cfg.artifacts);
  if (a.threads > 0) omp_set_num_threads(a.threads);

  SimulationOptions o;
  o.rounds = a.iters;
  o.synth_every = a.synth_every;
  o.noise_temp = a.noise_temp;
  o.policy = parse_user_policy(a.policy);
  o.session = effective_session_config(cfg, *artifacts);
  o.analysis.per_session_epsilon = a.per_session_epsilon;
  std::vector<Mode> modes;
  if (a.mode == "both") {
    modes = {Mode::bogen, Mode::uionly};
  } else {
    modes = {parse_mode(a.mode)};
  }
  std::optional<std::filesystem::path> exports;
  if (!a.export_dir.empty()) exports = a.export_dir;

  const StudyReport r = run_study(artifacts, modes, a.seeds, a.first_seed, o, exports);
  const json j = to_json(r);
  if (a.report.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_report_json(r, a.report);
    write_report_csv(r, with_extension(a.report, ".csv"));
    std::cout << json{{"aggregate", j["aggregate"]}, {"paired", j.value("paired", json())}}.dump(2) << '\n';
  }
  return ok;
}

int metrics(const std::string& session_file, const std::string& out, bool per_session_epsilon) {
  const SessionRecord rec = read_session_record_file(session_file);
  AnalysisOptions o;
  o.per_session_epsilon = per_session_epsilon;
  const SessionMetrics m = analyze_session(rec, o);
  if (out.empty()) {
    std::cout << to_json(m).dump(2) << '\n';
  } else if (std::filesystem::path(out).extension() == ".csv") {
    write_metrics_csv(m, out);
  } else {
    write_metrics_json(m, out);
  }
  return ok;
}

/// Map of a recorded session. With artifacts the session is replayed and the
/// live map (heat included) is exported; without, the analysis record gives
/// landmarks and cards only.
MapState recorded_map(const std::string& session_file, const ArtifactArgs& art) {
  if (art.given()) {
    const auto artifacts = load_artifacts(art.resolve().artifacts);
    return replay_session_file(session_file, artifacts).session->map_state();
  }
  const SessionRecord rec = read_session_record_file(session_file);
  MapState m;
  m.mode = rec.mode;
  for (const auto& z : rec.landmarks) m.points.push_back({"landmark", "", std::nullopt, z, 0.0, 0.0});
  for (const Card& c : rec.cards) m.points.push_back({"card", c.shape_id, c.id, c.latent, 0.0, 0.0});
  return m;
}

int export_map(const std::string& session_file, const std::string& format, const std::string& out,
               const ArtifactArgs& art) {
  const MapState m = recorded_map(session_file, art);
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw FileError(out, "cannot open for writing");
  }
  std::ostream& os = out.empty() ? std::cout : file;
  if (format == "json") {
    os << to_json(m).dump(2) << '\n';
  } else {
    os.precision(12);
    os << "kind,shape_id,card_id,z1,z2,mu,sigma2\n";
    for (const MapPoint& p : m.points) {
      os << p.kind << ',' << p.shape_id << ',' << (p.card_id ? std::to_string(*p.card_id) : "") << ',' << p.latent.z1
         << ',' << p.latent.z2 << ',';
      if (m.heat) os << p.mu << ',' << p.sigma2;
      else os << ',';
      os << '\n';
    }
  }
  return ok;
}

int run_guarded(const std::function<int()>& f) {
  try {
    return f();
  } catch (const MissingArtifact& e) {
    spdlog::error("{}", e.what());
    return missing_artifact;
  } catch (const NumericalFailure& e) {
    spdlog::error("numerical failure: {}", e.what());
    return numerical;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return bad_args;
  } catch (const InvalidData& e) {
    spdlog::error("{}", e.what());
    return bad_args;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return failure;
  }
}

} // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("bogen"));
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  CLI::App app{"BOgen: preference-guided design exploration"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "errors only");

  std::function<int()> action;

  auto* gc = app.add_subcommand("gen-corpus", "generate the procedural chair corpus");
  std::size_t gc_size = 5000;
  std::uint64_t gc_seed = 1;
  std::string gc_out;
  gc->add_option("--size", gc_size, "number of shapes")->capture_default_str();
  gc->add_option("--seed", gc_seed, "generator seed")->capture_default_str();
  gc->add_option("--out", gc_out, "output JSON-lines")->required();
  gc->callback([&] { action = [&] { return gen_corpus(gc_size, gc_seed, gc_out); }; });

  auto* tv = app.add_subcommand("train-vae", "train the 2-D VAE and calibrate the map");
  std::string tv_corpus, tv_out, tv_report;
  VaeHyperparams hp;
  tv->add_option("--corpus", tv_corpus, "corpus JSON-lines")->required();
  tv->add_option("--epochs", hp.epochs, "training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  tv->add_option("--batch-size", hp.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  tv->add_option("--lr", hp.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  tv->add_option("--seed", hp.seed)->capture_default_str();
  tv->add_option("--out", tv_out, "checkpoint path")->required();
  tv->add_option("--report", tv_report, "per-epoch CSV");
  tv->callback([&] { action = [&] { return train(tv_corpus, hp, tv_out, tv_report); }; });

  auto* lm = app.add_subcommand("landmarks", "pick map landmarks by kmeans++ seeding");
  std::string lm_corpus, lm_vae, lm_out;
  std::size_t lm_k = 500;
  std::uint64_t lm_seed = 1;
  lm->add_option("--corpus", lm_corpus)->required();
  lm->add_option("--vae", lm_vae)->required();
  lm->add_option("--k", lm_k, "landmark count")->capture_default_str()->check(CLI::PositiveNumber);
  lm->add_option("--seed", lm_seed)->capture_default_str();
  lm->add_option("--out", lm_out)->required();
  lm->callback([&] { action = [&] { return landmarks(lm_corpus, lm_vae, lm_k, lm_seed, lm_out); }; });

  auto* sv = app.add_subcommand("serve", "run the HTTP session service");
  ArtifactArgs sv_art;
  int sv_port = -1;
  sv_art.add(sv);
  sv->add_option("--port", sv_port, "overrides config and BOGEN_PORT")->check(CLI::Range(0, 65535));
  sv->callback([&] { action = [&] { return serve(sv_art, sv_port); }; });

  auto* sm = app.add_subcommand("simulate", "paired simulated-user study");
  ArtifactArgs sm_art;
  SimulateArgs sa;
  sm_art.add(sm);
  sm->add_option("--mode", sa.mode)->capture_default_str()->check(CLI::IsMember({"bogen", "uionly", "both"}));
  sm->add_option("--seeds", sa.seeds, "number of seeds")->capture_default_str()->check(CLI::PositiveNumber);
  sm->add_option("--first-seed", sa.first_seed)->capture_default_str();
  sm->add_option("--iters", sa.iters, "rounds per session")->capture_default_str()->check(CLI::PositiveNumber);
  sm->add_option("--synth-every", sa.synth_every)->capture_default_str();
  sm->add_option("--noise-temp", sa.noise_temp)->capture_default_str()->check(CLI::PositiveNumber);
  sm->add_option("--policy", sa.policy)->capture_default_str()->check(CLI::IsMember({"pbo_user", "random_user"}));
  sm->add_option("--report", sa.report, "JSON report; a CSV is written next to it");
  sm->add_option("--export-dir", sa.export_dir, "write every session export here");
  sm->add_flag("--per-session-epsilon", sa.per_session_epsilon, "DBSCAN epsilon from each session's elbow");
  sm->add_option("--threads", sa.threads, "OpenMP threads (0: runtime default)");
  sm->callback([&] { action = [&] { return simulate(sm_art, sa); }; });

  auto* mt = app.add_subcommand("metrics", "metrics of an exported session");
  std::string mt_file, mt_out;
  bool mt_eps = false;
  mt->add_option("--session-file", mt_file)->required()->check(CLI::ExistingFile);
  mt->add_option("--out", mt_out, ".json or .csv (stdout if absent)");
  mt->add_flag("--per-session-epsilon", mt_eps);
  mt->callback([&] { action = [&] { return metrics(mt_file, mt_out, mt_eps); }; });

  auto* em = app.add_subcommand("export-map", "exploration map of an exported session");
  std::string em_file, em_format = "json", em_out;
  ArtifactArgs em_art;
  em->add_option("--session-file", em_file)->required()->check(CLI::ExistingFile);
  em->add_option("--format", em_format)->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
  em->add_option("--out", em_out, "stdout if absent");
  em_art.add(em);
  em->callback([&] { action = [&] { return export_map(em_file, em_format, em_out, em_art); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : bad_args;
  }
  if (quiet) spdlog::set_level(spdlog::level::err);
  else if (verbose) spdlog::set_level(spdlog::level::debug);
  return run_guarded(action);
}
