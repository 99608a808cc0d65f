#include "bogen/service.hpp"

#include "bogen/error.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <functional>

namespace bogen {

using nlohmann::json;

SessionManager::SessionManager(std::shared_ptr<const Artifacts> artifacts, SessionConfig defaults,
                               std::optional<std::filesystem::path> snapshot_dir)
    : artifacts_(std::move(artifacts)), defaults_(std::move(defaults)), snapshot_dir_(std::move(snapshot_dir)) {
  if (!artifacts_) throw InvalidArgument("SessionManager: no artifacts");
  defaults_.validate();
}

std::shared_ptr<SessionSlot> SessionManager::create(Mode mode, std::optional<std::uint64_t> seed) {
  SessionConfig cfg = defaults_;
  if (seed) cfg.seed = *seed;
  std::lock_guard lock(mutex_);
  const std::string id = "s" + std::to_string(next_++);
  auto slot = std::make_shared<SessionSlot>();
  slot->session = std::make_unique<Session>(id, mode, artifacts_, cfg);
  slot->session->set_snapshot_dir(snapshot_dir_);
  sessions_[id] = slot;
  spdlog::info("created session {} ({})", id, to_string(mode));
  return slot;
}

std::shared_ptr<SessionSlot> SessionManager::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session " + id);
  return it->second;
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, slot] : sessions_) out.push_back(id);
  return out;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

int http_status(const std::exception& e) {
  if (dynamic_cast<const NotFound*>(&e)) return 404;
  if (dynamic_cast<const FeatureDisabled*>(&e)) return 403;
  if (dynamic_cast<const PreconditionFailed*>(&e)) return 412;
  if (dynamic_cast<const StateError*>(&e)) return 409;
  if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const InvalidData*>(&e) ||
      dynamic_cast<const DegenerateShape*>(&e) || dynamic_cast<const json::exception*>(&e)) {
    return 400;
  }
  return 500;
}

json error_body(const std::exception& e) {
  std::string kind = "internal";
  switch (http_status(e)) {
  case 400: kind = "bad_request"; break;
  case 403: kind = "feature_disabled"; break;
  case 404: kind = "not_found"; break;
  case 409: kind = "conflict"; break;
  case 412: kind = "precondition_failed"; break;
  default: break;
  }
  return {{"error", kind}, {"message", e.what()}};
}

SessionConfig effective_session_config(const ServiceConfig& config, const Artifacts& artifacts) {
  SessionConfig s = config.session;
  if (config.bounds.mode == BoundsMode::auto_fit) {
    s.acquisition.bounds = latent_bounds(config.bounds, artifacts.corpus_latents);
    spdlog::info("auto-fit bounds z1 [{:.4f}, {:.4f}] z2 [{:.4f}, {:.4f}]", s.acquisition.bounds.z1.lo,
                 s.acquisition.bounds.z1.hi, s.acquisition.bounds.z2.lo, s.acquisition.bounds.z2.hi);
  }
  s.validate();
  return s;
}

namespace {

json page_json(const CardPage& p) {
  json cards = json::array();
  for (const Card& c : p.cards) cards.push_back(to_json(c));
  json out = {{"page", p.index}, {"cards", cards}};
  if (!p.warning.empty()) out["warning"] = p.warning;
  return out;
}

json cards_json(const std::vector<Card>& cs) {
  json out = json::array();
  for (const Card& c : cs) out.push_back(to_json(c));
  return out;
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidArgument("request body must be a JSON object");
  return j;
}

std::uint64_t card_id_of(const json& body, const char* key = "card_id") {
  if (!body.contains(key)) throw InvalidArgument(std::string("missing ") + key);
  return body.at(key).get<std::uint64_t>();
}

LatentPoint2D point_of(const json& body) {
  if (!body.contains("z1") || !body.contains("z2")) throw InvalidArgument("missing z1/z2");
  return {body.at("z1").get<double>(), body.at("z2").get<double>()};
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t used = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw InvalidArgument(std::string("bad ") + key + ": " + v);
  }
  if (used != v.size()) throw InvalidArgument(std::string("bad ") + key + ": " + v);
  return static_cast<std::size_t>(n);
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

} // namespace

struct Service::Impl {
  Impl(std::shared_ptr<const Artifacts> artifacts, const ServiceConfig& config)
      : artifacts(artifacts), sessions(artifacts, effective_session_config(config, *artifacts), config.snapshot_dir) {
    routes();
  }

  std::shared_ptr<const Artifacts> artifacts;
  SessionManager sessions;
  httplib::Server server;

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const std::exception& e) {
        const int status = http_status(e);
        if (status >= 500) spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_json(res, error_body(e), status);
      }
    };
  }

  /// Runs f on the session named in the path, holding its lock.
  template <class F>
  Handler with_session(F f) {
    return guarded([this, f](const httplib::Request& req, httplib::Response& res) {
      auto slot = sessions.get(req.matches[1]);
      std::lock_guard lock(slot->mutex);
      f(*slot->session, req, res);
    });
  }

  /// Shape lookup across the corpus and every session's generated shapes.
  ShapeExtrinsic find_shape(const std::string& id) {
    if (const ShapeExtrinsic* s = artifacts->find_shape(id)) return *s;
    const auto cut = id.rfind("-g");
    if (cut != std::string::npos) {
      auto slot = sessions.get(id.substr(0, cut));
      std::lock_guard lock(slot->mutex);
      if (slot->session->has_shape(id)) return slot->session->shape(id);
    }
    throw NotFound("unknown shape " + id);
  }

  void routes() {
    server.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) {
                 send_json(res, {{"status", "ok"},
                                 {"sessions", sessions.size()},
                                 {"corpus", artifacts->corpus.size()},
                                 {"landmarks", artifacts->landmarks.size()}});
               }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const Mode mode = parse_mode(body.value("mode", std::string("bogen")));
                  std::optional<std::uint64_t> seed;
                  if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
                  auto slot = sessions.create(mode, seed);
                  std::lock_guard lock(slot->mutex);
                  const Session& s = *slot->session;
                  send_json(res,
                            {{"session_id", s.id()},
                             {"mode", to_string(s.mode())},
                             {"config", to_json(s.config())},
                             {"map", to_json(s.map_state())}},
                            201);
                }));

    server.Post(R"(/sessions/([^/]+)/search)",
                with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  if (!body.contains("tags") || !body.at("tags").is_array()) {
                    throw InvalidArgument("search needs a tags array");
                  }
                  send_json(res, page_json(s.prompt_search(body.at("tags").get<std::vector<std::string>>())));
                }));

    server.Post(R"(/sessions/([^/]+)/synthesize)",
                with_session([this](Session& s, const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const std::uint64_t main_id = card_id_of(body, "main_id");
                  const std::uint64_t sub_id = card_id_of(body, "sub_id");
                  if (!body.contains("parts") || !body.at("parts").is_array()) {
                    throw InvalidArgument("synthesize needs a parts array");
                  }
                  const auto parts = body.at("parts").get<std::set<int>>();
                  if (body.value("preview", false)) {
                    const ShapeExtrinsic shape = s.preview_synthesis(main_id, sub_id, parts);
                    const ShapeVector x = flatten(shape);
                    const LatentPoint2D z = encode(x, artifacts->vae).mean;
                    send_json(res, {{"preview", true},
                                    {"z", {z.z1, z.z2}},
                                    {"x", std::vector<double>(x.data(), x.data() + x.size())}});
                    return;
                  }
                  send_json(res, {{"card", to_json(s.synthesize(main_id, sub_id, parts))}});
                }));

    server.Post(R"(/sessions/([^/]+)/prefer)",
                with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                  const std::uint64_t id = card_id_of(parse_body(req));
                  s.mark_preferred(id);
                  send_json(res, {{"card_id", id}, {"preferred", true}});
                }));

    server.Post(R"(/sessions/([^/]+)/select)",
                with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const std::uint64_t id = card_id_of(body);
                  const std::string role = body.value("role", std::string("main"));
                  if (role != "main" && role != "sub") throw InvalidArgument("role must be main or sub");
                  s.select(id, role == "main");
                  send_json(res, {{"card_id", id}, {"role", role}});
                }));

    server.Post(R"(/sessions/([^/]+)/suggest)",
                with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                  send_json(res, page_json(s.request_suggestions()));
                }));

    server.Post(R"(/sessions/([^/]+)/hover)",
                with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                  const LatentPoint2D at = point_of(parse_body(req));
                  s.hover(at);
                  // Nearest map point, for the hover preview.
                  const MapState m = s.map_state();
                  const MapPoint* best = nullptr;
                  for (const MapPoint& p : m.points) {
                    if (!best || squared_distance(p.latent, at) < squared_distance(best->latent, at)) best = &p;
                  }
                  json out = {{"z", {at.z1, at.z2}}};
                  if (best) {
                    out["nearest"] = {{"shape_id", best->shape_id},
                                      {"kind", best->kind},
                                      {"z", {best->latent.z1, best->latent.z2}}};
                  }
                  send_json(res, out);
                }));

    server.Post(R"(/sessions/([^/]+)/click)",
                with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const LatentPoint2D c = point_of(body);
                  const double radius = body.value("radius", 0.05);
                  s.click_region(c, radius);
                  send_json(res, {{"highlights", to_json(s.map_state())["highlights"]}});
                }));

    server.Post(R"(/sessions/([^/]+)/save)",
                with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                  send_json(res, s.save_design(card_id_of(parse_body(req))));
                }));

    server.Get(R"(/sessions/([^/]+)/map)",
               with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                 send_json(res, to_json(s.map_state()));
               }));

    server.Get(R"(/sessions/([^/]+)/cards)",
               with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                 json out = {{"page_count", s.page_count()}};
                 if (req.has_param("page")) {
                   const std::size_t n = query_size(req, "page", 0);
                   out["page"] = n;
                   out["cards"] = cards_json(s.page(n));
                 } else {
                   out["cards"] = cards_json(s.displayed());
                 }
                 out["added"] = cards_json(s.added());
                 send_json(res, out);
               }));

    server.Get(R"(/sessions/([^/]+)/export)",
               with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                 res.set_header("Content-Disposition", "attachment; filename=\"" + s.id() + ".jsonl\"");
                 res.set_content(s.export_jsonl(), "application/x-ndjson");
               }));

    server.Get(R"(/shapes/([^/]+)/pointcloud)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::size_t n = query_size(req, "n", 2048);
                 if (n < 1 || n > 200000) throw InvalidArgument("n must be in [1, 200000]");
                 const std::uint64_t seed = query_size(req, "seed", 0);
                 const ShapeExtrinsic shape = find_shape(req.matches[1]);
                 const PointCloud cloud = sample_point_cloud(shape, n, seed);
                 json pts = json::array();
                 for (const auto& p : cloud.points) pts.push_back({p.x(), p.y(), p.z()});
                 send_json(res, {{"shape_id", shape.id}, {"n", n}, {"points", pts}, {"parts", cloud.part_labels}});
               }));
  }
};

Service::Service(std::shared_ptr<const Artifacts> artifacts, const ServiceConfig& config)
    : impl_(std::make_unique<Impl>(std::move(artifacts), config)) {}

Service::~Service() { impl_->server.stop(); }

SessionManager& Service::sessions() { return impl_->sessions; }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::stop() { impl_->server.stop(); }

} // namespace bogen
