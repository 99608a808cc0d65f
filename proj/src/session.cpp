#include "bogen/session.hpp"

#include "bogen/acquisition.hpp"
#include "bogen/error.hpp"
#include "bogen/kernels.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bogen {

using nlohmann::json;

std::string to_string(Mode m) { return m == Mode::bogen ? "bogen" : "uionly"; }

Mode parse_mode(const std::string& s) {
  if (s == "bogen") return Mode::bogen;
  if (s == "uionly") return Mode::uionly;
  throw InvalidArgument("unknown mode: " + s);
}

std::string to_string(Provenance p) {
  switch (p) {
  case Provenance::prompt: return "prompt";
  case Provenance::pbo: return "pbo";
  case Provenance::synthesis: return "synthesis";
  }
  return "prompt";
}

namespace {

Provenance parse_provenance(const std::string& s) {
  if (s == "prompt") return Provenance::prompt;
  if (s == "pbo") return Provenance::pbo;
  if (s == "synthesis") return Provenance::synthesis;
  throw InvalidData("unknown provenance: " + s);
}

constexpr std::pair<EventKind, const char*> kEventNames[] = {
    {EventKind::prompt_search, "prompt_search"},
    {EventKind::mark_preferred, "mark_preferred"},
    {EventKind::select_main, "select_main"},
    {EventKind::select_sub, "select_sub"},
    {EventKind::synthesize, "synthesize"},
    {EventKind::request_suggestions, "request_suggestions"},
    {EventKind::hover_map, "hover_map"},
    {EventKind::click_region, "click_region"},
    {EventKind::save_design, "save_design"},
};

} // namespace

std::string to_string(EventKind k) {
  for (const auto& [kind, name] : kEventNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

EventKind parse_event_kind(const std::string& s) {
  for (const auto& [kind, name] : kEventNames) {
    if (s == name) return kind;
  }
  throw InvalidData("unknown event kind: " + s);
}

namespace {

json point_json(const LatentPoint2D& p) { return json::array({p.z1, p.z2}); }

LatentPoint2D point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidData("expected a [z1, z2] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

json points_json(const std::vector<LatentPoint2D>& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back(point_json(p));
  return out;
}

std::vector<LatentPoint2D> points_from(const json& j) {
  std::vector<LatentPoint2D> out;
  for (const auto& e : j) out.push_back(point_from(e));
  return out;
}

json card_point_json(const CardPoint& c) {
  return {{"card_id", c.card_id}, {"z", point_json(c.latent)}, {"parents", c.parents}};
}

CardPoint card_point_from(const json& j) {
  return {j.at("card_id").get<std::uint64_t>(), point_from(j.at("z")),
          j.at("parents").get<std::vector<std::uint64_t>>()};
}

json timeline_json(const TimelineEntry& e) {
  if (e.type == TimelineEntry::Type::flush) {
    return {{"type", "flush"},
            {"reason", e.reason},
            {"explored_count", e.explored_count},
            {"raw_samples", points_json(e.raw_samples)}};
  }
  json displayed = json::array();
  for (const auto& c : e.preference.displayed) displayed.push_back(card_point_json(c));
  return {{"type", "preference"},
          {"kind", e.preference.kind == PreferenceKind::mark_preferred ? "mark_preferred" : "request_suggestions"},
          {"chosen", card_point_json(e.preference.chosen)},
          {"displayed", displayed}};
}

TimelineEntry timeline_from(const json& j) {
  TimelineEntry e;
  const std::string type = j.at("type").get<std::string>();
  if (type == "flush") {
    e.type = TimelineEntry::Type::flush;
    e.reason = j.at("reason").get<std::string>();
    e.explored_count = j.at("explored_count").get<std::size_t>();
    e.raw_samples = points_from(j.at("raw_samples"));
  } else if (type == "preference") {
    e.type = TimelineEntry::Type::preference;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mark_preferred") {
      e.preference.kind = PreferenceKind::mark_preferred;
    } else if (kind == "request_suggestions") {
      e.preference.kind = PreferenceKind::request_suggestions;
    } else {
      throw InvalidData("unknown preference kind: " + kind);
    }
    e.preference.chosen = card_point_from(j.at("chosen"));
    for (const auto& c : j.at("displayed")) e.preference.displayed.push_back(card_point_from(c));
  } else {
    throw InvalidData("unknown timeline entry: " + type);
  }
  return e;
}

Card card_from(const json& j) {
  Card c;
  c.id = j.at("card_id").get<std::uint64_t>();
  c.shape_id = j.at("shape_id").get<std::string>();
  c.latent = point_from(j.at("z"));
  c.provenance = parse_provenance(j.at("provenance").get<std::string>());
  c.parents = j.at("parents").get<std::vector<std::uint64_t>>();
  c.page = j.at("page").get<int>();
  if (j.contains("raw_sample")) c.raw_sample = point_from(j.at("raw_sample"));
  return c;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void check_finite(const LatentPoint2D& p, const char* what) {
  if (!std::isfinite(p.z1) || !std::isfinite(p.z2)) {
    throw InvalidArgument(std::string(what) + ": coordinates must be finite");
  }
}

} // namespace

json to_json(const Card& c) {
  json j = {{"card_id", c.id},
            {"shape_id", c.shape_id},
            {"z", point_json(c.latent)},
            {"provenance", to_string(c.provenance)},
            {"parents", c.parents},
            {"page", c.page}};
  if (c.raw_sample) j["raw_sample"] = point_json(*c.raw_sample);
  return j;
}

json to_json(const MapState& m) {
  json points = json::array();
  for (const auto& p : m.points) {
    json e = {{"kind", p.kind}, {"shape_id", p.shape_id}, {"z", point_json(p.latent)}};
    if (p.card_id) e["card_id"] = *p.card_id;
    if (m.heat) {
      e["mu"] = p.mu;
      e["sigma2"] = p.sigma2;
    }
    points.push_back(std::move(e));
  }
  json regions = json::array();
  for (const auto& [tag, c] : m.regions) regions.push_back({{"tag", tag}, {"z", point_json(c)}});
  json numbering = json::array();
  for (const auto& [n, id] : m.numbering) numbering.push_back({{"number", n}, {"card_id", id}});
  json highlights = json::array();
  for (const auto& h : m.highlights) highlights.push_back({{"z", point_json(h.center)}, {"radius", h.radius}});
  return {{"mode", to_string(m.mode)}, {"heat", m.heat},         {"points", points},
          {"regions", regions},        {"numbering", numbering}, {"highlights", highlights},
          {"bounds", to_json(m.bounds)}};
}

std::string format_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Session::Session(std::string id, Mode mode, std::shared_ptr<const Artifacts> artifacts, SessionConfig config)
    : id_(std::move(id)), mode_(mode), artifacts_(std::move(artifacts)), config_(std::move(config)) {
  if (!artifacts_) throw InvalidArgument("Session: artifacts are required");
  config_.validate();
  model_ = GoodnessModel::prior(config_.kernel);
}

// ---- public operations: run, then log ----

CardPage Session::prompt_search(const std::vector<std::string>& tags) {
  CardPage page = do_search(tags);
  log(EventKind::prompt_search, {{"tags", tags}});
  return page;
}

void Session::mark_preferred(std::uint64_t card_id) {
  do_prefer(card_id);
  log(EventKind::mark_preferred, {{"card_id", card_id}});
}

void Session::select(std::uint64_t card_id, bool main) {
  do_select(card_id, main);
  log(main ? EventKind::select_main : EventKind::select_sub, {{"card_id", card_id}});
}

Card Session::synthesize(std::uint64_t main_id, std::uint64_t sub_id, const std::set<int>& parts) {
  Card c = do_synthesize(main_id, sub_id, parts);
  log(EventKind::synthesize, {{"main_id", main_id}, {"sub_id", sub_id}, {"parts", parts}});
  return c;
}

ShapeExtrinsic Session::preview_synthesis(std::uint64_t main_id, std::uint64_t sub_id,
                                          const std::set<int>& parts) const {
  return interpolate_parts(shape(card(main_id).shape_id), shape(card(sub_id).shape_id), parts);
}

CardPage Session::request_suggestions() {
  CardPage page = do_suggest();
  log(EventKind::request_suggestions, json::object());
  write_snapshot();
  return page;
}

void Session::hover(const LatentPoint2D& at) {
  do_hover(at);
  log(EventKind::hover_map, {{"z1", at.z1}, {"z2", at.z2}});
}

void Session::click_region(const LatentPoint2D& center, double radius) {
  do_click(center, radius);
  log(EventKind::click_region, {{"z1", center.z1}, {"z2", center.z2}, {"radius", radius}});
}

json Session::save_design(std::uint64_t card_id) {
  json design = do_save(card_id);
  log(EventKind::save_design, {{"card_id", card_id}});
  return design;
}

void Session::apply(const SessionEvent& event) {
  if (event.seq != events_.size()) {
    throw InvalidData("replay: event seq " + std::to_string(event.seq) + " out of order");
  }
  const json& p = event.payload;
  try {
    switch (event.kind) {
    case EventKind::prompt_search: do_search(p.at("tags").get<std::vector<std::string>>()); break;
    case EventKind::mark_preferred: do_prefer(p.at("card_id").get<std::uint64_t>()); break;
    case EventKind::select_main: do_select(p.at("card_id").get<std::uint64_t>(), true); break;
    case EventKind::select_sub: do_select(p.at("card_id").get<std::uint64_t>(), false); break;
    case EventKind::synthesize:
      do_synthesize(p.at("main_id").get<std::uint64_t>(), p.at("sub_id").get<std::uint64_t>(),
                    p.at("parts").get<std::set<int>>());
      break;
    case EventKind::request_suggestions: do_suggest(); break;
    case EventKind::hover_map: do_hover({p.at("z1").get<double>(), p.at("z2").get<double>()}); break;
    case EventKind::click_region:
      do_click({p.at("z1").get<double>(), p.at("z2").get<double>()}, p.at("radius").get<double>());
      break;
    case EventKind::save_design: do_save(p.at("card_id").get<std::uint64_t>()); break;
    }
  } catch (const json::exception& e) {
    throw InvalidData(std::string("replay: malformed payload: ") + e.what());
  }
  events_.push_back(event);
}

// ---- operations ----

CardPage Session::do_search(const std::vector<std::string>& tags) {
  CardPage out;
  std::vector<std::string> known;
  std::vector<std::string> unknown;
  for (const auto& t : tags) {
    (artifacts_->tag_index.contains(t) ? known : unknown).push_back(t);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& t : unknown) list += (list.empty() ? "" : ", ") + t;
    out.warning = "unknown tags ignored: " + list;
  }

  std::vector<std::size_t> candidates;
  LatentPoint2D target{0.0, 0.0};
  if (!known.empty()) {
    candidates = artifacts_->tag_index.at(known.front());
    for (std::size_t i = 1; i < known.size(); ++i) {
      const auto& other = artifacts_->tag_index.at(known[i]);
      std::vector<std::size_t> either;
      std::set_union(candidates.begin(), candidates.end(), other.begin(), other.end(),
                     std::back_inserter(either));
      candidates = std::move(either);
    }
    for (const auto& t : known) {
      const LatentPoint2D& c = artifacts_->tag_centroids.at(t);
      target.z1 += c.z1 / static_cast<double>(known.size());
      target.z2 += c.z2 / static_cast<double>(known.size());
    }
  }
  std::erase_if(candidates, [&](std::size_t i) {
    return shown_corpus_ids_.contains(artifacts_->corpus.shapes[i].id);
  });
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    const double da = squared_distance(artifacts_->corpus_latents[a], target);
    const double db = squared_distance(artifacts_->corpus_latents[b], target);
    return da < db || (da == db && a < b);
  });
  if (candidates.size() > config_.page_size) candidates.resize(config_.page_size);

  flush("prompt_search");
  if (candidates.empty()) {
    if (out.warning.empty()) out.warning = known.empty() ? "no tags given" : "no more shapes match these tags";
    out.index = pages_.size();
    spdlog::warn("session {}: search returned nothing ({})", id_, out.warning);
    return out;
  }
  if (candidates.size() < config_.page_size && out.warning.empty()) {
    out.warning = "only " + std::to_string(candidates.size()) + " shapes left for these tags";
  }

  std::vector<std::uint64_t> ids;
  const int page_index = static_cast<int>(pages_.size());
  for (std::size_t i : candidates) {
    Card c;
    c.shape_id = artifacts_->corpus.shapes[i].id;
    c.latent = artifacts_->corpus_latents[i];
    c.provenance = Provenance::prompt;
    c.page = page_index;
    shown_corpus_ids_.insert(c.shape_id);
    ids.push_back(add_card(std::move(c), nullptr).id);
  }
  new_page(ids);
  out.index = pages_.size() - 1;
  out.cards = page(out.index);
  return out;
}

void Session::do_prefer(std::uint64_t card_id) {
  const Card& c = card(card_id);
  if (marked_.contains(card_id)) return;
  note_preference(PreferenceKind::mark_preferred, c);
}

void Session::do_select(std::uint64_t card_id, bool main) {
  card(card_id);
  (main ? main_card_ : sub_card_) = card_id;
}

Card Session::do_synthesize(std::uint64_t main_id, std::uint64_t sub_id, const std::set<int>& parts) {
  ShapeExtrinsic raw = preview_synthesis(main_id, sub_id, parts);
  raw.id = id_ + "-g" + std::to_string(generated_ + 1);
  const LatentPoint2D z = encode(flatten(raw), artifacts_->vae).mean;
  ++generated_;

  Card c;
  c.shape_id = raw.id;
  c.latent = z;
  c.provenance = Provenance::synthesis;
  c.parents = {main_id};
  if (sub_id != main_id) c.parents.push_back(sub_id);
  c.page = -1;
  const std::uint64_t id = add_card(std::move(c), &raw).id;
  added_.push_back(id);
  synth_since_fit_.push_back(id);
  all_synth_.push_back(id);
  return card(id);
}

CardPage Session::do_suggest() {
  if (mode_ != Mode::bogen) {
    throw FeatureDisabled("suggestions are disabled in uionly mode");
  }
  if (pending_.empty() && synth_since_fit_.empty()) {
    throw PreconditionFailed("mark a preferred design or synthesize one before requesting suggestions");
  }
  const std::optional<std::uint64_t> ref_id = reference_card();
  if (!ref_id) throw PreconditionFailed("no reference design available");
  const Card ref = card(*ref_id);

  // Work on copies so a numerical failure leaves the session untouched.
  std::vector<PreferenceEvent> pending = pending_;
  std::vector<TimelineEntry> timeline_add;
  if (!marked_.contains(ref.id)) {
    PreferenceEvent ev{PreferenceKind::request_suggestions, card_point(ref), {}};
    for (const Card& d : displayed()) ev.displayed.push_back(card_point(d));
    pending.push_back(ev);
    timeline_add.push_back({TimelineEntry::Type::preference, ev, {}, 0, {}});
  }
  PreferenceBook book = book_;
  PreferenceDataset dataset = update_from_events(dataset_, book, pending);
  GoodnessModel model = model_;
  bool fitted = false;
  if (!dataset.empty()) {
    model = fit_map(dataset, config_.kernel);
    fitted = true;
  }
  const std::vector<LatentPoint2D> raw = sample_batch(model, config_.acquisition, round_seed());

  const ShapeExtrinsic& ref_shape = shape(ref.shape_id);
  const SkipInfo skip = encode(flatten(ref_shape), artifacts_->vae, ref_shape.id).skip;
  std::vector<ShapeExtrinsic> shapes;
  std::vector<LatentPoint2D> latents;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    ShapeExtrinsic s;
    try {
      s = normalize(unflatten(decode(raw[i], skip, artifacts_->vae)));
    } catch (const InvalidData& e) {
      throw NumericalFailure(std::string("decoding a suggestion failed: ") + e.what());
    }
    s.id = id_ + "-g" + std::to_string(generated_ + i + 1);
    s.tags = ref_shape.tags;
    s.parents = {ref_shape.id};
    latents.push_back(encode(flatten(s), artifacts_->vae).mean);
    shapes.push_back(std::move(s));
  }

  // Commit.
  if (!marked_.contains(ref.id)) {
    marked_.insert(ref.id);
    preferred_order_.push_back(ref.id);
  }
  for (auto& t : timeline_add) timeline_.push_back(std::move(t));
  pending_.clear();
  book_ = std::move(book);
  dataset_ = std::move(dataset);
  model_ = std::move(model);
  if (fitted) ++counters_.fit_calls;
  ++counters_.sample_calls;
  flush("request_suggestions", raw);
  book_.pending_raw_samples = raw;
  synth_since_fit_.clear();
  ++rounds_;

  std::vector<std::uint64_t> ids;
  const int page_index = static_cast<int>(pages_.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Card c;
    c.shape_id = shapes[i].id;
    c.latent = latents[i];
    c.provenance = Provenance::pbo;
    c.parents = {ref.id};
    c.page = page_index;
    c.raw_sample = raw[i];
    ids.push_back(add_card(std::move(c), &shapes[i]).id);
  }
  generated_ += raw.size();
  new_page(ids);

  CardPage out;
  out.index = pages_.size() - 1;
  out.cards = page(out.index);
  return out;
}

void Session::do_hover(const LatentPoint2D& at) {
  check_finite(at, "hover");
  explored_.push_back(at);
}

void Session::do_click(const LatentPoint2D& center, double radius) {
  check_finite(center, "click");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("click: radius must be positive");
  highlights_.push_back({center, radius});
}

namespace {

json design_json(const Session& s, std::uint64_t card_id) {
  const Card& c = s.card(card_id);
  const ShapeVector x = flatten(s.shape(c.shape_id));
  return {{"card_id", c.id},
          {"shape_id", c.shape_id},
          {"z", point_json(c.latent)},
          {"x", std::vector<double>(x.data(), x.data() + x.size())},
          {"provenance", s.provenance_tree(card_id)}};
}

} // namespace

json Session::do_save(std::uint64_t card_id) {
  json design = design_json(*this, card_id);
  if (std::find(saved_.begin(), saved_.end(), card_id) == saved_.end()) saved_.push_back(card_id);
  return design;
}

// ---- helpers ----

void Session::log(EventKind kind, json payload) {
  events_.push_back({events_.size(), now_ms(), kind, std::move(payload)});
}

Card& Session::add_card(Card c, const ShapeExtrinsic* new_shape) {
  c.id = cards_.size() + 1;
  if (new_shape) shapes_[new_shape->id] = *new_shape;
  explored_.push_back(c.latent);
  cards_.push_back(std::move(c));
  return cards_.back();
}

CardPoint Session::card_point(const Card& c) const {
  CardPoint p{c.id, c.latent, {}};
  if (c.provenance == Provenance::synthesis) p.parents = c.parents;
  return p;
}

void Session::note_preference(PreferenceKind kind, const Card& chosen) {
  PreferenceEvent ev{kind, card_point(chosen), {}};
  for (const Card& d : displayed()) ev.displayed.push_back(card_point(d));
  timeline_.push_back({TimelineEntry::Type::preference, ev, {}, 0, {}});
  pending_.push_back(std::move(ev));
  marked_.insert(chosen.id);
  preferred_order_.push_back(chosen.id);
}

void Session::flush(const std::string& reason, std::vector<LatentPoint2D> raw) {
  TimelineEntry e;
  e.type = TimelineEntry::Type::flush;
  e.reason = reason;
  e.explored_count = explored_.size();
  e.raw_samples = std::move(raw);
  timeline_.push_back(std::move(e));
}

void Session::new_page(std::vector<std::uint64_t> ids) {
  pages_.push_back(std::move(ids));
  added_at_page_start_ = added_.size();
}

std::optional<std::uint64_t> Session::reference_card() const {
  if (!synth_since_fit_.empty()) return synth_since_fit_.back();
  if (!preferred_order_.empty()) return preferred_order_.back();
  if (!all_synth_.empty()) return all_synth_.back();
  return std::nullopt;
}

std::uint64_t Session::round_seed() const {
  return splitmix64(config_.seed ^ splitmix64(rounds_ + 1));
}

void Session::write_snapshot() const {
  if (!snapshot_dir_) return;
  try {
    std::filesystem::create_directories(*snapshot_dir_);
    const auto final_path = *snapshot_dir_ / (id_ + ".jsonl");
    auto tmp = final_path;
    tmp += ".tmp";
    write_export(tmp);
    std::filesystem::rename(tmp, final_path);
  } catch (const std::exception& e) {
    spdlog::error("session {}: snapshot failed: {}", id_, e.what());
  }
}

// ---- queries ----

const Card& Session::card(std::uint64_t id) const {
  if (id == 0 || id > cards_.size()) throw NotFound("unknown card " + std::to_string(id));
  return cards_[id - 1];
}

std::vector<Card> Session::page(std::size_t index) const {
  if (index >= pages_.size()) throw NotFound("unknown page " + std::to_string(index));
  std::vector<Card> out;
  for (std::uint64_t id : pages_[index]) out.push_back(card(id));
  return out;
}

std::vector<Card> Session::added() const {
  std::vector<Card> out;
  for (std::uint64_t id : added_) out.push_back(card(id));
  return out;
}

std::vector<Card> Session::displayed() const {
  std::vector<Card> out;
  if (!pages_.empty()) out = page(pages_.size() - 1);
  for (std::size_t i = pages_.empty() ? 0 : added_at_page_start_; i < added_.size(); ++i) {
    out.push_back(card(added_[i]));
  }
  return out;
}

const ShapeExtrinsic& Session::shape(const std::string& shape_id) const {
  if (auto it = shapes_.find(shape_id); it != shapes_.end()) return it->second;
  if (const ShapeExtrinsic* s = artifacts_->find_shape(shape_id)) return *s;
  throw NotFound("unknown shape " + shape_id);
}

bool Session::has_shape(const std::string& shape_id) const {
  return shapes_.contains(shape_id) || artifacts_->find_shape(shape_id) != nullptr;
}

MapState Session::map_state() const {
  MapState m;
  m.mode = mode_;
  m.heat = mode_ == Mode::bogen;
  m.bounds = config_.acquisition.bounds;
  m.regions = artifacts_->tag_centroids;
  for (const Landmark& l : artifacts_->landmarks.landmarks) {
    m.points.push_back({"landmark", l.shape_id, std::nullopt, l.point, 0.0, 0.0});
  }
  for (const Card& c : cards_) m.points.push_back({"card", c.shape_id, c.id, c.latent, 0.0, 0.0});
  if (m.heat) {
    std::vector<LatentPoint2D> pts;
    pts.reserve(m.points.size());
    for (const auto& p : m.points) pts.push_back(p.latent);
    const kernels::PredictionBatch pred = kernels::omp::predict_many(model_, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      m.points[i].mu = pred.mu(static_cast<Eigen::Index>(i));
      m.points[i].sigma2 = pred.sigma2(static_cast<Eigen::Index>(i));
    }
  }
  int n = 1;
  for (const Card& c : displayed()) m.numbering.emplace_back(n++, c.id);
  m.highlights = highlights_;
  return m;
}

SessionRecord Session::record() const {
  SessionRecord r;
  r.mode = mode_;
  r.kernel = config_.kernel;
  r.landmarks = artifacts_->landmarks.points();
  r.timeline = timeline_;
  TimelineEntry end;
  end.type = TimelineEntry::Type::flush;
  end.reason = "end";
  end.explored_count = explored_.size();
  r.timeline.push_back(std::move(end));
  r.explored = explored_;
  r.cards = cards_;
  return r;
}

json Session::provenance_tree(std::uint64_t card_id) const {
  const Card& c = card(card_id);
  json parents = json::array();
  for (std::uint64_t p : c.parents) parents.push_back(provenance_tree(p));
  return {{"card_id", c.id}, {"shape_id", c.shape_id}, {"provenance", to_string(c.provenance)}, {"parents", parents}};
}

json Session::canonical_state() const {
  json cards = json::array();
  for (const Card& c : cards_) cards.push_back(to_json(c));
  json shapes = json::object();
  for (const auto& [id, s] : shapes_) {
    const ShapeVector x = flatten(s);
    shapes[id] = std::vector<double>(x.data(), x.data() + x.size());
  }
  json observations = json::array();
  for (const auto& o : dataset_.observations()) observations.push_back({{"preferred", o.preferred}, {"others", o.others}});
  json timeline = json::array();
  for (const auto& e : timeline_) timeline.push_back(timeline_json(e));
  json highlights = json::array();
  for (const auto& h : highlights_) highlights.push_back({point_json(h.center), h.radius});
  json events = json::array();
  for (const auto& e : events_) events.push_back({e.seq, to_string(e.kind), e.payload});
  const Eigen::VectorXd& g = model_.g_map();

  return {{"id", id_},
          {"mode", to_string(mode_)},
          {"config", to_json(config_)},
          {"cards", cards},
          {"shapes", shapes},
          {"pages", pages_},
          {"added", added_},
          {"added_at_page_start", added_at_page_start_},
          {"shown", shown_corpus_ids_},
          {"main", main_card_ ? json(*main_card_) : json()},
          {"sub", sub_card_ ? json(*sub_card_) : json()},
          {"preferred_order", preferred_order_},
          {"synth_since_fit", synth_since_fit_},
          {"pending", pending_.size()},
          {"saved", saved_},
          {"highlights", highlights},
          {"explored", points_json(explored_)},
          {"timeline", timeline},
          {"generated", generated_},
          {"rounds", rounds_},
          {"dataset", {{"points", points_json(dataset_.points())}, {"observations", observations}}},
          {"book",
           {{"preferred", book_.preferred_cards},
            {"raw", points_json(book_.pending_raw_samples)},
            {"consumed", book_.consumed_raw_indices}}},
          {"model", {{"support", points_json(model_.support())}, {"g", std::vector<double>(g.data(), g.data() + g.size())}}},
          {"counters", {counters_.fit_calls, counters_.sample_calls}},
          {"events", events}};
}

std::uint64_t Session::state_hash() const { return fnv1a(canonical_state().dump()); }

void Session::export_jsonl(std::ostream& out) const {
  out << json{{"type", "header"},
              {"format", "bogen-session"},
              {"version", 1},
              {"session_id", id_},
              {"mode", to_string(mode_)},
              {"config", to_json(config_)}}
             .dump()
      << '\n';
  for (const auto& e : events_) {
    out << json{{"type", "event"},
                {"seq", e.seq},
                {"timestamp_ms", e.timestamp_ms},
                {"kind", to_string(e.kind)},
                {"payload", e.payload}}
               .dump()
        << '\n';
  }
  for (std::uint64_t id : saved_) {
    json d = design_json(*this, id);
    d["type"] = "design";
    out << d.dump() << '\n';
  }
  const SessionRecord r = record();
  json timeline = json::array();
  for (const auto& e : r.timeline) timeline.push_back(timeline_json(e));
  json cards = json::array();
  for (const auto& c : r.cards) cards.push_back(to_json(c));
  out << json{{"type", "analysis"},
              {"mode", to_string(r.mode)},
              {"kernel", to_json(r.kernel)},
              {"landmarks", points_json(r.landmarks)},
              {"explored", points_json(r.explored)},
              {"timeline", timeline},
              {"cards", cards}}
             .dump()
      << '\n';
  out << json{{"type", "footer"}, {"state_hash", format_hash(state_hash())}, {"event_count", events_.size()}}.dump()
      << '\n';
}

std::string Session::export_jsonl() const {
  std::ostringstream ss;
  export_jsonl(ss);
  return ss.str();
}

void Session::write_export(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw FileError(path, "cannot open for writing");
  export_jsonl(f);
  if (!f) throw FileError(path, "write failed");
}

// ---- replay ----

namespace {

std::vector<json> read_lines(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw InvalidData("session export line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (out.empty() || out.front().value("type", "") != "header" ||
      out.front().value("format", "") != "bogen-session") {
    throw InvalidData("not a bogen session export");
  }
  if (out.front().value("version", 0) != 1) throw InvalidData("unsupported session export version");
  return out;
}

std::uint64_t parse_hash(const std::string& s) {
  try {
    std::size_t used = 0;
    const std::uint64_t h = std::stoull(s, &used, 16);
    if (used != s.size()) throw InvalidData("bad state hash: " + s);
    return h;
  } catch (const std::logic_error&) {
    throw InvalidData("bad state hash: " + s);
  }
}

} // namespace

ReplayResult replay_session(std::istream& in, std::shared_ptr<const Artifacts> artifacts) {
  const std::vector<json> lines = read_lines(in);
  ReplayResult out;
  try {
    const json& h = lines.front();
    out.session = std::make_unique<Session>(h.at("session_id").get<std::string>(),
                                            parse_mode(h.at("mode").get<std::string>()), std::move(artifacts),
                                            session_config_from_json(h.at("config")));
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const json& l = lines[i];
      const std::string type = l.value("type", "");
      if (type == "event") {
        SessionEvent e;
        e.seq = l.at("seq").get<std::uint64_t>();
        e.timestamp_ms = l.value("timestamp_ms", std::int64_t{0});
        e.kind = parse_event_kind(l.at("kind").get<std::string>());
        e.payload = l.at("payload");
        out.session->apply(e);
      } else if (type == "footer") {
        out.recorded_hash = parse_hash(l.at("state_hash").get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw InvalidData(std::string("session export: ") + e.what());
  }
  return out;
}

ReplayResult replay_session_file(const std::filesystem::path& path, std::shared_ptr<const Artifacts> artifacts) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  return replay_session(f, std::move(artifacts));
}

SessionRecord read_session_record(std::istream& in) {
  const std::vector<json> lines = read_lines(in);
  for (const json& l : lines) {
    if (l.value("type", "") != "analysis") continue;
    try {
      SessionRecord r;
      r.mode = parse_mode(l.at("mode").get<std::string>());
      r.kernel = kernel_from_json(l.at("kernel"));
      r.landmarks = points_from(l.at("landmarks"));
      r.explored = points_from(l.at("explored"));
      for (const auto& e : l.at("timeline")) r.timeline.push_back(timeline_from(e));
      for (const auto& c : l.at("cards")) r.cards.push_back(card_from(c));
      return r;
    } catch (const json::exception& e) {
      throw InvalidData(std::string("session analysis record: ") + e.what());
    }
  }
  throw InvalidData("session export has no analysis record");
}

SessionRecord read_session_record_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  return read_session_record(f);
}

} // namespace bogen
