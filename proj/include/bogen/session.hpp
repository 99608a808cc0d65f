#pragma once

#include "bogen/artifacts.hpp"
#include "bogen/config.hpp"
#include "bogen/pbo.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bogen {

enum class Mode { bogen, uionly };
std::string to_string(Mode m);
/// Throws InvalidArgument for anything but "bogen" or "uionly".
Mode parse_mode(const std::string& s);

enum class Provenance { prompt, pbo, synthesis };
std::string to_string(Provenance p);

enum class EventKind {
  prompt_search,
  mark_preferred,
  select_main,
  select_sub,
  synthesize,
  request_suggestions,
  hover_map,
  click_region,
  save_design,
};
std::string to_string(EventKind k);
EventKind parse_event_kind(const std::string& s);

struct Card {
  std::uint64_t id = 0;
  std::string shape_id;
  LatentPoint2D latent;
  Provenance provenance = Provenance::prompt;
  std::vector<std::uint64_t> parents;
  int page = -1; // -1: synthesized, lives in the added list
  std::optional<LatentPoint2D> raw_sample; // acquisition point a pbo card was decoded from
};

struct SessionEvent {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0; // wall clock, informational only
  EventKind kind = EventKind::prompt_search;
  nlohmann::json payload;
};

struct CardPage {
  std::size_t index = 0;
  std::vector<Card> cards;
  std::string warning;
};

struct Highlight {
  LatentPoint2D center;
  double radius = 0.0;
};

struct MapPoint {
  std::string kind; // "landmark" or "card"
  std::string shape_id;
  std::optional<std::uint64_t> card_id;
  LatentPoint2D latent;
  double mu = 0.0;
  double sigma2 = 0.0;
};

struct MapState {
  Mode mode = Mode::bogen;
  bool heat = false; // mu/sigma2 present (bogen only)
  std::vector<MapPoint> points;
  std::map<std::string, LatentPoint2D> regions; // tag -> centroid, drawn as "+"
  std::vector<std::pair<int, std::uint64_t>> numbering; // map marker -> card
  std::vector<Highlight> highlights;
  Bounds bounds;
};

struct Counters {
  std::size_t fit_calls = 0;
  std::size_t sample_calls = 0;
};

/// What the offline metrics need from a session, in event order.
struct TimelineEntry {
  enum class Type { preference, flush };
  Type type = Type::preference;
  PreferenceEvent preference;               // Type::preference
  std::string reason;                        // Type::flush
  std::size_t explored_count = 0;            // Type::flush
  std::vector<LatentPoint2D> raw_samples;    // Type::flush after a suggestion round
};

struct SessionRecord {
  Mode mode = Mode::bogen;
  KernelConfig kernel;
  std::vector<LatentPoint2D> landmarks;
  std::vector<TimelineEntry> timeline;
  std::vector<LatentPoint2D> explored; // searched, generated, synthesized and hovered latents
  std::vector<Card> cards;
};

/// One design-exploration session. Not thread-safe; the service serializes
/// access per session. Every state change goes through a logged event so the
/// export replays to the same state.
class Session {
public:
  Session(std::string id, Mode mode, std::shared_ptr<const Artifacts> artifacts, SessionConfig config);

  const std::string& id() const { return id_; }
  Mode mode() const { return mode_; }
  const SessionConfig& config() const { return config_; }

  /// Tag search over the corpus. Unknown tags yield an empty page with a warning.
  CardPage prompt_search(const std::vector<std::string>& tags);
  void mark_preferred(std::uint64_t card_id);
  void select(std::uint64_t card_id, bool main);
  /// Throws NotFound for unknown cards and InvalidArgument for bad parts.
  Card synthesize(std::uint64_t main_id, std::uint64_t sub_id, const std::set<int>& parts);
  /// Synthesis result without touching the session.
  ShapeExtrinsic preview_synthesis(std::uint64_t main_id, std::uint64_t sub_id, const std::set<int>& parts) const;
  /// Throws FeatureDisabled in uionly mode and PreconditionFailed without a
  /// preference or synthesis since the last round.
  CardPage request_suggestions();
  void hover(const LatentPoint2D& at);
  void click_region(const LatentPoint2D& center, double radius);
  nlohmann::json save_design(std::uint64_t card_id);

  /// Re-executes one logged event (used by replay).
  void apply(const SessionEvent& event);

  MapState map_state() const;
  const Card& card(std::uint64_t id) const;
  const std::vector<Card>& cards() const { return cards_; }
  std::size_t page_count() const { return pages_.size(); }
  std::vector<Card> page(std::size_t index) const;
  std::vector<Card> added() const;
  std::vector<Card> displayed() const;
  const ShapeExtrinsic& shape(const std::string& shape_id) const;
  bool has_shape(const std::string& shape_id) const;
  /// Cards marked preferred or used as a suggestion reference.
  const std::set<std::uint64_t>& preferred() const { return marked_; }

  const std::vector<SessionEvent>& events() const { return events_; }
  const Counters& counters() const { return counters_; }
  const PreferenceDataset& dataset() const { return dataset_; }
  const PreferenceBook& book() const { return book_; }
  const GoodnessModel& model() const { return model_; }
  std::size_t rounds() const { return rounds_; }

  SessionRecord record() const;
  nlohmann::json provenance_tree(std::uint64_t card_id) const;

  nlohmann::json canonical_state() const;
  /// FNV-1a over the canonical state (timestamps excluded).
  std::uint64_t state_hash() const;

  /// JSON-lines: header, events, saved designs, analysis record, footer.
  void export_jsonl(std::ostream& out) const;
  std::string export_jsonl() const;
  void write_export(const std::filesystem::path& path) const;

  /// Snapshot target written after every suggestion round.
  void set_snapshot_dir(std::optional<std::filesystem::path> dir) { snapshot_dir_ = std::move(dir); }

private:
  CardPage do_search(const std::vector<std::string>& tags);
  void do_prefer(std::uint64_t card_id);
  void do_select(std::uint64_t card_id, bool main);
  Card do_synthesize(std::uint64_t main_id, std::uint64_t sub_id, const std::set<int>& parts);
  CardPage do_suggest();
  void do_hover(const LatentPoint2D& at);
  void do_click(const LatentPoint2D& center, double radius);
  nlohmann::json do_save(std::uint64_t card_id);

  void log(EventKind kind, nlohmann::json payload);
  Card& add_card(Card c, const ShapeExtrinsic* new_shape);
  CardPoint card_point(const Card& c) const;
  void note_preference(PreferenceKind kind, const Card& chosen);
  void flush(const std::string& reason, std::vector<LatentPoint2D> raw = {});
  void new_page(std::vector<std::uint64_t> ids);
  std::optional<std::uint64_t> reference_card() const;
  std::uint64_t round_seed() const;
  void write_snapshot() const;

  std::string id_;
  Mode mode_;
  std::shared_ptr<const Artifacts> artifacts_;
  SessionConfig config_;

  std::vector<Card> cards_; // card id = index + 1
  std::map<std::string, ShapeExtrinsic> shapes_; // session-generated shapes
  std::vector<std::vector<std::uint64_t>> pages_;
  std::vector<std::uint64_t> added_;
  std::size_t added_at_page_start_ = 0;
  std::set<std::string> shown_corpus_ids_;
  std::optional<std::uint64_t> main_card_, sub_card_;
  std::vector<std::uint64_t> preferred_order_;
  std::set<std::uint64_t> marked_;
  std::vector<std::uint64_t> synth_since_fit_;
  std::vector<std::uint64_t> all_synth_;
  std::vector<PreferenceEvent> pending_;
  std::vector<std::uint64_t> saved_;
  std::vector<Highlight> highlights_;
  std::vector<LatentPoint2D> explored_;
  std::vector<TimelineEntry> timeline_;
  std::size_t generated_ = 0;
  std::size_t rounds_ = 0;

  PreferenceDataset dataset_;
  PreferenceBook book_;
  GoodnessModel model_;
  Counters counters_;

  std::vector<SessionEvent> events_;
  std::optional<std::filesystem::path> snapshot_dir_;
};

struct ReplayResult {
  std::unique_ptr<Session> session;
  std::optional<std::uint64_t> recorded_hash;
};

/// Rebuilds a session from its export. Throws InvalidData on malformed input.
ReplayResult replay_session(std::istream& in, std::shared_ptr<const Artifacts> artifacts);
ReplayResult replay_session_file(const std::filesystem::path& path, std::shared_ptr<const Artifacts> artifacts);

/// Reads the analysis record of an export without needing artifacts.
SessionRecord read_session_record(std::istream& in);
SessionRecord read_session_record_file(const std::filesystem::path& path);

nlohmann::json to_json(const Card& c);
nlohmann::json to_json(const MapState& m);
std::string format_hash(std::uint64_t h);

} // namespace bogen
