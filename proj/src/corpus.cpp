#include "bogen/corpus.hpp"

#include "bogen/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace bogen {

namespace {

constexpr std::array<std::string_view, kPartCount> kRoles = {
    "seat",           "back_panel",      "back_lower",      "back_crest",
    "leg_front_left", "leg_front_right", "leg_back_left",   "leg_back_right",
    "arm_left",       "arm_right",       "stretcher_front", "stretcher_back",
    "stretcher_left", "stretcher_right", "ornament_a",      "ornament_b"};

constexpr double kFloorY = -0.9;

struct Range {
  double lo, hi;
};

// Per-style dimension ranges. Lengths are full extents in model units;
// angles in degrees.
struct StyleParams {
  Range seat_width, seat_depth, seat_height, seat_thickness;
  Range back_height, back_thickness, back_tilt;
  Range leg_thickness, leg_splay;
  double arm_probability;
  double stretcher_weight; // 0 disables stretchers
  bool side_stretchers_only;
  Range crest_weight, ornament_weight;
  bool has_back;
  bool folding_legs;
};

const StyleParams& params_for(Style s) {
  static const StyleParams armchair{{0.55, 0.75}, {0.50, 0.70}, {0.55, 0.70}, {0.10, 0.18},
                                    {0.45, 0.70}, {0.10, 0.20}, {5, 20},
                                    {0.05, 0.08}, {0, 3},
                                    1.0, 0.0, false,
                                    {0.2, 0.4}, {0.4, 0.7}, true, false};
  static const StyleParams dining{{0.40, 0.50}, {0.40, 0.50}, {0.80, 0.90}, {0.04, 0.06},
                                  {0.70, 0.90}, {0.03, 0.06}, {0, 10},
                                  {0.03, 0.05}, {0, 2},
                                  0.0, 0.3, true,
                                  {0.3, 0.5}, {0.0, 0.0}, true, false};
  static const StyleParams stool{{0.30, 0.40}, {0.30, 0.40}, {0.95, 1.30}, {0.04, 0.07},
                                 {0, 0}, {0, 0}, {0, 0},
                                 {0.03, 0.05}, {5, 12},
                                 0.0, 0.45, false,
                                 {0.0, 0.0}, {0.0, 0.0}, false, false};
  static const StyleParams folding{{0.40, 0.46}, {0.35, 0.42}, {0.72, 0.82}, {0.02, 0.03},
                                   {0.45, 0.60}, {0.02, 0.03}, {8, 15},
                                   {0.02, 0.03}, {20, 30},
                                   0.0, 0.2, false,
                                   {0.1, 0.2}, {0.0, 0.0}, true, true};
  static const StyleParams decorative{{0.45, 0.60}, {0.45, 0.55}, {0.72, 0.85}, {0.05, 0.08},
                                      {0.80, 1.00}, {0.05, 0.09}, {12, 25},
                                      {0.04, 0.06}, {8, 15},
                                      0.5, 0.0, false,
                                      {0.7, 0.9}, {0.5, 0.8}, true, false};
  switch (s) {
  case Style::armchair: return armchair;
  case Style::dining: return dining;
  case Style::stool: return stool;
  case Style::folding: return folding;
  case Style::decorative: return decorative;
  }
  throw InvalidArgument("unknown style");
}

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

Eigen::Matrix3d rot_x(double rad) { return Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitX()).toRotationMatrix(); }
Eigen::Matrix3d rot_z(double rad) { return Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

class ChairBuilder {
public:
  ChairBuilder(std::uint64_t seed, Style style) : style_(style), seed_(seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(style)};
    rng_.seed(seq);
  }

  GeneratedChair build() {
    const StyleParams& p = params_for(style_);
    const double sw = draw(p.seat_width);
    const double sd = style_ == Style::stool ? sw : draw(p.seat_depth); // round stool seats
    const double sh = draw(p.seat_height);
    const double st = draw(p.seat_thickness);
    const double seat_y = kFloorY + sh;
    const double leg_t = draw(p.leg_thickness);

    for (int i = 0; i < kPartCount; ++i) {
      absent(i, Eigen::Vector3d(0.0, seat_y, 0.0));
    }

    set(part::seat, {0.0, seat_y - st / 2, 0.0}, {sw, st, sd}, Eigen::Matrix3d::Identity(), jitter(1.0, 0.05));

    // Legs.
    const double leg_len = sh - st;
    const double splay = radians(draw(p.leg_splay));
    const double leg_w = jitter(0.5, 0.05);
    for (int k = 0; k < 4; ++k) {
      const double sx = (k % 2 == 0) ? -1.0 : 1.0;
      const double sz = (k < 2) ? 1.0 : -1.0;
      Eigen::Matrix3d r;
      if (p.folding_legs) {
        // Crossed legs: front and back pairs lean in opposite directions.
        r = rot_x(sz * splay);
      } else {
        r = rot_z(-sx * splay) * rot_x(sz * splay * 0.5);
      }
      const Eigen::Vector3d c(sx * (sw / 2 - leg_t), kFloorY + leg_len / 2,
                              p.folding_legs ? 0.0 : sz * (sd / 2 - leg_t));
      set(part::leg_front_left + k, c, {leg_t, leg_len, leg_t}, r, leg_w);
    }

    if (p.has_back) {
      const double bh = draw(p.back_height);
      const double bt = draw(p.back_thickness);
      const double tilt = radians(draw(p.back_tilt));
      const Eigen::Matrix3d r = rot_x(-tilt);
      const double back_z = -sd / 2 + bt / 2;
      const Eigen::Vector3d up = r * Eigen::Vector3d::UnitY();
      const Eigen::Vector3d base(0.0, seat_y, back_z);
      set(part::back_panel, base + up * (bh * 0.55), {sw * 0.9, bh * 0.6, bt}, r, jitter(0.8, 0.05));
      if (style_ != Style::folding) {
        set(part::back_lower, base + up * (bh * 0.15), {sw * 0.85, bh * 0.25, bt}, r, jitter(0.5, 0.05));
      }
      const double crest_h = style_ == Style::decorative ? 0.12 : 0.05;
      const double crest_w = style_ == Style::decorative ? sw * 1.15 : sw;
      set(part::back_crest, base + up * (bh * 0.95), {crest_w, crest_h, bt * 1.2}, r, draw(p.crest_weight));
    }

    if (uniform() < p.arm_probability) {
      const double arm_h = 0.2 + 0.1 * uniform();
      for (int k = 0; k < 2; ++k) {
        const double sx = k == 0 ? -1.0 : 1.0;
        set(part::arm_left + k, {sx * (sw / 2 + 0.04), seat_y + arm_h, 0.0}, {0.08, 0.06, sd * 0.9},
            Eigen::Matrix3d::Identity(), jitter(0.6, 0.05));
      }
    }

    if (p.stretcher_weight > 0.0) {
      const double y = kFloorY + leg_len * (0.25 + 0.1 * uniform());
      const double w = p.stretcher_weight;
      if (!p.side_stretchers_only) {
        set(part::stretcher_front, {0.0, y, sd / 2 - leg_t}, {sw - 2 * leg_t, 0.025, 0.025},
            Eigen::Matrix3d::Identity(), jitter(w, 0.03));
        set(part::stretcher_back, {0.0, y, -sd / 2 + leg_t}, {sw - 2 * leg_t, 0.025, 0.025},
            Eigen::Matrix3d::Identity(), jitter(w, 0.03));
      }
      if (!p.folding_legs) {
        set(part::stretcher_left, {-sw / 2 + leg_t, y, 0.0}, {0.025, 0.025, sd - 2 * leg_t},
            Eigen::Matrix3d::Identity(), jitter(w, 0.03));
        set(part::stretcher_right, {sw / 2 - leg_t, y, 0.0}, {0.025, 0.025, sd - 2 * leg_t},
            Eigen::Matrix3d::Identity(), jitter(w, 0.03));
      }
    }

    if (p.ornament_weight.hi > 0.0) {
      if (style_ == Style::armchair) {
        // Seat cushion.
        set(part::ornament_a, {0.0, seat_y + 0.04, 0.02}, {sw * 0.85, 0.08, sd * 0.8},
            Eigen::Matrix3d::Identity(), draw(p.ornament_weight));
      } else {
        const double top = seat_chair_top_;
        for (int k = 0; k < 2; ++k) {
          const double sx = k == 0 ? -1.0 : 1.0;
          set(part::ornament_a + k, {sx * sw * 0.55, top, -sd / 2}, {0.07, 0.12, 0.07},
              rot_z(sx * radians(15.0)), draw(p.ornament_weight));
        }
      }
    }

    GeneratedChair out;
    out.record.style = style_;
    out.record.seed = seed_;
    out.record.parts = record_;
    for (int i = 0; i < kPartCount; ++i) {
      out.shape.parts[i] = PartExtrinsic{record_[i].center, record_[i].eigenvalues, record_[i].eigenvectors,
                                         record_[i].blend_weight};
    }
    out.shape.tags = {std::string(to_string(style_))};
    out.shape.id = std::string(to_string(style_)) + "-" + std::to_string(seed_);
    return out;
  }

private:
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  double draw(Range r) { return r.lo + (r.hi - r.lo) * uniform(); }
  double jitter(double base, double amount) { return base + amount * (2.0 * uniform() - 1.0); }

  void absent(int i, const Eigen::Vector3d& c) {
    record_[i] = ChairRecord::Part{std::string(kRoles[i]), c, Eigen::Vector3d::Constant(kEigFloor * 10),
                                   Eigen::Matrix3d::Identity(), 0.0};
  }

  // extents are full box edge lengths; a uniform box of edge L has variance L^2/12.
  void set(int i, const Eigen::Vector3d& c, const Eigen::Vector3d& extents, const Eigen::Matrix3d& r, double w) {
    record_[i] = ChairRecord::Part{std::string(kRoles[i]), c, extents.cwiseProduct(extents) / 12.0, r, w};
    if (i == part::back_crest) seat_chair_top_ = c.y();
  }

  Style style_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::array<ChairRecord::Part, kPartCount> record_;
  double seat_chair_top_ = 0.0;
};

} // namespace

std::string_view to_string(Style s) {
  switch (s) {
  case Style::armchair: return "armchair";
  case Style::dining: return "dining";
  case Style::stool: return "stool";
  case Style::folding: return "folding";
  case Style::decorative: return "decorative";
  }
  return "unknown";
}

bool is_style_tag(std::string_view tag) {
  for (Style s : kAllStyles) {
    if (to_string(s) == tag) return true;
  }
  return false;
}

Style parse_style(std::string_view tag) {
  for (Style s : kAllStyles) {
    if (to_string(s) == tag) return s;
  }
  throw InvalidArgument("unknown style tag: " + std::string(tag));
}

std::string_view part_role(int index) {
  if (index < 0 || index >= kPartCount) {
    throw InvalidArgument("part index out of range");
  }
  return kRoles[index];
}

GeneratedChair generate_chair_with_record(std::uint64_t seed, Style style) {
  return ChairBuilder(seed, style).build();
}

ShapeExtrinsic generate_chair(std::uint64_t seed, Style style) {
  return generate_chair_with_record(seed, style).shape;
}

ShapeExtrinsic generate_chair(std::uint64_t seed, std::string_view style) {
  return generate_chair(seed, parse_style(style));
}

std::vector<ShapeVector> Corpus::vectors() const {
  std::vector<ShapeVector> out;
  out.reserve(shapes.size());
  for (const auto& s : shapes) out.push_back(flatten(s));
  return out;
}

std::size_t Corpus::find(const std::string& id) const {
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].id == id) return i;
  }
  return npos;
}

Corpus generate_corpus(std::size_t size, std::uint64_t seed) {
  Corpus corpus;
  corpus.shapes.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const Style style = kAllStyles[i % kAllStyles.size()];
    ShapeExtrinsic s = generate_chair(seed * 1'000'003ULL + i, style);
    char id[32];
    std::snprintf(id, sizeof id, "chair-%05zu", i);
    s.id = id;
    corpus.shapes.push_back(std::move(s));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw FileError(path.string(), "cannot open for writing");
  }
  for (const auto& s : corpus.shapes) {
    const ShapeVector v = flatten(s);
    nlohmann::json j;
    j["id"] = s.id;
    j["tags"] = s.tags;
    j["x"] = std::vector<double>(v.data(), v.data() + kShapeDim);
    out << j.dump() << '\n';
  }
  if (!out) {
    throw FileError(path.string(), "write failed");
  }
}

Corpus load_corpus(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifact(path.string());
  }
  std::ifstream in(path);
  if (!in) {
    throw FileError(path.string(), "cannot open for reading");
  }
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto x = j.at("x").get<std::vector<double>>();
      ShapeExtrinsic s = unflatten(std::span<const double>(x));
      s.id = j.at("id").get<std::string>();
      s.tags = j.at("tags").get<std::set<std::string>>();
      corpus.shapes.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw FileError(path.string(), "malformed corpus record at line " + std::to_string(lineno) + " (" +
                                         e.what() + ")");
    } catch (const InvalidArgument& e) {
      throw FileError(path.string(), "bad corpus record at line " + std::to_string(lineno) + " (" + e.what() + ")");
    }
  }
  return corpus;
}

} // namespace bogen
