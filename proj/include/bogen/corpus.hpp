#pragma once

#include "bogen/shape.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bogen {

enum class Style { armchair, dining, stool, folding, decorative };

inline constexpr std::array<Style, 5> kAllStyles = {Style::armchair, Style::dining, Style::stool,
                                                    Style::folding, Style::decorative};

std::string_view to_string(Style s);
/// Throws InvalidArgument for an unknown tag.
Style parse_style(std::string_view tag);
bool is_style_tag(std::string_view tag);

/// Semantic role of each of the 16 part slots.
namespace part {
inline constexpr int seat = 0;
inline constexpr int back_panel = 1;
inline constexpr int back_lower = 2;
inline constexpr int back_crest = 3;
inline constexpr int leg_front_left = 4;
inline constexpr int leg_front_right = 5;
inline constexpr int leg_back_left = 6;
inline constexpr int leg_back_right = 7;
inline constexpr int arm_left = 8;
inline constexpr int arm_right = 9;
inline constexpr int stretcher_front = 10;
inline constexpr int stretcher_back = 11;
inline constexpr int stretcher_left = 12;
inline constexpr int stretcher_right = 13;
inline constexpr int ornament_a = 14;
inline constexpr int ornament_b = 15;
} // namespace part

inline constexpr std::array<int, 3> kBackRestParts = {part::back_panel, part::back_lower, part::back_crest};

std::string_view part_role(int index);

/// Everything the generator decided for one chair, recorded independently of
/// the ShapeExtrinsic it builds.
struct ChairRecord {
  struct Part {
    std::string role;
    Eigen::Vector3d center;
    Eigen::Vector3d eigenvalues;
    Eigen::Matrix3d eigenvectors;
    double blend_weight;
  };
  Style style;
  std::uint64_t seed;
  std::array<Part, kPartCount> parts;
};

struct GeneratedChair {
  ShapeExtrinsic shape;
  ChairRecord record;
};

GeneratedChair generate_chair_with_record(std::uint64_t seed, Style style);
ShapeExtrinsic generate_chair(std::uint64_t seed, Style style);
/// String-tag overload; throws InvalidArgument on an unknown style.
ShapeExtrinsic generate_chair(std::uint64_t seed, std::string_view style);

struct Corpus {
  std::vector<ShapeExtrinsic> shapes;

  std::size_t size() const { return shapes.size(); }
  std::vector<ShapeVector> vectors() const;
  /// Index of the shape with this id, or npos.
  std::size_t find(const std::string& id) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Styles are assigned round-robin so every family gets size/5 shapes.
Corpus generate_corpus(std::size_t size, std::uint64_t seed);

/// JSON-lines: one {"id", "tags", "x": [256 numbers]} object per line.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

} // namespace bogen
