#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace bogen {

inline constexpr int kPartCount = 16;
inline constexpr int kPartDim = 16;
inline constexpr int kShapeDim = kPartCount * kPartDim; // 256

/// Parts with a blend weight at or below this are treated as absent.
inline constexpr double kWeightFloor = 1e-3;
/// Lower clamp applied to covariance eigenvalues by normalize().
inline constexpr double kEigFloor = 1e-6;

using ShapeVector = Eigen::Matrix<double, kShapeDim, 1>;

/// One part-level 3D Gaussian: center c, covariance eigenvalues lambda,
/// eigenvectors u (columns) and blend weight pi.
///
/// Block layout (16 scalars): [center(3), eigenvalues(3),
/// eigenvectors column-major(9), blend_weight(1)].
struct PartExtrinsic {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Ones();
  Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();
  double blend_weight = 1.0;

  Eigen::Matrix3d covariance() const;
  bool operator==(const PartExtrinsic&) const = default;
};

struct ShapeExtrinsic {
  std::array<PartExtrinsic, kPartCount> parts{};
  std::set<std::string> tags;
  std::string id;
  /// Ids of the shapes this one was synthesized from (empty for originals).
  std::vector<std::string> parents;

  bool operator==(const ShapeExtrinsic&) const = default;
};

ShapeVector flatten(const ShapeExtrinsic& shape);
Eigen::Matrix<double, kPartDim, 1> flatten_part(const PartExtrinsic& part);

/// Inverse of flatten. Tags, id and parents are left empty.
ShapeExtrinsic unflatten(const ShapeVector& v);
ShapeExtrinsic unflatten(std::span<const double> v);

/// Part-level synthesis: every selected 16-dim block of the result is the
/// raw midpoint of main's and sub's blocks; every other block is main's.
/// The stored result is deliberately not normalized.
ShapeExtrinsic interpolate_parts(const ShapeExtrinsic& main, const ShapeExtrinsic& sub,
                                 const std::set<int>& part_indices);

/// Repairs validity: eigenvalues >= kEigFloor, eigenvectors replaced by the
/// nearest orthonormal matrix (polar factor), blend weights >= 0.
/// Throws InvalidData on non-finite input.
ShapeExtrinsic normalize(const ShapeExtrinsic& shape);

/// Nearest orthonormal matrix in Frobenius norm.
Eigen::Matrix3d polar_orthonormal(const Eigen::Matrix3d& m);

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<int> part_labels;
};

/// Draws n points from the Gaussian mixture the shape defines. Part i is
/// chosen with probability proportional to max(pi_i, 0).
/// Throws DegenerateShape if no part carries positive weight.
PointCloud sample_point_cloud(const ShapeExtrinsic& shape, std::size_t n, std::uint64_t seed);

enum class CloudFormat { ply, csv };

CloudFormat parse_cloud_format(const std::string& name);
void export_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);
PointCloud import_point_cloud(const std::filesystem::path& path, CloudFormat format);

} // namespace bogen
