#include "bogen/shape.hpp"

#include "bogen/error.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace bogen {

Eigen::Matrix3d PartExtrinsic::covariance() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

Eigen::Matrix<double, kPartDim, 1> flatten_part(const PartExtrinsic& part) {
  Eigen::Matrix<double, kPartDim, 1> b;
  b.segment<3>(0) = part.center;
  b.segment<3>(3) = part.eigenvalues;
  // Eigen matrices are column-major, so the raw buffer is already in order.
  b.segment<9>(6) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(part.eigenvectors.data());
  b(15) = part.blend_weight;
  return b;
}

ShapeVector flatten(const ShapeExtrinsic& shape) {
  ShapeVector v;
  for (int i = 0; i < kPartCount; ++i) {
    v.segment<kPartDim>(i * kPartDim) = flatten_part(shape.parts[i]);
  }
  return v;
}

ShapeExtrinsic unflatten(std::span<const double> v) {
  if (v.size() != static_cast<std::size_t>(kShapeDim)) {
    throw InvalidArgument("unflatten: expected 256 values, got " + std::to_string(v.size()));
  }
  ShapeExtrinsic s;
  for (int i = 0; i < kPartCount; ++i) {
    const double* b = v.data() + i * kPartDim;
    PartExtrinsic& p = s.parts[i];
    p.center = Eigen::Vector3d(b[0], b[1], b[2]);
    p.eigenvalues = Eigen::Vector3d(b[3], b[4], b[5]);
    p.eigenvectors = Eigen::Map<const Eigen::Matrix3d>(b + 6);
    p.blend_weight = b[15];
  }
  return s;
}

ShapeExtrinsic unflatten(const ShapeVector& v) {
  return unflatten(std::span<const double>(v.data(), kShapeDim));
}

ShapeExtrinsic interpolate_parts(const ShapeExtrinsic& main, const ShapeExtrinsic& sub,
                                 const std::set<int>& part_indices) {
  if (part_indices.empty()) {
    throw InvalidArgument("interpolate_parts: part_indices must be non-empty");
  }
  for (int i : part_indices) {
    if (i < 0 || i >= kPartCount) {
      throw InvalidArgument("interpolate_parts: part index out of range: " + std::to_string(i));
    }
  }
  ShapeVector a = flatten(main);
  const ShapeVector b = flatten(sub);
  for (int i : part_indices) {
    auto blk = a.segment<kPartDim>(i * kPartDim);
    blk = (blk + b.segment<kPartDim>(i * kPartDim)) / 2.0;
  }
  ShapeExtrinsic out = unflatten(a);
  out.tags = main.tags;
  out.tags.insert(sub.tags.begin(), sub.tags.end());
  out.parents = {main.id, sub.id};
  return out;
}

Eigen::Matrix3d polar_orthonormal(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

namespace {

bool all_finite(const PartExtrinsic& p) {
  return p.center.allFinite() && p.eigenvalues.allFinite() && p.eigenvectors.allFinite() &&
         std::isfinite(p.blend_weight);
}

bool is_orthonormal(const Eigen::Matrix3d& m) {
  return (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12;
}

} // namespace

ShapeExtrinsic normalize(const ShapeExtrinsic& shape) {
  ShapeExtrinsic out = shape;
  for (int i = 0; i < kPartCount; ++i) {
    PartExtrinsic& p = out.parts[i];
    if (!all_finite(p)) {
      throw InvalidData("normalize: non-finite value in part " + std::to_string(i));
    }
    p.eigenvalues = p.eigenvalues.cwiseMax(kEigFloor);
    // Leave exact rotations untouched so valid shapes are fixed points.
    if (!is_orthonormal(p.eigenvectors)) {
      p.eigenvectors = polar_orthonormal(p.eigenvectors);
    }
    p.blend_weight = std::max(p.blend_weight, 0.0);
  }
  return out;
}

PointCloud sample_point_cloud(const ShapeExtrinsic& shape, std::size_t n, std::uint64_t seed) {
  if (n < 1) {
    throw InvalidArgument("sample_point_cloud: n must be >= 1");
  }
  std::array<double, kPartCount> weights{};
  double total = 0.0;
  for (int i = 0; i < kPartCount; ++i) {
    weights[i] = std::max(shape.parts[i].blend_weight, 0.0);
    total += weights[i];
  }
  if (!(total > 0.0)) {
    throw DegenerateShape("sample_point_cloud: all blend weights are <= 0");
  }

  std::array<Eigen::Matrix3d, kPartCount> factors;
  for (int i = 0; i < kPartCount; ++i) {
    const PartExtrinsic& p = shape.parts[i];
    factors[i] = p.eigenvectors * p.eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);

  PointCloud cloud;
  cloud.points.reserve(n);
  cloud.part_labels.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int i = pick(rng);
    Eigen::Vector3d xi(normal(rng), normal(rng), normal(rng));
    cloud.points.push_back(shape.parts[i].center + factors[i] * xi);
    cloud.part_labels.push_back(i);
  }
  return cloud;
}

CloudFormat parse_cloud_format(const std::string& name) {
  if (name == "ply") return CloudFormat::ply;
  if (name == "csv") return CloudFormat::csv;
  throw InvalidArgument("unknown point cloud format: " + name);
}

void export_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::ofstream out(path);
  if (!out) {
    throw FileError(path.string(), "cannot open for writing");
  }
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  const std::size_t n = cloud.points.size();
  if (format == CloudFormat::ply) {
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << n << "\n"
        << "property float x\nproperty float y\nproperty float z\nproperty int part\n"
        << "end_header\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = cloud.points[i];
      out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
          << static_cast<float>(p.z()) << ' ' << cloud.part_labels[i] << '\n';
    }
  } else {
    out << "x,y,z,part\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = cloud.points[i];
      out << static_cast<float>(p.x()) << ',' << static_cast<float>(p.y()) << ','
          << static_cast<float>(p.z()) << ',' << cloud.part_labels[i] << '\n';
    }
  }
  if (!out) {
    throw FileError(path.string(), "write failed");
  }
}

PointCloud import_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) {
    throw FileError(path.string(), "cannot open for reading");
  }
  PointCloud cloud;
  std::string line;
  std::size_t expected = 0;
  if (format == CloudFormat::ply) {
    while (std::getline(in, line) && line != "end_header") {
      std::istringstream ls(line);
      std::string a, b;
      ls >> a >> b;
      if (a == "element" && b == "vertex") ls >> expected;
    }
    for (std::size_t i = 0; i < expected; ++i) {
      float x, y, z;
      int part;
      if (!(in >> x >> y >> z >> part)) {
        throw FileError(path.string(), "truncated PLY body");
      }
      cloud.points.emplace_back(x, y, z);
      cloud.part_labels.push_back(part);
    }
  } else {
    std::getline(in, line); // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      for (char& c : line) {
        if (c == ',') c = ' ';
      }
      std::istringstream ls(line);
      float x, y, z;
      int part;
      if (!(ls >> x >> y >> z >> part)) {
        throw FileError(path.string(), "malformed CSV row");
      }
      cloud.points.emplace_back(x, y, z);
      cloud.part_labels.push_back(part);
    }
  }
  return cloud;
}

} // namespace bogen
