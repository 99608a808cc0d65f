#include "bogen/corpus.hpp"
#include "bogen/error.hpp"
#include "bogen/shape.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace bogen;

namespace {

ShapeExtrinsic random_shape(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  ShapeVector v;
  for (int i = 0; i < kShapeDim; ++i) v(i) = n01(rng);
  return unflatten(v);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("bogen_test_" + name);
}

} // namespace

TEST_CASE("flatten: canonical part block") {
  ShapeExtrinsic s;
  const ShapeVector v = flatten(s);
  const double block[16] = {0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1};
  for (int p = 0; p < kPartCount; ++p)
    for (int k = 0; k < kPartDim; ++k) CHECK(v(p * kPartDim + k) == block[k]);
}

TEST_CASE("flatten: eigenvectors are column-major") {
  ShapeExtrinsic s;
  s.parts[2].eigenvectors << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const ShapeVector v = flatten(s);
  const double expect[9] = {1, 4, 7, 2, 5, 8, 3, 6, 9};
  for (int k = 0; k < 9; ++k) CHECK(v(2 * kPartDim + 6 + k) == expect[k]);
}

TEST_CASE("flatten: round trip is bit exact") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const ShapeExtrinsic s = random_shape(rng);
    CHECK(unflatten(flatten(s)) == s);
  }
  for (Style st : kAllStyles) {
    ShapeExtrinsic g = generate_chair(3, st);
    const ShapeExtrinsic back = unflatten(flatten(g));
    CHECK(back.parts == g.parts);
  }
  std::vector<double> short_vec(10, 0.0);
  CHECK_THROWS_AS(unflatten(std::span<const double>(short_vec)), InvalidArgument);
}

TEST_CASE("interpolate_parts: identities and midpoint") {
  std::mt19937_64 rng(2);
  ShapeExtrinsic a = random_shape(rng);
  a.id = "A";
  ShapeExtrinsic b = random_shape(rng);
  b.id = "B";
  std::set<int> all;
  for (int i = 0; i < kPartCount; ++i) all.insert(i);
  CHECK(interpolate_parts(a, a, all).parts == a.parts);

  ShapeExtrinsic m, s;
  s.parts[0].center = {1, 0, 0};
  m.parts[0].center = {0, 0, 0};
  CHECK(interpolate_parts(m, s, {0}).parts[0].center == Eigen::Vector3d(0.5, 0, 0));

  const ShapeExtrinsic c = interpolate_parts(a, b, {3});
  const ShapeVector va = flatten(a), vb = flatten(b), vc = flatten(c);
  for (int p = 0; p < kPartCount; ++p) {
    for (int k = 0; k < kPartDim; ++k) {
      const int i = p * kPartDim + k;
      if (p == 3) {
        CHECK(vc(i) == (va(i) + vb(i)) / 2);
      } else {
        CHECK(vc(i) == va(i));
      }
    }
  }
  CHECK(c.parents == std::vector<std::string>{"A", "B"});
  CHECK(flatten(interpolate_parts(a, b, {3})).segment<16>(48) == flatten(interpolate_parts(b, a, {3})).segment<16>(48));
  CHECK_THROWS_AS(interpolate_parts(a, b, {}), InvalidArgument);
  CHECK_THROWS_AS(interpolate_parts(a, b, {16}), InvalidArgument);
  CHECK_THROWS_AS(interpolate_parts(a, b, {-1}), InvalidArgument);
}

TEST_CASE("normalize: valid shapes are fixed points") {
  const ShapeExtrinsic g = generate_chair(7, Style::dining);
  const ShapeExtrinsic n = normalize(g);
  CHECK((flatten(n) - flatten(g)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("normalize: polar projection and clamps") {
  ShapeExtrinsic s;
  s.parts[0].eigenvectors = 2.0 * Eigen::Matrix3d::Identity();
  s.parts[1].eigenvalues = {-1.0, 0.0, 2.0};
  s.parts[2].blend_weight = -0.5;
  const ShapeExtrinsic n = normalize(s);
  CHECK(n.parts[0].eigenvectors.isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  CHECK(n.parts[1].eigenvalues == Eigen::Vector3d(kEigFloor, kEigFloor, 2.0));
  CHECK(n.parts[2].blend_weight == 0.0);
  ShapeExtrinsic bad;
  bad.parts[4].center(1) = std::nan("");
  CHECK_THROWS_AS(normalize(bad), InvalidData);
}

TEST_CASE("normalize: idempotent with orthonormal output") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const ShapeExtrinsic n1 = normalize(random_shape(rng));
    const ShapeExtrinsic n2 = normalize(n1);
    CHECK((flatten(n1) - flatten(n2)).cwiseAbs().maxCoeff() < 1e-9);
    for (const auto& p : n1.parts) {
      CHECK((p.eigenvectors.transpose() * p.eigenvectors - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(p.eigenvalues.minCoeff() >= kEigFloor);
    }
  }
}

TEST_CASE("sample_point_cloud: labels, moments and degeneracy") {
  ShapeExtrinsic s;
  for (auto& p : s.parts) p.blend_weight = 0.0;
  CHECK_THROWS_AS(sample_point_cloud(s, 10, 1), DegenerateShape);

  s.parts[5].blend_weight = 1.0;
  const PointCloud one = sample_point_cloud(s, 200, 1);
  CHECK(one.points.size() == 200);
  for (int l : one.part_labels) CHECK(l == 5);

  ShapeExtrinsic tiny;
  for (auto& p : tiny.parts) p.blend_weight = 0.0;
  tiny.parts[0].blend_weight = 1.0;
  tiny.parts[0].eigenvalues = Eigen::Vector3d::Constant(1e-6);
  const PointCloud c = sample_point_cloud(tiny, 10000, 2);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : c.points) mean += p;
  mean /= 10000.0;
  CHECK(mean.norm() < 0.01);

  ShapeExtrinsic two;
  for (auto& p : two.parts) p.blend_weight = 0.0;
  two.parts[1].blend_weight = 1.0;
  two.parts[9].blend_weight = 1.0;
  const PointCloud t = sample_point_cloud(two, 10000, 3);
  const double f = static_cast<double>(std::count(t.part_labels.begin(), t.part_labels.end(), 1)) / 10000.0;
  CHECK(std::abs(f - 0.5) < 0.02);
  CHECK_THROWS_AS(sample_point_cloud(two, 0, 3), InvalidArgument);
}

TEST_CASE("point cloud export and import") {
  PointCloud c;
  c.points = {{0.1, 0.2, 0.3}, {-1.0, 0.5, 1e-7}, {0.333333, 2.0, -0.25}};
  c.part_labels = {0, 7, 15};
  const auto ply = temp_file("cloud.ply");
  export_point_cloud(c, ply, CloudFormat::ply);
  std::ifstream in(ply);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("element vertex 3\n") != std::string::npos);
  const PointCloud back = import_point_cloud(ply, CloudFormat::ply);
  REQUIRE(back.points.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) CHECK(back.points[i](k) == static_cast<double>(static_cast<float>(c.points[i](k))));
  }
  CHECK(back.part_labels == c.part_labels);

  const auto csv = temp_file("cloud.csv");
  export_point_cloud(c, csv, CloudFormat::csv);
  std::ifstream cin(csv);
  std::string line, first;
  std::getline(cin, first);
  CHECK(first == "x,y,z,part");
  int rows = 1;
  while (std::getline(cin, line)) ++rows;
  CHECK(rows == 4);
  CHECK(import_point_cloud(csv, CloudFormat::csv).part_labels == c.part_labels);
  CHECK_THROWS_AS(export_point_cloud(c, "/nonexistent-dir/x.ply", CloudFormat::ply), FileError);
  CHECK_THROWS_AS(parse_cloud_format("obj"), InvalidArgument);
}
