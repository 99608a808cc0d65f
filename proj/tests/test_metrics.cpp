#include "bogen/error.hpp"
#include "bogen/metrics.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <map>
#include <random>

using namespace bogen;

namespace {

// Gift wrapping: an independent hull for the Monte-Carlo membership oracle.
std::vector<LatentPoint2D> jarvis(const std::vector<LatentPoint2D>& p) {
  std::size_t start = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i].z1 < p[start].z1 || (p[i].z1 == p[start].z1 && p[i].z2 < p[start].z2)) start = i;
  std::vector<LatentPoint2D> hull;
  std::size_t cur = start;
  do {
    hull.push_back(p[cur]);
    std::size_t nxt = (cur + 1) % p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double c = (p[nxt].z1 - p[cur].z1) * (p[i].z2 - p[cur].z2) - (p[nxt].z2 - p[cur].z2) * (p[i].z1 - p[cur].z1);
      if (c < 0) nxt = i;
    }
    cur = nxt;
  } while (cur != start);
  return hull;
}

bool inside(const std::vector<LatentPoint2D>& hull, const LatentPoint2D& x) {
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    if ((b.z1 - a.z1) * (x.z2 - a.z2) - (b.z2 - a.z2) * (x.z1 - a.z1) < 0) return false;
  }
  return true;
}

double mc_area(const std::vector<LatentPoint2D>& pts, std::mt19937_64& rng, int samples) {
  const auto hull = jarvis(pts);
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.z1), x1 = std::max(x1, p.z1), y0 = std::min(y0, p.z2), y1 = std::max(y1, p.z2);
  }
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  int hit = 0;
  for (int s = 0; s < samples; ++s) {
    const double a = ux(rng);
    hit += inside(hull, {a, uy(rng)}) ? 1 : 0;
  }
  return (x1 - x0) * (y1 - y0) * hit / samples;
}

std::vector<LatentPoint2D> two_groups() {
  std::vector<LatentPoint2D> p;
  for (int i = 0; i < 5; ++i) p.push_back({0.2 + 0.01 * i, 0.3});
  for (int i = 0; i < 5; ++i) p.push_back({1.2 + 0.01 * i, 0.3});
  return p;
}

// Partition as a set of sorted member lists, independent of label ids.
using Members = std::vector<std::pair<double, double>>;

std::set<Members> partition(const std::vector<LatentPoint2D>& p, const std::vector<int>& labels) {
  std::map<int, Members> groups;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (labels[i] >= 0) groups[labels[i]].emplace_back(p[i].z1, p[i].z2);
  std::set<Members> out;
  for (auto& [k, v] : groups) {
    std::sort(v.begin(), v.end());
    out.insert(v);
  }
  return out;
}

} // namespace

TEST_CASE("explored_area: hand cases") {
  std::vector<LatentPoint2D> tri{{0, 0}, {1, 0}, {0, 1}};
  CHECK(explored_area(tri) == 0.5);
  std::vector<LatentPoint2D> line;
  for (int i = 0; i < 100; ++i) line.push_back({0.01 * i, 0.5 * 0.01 * i});
  CHECK(explored_area(line) == 0.0);
  CHECK(explored_area(std::vector<LatentPoint2D>{}) == 0.0);
  CHECK(explored_area(std::vector<LatentPoint2D>{{0, 0}, {1, 1}}) == 0.0);
  std::vector<LatentPoint2D> square{{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {1, 0}};
  CHECK(explored_area(square) == 4.0);
  CHECK(convex_hull(square).size() == 4);
}

TEST_CASE("explored_area: matches a Monte-Carlo estimate") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    std::vector<LatentPoint2D> p;
    for (int i = 0; i < 50; ++i) p.push_back(testing::random_point(rng));
    const double a = explored_area(p);
    CHECK(std::abs(mc_area(p, rng, 400000) - a) < 0.01 * a);
  }
}

TEST_CASE("explored_area: monotone, permutation invariant, interior points ignored") {
  std::mt19937_64 rng(2);
  std::vector<LatentPoint2D> p;
  double prev = 0.0;
  for (int i = 0; i < 200; ++i) {
    p.push_back(testing::random_point(rng));
    const double a = explored_area(p);
    CHECK(a >= prev);
    prev = a;
  }
  auto q = p;
  std::shuffle(q.begin(), q.end(), rng);
  CHECK(explored_area(q) == doctest::Approx(prev).epsilon(1e-12));
  const auto hull = convex_hull(p);
  LatentPoint2D centroid{};
  for (const auto& h : hull) centroid = {centroid.z1 + h.z1 / hull.size(), centroid.z2 + h.z2 / hull.size()};
  q.push_back(centroid);
  CHECK(explored_area(q) == doctest::Approx(prev).epsilon(1e-12));
}

TEST_CASE("cluster_count: two-group trace at default settings") {
  const auto p = two_groups();
  const auto r = cluster_count(p, ClusteringConfig{});
  CHECK(r.count == 2);
  for (int i = 0; i < 5; ++i) CHECK(r.labels[static_cast<std::size_t>(i)] == r.labels[0]);
  for (int i = 5; i < 10; ++i) CHECK(r.labels[static_cast<std::size_t>(i)] == r.labels[5]);
  CHECK(r.labels[0] != r.labels[5]);
  CHECK(std::count(r.labels.begin(), r.labels.end(), -1) == 0);
}

TEST_CASE("cluster_count: single point is noise") {
  const auto r = cluster_count(std::vector<LatentPoint2D>{{0.5, 0.5}}, ClusteringConfig{});
  CHECK(r.count == 0);
  CHECK(r.labels == std::vector<int>{-1});
  ClusteringConfig c;
  c.epsilon = 0;
  CHECK_THROWS_AS(cluster_count(std::vector<LatentPoint2D>{}, c), ConfigError);
}

TEST_CASE("cluster_count: permutation invariant partition and noise rule") {
  std::mt19937_64 rng(3);
  std::vector<LatentPoint2D> p;
  std::normal_distribution<double> n01;
  for (int c = 0; c < 4; ++c) {
    const auto centre = testing::random_point(rng);
    for (int i = 0; i < 30; ++i) p.push_back({centre.z1 + 0.03 * n01(rng), centre.z2 + 0.03 * n01(rng)});
  }
  for (int i = 0; i < 30; ++i) p.push_back(testing::random_point(rng));
  const ClusteringConfig cfg;
  const auto r = cluster_count(p, cfg);
  for (int t = 0; t < 5; ++t) {
    auto q = p;
    std::shuffle(q.begin(), q.end(), rng);
    const auto rq = cluster_count(q, cfg);
    CHECK(rq.count == r.count);
    CHECK(partition(q, rq.labels) == partition(p, r.labels));
  }
  // Noise points have too few neighbours and no core neighbour.
  auto count_within = [&](std::size_t i) {
    return std::count_if(p.begin(), p.end(), [&](const auto& x) { return distance(x, p[i]) <= cfg.epsilon; });
  };
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (r.labels[i] != -1) continue;
    CHECK(count_within(i) < 3);
    for (std::size_t j = 0; j < p.size(); ++j)
      if (distance(p[i], p[j]) <= cfg.epsilon) CHECK(count_within(j) < 3);
  }
}

TEST_CASE("elbow_epsilon: two-scale set lands between the scales") {
  const auto r = elbow_epsilon(two_groups(), 3);
  CHECK(r.epsilon > 0.01);
  CHECK(r.epsilon < 1.0);
  CHECK(!r.degenerate);
}

TEST_CASE("elbow_epsilon: uniform grid gives the spacing") {
  std::vector<LatentPoint2D> g;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) g.push_back({0.05 * i, 0.05 * j});
  const auto r = elbow_epsilon(g, 3);
  CHECK(std::abs(r.epsilon - 0.05) <= 0.005);
}

TEST_CASE("elbow_epsilon: duplicates are degenerate and small inputs rejected") {
  std::vector<LatentPoint2D> d(10, LatentPoint2D{0.3, 0.3});
  const auto r = elbow_epsilon(d, 3);
  CHECK(r.degenerate);
  CHECK(r.epsilon == 0.0);
  CHECK_THROWS_AS(elbow_epsilon(std::vector<LatentPoint2D>(3), 3), InvalidArgument);
  std::mt19937_64 rng(4);
  std::vector<LatentPoint2D> p;
  for (int i = 0; i < 100; ++i) p.push_back(testing::random_point(rng));
  CHECK(elbow_epsilon(p, 3).epsilon == elbow_epsilon(p, 3).epsilon);
}

TEST_CASE("mean_uncertainty: prior, single point and shrinkage") {
  const auto prior = GoodnessModel::prior(KernelConfig{});
  std::mt19937_64 rng(5);
  std::vector<LatentPoint2D> space;
  for (int i = 0; i < 100; ++i) space.push_back(testing::random_point(rng));
  CHECK(mean_uncertainty(prior, space) == 1.0);
  CHECK_THROWS_AS(mean_uncertainty(prior, std::vector<LatentPoint2D>{}), InvalidArgument);

  PreferenceDataset d;
  d.register_point(space[0]);
  d.register_point(space[1]);
  d.add_observation({0, {1}});
  const auto m = fit_map(d, KernelConfig{});
  CHECK(mean_uncertainty(m, std::vector<LatentPoint2D>{space[3]}) == doctest::Approx(m.predict(space[3]).sigma2));
  const double u = mean_uncertainty(m, space);
  CHECK(u < 1.0);
  CHECK(u >= 0.0);
}

TEST_CASE("mean_probability: empty, prior and constant cases") {
  CHECK(mean_probability({}).empty);
  CHECK(mean_probability({}).value == 0.0);
  auto prior = std::make_shared<const GoodnessModel>(GoodnessModel::prior(KernelConfig{}));
  std::vector<ProbabilityEntry> h{{prior, {0.4, 0.2}}};
  const auto r = mean_probability(h);
  CHECK(!r.empty);
  CHECK(r.value == 0.0);
  KernelConfig shifted;
  shifted.prior_mean = 0.25;
  auto c = std::make_shared<const GoodnessModel>(GoodnessModel::prior(shifted));
  std::vector<ProbabilityEntry> hc{{c, {0.1, 0.1}}, {c, {0.9, 0.5}}, {c, {1.4, 0.0}}};
  CHECK(mean_probability(hc).value == doctest::Approx(0.25));
}

TEST_CASE("metrics report files") {
  SessionMetrics m;
  m.mean_uncertainty_series = {1.0, 0.8, 0.5};
  m.explored_area = 0.3;
  const auto dir = std::filesystem::temp_directory_path();
  write_metrics_json(m, dir / "bogen_test_metrics.json");
  write_metrics_csv(m, dir / "bogen_test_metrics.csv");
  std::ifstream in(dir / "bogen_test_metrics.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
}
