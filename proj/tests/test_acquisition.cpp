#include "bogen/acquisition.hpp"
#include "bogen/error.hpp"
#include "bogen/kernels.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bogen;

namespace {

GoodnessModel random_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return fit_map(testing::random_dataset(rng, 12, 10), KernelConfig{});
}

LatentPoint2D brute_force_argmax(const GoodnessModel& m, const Bounds& b, std::size_t n, double beta) {
  LatentPoint2D best{};
  double v = -1e300;
  for (const auto& x : kernels::grid_points(b, n)) {
    const double u = ucb(m, x, beta);
    if (u > v) {
      v = u;
      best = x;
    }
  }
  return best;
}

} // namespace

TEST_CASE("acquisition config validation") {
  AcquisitionConfig c;
  c.beta = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_k = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.bounds.z1 = {1.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(coarse_cell_diagonal(AcquisitionConfig{}) == doctest::Approx(std::hypot(1.5 / 63, 0.8 / 63)));
}

TEST_CASE("batch posterior: hallucination collapses variance and keeps the mean") {
  const auto m = random_model(1);
  BatchPosterior post(m);
  const LatentPoint2D h{0.7, 0.3};
  const auto before = post.predict(h);
  post.hallucinate(h);
  const auto after = post.predict(h);
  CHECK(after.mu == before.mu);
  CHECK(after.sigma2 < 1e-6);
  CHECK(post.predict({0.7 + 20 * 0.15, 0.3}).sigma2 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("batch posterior: vectorized and pointwise agree") {
  const auto m = random_model(2);
  BatchPosterior post(m);
  post.hallucinate({0.2, 0.1});
  post.hallucinate({1.1, 0.5});
  const auto grid = kernels::grid_points(Bounds{}, 17);
  Eigen::VectorXd mu, s2;
  post.predict_many(grid, mu, s2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto p = post.predict(grid[i]);
    CHECK(mu(static_cast<Eigen::Index>(i)) == doctest::Approx(p.mu).epsilon(1e-10));
    CHECK(s2(static_cast<Eigen::Index>(i)) == doctest::Approx(p.sigma2).epsilon(1e-8));
  }
}

TEST_CASE("batch posterior: variance gradient matches central differences") {
  const auto m = random_model(3);
  BatchPosterior post(m);
  post.hallucinate({0.5, 0.2});
  post.hallucinate({0.9, 0.4});
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto x = testing::random_point(rng);
    const auto g = post.predict_with_gradient(x);
    const double h = 1e-6;
    const double d1 = (post.predict({x.z1 + h, x.z2}).sigma2 - post.predict({x.z1 - h, x.z2}).sigma2) / (2 * h);
    const double d2 = (post.predict({x.z1, x.z2 + h}).sigma2 - post.predict({x.z1, x.z2 - h}).sigma2) / (2 * h);
    CHECK(std::abs(g.dsigma2(0) - d1) < 1e-4 * std::max(1.0, std::abs(d1)));
    CHECK(std::abs(g.dsigma2(1) - d2) < 1e-4 * std::max(1.0, std::abs(d2)));
  }
}

TEST_CASE("sample_batch: points stay inside the bounds") {
  AcquisitionConfig c;
  c.batch_k = 4;
  c.bounds = {{0.2, 0.9}, {0.0, 0.5}};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto m = seed % 2 ? random_model(seed) : GoodnessModel::prior(KernelConfig{});
    for (const auto& x : sample_batch(m, c, seed)) CHECK(c.bounds.contains(x));
  }
}

TEST_CASE("sample_batch: a fresh model still yields a spread batch") {
  const auto prior = GoodnessModel::prior(KernelConfig{});
  const auto batch = sample_batch(prior, AcquisitionConfig{}, 42);
  REQUIRE(batch.size() == 16);
  double min_d = 1e9;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t j = i + 1; j < batch.size(); ++j) min_d = std::min(min_d, distance(batch[i], batch[j]));
  CHECK(min_d > 0.0);
}

TEST_CASE("sample_batch: deterministic for a fixed seed") {
  const auto m = random_model(9);
  CHECK(sample_batch(m, AcquisitionConfig{}, 5) == sample_batch(m, AcquisitionConfig{}, 5));
}

TEST_CASE("sample_batch: k = 1 matches a fine brute-force grid") {
  AcquisitionConfig c;
  c.batch_k = 1;
  for (std::uint64_t s = 20; s < 25; ++s) {
    const auto m = random_model(s);
    const auto x = sample_batch(m, c, s)[0];
    const auto ref = brute_force_argmax(m, c.bounds, 512, c.beta);
    CHECK(distance(x, ref) <= coarse_cell_diagonal(c));
    CHECK(ucb(m, x, c.beta) >= ucb(m, ref, c.beta) - 1e-9);
  }
}
