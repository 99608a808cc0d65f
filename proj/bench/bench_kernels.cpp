// Serial reference vs OpenMP kernels.

#include "bogen/kernels.hpp"
#include "bogen/pbo.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>
#include <map>
#include <random>

using namespace bogen;

namespace {

std::vector<LatentPoint2D> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u1(0.0, 1.5), u2(-0.1, 0.7);
  std::vector<LatentPoint2D> out(n);
  for (auto& p : out) p = {u1(rng), u2(rng)};
  return out;
}

/// Fitted model over n random points with n/2 random 4-way observations.
const GoodnessModel& fitted_model(std::size_t n) {
  static std::map<std::size_t, GoodnessModel> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::mt19937_64 rng(n);
  PreferenceDataset d;
  for (const auto& p : random_points(n, n + 1)) d.register_point(p);
  const std::size_t m = d.points().size();
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  for (std::size_t o = 0; o < n / 2; ++o) {
    PreferenceObservation obs{pick(rng), {}};
    while (obs.others.size() < 3) {
      const std::size_t j = pick(rng);
      if (j != obs.preferred && std::find(obs.others.begin(), obs.others.end(), j) == obs.others.end()) {
        obs.others.push_back(j);
      }
    }
    d.add_observation(obs);
  }
  return cache.emplace(n, fit_map(d, KernelConfig{})).first->second;
}

template <auto Fn>
void predict(benchmark::State& state) {
  const GoodnessModel& model = fitted_model(static_cast<std::size_t>(state.range(0)));
  const auto grid = kernels::grid_points(Bounds{}, 128);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(model, grid));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.size()));
}

template <auto Fn>
void cross(benchmark::State& state) {
  const auto rows = random_points(static_cast<std::size_t>(state.range(0)), 1);
  const auto cols = random_points(4096, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(KernelConfig{}, rows, cols));
}

template <auto Fn>
void kdist(benchmark::State& state) {
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pts, 3));
}

template <auto Fn>
void neighbors(benchmark::State& state) {
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pts, 0.039));
}

template <auto Fn>
void min_dist(benchmark::State& state) {
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 5);
  std::vector<double> d2(pts.size(), 1e300);
  std::size_t c = 0;
  for (auto _ : state) {
    Fn(pts, pts[c++ % pts.size()], d2);
    benchmark::ClobberMemory();
  }
}

} // namespace

BENCHMARK(predict<kernels::serial::predict_many>)->Name("predict_many/serial")->Arg(64)->Arg(256);
BENCHMARK(predict<kernels::omp::predict_many>)->Name("predict_many/omp")->Arg(64)->Arg(256);
BENCHMARK(cross<kernels::serial::cross_matrix>)->Name("cross_matrix/serial")->Arg(256);
BENCHMARK(cross<kernels::omp::cross_matrix>)->Name("cross_matrix/omp")->Arg(256);
BENCHMARK(kdist<kernels::serial::k_distances>)->Name("k_distances/serial")->Arg(2000);
BENCHMARK(kdist<kernels::omp::k_distances>)->Name("k_distances/omp")->Arg(2000);
BENCHMARK(neighbors<kernels::serial::neighbor_lists>)->Name("neighbor_lists/serial")->Arg(2000);
BENCHMARK(neighbors<kernels::omp::neighbor_lists>)->Name("neighbor_lists/omp")->Arg(2000);
BENCHMARK(min_dist<kernels::serial::update_min_distances>)->Name("update_min_distances/serial")->Arg(5000);
BENCHMARK(min_dist<kernels::omp::update_min_distances>)->Name("update_min_distances/omp")->Arg(5000);

BENCHMARK_MAIN();
