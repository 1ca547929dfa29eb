#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "exposure/harness.hpp"

using namespace exposure;

namespace {

const RatingDataset& synthetic(std::size_t users) {
  static std::map<std::size_t, RatingDataset> cache;
  auto it = cache.find(users);
  if (it == cache.end()) {
    SyntheticSpec spec;
    spec.n_users = users;
    it = cache.emplace(users, generate_synthetic(spec).ratings).first;
  }
  return it->second;
}

void BM_JensenShannon(benchmark::State& state) {
  std::mt19937_64 engine(1);
  std::vector<std::vector<double>> pairs(1024, std::vector<double>(3));
  for (auto& v : pairs) {
    double total = 0;
    for (auto& x : v) total += x = uniform_unit(engine);
    for (auto& x : v) x /= total;
  }
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(jensen_shannon(pairs[k % 1024], pairs[(k + 1) % 1024]));
    ++k;
  }
}
BENCHMARK(BM_JensenShannon);

void BM_MfEpoch(benchmark::State& state) {
  const auto& data = synthetic(static_cast<std::size_t>(state.range(0)));
  ModelConfig config;
  config.algorithm = Algorithm::BiasedMf;
  config.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit_biased_mf(data, config));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * data.n_ratings()));
}
BENCHMARK(BM_MfEpoch)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_KnnFit(benchmark::State& state) {
  const auto& data = synthetic(static_cast<std::size_t>(state.range(0)));
  ModelConfig config;
  config.algorithm = state.range(1) == 0 ? Algorithm::UserKnn : Algorithm::ItemKnn;
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, config));
}
BENCHMARK(BM_KnnFit)->Args({500, 0})->Args({500, 1})->Args({2000, 0})->Args({2000, 1})->Unit(benchmark::kMillisecond);

void BM_TopN(benchmark::State& state) {
  const auto& data = synthetic(1000);
  ModelConfig config;
  config.algorithm = static_cast<Algorithm>(state.range(0));
  config.epochs = 2;
  const auto model = fit(data, config);
  for (auto _ : state) benchmark::DoNotOptimize(generate_recommendations(model, 10));
  state.SetLabel(std::string(algorithm_name(config.algorithm)));
}
BENCHMARK(BM_TopN)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const auto& train = synthetic(1000);
  const auto seg = segment_items_pareto(compute_item_popularity(train));
  const auto groups = group_users_by_propensity(train, seg);
  ModelConfig config;
  const auto table = generate_recommendations(fit(train, config), 10);
  for (auto _ : state) benchmark::DoNotOptimize(compute_upd(table, train, seg, groups));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
