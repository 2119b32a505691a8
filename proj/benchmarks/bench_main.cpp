#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "pcdc/geom_codec.hpp"
#include "pcdc/knn.hpp"
#include "pcdc/pipeline.hpp"
#include "pcdc/range_coder.hpp"
#include "pcdc/synthetic.hpp"

using namespace pcdc;

namespace {

std::vector<Coord> random_cloud(std::size_t n, int extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Coord> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({static_cast<int>(rng() % extent), static_cast<int>(rng() % extent),
                   static_cast<int>(rng() % extent)});
  }
  sort_morton(pts);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

void BM_RangeEncode(benchmark::State& state) {
  std::vector<double> pmf(64);
  for (std::size_t i = 0; i < pmf.size(); ++i) pmf[i] = 1.0 / static_cast<double>(i + 1);
  double s = 0;
  for (double p : pmf) s += p;
  for (double& p : pmf) p /= s;
  const CdfTable t = CdfTable::from_pmf(pmf);
  std::mt19937_64 rng(1);
  std::vector<std::size_t> sym(static_cast<std::size_t>(state.range(0)));
  for (auto& v : sym) v = rng() % 64;
  for (auto _ : state) {
    RangeEncoder enc;
    for (auto v : sym) enc.encode(t, v);
    benchmark::DoNotOptimize(enc.finish());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RangeEncode)->Arg(1 << 16);

void BM_Knn(benchmark::State& state) {
  const auto a = random_cloud(static_cast<std::size_t>(state.range(0)), 256, 2);
  const auto b = random_cloud(static_cast<std::size_t>(state.range(0)), 256, 3);
  for (auto _ : state) benchmark::DoNotOptimize(build_knn(a, b, 16));
}
BENCHMARK(BM_Knn)->Arg(1000)->Arg(10000);

void BM_OctreeEncode(benchmark::State& state) {
  const auto a = random_cloud(static_cast<std::size_t>(state.range(0)), 1024, 4);
  for (auto _ : state) benchmark::DoNotOptimize(encode_coords(a, 10));
}
BENCHMARK(BM_OctreeEncode)->Arg(10000);

void BM_EncodePFrame(benchmark::State& state) {
  SyntheticOptions o;
  o.frames = 2;
  const auto seq = synthetic_sequence(o);
  const CodecConfig cfg;
  const CodecWeights w = make_weights(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_frame(seq[1], FrameKind::kP, {&seq[0], nullptr}, cfg, w));
  }
}
BENCHMARK(BM_EncodePFrame)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
