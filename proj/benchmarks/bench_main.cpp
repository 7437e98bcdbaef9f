#include <benchmark/benchmark.h>

#include <random>

#include "gausshead/encoding.hpp"
#include "gausshead/geometry.hpp"
#include "gausshead/inference.hpp"
#include "gausshead/loss.hpp"
#include "gausshead/model.hpp"
#include "gausshead/scene.hpp"

using namespace gausshead;

namespace {

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {u(rng), u(rng), 0.05 + 0.3 * u(rng), 0.05 + 0.3 * u(rng)};
}

RawGrid random_grid(const GridSpec& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  RawGrid raw(g);
  for (double& v : raw.values()) v = u(rng);
  return raw;
}

const GridSpec kGrid{13, 13, 3, 10, 416, 416};
const std::vector<Anchor> kAnchors{{30, 60}, {60, 45}, {120, 110}};

void BM_Iou(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Box a = random_box(rng), b = random_box(rng);
  for (auto _ : state) benchmark::DoNotOptimize(iou(a, b));
}
BENCHMARK(BM_Iou);

void BM_ExtractDetections(benchmark::State& state) {
  const RawGrid raw = random_grid(kGrid, 2);
  DetectOptions opts;
  opts.threshold = 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(extract_detections(raw, kGrid, kAnchors, opts));
}
BENCHMARK(BM_ExtractDetections);

void BM_Nms(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Detection> dets(static_cast<std::size_t>(state.range(0)));
  for (auto& d : dets) {
    d.class_id = static_cast<int>(rng() % 3);
    d.score = u(rng);
    d.box = random_box(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(nms(dets, 0.45));
}
BENCHMARK(BM_Nms)->Arg(64)->Arg(512);

void BM_TotalLoss(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::vector<GroundTruth> gts;
  for (int n = 0; n < 8; ++n) gts.push_back({static_cast<int>(rng() % 10), random_box(rng)});
  const auto targets = encode_targets(gts, kGrid, kAnchors).targets;
  const RawGrid raw = random_grid(kGrid, 5);
  const LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(raw, targets, gts, kGrid, kAnchors, cfg));
}
BENCHMARK(BM_TotalLoss);

void BM_ModelForwardBackward(benchmark::State& state) {
  SceneSpec scene;
  const Dataset data = gen_dataset(scene, 1);
  ModelConfig cfg;
  cfg.grid = GridSpec{8, 8, 3, 3, 64, 64};
  cfg.anchors = {{8, 8}, {16, 12}, {20, 24}};
  cfg.class_names = {"a", "b", "c"};
  const ToyModel model(cfg, HeadMode::kGaussian, BackboneSpec{}, 6);
  const RawGrid ones(cfg.grid, 1.0);
  std::vector<double> grad(model.parameter_count());
  for (auto _ : state) {
    ToyModel::Cache cache;
    benchmark::DoNotOptimize(model.forward(data.samples[0].image, &cache));
    model.backward(cache, ones, grad);
  }
}
BENCHMARK(BM_ModelForwardBackward)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
