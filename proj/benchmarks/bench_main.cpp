#include <benchmark/benchmark.h>

#include "ihpe/cascade.hpp"
#include "ihpe/data_io.hpp"
#include "ihpe/features.hpp"
#include "ihpe/finger_detect.hpp"
#include "ihpe/pipeline.hpp"
#include "ihpe/synth.hpp"
#include "ihpe/voting.hpp"

namespace ihpe {
namespace {

const SynthHand& open_hand() {
  static const SynthHand hand = [] {
    SynthHandSpec spec = SynthHandSpec::open_hand();
    spec.noise_mm = 1.0;
    return generate_synth(spec, 7);
  }();
  return hand;
}

std::vector<Pixel> foreground(const DepthImage& img) {
  std::vector<Pixel> out;
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u)
      if (img.is_foreground(u, v)) out.push_back({u, v});
  return out;
}

/// Small models trained once on a synthetic set, shared by the model benchmarks.
struct Models {
  std::vector<LabeledImage> data;
  CascadeModel cascade;
  VotingModel voting;
};

const Models& models() {
  static const Models m = [] {
    SynthDatasetConfig sc;
    sc.count = 200;
    auto data = generate_synth_dataset(sc, 5);
    const auto examples = pose_examples(data);
    const auto skel = shared_skeleton("msra21");
    CascadeConfig cc;
    cc.forest.tree_count = 4;
    cc.forest.max_depth = 14;
    VotingConfig vc;
    vc.training_image_count = 200;
    vc.pixels_per_image = 100;
    vc.forest.tree_count = 4;
    vc.forest.max_depth = 14;
    CascadeModel cascade = train_cascade(examples, skel, cc, 1);
    VotingModel voting = train_voting(examples, skel, vc, 1);
    return Models{std::move(data), std::move(cascade), std::move(voting)};
  }();
  return m;
}

void BM_DistanceTransform(benchmark::State& state) {
  const Mask mask = foreground_mask(open_hand().image);
  for (auto _ : state) benchmark::DoNotOptimize(distance_transform(mask));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DistanceTransform);

void BM_DepthDifference(benchmark::State& state) {
  const DepthImage& img = open_hand().image;
  const auto pixels = foreground(img);
  const FeatureConfig cfg = FeatureConfig::voting_defaults();
  const auto pairs = sample_offset_pairs(3, cfg, 256);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(depth_difference(img, pixels[i % pixels.size()], pairs[i % pairs.size()], cfg));
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DepthDifference);

void BM_DetectStretchedFingers(benchmark::State& state) {
  const SynthHand& hand = open_hand();
  for (auto _ : state) benchmark::DoNotOptimize(detect_stretched_fingers(hand.image, *hand.pose.skeleton, {}));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DetectStretchedFingers);

void BM_VotingForestPredict(benchmark::State& state) {
  const Models& m = models();
  const DepthImage& img = m.data.front().image;
  const auto pixels = foreground(img);
  std::vector<double> out(3);
  std::size_t i = 0;
  for (auto _ : state) {
    m.voting.forest.predict(img, pixels[i++ % pixels.size()], out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_VotingForestPredict);

void BM_PredictCascade(benchmark::State& state) {
  const Models& m = models();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(predict_cascade(m.cascade, m.data[i++ % m.data.size()].image));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PredictCascade);

void BM_Pipeline(benchmark::State& state) {
  const Models& m = models();
  const Pipeline pipeline(m.cascade, m.voting);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(pipeline.run(m.data[i++ % m.data.size()].image));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Pipeline);

}  // namespace
}  // namespace ihpe

BENCHMARK_MAIN();
