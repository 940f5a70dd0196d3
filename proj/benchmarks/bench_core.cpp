#include <benchmark/benchmark.h>

#include "vqasem/cooc.hpp"
#include "vqasem/harness.hpp"
#include "vqasem/loss.hpp"
#include "vqasem/optimizer.hpp"
#include "vqasem/synthcp.hpp"
#include "vqasem/toy_vqa_model.hpp"

using namespace vqasem;

namespace {

struct BenchFixture {
  WorldSpec world = default_world();
  std::vector<SynthRecord> records;
  AnswerSpace dict = AnswerSpace::from_answers({"a", "b"});
  SemanticSpace cooc;
  TokenVocab vocab;

  BenchFixture() {
    const PriorShiftConfig shift = make_mode_swap_shift(world, 0.8);
    records = gen_dataset(world, shift, 2000, 1, 17).first;
    std::vector<AnnotationRecord> ann;
    for (const SynthRecord& r : records) ann.push_back(r.annotation);
    dict = build_answer_space(ann, 2);
    cooc = build_cooc_space(count_cooc(ann, dict), dict);
    std::vector<std::string> tokens;
    for (const SynthRecord& r : records) {
      tokens.insert(tokens.end(), r.annotation.question_tokens.begin(),
                    r.annotation.question_tokens.end());
    }
    vocab = TokenVocab::from_tokens(tokens);
  }
};

const BenchFixture& fixture() {
  static const BenchFixture fx;
  return fx;
}

}  // namespace

static void BM_TopkIndices(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> p(fixture().dict.n_classes());
  for (double& v : p) v = rng.uniform01();
  for (auto _ : state) {
    benchmark::DoNotOptimize(topk_indices(p, 10));
  }
}
BENCHMARK(BM_TopkIndices);

static void BM_GammaProject(benchmark::State& state) {
  const BenchFixture& fx = fixture();
  Rng rng(2);
  std::vector<double> p(fx.dict.n_classes());
  for (double& v : p) v = rng.uniform01();
  for (auto _ : state) {
    benchmark::DoNotOptimize(gamma_project(p, fx.cooc, 10));
  }
}
BENCHMARK(BM_GammaProject);

static void BM_CombinedLossWithGrad(benchmark::State& state) {
  const BenchFixture& fx = fixture();
  Rng rng(3);
  Prediction y;
  y.logits.resize(fx.dict.n_classes());
  for (double& v : y.logits) v = rng.gaussian();
  const SoftTarget t = soft_targets(fx.records[0].annotation, fx.dict);
  LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(combined_loss(y, t, &fx.cooc, cfg));
  }
}
BENCHMARK(BM_CombinedLossWithGrad);

static void BM_SemLossGrad(benchmark::State& state) {
  const BenchFixture& fx = fixture();
  Rng rng(4);
  Prediction y;
  y.logits.resize(fx.dict.n_classes());
  for (double& v : y.logits) v = rng.gaussian();
  const SoftTarget t = soft_targets(fx.records[1].annotation, fx.dict);
  LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sem_loss_grad(y, t, fx.cooc, cfg));
  }
}
BENCHMARK(BM_SemLossGrad);

static void BM_CountCooc(benchmark::State& state) {
  const BenchFixture& fx = fixture();
  std::vector<AnnotationRecord> ann;
  for (const SynthRecord& r : fx.records) ann.push_back(r.annotation);
  for (auto _ : state) {
    benchmark::DoNotOptimize(count_cooc(ann, fx.dict));
  }
}
BENCHMARK(BM_CountCooc);

static void BM_ModelForwardBackward(benchmark::State& state) {
  const BenchFixture& fx = fixture();
  ToyVqaModel model(fx.vocab, fx.dict.n_classes(), ModelDims{}, 5);
  const SynthRecord& rec = fx.records[2];
  const SoftTarget target = soft_targets(rec.annotation, fx.dict);
  LossConfig cfg;
  for (auto _ : state) {
    model.zero_grad();
    Prediction pred = model.forward(rec.annotation.scene.features, rec.annotation.question_tokens);
    const LossValue loss = combined_loss(pred, target, &fixture().cooc, cfg);
    model.backward(loss.grad_logits);
    benchmark::DoNotOptimize(loss.total);
  }
}
BENCHMARK(BM_ModelForwardBackward);

static void BM_AdamStep(benchmark::State& state) {
  const BenchFixture& fx = fixture();
  ToyVqaModel model(fx.vocab, fx.dict.n_classes(), ModelDims{}, 6);
  std::vector<ParamBlock*> blocks = model.param_blocks();
  AdamState adam = make_adam_state(blocks);
  Rng rng(7);
  for (ParamBlock* b : blocks) {
    for (double& g : b->grad.data) g = 0.01 * rng.gaussian();
  }
  for (auto _ : state) {
    step_adam(blocks, adam, 1e-3);
  }
}
BENCHMARK(BM_AdamStep);

static void BM_GenDataset(benchmark::State& state) {
  const WorldSpec world = default_world();
  const PriorShiftConfig shift = make_mode_swap_shift(world, 0.8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_dataset(world, shift, 500, 100, 23));
  }
}
BENCHMARK(BM_GenDataset);

BENCHMARK_MAIN();
