#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vqasem/answer_space.hpp"
#include "vqasem/grad_check.hpp"
#include "vqasem/loss.hpp"
#include "vqasem/optimizer.hpp"
#include "vqasem/semantic_space.hpp"
#include "vqasem/synthcp.hpp"
#include "vqasem/toy_vqa_model.hpp"

namespace vqasem {

// Linear warmup to the peak rate, then stepwise decay. Mirrors the usual
// warmup/step-decay shape at toy-problem constants.
struct LrSchedule {
  double warmup_start = 1e-3;
  double peak = 1e-2;
  int warmup_epochs = 3;
  std::vector<int> decay_epochs = {10, 20};
  double decay_factor = 0.2;

  double lr_at(int epoch) const;  // 0-based
};

enum class OptimizerKind { adam, adamax };

std::string optimizer_name(OptimizerKind kind);
OptimizerKind optimizer_from_name(const std::string& name);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  LrSchedule schedule;
  LossConfig loss;
  OptimizerKind optimizer = OptimizerKind::adam;
  bool rubi = false;
  std::uint64_t seed = 1;
  ModelDims dims;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> heldout_soft_accuracy;
};

// Minibatch training on the combined loss; deterministic under cfg.seed.
// sem_space is required iff cfg.loss.lambda > 0; branch is required iff
// cfg.rubi. Records whose soft target is all-zero are skipped. Throws on a
// non-finite loss with a diagnostic.
std::vector<EpochLog> train(ToyVqaModel& model, RubiBranch* branch, const AnswerSpace& space,
                            const std::vector<SynthRecord>& records, const TrainConfig& cfg,
                            const SemanticSpace* sem_space,
                            const std::vector<SynthRecord>* heldout = nullptr);

// Inference: argmax of the logits, ties to the lower class id. Takes no
// semantic space and no question-only branch; neither exists at test time.
int predict_class(ToyVqaModel& model, const SynthRecord& record);

struct TemplateAccuracy {
  std::string template_id;
  int count = 0;
  double soft_accuracy = 0.0;
  double top1_accuracy = 0.0;
};

struct EvalReport {
  double soft_accuracy = 0.0;            // mean min(m_pred/3, 1)
  double top1_accuracy = 0.0;            // exact match against the latent truth
  double mean_sem_error_distance = 0.0;  // mean 1-cos(g(pred), g(truth)) over errors
  bool no_errors = false;                // error distance reported as 0 with this flag
  int n_records = 0;
  int n_errors = 0;
  std::vector<TemplateAccuracy> per_template;
  std::string config_echo;
  std::uint64_t seed = 0;
};

EvalReport evaluate(ToyVqaModel& model, const AnswerSpace& space,
                    const std::vector<SynthRecord>& records, const SemanticSpace& metric_space);

// Same metrics for an arbitrary predictor; lets oracles and baselines be
// scored without a model.
EvalReport evaluate_with(const std::function<int(const SynthRecord&)>& predict,
                         const AnswerSpace& space, const std::vector<SynthRecord>& records,
                         const SemanticSpace& metric_space);

std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);

// The comparison arms: plain classification baseline, semantic loss in each
// space, question-only masking, and the combination.
enum class Arm { base, sem_wordvec, sem_cooc, rubi, rubi_sem };

std::string arm_name(Arm arm);
Arm arm_from_name(const std::string& name);
const std::vector<Arm>& all_arms();

struct ExperimentConfig {
  WorldSpec world = default_world();
  double shift_strength = 0.8;
  double mode_mass = 0.5;
  int n_train = 5000;
  int n_test = 2000;
  int min_count = 2;
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int lexicon_dim = 32;
  double lexicon_spread = 0.25;
  std::uint64_t lexicon_seed = 99;
  int jobs = 1;  // concurrent (arm, seed) runs; results are order-independent
};

struct RunResult {
  std::string arm;
  std::uint64_t seed = 0;
  EvalReport ood;      // test split, shifted priors
  EvalReport in_dist;  // held-out split drawn from the training priors
};

struct ExperimentTable {
  std::vector<RunResult> runs;  // arm-major, seed-minor
};

// Within one seed every arm shares the same dataset, dictionary, spaces, and
// model initialization, so per-seed deltas isolate the training objective.
ExperimentTable run_experiment(const ExperimentConfig& cfg, const std::vector<Arm>& arms);

double median(std::vector<double> values);
std::vector<double> collect_metric(const ExperimentTable& table, const std::string& arm,
                                   const std::function<double(const RunResult&)>& metric);
std::string format_experiment_table(const ExperimentTable& table);
std::string experiment_table_to_json(const ExperimentTable& table);

// End-to-end derivative check of the combined loss through the model (and
// through the masking branch when rubi is set), on instances sampled away
// from top-k selection boundaries.
struct PipelineGradCheckOptions {
  int instances = 100;
  int samples_per_block = 4;
  double tolerance = 1e-4;
  double step = 1e-5;
  double denom_floor = 1e-4;
  std::uint64_t seed = 12345;
  LossConfig loss;
  bool rubi = false;
};

GradCheckReport run_pipeline_grad_check(const PipelineGradCheckOptions& opts);

}  // namespace vqasem
