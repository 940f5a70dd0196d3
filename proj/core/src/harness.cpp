#include "vqasem/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vqasem/cooc.hpp"

namespace vqasem {

double LrSchedule::lr_at(int epoch) const {
  if (warmup_start <= 0.0 || peak <= 0.0) throw std::invalid_argument("schedule rates must be positive");
  double lr;
  if (epoch < warmup_epochs) {
    const int denom = std::max(1, warmup_epochs - 1);
    lr = warmup_start + (peak - warmup_start) * static_cast<double>(epoch) / denom;
  } else {
    lr = peak;
    for (int d : decay_epochs) {
      if (epoch >= d) lr *= decay_factor;
    }
  }
  return lr;
}

std::string optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "adamax";
}

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "adamax") return OptimizerKind::adamax;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected adam or adamax)");
}

namespace {

const std::vector<double>& record_features(const SynthRecord& rec) {
  if (!rec.annotation.scene.has_inline_features()) {
    throw std::runtime_error("record '" + rec.annotation.question_id +
                             "' has no inline scene features");
  }
  return rec.annotation.scene.features;
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

std::vector<EpochLog> train(ToyVqaModel& model, RubiBranch* branch, const AnswerSpace& space,
                            const std::vector<SynthRecord>& records, const TrainConfig& cfg,
                            const SemanticSpace* sem_space,
                            const std::vector<SynthRecord>* heldout) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.loss.lambda > 0.0 && sem_space == nullptr) {
    throw std::invalid_argument("train: semantic space required when lambda > 0");
  }
  if (cfg.rubi && branch == nullptr) {
    throw std::invalid_argument("train: rubi branch required when rubi is set");
  }
  if (records.empty()) throw std::invalid_argument("train: no records");

  // Precompute targets; drop records with no in-dictionary answer.
  std::vector<const SynthRecord*> usable;
  std::vector<SoftTarget> targets;
  for (const SynthRecord& rec : records) {
    SoftTarget t = soft_targets(rec.annotation, space);
    const bool nonzero = std::any_of(t.values.begin(), t.values.end(), [](double v) { return v > 0.0; });
    if (!nonzero) continue;
    usable.push_back(&rec);
    targets.push_back(std::move(t));
  }
  if (usable.empty()) throw std::runtime_error("train: every record has an all-zero target");

  std::vector<ParamBlock*> blocks = model.param_blocks();
  if (cfg.rubi) {
    for (ParamBlock* b : branch->param_blocks()) blocks.push_back(b);
  }
  AdamState state = make_adam_state(blocks);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLog> log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.schedule.lr_at(epoch);
    rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end = std::min(pos + cfg.batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);
      model.zero_grad();
      if (cfg.rubi) branch->zero_grad();

      for (std::size_t b = pos; b < batch_end; ++b) {
        const SynthRecord& rec = *usable[order[b]];
        const SoftTarget& target = targets[order[b]];
        const std::vector<double>& feats = record_features(rec);

        LossValue loss;
        if (cfg.rubi) {
          RubiForward fwd =
              rubi_forward(model, *branch, feats, rec.annotation.question_tokens, /*training=*/true);
          loss = combined_loss(fwd.output, target, sem_space, cfg.loss);
          if (!std::isfinite(loss.total)) {
            throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", record '" + rec.annotation.question_id + "'");
          }
          for (double& g : loss.grad_logits) g *= inv_batch;
          rubi_backward(model, *branch, fwd, loss.grad_logits);
        } else {
          Prediction pred = model.forward(feats, rec.annotation.question_tokens);
          loss = combined_loss(pred, target, sem_space, cfg.loss);
          if (!std::isfinite(loss.total)) {
            throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", record '" + rec.annotation.question_id + "'");
          }
          for (double& g : loss.grad_logits) g *= inv_batch;
          model.backward(loss.grad_logits);
        }
        epoch_loss += loss.total;
      }

      if (cfg.optimizer == OptimizerKind::adam) {
        step_adam(blocks, state, lr);
      } else {
        step_adamax(blocks, state, lr);
      }
      pos = batch_end;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = epoch_loss / static_cast<double>(usable.size());
    if (heldout != nullptr && !heldout->empty()) {
      double soft = 0.0;
      for (const SynthRecord& rec : *heldout) {
        const SoftTarget t = soft_targets(rec.annotation, space);
        soft += t.values[predict_class(model, rec)];
      }
      entry.heldout_soft_accuracy = soft / static_cast<double>(heldout->size());
    }
    log.push_back(entry);
  }
  return log;
}

int predict_class(ToyVqaModel& model, const SynthRecord& record) {
  const Prediction pred = model.forward(record_features(record), record.annotation.question_tokens);
  return argmax_lowest(pred.logits);
}

EvalReport evaluate_with(const std::function<int(const SynthRecord&)>& predict,
                         const AnswerSpace& space, const std::vector<SynthRecord>& records,
                         const SemanticSpace& metric_space) {
  if (records.empty()) throw std::invalid_argument("evaluate: no records");
  if (metric_space.n_classes() != space.n_classes()) {
    throw std::invalid_argument("evaluate: metric space does not match dictionary");
  }

  EvalReport report;
  report.n_records = static_cast<int>(records.size());
  double err_dist_sum = 0.0;
  int err_dist_count = 0;

  struct TemplateAgg {
    int count = 0;
    double soft = 0.0;
    double top1 = 0.0;
  };
  std::map<std::string, TemplateAgg> per_template;

  for (const SynthRecord& rec : records) {
    const int pred = predict(rec);
    if (pred < 0 || pred >= space.n_classes()) {
      throw std::runtime_error("evaluate: predictor returned class " + std::to_string(pred));
    }
    const SoftTarget target = soft_targets(rec.annotation, space);
    const double soft = target.values[pred];

    const std::optional<int> truth = space.class_of(rec.latent.true_answer);
    const bool correct = truth.has_value() && *truth == pred;
    if (!correct) {
      ++report.n_errors;
      if (truth.has_value()) {
        err_dist_sum +=
            1.0 - cosine(metric_space.row(pred), metric_space.row(*truth), kDefaultCosineEps);
        ++err_dist_count;
      }
    }

    report.soft_accuracy += soft;
    report.top1_accuracy += correct ? 1.0 : 0.0;
    TemplateAgg& agg = per_template[rec.latent.template_id];
    ++agg.count;
    agg.soft += soft;
    agg.top1 += correct ? 1.0 : 0.0;
  }

  report.soft_accuracy /= report.n_records;
  report.top1_accuracy /= report.n_records;
  report.no_errors = report.n_errors == 0;
  report.mean_sem_error_distance = err_dist_count == 0 ? 0.0 : err_dist_sum / err_dist_count;
  for (const auto& [id, agg] : per_template) {
    report.per_template.push_back(
        {id, agg.count, agg.soft / agg.count, agg.top1 / agg.count});
  }
  return report;
}

EvalReport evaluate(ToyVqaModel& model, const AnswerSpace& space,
                    const std::vector<SynthRecord>& records, const SemanticSpace& metric_space) {
  return evaluate_with([&model](const SynthRecord& rec) { return predict_class(model, rec); },
                       space, records, metric_space);
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json report_to_json_obj(const EvalReport& r) {
  ordered_json j;
  j["soft_accuracy"] = r.soft_accuracy;
  j["top1_accuracy"] = r.top1_accuracy;
  j["mean_sem_error_distance"] = r.mean_sem_error_distance;
  j["no_errors"] = r.no_errors;
  j["n_records"] = r.n_records;
  j["n_errors"] = r.n_errors;
  j["per_template"] = json::array();
  for (const TemplateAccuracy& t : r.per_template) {
    ordered_json jt;
    jt["template_id"] = t.template_id;
    jt["count"] = t.count;
    jt["soft_accuracy"] = t.soft_accuracy;
    jt["top1_accuracy"] = t.top1_accuracy;
    j["per_template"].push_back(jt);
  }
  j["config_echo"] = r.config_echo;
  j["seed"] = r.seed;
  return j;
}

EvalReport report_from_json_obj(const json& j) {
  EvalReport r;
  r.soft_accuracy = j.at("soft_accuracy").get<double>();
  r.top1_accuracy = j.at("top1_accuracy").get<double>();
  r.mean_sem_error_distance = j.at("mean_sem_error_distance").get<double>();
  r.no_errors = j.at("no_errors").get<bool>();
  r.n_records = j.at("n_records").get<int>();
  r.n_errors = j.at("n_errors").get<int>();
  for (const json& jt : j.at("per_template")) {
    TemplateAccuracy t;
    t.template_id = jt.at("template_id").get<std::string>();
    t.count = jt.at("count").get<int>();
    t.soft_accuracy = jt.at("soft_accuracy").get<double>();
    t.top1_accuracy = jt.at("top1_accuracy").get<double>();
    r.per_template.push_back(std::move(t));
  }
  r.config_echo = j.at("config_echo").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  return report_to_json_obj(report).dump(2);
}

EvalReport eval_report_from_json(const std::string& text) {
  try {
    return report_from_json_obj(json::parse(text));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("eval report parse: ") + e.what());
  }
}

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::base: return "base";
    case Arm::sem_wordvec: return "sem-wordvec";
    case Arm::sem_cooc: return "sem-cooc";
    case Arm::rubi: return "rubi";
    case Arm::rubi_sem: return "rubi-sem";
  }
  throw std::logic_error("unreachable");
}

Arm arm_from_name(const std::string& name) {
  for (Arm arm : all_arms()) {
    if (arm_name(arm) == name) return arm;
  }
  throw std::invalid_argument("unknown arm '" + name + "'");
}

const std::vector<Arm>& all_arms() {
  static const std::vector<Arm> arms = {Arm::base, Arm::sem_wordvec, Arm::sem_cooc, Arm::rubi,
                                        Arm::rubi_sem};
  return arms;
}

namespace {

std::vector<AnnotationRecord> annotations_of(const std::vector<SynthRecord>& records) {
  std::vector<AnnotationRecord> out;
  out.reserve(records.size());
  for (const SynthRecord& r : records) out.push_back(r.annotation);
  return out;
}

TokenVocab vocab_of(const std::vector<SynthRecord>& records) {
  std::vector<std::string> tokens;
  for (const SynthRecord& r : records) {
    tokens.insert(tokens.end(), r.annotation.question_tokens.begin(),
                  r.annotation.question_tokens.end());
  }
  return TokenVocab::from_tokens(tokens);
}

std::string arm_config_echo(const ExperimentConfig& cfg, Arm arm, std::uint64_t seed,
                            const TrainConfig& tc) {
  ordered_json j;
  j["arm"] = arm_name(arm);
  j["seed"] = seed;
  j["shift_strength"] = cfg.shift_strength;
  j["n_train"] = cfg.n_train;
  j["n_test"] = cfg.n_test;
  j["min_count"] = cfg.min_count;
  j["epochs"] = tc.epochs;
  j["batch_size"] = tc.batch_size;
  j["optimizer"] = optimizer_name(tc.optimizer);
  j["lambda"] = tc.loss.lambda;
  j["k"] = tc.loss.k;
  j["activation"] = tc.loss.activation == Activation::sigmoid ? "sigmoid" : "softmax";
  j["rubi"] = tc.rubi;
  return j.dump();
}

RunResult run_single_arm(const ExperimentConfig& cfg, Arm arm, std::uint64_t seed) {
  const PriorShiftConfig shifted =
      make_mode_swap_shift(cfg.world, cfg.shift_strength, cfg.mode_mass);
  auto [train_recs, ood_recs] = gen_dataset(cfg.world, shifted, cfg.n_train, cfg.n_test, seed);

  // Fresh in-distribution sample: a zero-shift test split drawn from the
  // training priors with an offset seed.
  const PriorShiftConfig unshifted = make_mode_swap_shift(cfg.world, 0.0, cfg.mode_mass);
  auto id_recs = gen_dataset(cfg.world, unshifted, 1, cfg.n_test, seed + 1000003).second;

  const AnswerSpace dict = build_answer_space(annotations_of(train_recs), cfg.min_count);
  const SemanticSpace cooc_space = build_cooc_space(count_cooc(annotations_of(train_recs), dict), dict);
  const WordVectorLexicon lexicon =
      gen_category_lexicon(cfg.world, cfg.lexicon_dim, cfg.lexicon_spread, cfg.lexicon_seed);
  const SemanticSpace wordvec_space = build_wordvec_space(dict, lexicon).space;

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.rubi = false;
  const SemanticSpace* sem_space = nullptr;
  switch (arm) {
    case Arm::base:
      tc.loss.lambda = 0.0;
      break;
    case Arm::sem_wordvec:
      sem_space = &wordvec_space;
      break;
    case Arm::sem_cooc:
      sem_space = &cooc_space;
      break;
    case Arm::rubi:
      tc.loss.lambda = 0.0;
      tc.rubi = true;
      break;
    case Arm::rubi_sem:
      sem_space = &cooc_space;
      tc.rubi = true;
      break;
  }

  ToyVqaModel model(vocab_of(train_recs), dict.n_classes(), tc.dims, seed);
  std::optional<RubiBranch> branch;
  if (tc.rubi) {
    branch.emplace(vocab_of(train_recs), dict.n_classes(), tc.dims.question_dim,
                   tc.dims.rubi_hidden_dim, seed + 7);
  }
  train(model, branch ? &*branch : nullptr, dict, train_recs, tc, sem_space);

  RunResult result;
  result.arm = arm_name(arm);
  result.seed = seed;
  result.ood = evaluate(model, dict, ood_recs, cooc_space);
  result.in_dist = evaluate(model, dict, id_recs, cooc_space);
  const std::string echo = arm_config_echo(cfg, arm, seed, tc);
  result.ood.config_echo = echo;
  result.ood.seed = seed;
  result.in_dist.config_echo = echo;
  result.in_dist.seed = seed;
  return result;
}

}  // namespace

ExperimentTable run_experiment(const ExperimentConfig& cfg, const std::vector<Arm>& arms) {
  if (arms.empty() || cfg.seeds.empty()) {
    throw std::invalid_argument("run_experiment: need at least one arm and one seed");
  }
  struct Task {
    Arm arm;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (Arm arm : arms) {
    for (std::uint64_t seed : cfg.seeds) tasks.push_back({arm, seed});
  }

  ExperimentTable table;
  table.runs.resize(tasks.size());
  const int jobs = std::max(1, cfg.jobs);
  std::size_t next = 0;
  while (next < tasks.size()) {
    const std::size_t wave_end = std::min(next + jobs, tasks.size());
    std::vector<std::future<RunResult>> wave;
    for (std::size_t i = next; i < wave_end; ++i) {
      wave.push_back(std::async(std::launch::async, [&cfg, &tasks, i] {
        return run_single_arm(cfg, tasks[i].arm, tasks[i].seed);
      }));
    }
    for (std::size_t i = next; i < wave_end; ++i) {
      table.runs[i] = wave[i - next].get();
    }
    next = wave_end;
  }
  return table;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> collect_metric(const ExperimentTable& table, const std::string& arm,
                                   const std::function<double(const RunResult&)>& metric) {
  std::vector<double> out;
  for (const RunResult& run : table.runs) {
    if (run.arm == arm) out.push_back(metric(run));
  }
  return out;
}

namespace {

std::vector<std::string> table_arms(const ExperimentTable& table) {
  std::vector<std::string> arms;
  for (const RunResult& run : table.runs) {
    if (std::find(arms.begin(), arms.end(), run.arm) == arms.end()) arms.push_back(run.arm);
  }
  return arms;
}

}  // namespace

std::string format_experiment_table(const ExperimentTable& table) {
  char buf[256];
  std::string out;
  out += "arm          seed   ood_soft  ood_top1  id_soft   id_top1   sem_err\n";
  for (const RunResult& r : table.runs) {
    std::snprintf(buf, sizeof(buf), "%-12s %4llu   %.4f    %.4f    %.4f    %.4f    %.4f\n",
                  r.arm.c_str(), static_cast<unsigned long long>(r.seed), r.ood.soft_accuracy,
                  r.ood.top1_accuracy, r.in_dist.soft_accuracy, r.in_dist.top1_accuracy,
                  r.ood.mean_sem_error_distance);
    out += buf;
  }

  out += "\nmedians over seeds (delta vs base):\n";
  out += "arm          ood_soft            id_soft             sem_err\n";
  const std::vector<std::string> arms = table_arms(table);
  const bool has_base = std::find(arms.begin(), arms.end(), "base") != arms.end();
  double base_ood = 0.0, base_id = 0.0, base_err = 0.0;
  if (has_base) {
    base_ood = median(collect_metric(table, "base", [](const RunResult& r) { return r.ood.soft_accuracy; }));
    base_id = median(collect_metric(table, "base", [](const RunResult& r) { return r.in_dist.soft_accuracy; }));
    base_err = median(
        collect_metric(table, "base", [](const RunResult& r) { return r.ood.mean_sem_error_distance; }));
  }
  for (const std::string& arm : arms) {
    const double ood =
        median(collect_metric(table, arm, [](const RunResult& r) { return r.ood.soft_accuracy; }));
    const double id =
        median(collect_metric(table, arm, [](const RunResult& r) { return r.in_dist.soft_accuracy; }));
    const double err = median(
        collect_metric(table, arm, [](const RunResult& r) { return r.ood.mean_sem_error_distance; }));
    if (has_base) {
      std::snprintf(buf, sizeof(buf), "%-12s %.4f (%+.4f)    %.4f (%+.4f)    %.4f (%+.4f)\n",
                    arm.c_str(), ood, ood - base_ood, id, id - base_id, err, err - base_err);
    } else {
      std::snprintf(buf, sizeof(buf), "%-12s %.4f              %.4f              %.4f\n",
                    arm.c_str(), ood, id, err);
    }
    out += buf;
  }
  return out;
}

std::string experiment_table_to_json(const ExperimentTable& table) {
  ordered_json j;
  j["runs"] = json::array();
  for (const RunResult& r : table.runs) {
    ordered_json jr;
    jr["arm"] = r.arm;
    jr["seed"] = r.seed;
    jr["ood"] = json::parse(eval_report_to_json(r.ood));
    jr["in_dist"] = json::parse(eval_report_to_json(r.in_dist));
    j["runs"].push_back(jr);
  }
  j["medians"] = json::array();
  const std::vector<std::string> arms = table_arms(table);
  for (const std::string& arm : arms) {
    ordered_json jm;
    jm["arm"] = arm;
    jm["ood_soft"] =
        median(collect_metric(table, arm, [](const RunResult& r) { return r.ood.soft_accuracy; }));
    jm["ood_top1"] =
        median(collect_metric(table, arm, [](const RunResult& r) { return r.ood.top1_accuracy; }));
    jm["id_soft"] = median(
        collect_metric(table, arm, [](const RunResult& r) { return r.in_dist.soft_accuracy; }));
    jm["id_top1"] = median(
        collect_metric(table, arm, [](const RunResult& r) { return r.in_dist.top1_accuracy; }));
    jm["sem_err"] = median(collect_metric(
        table, arm, [](const RunResult& r) { return r.ood.mean_sem_error_distance; }));
    j["medians"].push_back(jm);
  }
  return j.dump(2);
}

GradCheckReport run_pipeline_grad_check(const PipelineGradCheckOptions& opts) {
  // Small corpus from the default world provides the dictionary, space, and
  // vocabulary; fresh model parameters per instance.
  const WorldSpec world = default_world();
  const PriorShiftConfig shift = make_mode_swap_shift(world, 0.0);
  const auto records = gen_dataset(world, shift, 400, 1, opts.seed).first;
  const AnswerSpace dict = build_answer_space(annotations_of(records), 1);
  const SemanticSpace space = build_cooc_space(count_cooc(annotations_of(records), dict), dict);

  LossConfig loss_cfg = opts.loss;
  if (loss_cfg.k > dict.n_classes()) {
    throw std::invalid_argument("grad check: k exceeds the dictionary size");
  }

  const TokenVocab vocab = vocab_of(records);
  ModelDims dims;
  Rng rng(opts.seed + 1);

  GradCheckReport worst;
  worst.tolerance = opts.tolerance;
  worst.passed = true;

  int made = 0;
  std::uint64_t attempt = 0;
  while (made < opts.instances) {
    ++attempt;
    if (attempt > static_cast<std::uint64_t>(opts.instances) * 50) {
      throw std::runtime_error("grad check: could not sample enough boundary-free instances");
    }
    const SynthRecord& rec = records[rng.below(records.size())];
    ToyVqaModel model(vocab, dict.n_classes(), dims, opts.seed + 100 + attempt);
    std::optional<RubiBranch> branch;
    if (opts.rubi) {
      branch.emplace(vocab, dict.n_classes(), dims.question_dim, dims.hidden_dim,
                     opts.seed + 500 + attempt);
    }
    const SoftTarget target = soft_targets(rec.annotation, dict);
    const std::vector<double>& feats = record_features(rec);

    // Skip instances where the k-th and (k+1)-th activations are within
    // 10 steps of each other; there the frozen-top-k derivative is one-sided.
    {
      Prediction pred = opts.rubi
                            ? rubi_forward(model, *branch, feats, rec.annotation.question_tokens, true).output
                            : model.forward(feats, rec.annotation.question_tokens);
      const std::vector<double> p = activate(pred.logits, loss_cfg.activation);
      if (loss_cfg.k < static_cast<int>(p.size())) {
        std::vector<double> sorted(p.begin(), p.end());
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        if (sorted[loss_cfg.k - 1] - sorted[loss_cfg.k] <= 10.0 * opts.step) continue;
      }
    }

    const auto eval_loss = [&]() {
      Prediction pred = opts.rubi
                            ? rubi_forward(model, *branch, feats, rec.annotation.question_tokens, true).output
                            : model.forward(feats, rec.annotation.question_tokens);
      return combined_loss(pred, target, &space, loss_cfg).total;
    };

    model.zero_grad();
    if (branch) branch->zero_grad();
    if (opts.rubi) {
      RubiForward fwd = rubi_forward(model, *branch, feats, rec.annotation.question_tokens, true);
      const LossValue loss = combined_loss(fwd.output, target, &space, loss_cfg);
      rubi_backward(model, *branch, fwd, loss.grad_logits);
    } else {
      Prediction pred = model.forward(feats, rec.annotation.question_tokens);
      const LossValue loss = combined_loss(pred, target, &space, loss_cfg);
      model.backward(loss.grad_logits);
    }

    std::vector<ParamBlock*> blocks = model.param_blocks();
    if (branch) {
      for (ParamBlock* b : branch->param_blocks()) blocks.push_back(b);
    }
    GradCheckOptions gopts;
    gopts.tolerance = opts.tolerance;
    gopts.step = opts.step;
    gopts.samples_per_block = opts.samples_per_block;
    gopts.denom_floor = opts.denom_floor;
    const GradCheckReport report = grad_check(eval_loss, blocks, gopts, rng);

    worst.coords_checked += report.coords_checked;
    if (report.max_rel_error > worst.max_rel_error) {
      worst.max_rel_error = report.max_rel_error;
      worst.worst_block = report.worst_block;
      worst.worst_index = report.worst_index;
      worst.worst_analytic = report.worst_analytic;
      worst.worst_numeric = report.worst_numeric;
    }
    ++made;
  }
  worst.passed = worst.max_rel_error < opts.tolerance;
  return worst;
}

}  // namespace vqasem
