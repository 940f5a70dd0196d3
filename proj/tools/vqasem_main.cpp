// Command-line front end: dataset generation, semantic-space building,
// training, evaluation, experiments, gradient checking, space inspection.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vqasem/cooc.hpp"
#include "vqasem/harness.hpp"
#include "vqasem/loss.hpp"
#include "vqasem/semantic_space.hpp"
#include "vqasem/synthcp.hpp"
#include "vqasem/toy_vqa_model.hpp"
#include "vqasem/word_vectors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace vqasem;

namespace {

// Optional JSON config; flags override whatever it sets.
struct FileConfig {
  std::optional<WorldSpec> world;
  json raw;

  static FileConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    FileConfig cfg;
    try {
      cfg.raw = json::parse(buf.str());
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
    if (cfg.raw.contains("world")) cfg.world = parse_world_json(cfg.raw.at("world").dump());
    return cfg;
  }

  template <typename T>
  void maybe(const char* key, T& slot) const {
    if (raw.contains(key)) slot = raw.at(key).get<T>();
  }

  void apply_train_section(TrainConfig& tc) const {
    if (!raw.contains("train")) return;
    const json& t = raw.at("train");
    if (t.contains("epochs")) tc.epochs = t.at("epochs").get<int>();
    if (t.contains("batch_size")) tc.batch_size = t.at("batch_size").get<int>();
    if (t.contains("lambda")) tc.loss.lambda = t.at("lambda").get<double>();
    if (t.contains("k")) tc.loss.k = t.at("k").get<int>();
    if (t.contains("activation")) {
      const std::string a = t.at("activation").get<std::string>();
      if (a != "sigmoid" && a != "softmax") throw std::runtime_error("bad activation: " + a);
      tc.loss.activation = a == "sigmoid" ? Activation::sigmoid : Activation::softmax;
    }
    if (t.contains("optimizer")) {
      tc.optimizer = optimizer_from_name(t.at("optimizer").get<std::string>());
    }
    if (t.contains("seed")) tc.seed = t.at("seed").get<std::uint64_t>();
    if (t.contains("peak_lr")) tc.schedule.peak = t.at("peak_lr").get<double>();
    if (t.contains("warmup_start_lr")) {
      tc.schedule.warmup_start = t.at("warmup_start_lr").get<double>();
    }
  }
};

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

SemanticSpace build_space_from_data(SpaceKind kind, const std::vector<AnnotationRecord>& records,
                                    const AnswerSpace& dict, const std::string& vectors_path) {
  if (kind == SpaceKind::cooc) {
    return build_cooc_space(count_cooc(records, dict), dict);
  }
  if (vectors_path.empty()) {
    throw std::runtime_error("--kind wordvec requires --vectors FILE");
  }
  const WordvecBuild built = build_wordvec_space(dict, load_word_vectors(vectors_path));
  if (!built.uncovered_classes.empty()) {
    std::cerr << "warning: " << built.uncovered_classes.size()
              << " answers had no lexicon token and got zero rows:";
    for (int id : built.uncovered_classes) std::cerr << " '" << dict.answer(id) << "'";
    std::cerr << "\n";
  }
  return built.space;
}

std::string activation_name(Activation a) {
  return a == Activation::sigmoid ? "sigmoid" : "softmax";
}

ordered_json train_config_echo(const TrainConfig& tc, int min_count) {
  ordered_json j;
  j["epochs"] = tc.epochs;
  j["batch_size"] = tc.batch_size;
  j["optimizer"] = optimizer_name(tc.optimizer);
  j["lambda"] = tc.loss.lambda;
  j["k"] = tc.loss.k;
  j["activation"] = activation_name(tc.loss.activation);
  j["rubi"] = tc.rubi;
  j["seed"] = tc.seed;
  j["min_count"] = min_count;
  j["peak_lr"] = tc.schedule.peak;
  j["warmup_start_lr"] = tc.schedule.warmup_start;
  j["warmup_epochs"] = tc.schedule.warmup_epochs;
  return j;
}

int cmd_gen_data(const std::string& out, const std::string& config_path, std::uint64_t seed,
                 double shift, double mode_mass, int n_train, int n_test) {
  WorldSpec world = default_world();
  if (!config_path.empty()) {
    const FileConfig cfg = FileConfig::load(config_path);
    if (cfg.world) world = *cfg.world;
  }
  const PriorShiftConfig prior_shift = make_mode_swap_shift(world, shift, mode_mass);
  const auto [train_recs, test_recs] = gen_dataset(world, prior_shift, n_train, n_test, seed);

  const fs::path dir = ensure_out_dir(out);
  write_dataset(train_recs, (dir / "train.jsonl").string());
  write_dataset(test_recs, (dir / "test.jsonl").string());

  ordered_json echo;
  echo["world"] = json::parse(world_to_json(world));
  echo["seed"] = seed;
  echo["shift_strength"] = shift;
  echo["mode_mass"] = mode_mass;
  echo["n_train"] = n_train;
  echo["n_test"] = n_test;
  echo["train_priors"] = prior_shift.train_priors;
  echo["test_priors"] = prior_shift.test_priors;
  std::ofstream cfg_out(dir / "world.json");
  cfg_out << echo.dump(2) << '\n';

  std::cout << "wrote " << train_recs.size() << " train and " << test_recs.size()
            << " test records to " << dir.string() << "\n";
  return 0;
}

int cmd_build_space(const std::string& out, const std::string& data, const std::string& kind_name,
                    int min_count, const std::string& vectors_path) {
  const SpaceKind kind = space_kind_from_name(kind_name);
  const std::vector<AnnotationRecord> records = read_annotations(data);
  const AnswerSpace dict = build_answer_space(records, min_count);
  const SemanticSpace space = build_space_from_data(kind, records, dict, vectors_path);

  const fs::path dir = ensure_out_dir(out);
  export_dictionary(dict, (dir / "answers.txt").string());
  const std::string space_file = "space_" + space_kind_name(kind) + ".tsv";
  export_space(space, (dir / space_file).string());
  std::cout << "built " << space_kind_name(kind) << " space over " << dict.n_classes()
            << " classes from " << records.size() << " records -> "
            << (dir / space_file).string() << "\n";
  return 0;
}

int cmd_train(const std::string& out, const std::string& train_path, const std::string& test_path,
              const TrainConfig& tc, int min_count, const std::string& kind_name,
              const std::string& vectors_path) {
  const std::vector<SynthRecord> train_recs = read_dataset(train_path);
  std::vector<SynthRecord> test_recs;
  if (!test_path.empty()) test_recs = read_dataset(test_path);

  std::vector<AnnotationRecord> ann;
  ann.reserve(train_recs.size());
  for (const SynthRecord& r : train_recs) ann.push_back(r.annotation);
  const AnswerSpace dict = build_answer_space(ann, min_count);

  const SpaceKind kind = space_kind_from_name(kind_name);
  std::optional<SemanticSpace> space;
  if (tc.loss.lambda > 0.0) {
    space = build_space_from_data(kind, ann, dict, vectors_path);
  }

  std::vector<std::string> tokens;
  for (const SynthRecord& r : train_recs) {
    tokens.insert(tokens.end(), r.annotation.question_tokens.begin(),
                  r.annotation.question_tokens.end());
  }
  ToyVqaModel model(TokenVocab::from_tokens(tokens), dict.n_classes(), tc.dims, tc.seed);
  std::optional<RubiBranch> branch;
  if (tc.rubi) {
    branch.emplace(model.vocab(), dict.n_classes(), tc.dims.question_dim,
                   tc.dims.rubi_hidden_dim, tc.seed + 7);
  }

  const std::vector<EpochLog> log =
      train(model, branch ? &*branch : nullptr, dict, train_recs, tc,
            space ? &*space : nullptr, test_recs.empty() ? nullptr : &test_recs);

  const fs::path dir = ensure_out_dir(out);
  save_checkpoint((dir / "checkpoint.txt").string(), model, dict);
  export_dictionary(dict, (dir / "answers.txt").string());
  if (space) export_space(*space, (dir / ("space_" + space_kind_name(kind) + ".tsv")).string());

  {
    std::ofstream log_out(dir / "train_log.txt");
    log_out << "# " << train_config_echo(tc, min_count).dump() << "\n";
    log_out << "# epoch lr train_loss heldout_soft_accuracy\n";
    char buf[160];
    for (const EpochLog& e : log) {
      if (e.heldout_soft_accuracy) {
        std::snprintf(buf, sizeof(buf), "%d %.8g %.8g %.8g\n", e.epoch, e.lr, e.train_loss,
                      *e.heldout_soft_accuracy);
      } else {
        std::snprintf(buf, sizeof(buf), "%d %.8g %.8g -\n", e.epoch, e.lr, e.train_loss);
      }
      log_out << buf;
    }
  }

  std::cout << "trained " << tc.epochs << " epochs over " << train_recs.size()
            << " records; final train loss " << log.back().train_loss << "\n";

  if (!test_recs.empty()) {
    const SemanticSpace metric_space =
        space ? *space : build_cooc_space(count_cooc(ann, dict), dict);
    EvalReport report = evaluate(model, dict, test_recs, metric_space);
    report.config_echo = train_config_echo(tc, min_count).dump();
    report.seed = tc.seed;
    std::ofstream rep_out(dir / "report.json");
    rep_out << eval_report_to_json(report) << '\n';
    std::cout << "test soft_accuracy " << report.soft_accuracy << ", top1 "
              << report.top1_accuracy << ", sem_error_distance "
              << report.mean_sem_error_distance << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& data_path, const std::string& out,
             std::string space_path) {
  const fs::path run(run_dir);
  LoadedCheckpoint ckpt = load_checkpoint((run / "checkpoint.txt").string());

  if (space_path.empty()) {
    for (const char* name : {"space_cooc.tsv", "space_wordvec.tsv"}) {
      if (fs::exists(run / name)) {
        space_path = (run / name).string();
        break;
      }
    }
    if (space_path.empty()) {
      throw std::runtime_error("no space file in '" + run_dir + "'; pass --space FILE");
    }
  }
  const SemanticSpace metric_space = import_space(space_path);
  if (metric_space.answers != ckpt.space.answers()) {
    throw std::runtime_error("space file answers do not match the checkpoint dictionary");
  }

  const std::vector<SynthRecord> records = read_dataset(data_path);
  EvalReport report = evaluate(ckpt.model, ckpt.space, records, metric_space);
  report.config_echo = "{\"checkpoint\":\"" + (run / "checkpoint.txt").string() + "\"}";
  std::cout << eval_report_to_json(report) << "\n";
  if (!out.empty()) {
    const fs::path dir = ensure_out_dir(out);
    std::ofstream rep_out(dir / "report.json");
    rep_out << eval_report_to_json(report) << '\n';
  }
  return 0;
}

// Simple grid over lambda and k: the base arm once, then one sem-cooc run
// per grid point. Defaults reduce to the single standard operating point.
int cmd_grid(const std::string& out, ExperimentConfig cfg, std::vector<double> lambdas,
             std::vector<int> ks) {
  if (lambdas.empty()) lambdas = {cfg.train.loss.lambda};
  if (ks.empty()) ks = {cfg.train.loss.k};

  const fs::path dir = ensure_out_dir(out);
  ordered_json grid_json;
  grid_json["points"] = json::array();
  std::string text = "lambda     k   ood_soft  id_soft   sem_err\n";

  const ExperimentTable base_table = run_experiment(cfg, {Arm::base});
  const double base_ood = median(
      collect_metric(base_table, "base", [](const RunResult& r) { return r.ood.soft_accuracy; }));

  char buf[160];
  for (double lambda : lambdas) {
    for (int k : ks) {
      ExperimentConfig point = cfg;
      point.train.loss.lambda = lambda;
      point.train.loss.k = k;
      const ExperimentTable t = run_experiment(point, {Arm::sem_cooc});
      const auto ood = median(collect_metric(
          t, "sem-cooc", [](const RunResult& r) { return r.ood.soft_accuracy; }));
      const auto id = median(collect_metric(
          t, "sem-cooc", [](const RunResult& r) { return r.in_dist.soft_accuracy; }));
      const auto err = median(collect_metric(
          t, "sem-cooc", [](const RunResult& r) { return r.ood.mean_sem_error_distance; }));
      std::snprintf(buf, sizeof(buf), "%-9.3g %3d   %.4f    %.4f    %.4f\n", lambda, k, ood, id,
                    err);
      text += buf;
      ordered_json jp;
      jp["lambda"] = lambda;
      jp["k"] = k;
      jp["ood_soft_median"] = ood;
      jp["id_soft_median"] = id;
      jp["sem_err_median"] = err;
      grid_json["points"].push_back(jp);
    }
  }
  std::snprintf(buf, sizeof(buf), "base       -   %.4f\n", base_ood);
  text += buf;
  grid_json["base_ood_soft_median"] = base_ood;

  std::ofstream(dir / "grid.json") << grid_json.dump(2) << '\n';
  std::ofstream(dir / "grid.txt") << text;
  std::cout << text;
  return 0;
}

int cmd_experiment(const std::string& out, const ExperimentConfig& cfg,
                   const std::vector<std::string>& arm_names) {
  std::vector<Arm> arms;
  if (arm_names.empty()) {
    arms = all_arms();
  } else {
    for (const std::string& name : arm_names) arms.push_back(arm_from_name(name));
  }

  const auto started = std::chrono::steady_clock::now();
  const ExperimentTable table = run_experiment(cfg, arms);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const fs::path dir = ensure_out_dir(out);
  const fs::path runs_dir = dir / "runs";
  fs::create_directories(runs_dir);
  for (const RunResult& run : table.runs) {
    const std::string stem = run.arm + "-seed" + std::to_string(run.seed);
    std::ofstream ood_out(runs_dir / (stem + "-ood.json"));
    ood_out << eval_report_to_json(run.ood) << '\n';
    std::ofstream id_out(runs_dir / (stem + "-id.json"));
    id_out << eval_report_to_json(run.in_dist) << '\n';
  }
  {
    std::ofstream json_out(dir / "summary.json");
    json_out << experiment_table_to_json(table) << '\n';
    std::ofstream text_out(dir / "summary.txt");
    text_out << format_experiment_table(table);
  }
  std::cout << format_experiment_table(table);
  std::printf("%zu runs in %.1f s -> %s\n", table.runs.size(), elapsed, dir.string().c_str());
  return 0;
}

int cmd_grad_check(const PipelineGradCheckOptions& opts) {
  const GradCheckReport report = run_pipeline_grad_check(opts);
  std::cout << report.summary() << "\n";
  return report.passed ? 0 : 1;
}

int cmd_inspect_space(const std::string& space_path, const std::string& query, int top) {
  const SemanticSpace space = import_space(space_path);
  const std::string normalized = normalize_answer(query);
  int query_id = -1;
  for (int i = 0; i < space.n_classes(); ++i) {
    if (space.answers[i] == normalized) {
      query_id = i;
      break;
    }
  }
  if (query_id < 0) throw std::runtime_error("answer '" + normalized + "' not in the space");
  std::printf("%-24s %s\n", "answer", "cosine");
  for (const auto& [id, sim] : nearest_classes(space, query_id, top)) {
    std::printf("%-24s %.6f\n", space.answers[id].c_str(), sim);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic-loss toolkit for answer-space classification"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a changing-priors synthetic dataset");
  std::string gen_out, gen_config;
  std::uint64_t gen_seed = 1;
  double gen_shift = 0.8, gen_mode_mass = 0.5;
  int gen_train = 5000, gen_test = 2000;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--config", gen_config, "JSON config with a world section");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--shift", gen_shift, "prior shift strength s in [0,1]");
  gen->add_option("--mode-mass", gen_mode_mass, "train prior mass of the per-template mode");
  gen->add_option("--n-train", gen_train, "training records");
  gen->add_option("--n-test", gen_test, "test records");

  auto* build = app.add_subcommand("build-space", "build a semantic space from annotations");
  std::string build_out, build_data, build_kind, build_vectors;
  int build_min_count = 2;
  build->add_option("--out", build_out, "output directory")->required();
  build->add_option("--data", build_data, "annotation file (jsonl)")->required();
  build->add_option("--kind", build_kind, "cooc or wordvec")->required();
  build->add_option("--min-count", build_min_count, "dictionary record-frequency threshold");
  build->add_option("--vectors", build_vectors, "word-vector file (wordvec kind)");

  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  std::string tr_out, tr_train, tr_test, tr_config, tr_kind = "cooc", tr_vectors;
  std::string tr_activation, tr_optimizer;
  TrainConfig tr_cfg;
  int tr_min_count = 2;
  double tr_lambda = -1.0;
  int tr_k = -1, tr_epochs = -1, tr_batch = -1;
  std::int64_t tr_seed = -1;
  bool tr_rubi = false;
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--train", tr_train, "training dataset (jsonl)")->required();
  tr->add_option("--test", tr_test, "held-out dataset (jsonl)");
  tr->add_option("--config", tr_config, "JSON config with a train section");
  tr->add_option("--lambda", tr_lambda, "semantic loss weight");
  tr->add_option("--k", tr_k, "top-k truncation");
  tr->add_option("--activation", tr_activation, "sigmoid or softmax");
  tr->add_option("--optimizer", tr_optimizer, "adam or adamax");
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--batch", tr_batch, "minibatch size");
  tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--min-count", tr_min_count, "dictionary threshold");
  tr->add_option("--space-kind", tr_kind, "semantic space kind when lambda > 0");
  tr->add_option("--vectors", tr_vectors, "word-vector file for --space-kind wordvec");
  tr->add_flag("--rubi", tr_rubi, "train with the question-only masking branch");

  auto* ev = app.add_subcommand("eval", "evaluate a trained checkpoint");
  std::string ev_run, ev_data, ev_out, ev_space;
  ev->add_option("--run", ev_run, "training output directory")->required();
  ev->add_option("--data", ev_data, "dataset to evaluate (jsonl)")->required();
  ev->add_option("--out", ev_out, "directory for report.json");
  ev->add_option("--space", ev_space, "semantic space tsv for the error metric");

  auto* ex = app.add_subcommand("experiment", "run the arm x seed comparison matrix");
  std::string ex_out, ex_config;
  std::vector<std::string> ex_arms;
  int ex_seeds = 5;
  std::vector<std::uint64_t> ex_seed_list;
  ExperimentConfig ex_cfg;
  ex->add_option("--out", ex_out, "output directory")->required();
  ex->add_option("--config", ex_config, "JSON config (world/data/train sections)");
  ex->add_option("--arms", ex_arms,
                 "arms to run (base sem-wordvec sem-cooc rubi rubi-sem); default all");
  ex->add_option("--seeds", ex_seeds, "number of seeds (1..n)");
  ex->add_option("--seed-list", ex_seed_list, "explicit seeds, overrides --seeds");
  auto* ex_shift = ex->add_option("--shift", ex_cfg.shift_strength, "prior shift strength");
  auto* ex_ntrain = ex->add_option("--n-train", ex_cfg.n_train, "training records per run");
  auto* ex_ntest = ex->add_option("--n-test", ex_cfg.n_test, "evaluation records per split");
  auto* ex_minc = ex->add_option("--min-count", ex_cfg.min_count, "dictionary threshold");
  auto* ex_epochs = ex->add_option("--epochs", ex_cfg.train.epochs, "training epochs");
  auto* ex_lambda =
      ex->add_option("--lambda", ex_cfg.train.loss.lambda, "semantic loss weight for sem arms");
  auto* ex_k = ex->add_option("--k", ex_cfg.train.loss.k, "top-k truncation");
  ex->add_option("--jobs", ex_cfg.jobs, "concurrent runs");
  std::vector<double> ex_lambda_grid;
  std::vector<int> ex_k_grid;
  ex->add_option("--lambda-grid", ex_lambda_grid,
                 "grid of lambda values; runs base plus sem-cooc per point");
  ex->add_option("--k-grid", ex_k_grid, "grid of k values for --lambda-grid mode");

  auto* gc =
      app.add_subcommand("grad-check", "check analytic gradients against finite differences");
  PipelineGradCheckOptions gc_opts;
  gc->add_option("--instances", gc_opts.instances, "random instances to sample");
  gc->add_option("--samples", gc_opts.samples_per_block, "coordinates per parameter block");
  gc->add_option("--tolerance", gc_opts.tolerance, "max relative error allowed");
  gc->add_option("--step", gc_opts.step, "central difference half step");
  gc->add_option("--seed", gc_opts.seed, "sampling seed");
  gc->add_option("--lambda", gc_opts.loss.lambda, "semantic loss weight");
  gc->add_option("--k", gc_opts.loss.k, "top-k truncation");
  gc->add_flag("--rubi", gc_opts.rubi, "check gradients through the masking branch");

  auto* in = app.add_subcommand("inspect-space", "list nearest answers by cosine");
  std::string in_space, in_query;
  int in_top = 5;
  in->add_option("--space", in_space, "semantic space tsv")->required();
  in->add_option("--query", in_query, "answer string to look up")->required();
  in->add_option("--top", in_top, "neighbours to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2; --help exits 0
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_data(gen_out, gen_config, gen_seed, gen_shift, gen_mode_mass, gen_train,
                          gen_test);
    }
    if (build->parsed()) {
      return cmd_build_space(build_out, build_data, build_kind, build_min_count, build_vectors);
    }
    if (tr->parsed()) {
      if (!tr_config.empty()) FileConfig::load(tr_config).apply_train_section(tr_cfg);
      if (tr_lambda >= 0.0) tr_cfg.loss.lambda = tr_lambda;
      if (tr_k > 0) tr_cfg.loss.k = tr_k;
      if (!tr_activation.empty()) {
        if (tr_activation != "sigmoid" && tr_activation != "softmax") {
          throw std::runtime_error("bad --activation: " + tr_activation);
        }
        tr_cfg.loss.activation =
            tr_activation == "sigmoid" ? Activation::sigmoid : Activation::softmax;
      }
      if (!tr_optimizer.empty()) tr_cfg.optimizer = optimizer_from_name(tr_optimizer);
      if (tr_epochs > 0) tr_cfg.epochs = tr_epochs;
      if (tr_batch > 0) tr_cfg.batch_size = tr_batch;
      if (tr_seed >= 0) tr_cfg.seed = static_cast<std::uint64_t>(tr_seed);
      tr_cfg.rubi = tr_rubi;
      return cmd_train(tr_out, tr_train, tr_test, tr_cfg, tr_min_count, tr_kind, tr_vectors);
    }
    if (ev->parsed()) return cmd_eval(ev_run, ev_data, ev_out, ev_space);
    if (ex->parsed()) {
      if (!ex_config.empty()) {
        // file values fill anything no flag overrode
        const FileConfig file = FileConfig::load(ex_config);
        if (file.world) ex_cfg.world = *file.world;
        if (ex_shift->count() == 0) file.maybe("shift_strength", ex_cfg.shift_strength);
        file.maybe("mode_mass", ex_cfg.mode_mass);
        if (ex_ntrain->count() == 0) file.maybe("n_train", ex_cfg.n_train);
        if (ex_ntest->count() == 0) file.maybe("n_test", ex_cfg.n_test);
        if (ex_minc->count() == 0) file.maybe("min_count", ex_cfg.min_count);
        if (ex_epochs->count() == 0 && ex_lambda->count() == 0 && ex_k->count() == 0) {
          file.apply_train_section(ex_cfg.train);
        }
      }
      if (!ex_seed_list.empty()) {
        ex_cfg.seeds = ex_seed_list;
      } else {
        ex_cfg.seeds.clear();
        for (int i = 1; i <= ex_seeds; ++i) ex_cfg.seeds.push_back(i);
      }
      if (!ex_lambda_grid.empty() || !ex_k_grid.empty()) {
        return cmd_grid(ex_out, ex_cfg, ex_lambda_grid, ex_k_grid);
      }
      return cmd_experiment(ex_out, ex_cfg, ex_arms);
    }
    if (gc->parsed()) return cmd_grad_check(gc_opts);
    if (in->parsed()) return cmd_inspect_space(in_space, in_query, in_top);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
