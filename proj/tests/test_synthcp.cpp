#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vqasem/cooc.hpp"
#include "vqasem/loss.hpp"
#include "vqasem/synthcp.hpp"

using namespace vqasem;

namespace {

// 99th percentile of the chi-square distribution, df = index + 1.
constexpr double kChi2Crit99[] = {6.635, 9.210, 11.345, 13.277, 15.086,
                                  16.812, 18.475, 20.090, 21.666};

double chi2_goodness_of_fit(const std::vector<int>& observed, const std::vector<double>& expected_p,
                            int total) {
  double chi2 = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = expected_p[i] * total;
    if (expected <= 0.0) continue;
    const double d = observed[i] - expected;
    chi2 += d * d / expected;
  }
  return chi2;
}

std::map<std::string, std::map<std::string, int>> truth_histograms(
    const std::vector<SynthRecord>& records) {
  std::map<std::string, std::map<std::string, int>> hist;
  for (const SynthRecord& r : records) ++hist[r.latent.template_id][r.latent.true_answer];
  return hist;
}

std::string majority(const std::map<std::string, int>& counts) {
  std::string best;
  int best_count = -1;
  for (const auto& [answer, count] : counts) {
    if (count > best_count) {
      best = answer;
      best_count = count;
    }
  }
  return best;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("default world shape: 4 categories of 10/9/4/4 answers, 8 templates") {
  const WorldSpec world = default_world();
  REQUIRE(world.categories.size() == 4);
  CHECK(world.categories[0].answers.size() == 10);
  CHECK(world.categories[1].answers.size() == 9);
  CHECK(world.categories[2].answers.size() == 4);
  CHECK(world.categories[3].answers.size() == 4);
  CHECK(world.answer_count() == 27);
  CHECK(world.templates.size() == 8);
  CHECK(world.find_answer("harley").has_value());
  CHECK(!world.find_answer("umbrella").has_value());
}

TEST_CASE("world json round trip") {
  const WorldSpec world = default_world();
  const WorldSpec back = parse_world_json(world_to_json(world));
  CHECK(back.categories.size() == world.categories.size());
  CHECK(back.templates.size() == world.templates.size());
  CHECK(back.feature_dim == world.feature_dim);
  CHECK(back.annotator_noise == world.annotator_noise);
  for (std::size_t c = 0; c < world.categories.size(); ++c) {
    CHECK(back.categories[c].answers == world.categories[c].answers);
  }
}

TEST_CASE("mode-swap shift: s=0 identical, s=1 swaps the majority") {
  const WorldSpec world = default_world();

  const PriorShiftConfig same = make_mode_swap_shift(world, 0.0);
  for (std::size_t t = 0; t < same.train_priors.size(); ++t) {
    CHECK(same.train_priors[t] == same.test_priors[t]);
  }

  const PriorShiftConfig swapped = make_mode_swap_shift(world, 1.0);
  for (std::size_t t = 0; t < swapped.train_priors.size(); ++t) {
    const auto& train = swapped.train_priors[t];
    const auto& test = swapped.test_priors[t];
    const int train_mode =
        static_cast<int>(std::max_element(train.begin(), train.end()) - train.begin());
    const int test_mode =
        static_cast<int>(std::max_element(test.begin(), test.end()) - test.begin());
    CHECK(train_mode != test_mode);
  }

  CHECK_THROWS_AS(make_mode_swap_shift(world, 1.5), std::invalid_argument);
}

TEST_CASE("total variation between split priors is monotone in s") {
  const WorldSpec world = default_world();
  double prev = -1.0;
  for (double s : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const PriorShiftConfig cfg = make_mode_swap_shift(world, s);
    double tv = 0.0;
    for (std::size_t t = 0; t < cfg.train_priors.size(); ++t) {
      tv += total_variation(cfg.train_priors[t], cfg.test_priors[t]);
    }
    CHECK(tv >= prev);
    prev = tv;
  }
}

TEST_CASE("same seed produces byte-identical datasets") {
  const WorldSpec world = default_world();
  const PriorShiftConfig shift = make_mode_swap_shift(world, 0.8);
  const auto [train_a, test_a] = gen_dataset(world, shift, 200, 100, 42);
  const auto [train_b, test_b] = gen_dataset(world, shift, 200, 100, 42);

  write_dataset(train_a, "test_tmp_gen_a.jsonl");
  write_dataset(train_b, "test_tmp_gen_b.jsonl");
  CHECK(file_bytes("test_tmp_gen_a.jsonl") == file_bytes("test_tmp_gen_b.jsonl"));
  std::remove("test_tmp_gen_a.jsonl");
  std::remove("test_tmp_gen_b.jsonl");

  // a different seed differs
  const auto [train_c, test_c] = gen_dataset(world, shift, 200, 100, 43);
  CHECK(train_c[0].annotation.scene.features != train_a[0].annotation.scene.features);
}

TEST_CASE("s=0: per-template truth histograms of both splits fit the shared prior") {
  const WorldSpec world = default_world();
  const PriorShiftConfig shift = make_mode_swap_shift(world, 0.0);
  const auto [train, test] = gen_dataset(world, shift, 10000, 10000, 3);

  for (const auto* split : {&train, &test}) {
    const auto hist = truth_histograms(*split);
    for (std::size_t t = 0; t < world.templates.size(); ++t) {
      const QuestionTemplate& tpl = world.templates[t];
      const Category& cat = world.categories[tpl.category];
      const auto it = hist.find(tpl.id);
      REQUIRE(it != hist.end());
      std::vector<int> observed(cat.answers.size(), 0);
      int total = 0;
      for (std::size_t m = 0; m < cat.answers.size(); ++m) {
        const auto cit = it->second.find(cat.answers[m]);
        observed[m] = cit == it->second.end() ? 0 : cit->second;
        total += observed[m];
      }
      const double chi2 = chi2_goodness_of_fit(observed, shift.train_priors[t], total);
      const int df = static_cast<int>(cat.answers.size()) - 1;
      REQUIRE(df >= 1);
      REQUIRE(df <= 9);
      CHECK(chi2 < kChi2Crit99[df - 1]);
    }
  }

  // two-sample homogeneity: the train and test histograms agree per template
  const auto train_hist = truth_histograms(train);
  const auto test_hist = truth_histograms(test);
  for (std::size_t t = 0; t < world.templates.size(); ++t) {
    const QuestionTemplate& tpl = world.templates[t];
    const Category& cat = world.categories[tpl.category];
    std::vector<int> o1(cat.answers.size(), 0), o2(cat.answers.size(), 0);
    int n1 = 0, n2 = 0;
    for (std::size_t m = 0; m < cat.answers.size(); ++m) {
      const auto i1 = train_hist.at(tpl.id).find(cat.answers[m]);
      const auto i2 = test_hist.at(tpl.id).find(cat.answers[m]);
      o1[m] = i1 == train_hist.at(tpl.id).end() ? 0 : i1->second;
      o2[m] = i2 == test_hist.at(tpl.id).end() ? 0 : i2->second;
      n1 += o1[m];
      n2 += o2[m];
    }
    double chi2 = 0.0;
    for (std::size_t m = 0; m < cat.answers.size(); ++m) {
      const double pooled = static_cast<double>(o1[m] + o2[m]) / (n1 + n2);
      if (pooled <= 0.0) continue;
      const double e1 = pooled * n1;
      const double e2 = pooled * n2;
      chi2 += (o1[m] - e1) * (o1[m] - e1) / e1 + (o2[m] - e2) * (o2[m] - e2) / e2;
    }
    const int df = static_cast<int>(cat.answers.size()) - 1;
    CHECK(chi2 < kChi2Crit99[df - 1]);
  }
}

TEST_CASE("s=1: the train-majority answer differs from the test-majority per template") {
  const WorldSpec world = default_world();
  const PriorShiftConfig shift = make_mode_swap_shift(world, 1.0);
  const auto [train, test] = gen_dataset(world, shift, 8000, 8000, 11);
  const auto train_hist = truth_histograms(train);
  const auto test_hist = truth_histograms(test);
  for (const QuestionTemplate& tpl : world.templates) {
    CHECK(majority(train_hist.at(tpl.id)) != majority(test_hist.at(tpl.id)));
  }
}

TEST_CASE("noise-free annotators all agree with the truth") {
  WorldSpec world = default_world();
  world.annotator_noise = 0.0;
  Rng rng(5);
  const auto answers = simulate_annotators(1, 3, world, rng);
  REQUIRE(answers.size() == kAnnotatorsPerQuestion);
  for (const std::string& a : answers) CHECK(a == world.categories[1].answers[3]);
}

TEST_CASE("single-member categories always agree regardless of noise") {
  WorldSpec world;
  world.categories = {{"lonely", "thing", {"only"}}, {"pair", "stuff", {"a", "b"}}};
  world.templates = {{"t0", {"what", "thing"}, 0}, {"t1", {"what", "stuff"}, 1}};
  world.annotator_noise = 0.9;
  world.validate();
  Rng rng(6);
  const auto answers = simulate_annotators(0, 0, world, rng);
  for (const std::string& a : answers) CHECK(a == "only");
}

TEST_CASE("the seeded overload is deterministic and validates the answer") {
  const WorldSpec world = default_world();
  const auto a = simulate_annotators("husky", world, 99);
  const auto b = simulate_annotators("husky", world, 99);
  CHECK(a == b);
  CHECK_THROWS_AS(simulate_annotators("umbrella", world, 99), std::invalid_argument);
}

TEST_CASE("annotator answers never leave the truth's category") {
  const WorldSpec world = default_world();
  const PriorShiftConfig shift = make_mode_swap_shift(world, 0.8);
  const auto [train, test] = gen_dataset(world, shift, 1500, 500, 13);
  for (const auto* split : {&train, &test}) {
    for (const SynthRecord& rec : *split) {
      const auto truth_loc = world.find_answer(rec.latent.true_answer);
      REQUIRE(truth_loc.has_value());
      for (const std::string& a : rec.annotation.annotator_answers) {
        const auto loc = world.find_answer(a);
        REQUIRE(loc.has_value());
        CHECK(loc->first == truth_loc->first);
      }
    }
  }
}

TEST_CASE("a custom confusion kernel steers substitutions") {
  WorldSpec world;
  world.categories = {{"c", "kw", {"red", "blue", "green"}}, {"d", "kw2", {"x", "y"}}};
  world.templates = {{"t0", {"q"}, 0}, {"t1", {"q"}, 1}};
  world.annotator_noise = 0.9;
  // red always substitutes to green, never blue
  Tensor2 k0(3, 3);
  k0.at(0, 2) = 1.0;
  k0.at(1, 0) = 1.0;
  k0.at(2, 0) = 1.0;
  Tensor2 k1(2, 2);
  k1.at(0, 1) = 1.0;
  k1.at(1, 0) = 1.0;
  world.confusion = {k0, k1};
  world.validate();

  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    for (const std::string& a : simulate_annotators(0, 0, world, rng)) {
      CHECK(a != "blue");
    }
  }
}

TEST_CASE("prototypes are distinct and noiseless features are Bayes-separable") {
  const WorldSpec world = default_world();
  const auto protos = answer_prototypes(world);
  REQUIRE(static_cast<int>(protos.size()) == world.answer_count());
  for (std::size_t i = 0; i < protos.size(); ++i) {
    for (std::size_t j = i + 1; j < protos.size(); ++j) {
      double d2 = 0.0;
      for (int d = 0; d < world.feature_dim; ++d) {
        const double diff = protos[i][d] - protos[j][d];
        d2 += diff * diff;
      }
      CHECK(d2 > 0.0);
    }
  }

  // nearest-prototype on the latent attributes recovers the truth exactly
  std::vector<std::string> names;
  for (const Category& cat : world.categories) {
    names.insert(names.end(), cat.answers.begin(), cat.answers.end());
  }
  const PriorShiftConfig shift = make_mode_swap_shift(world, 0.8);
  const auto [train, test] = gen_dataset(world, shift, 400, 400, 17);
  for (const auto* split : {&train, &test}) {
    for (const SynthRecord& rec : *split) {
      int best = -1;
      double best_d2 = 0.0;
      for (std::size_t p = 0; p < protos.size(); ++p) {
        double d2 = 0.0;
        for (int d = 0; d < world.feature_dim; ++d) {
          const double diff = rec.latent.attributes[d] - protos[p][d];
          d2 += diff * diff;
        }
        if (best < 0 || d2 < best_d2) {
          best = static_cast<int>(p);
          best_d2 = d2;
        }
      }
      CHECK(names[best] == rec.latent.true_answer);
    }
  }
}

TEST_CASE("dataset write/read round trips all fields") {
  const WorldSpec world = default_world();
  const PriorShiftConfig shift = make_mode_swap_shift(world, 0.8);
  const auto records = gen_dataset(world, shift, 50, 1, 23).first;

  const std::string path = "test_tmp_dataset.jsonl";
  write_dataset(records, path);
  const auto back = read_dataset(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].annotation.question_id == records[i].annotation.question_id);
    CHECK(back[i].annotation.question_tokens == records[i].annotation.question_tokens);
    CHECK(back[i].annotation.scene.features == records[i].annotation.scene.features);
    CHECK(back[i].annotation.annotator_answers == records[i].annotation.annotator_answers);
    CHECK(back[i].latent.template_id == records[i].latent.template_id);
    CHECK(back[i].latent.true_answer == records[i].latent.true_answer);
    CHECK(back[i].latent.attributes == records[i].latent.attributes);
  }

  // the same file loads as plain annotations (latent fields ignored)
  const auto annotations = read_annotations(path);
  CHECK(annotations.size() == records.size());
  std::remove(path.c_str());
}

TEST_CASE("empty dataset round trips and malformed lines report their number") {
  const std::string path = "test_tmp_empty.jsonl";
  write_dataset({}, path);
  CHECK(read_dataset(path).empty());

  {
    std::ofstream out(path);
    const WorldSpec world = default_world();
    const auto records =
        gen_dataset(world, make_mode_swap_shift(world, 0.0), 2, 1, 3).first;
    write_dataset(records, path);
    std::ofstream app(path, std::ios::app);
    app << "{\"bad\": true}\n";
  }
  try {
    read_dataset(path);
    FAIL("expected parse failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("read_dataset rejects duplicate question ids") {
  const WorldSpec world = default_world();
  auto records = gen_dataset(world, make_mode_swap_shift(world, 0.0), 2, 1, 9).first;
  records[1].annotation.question_id = records[0].annotation.question_id;
  const std::string path = "test_tmp_dupids.jsonl";
  write_dataset(records, path);
  CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("duplicate"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("degenerate priors are rejected") {
  const WorldSpec world = default_world();
  PriorShiftConfig cfg = make_mode_swap_shift(world, 0.5);
  for (double& v : cfg.train_priors[0]) v = 0.0;
  CHECK_THROWS_WITH_AS(gen_dataset(world, cfg, 10, 10, 1), doctest::Contains("degenerate"),
                       std::runtime_error);
}

TEST_CASE("category structure shows up as clusters in both semantic spaces") {
  const WorldSpec world = default_world();
  const PriorShiftConfig shift = make_mode_swap_shift(world, 0.8);
  const auto records = gen_dataset(world, shift, 1500, 1, 29).first;

  std::vector<AnnotationRecord> annotations;
  for (const SynthRecord& r : records) annotations.push_back(r.annotation);
  const AnswerSpace dict = build_answer_space(annotations, 2);
  const SemanticSpace cooc = build_cooc_space(count_cooc(annotations, dict), dict);
  const SemanticSpace wordvec =
      build_wordvec_space(dict, gen_category_lexicon(world, 32, 0.25, 99)).space;

  for (const SemanticSpace* sp : {&cooc, &wordvec}) {
    double within = 0.0, cross = 0.0;
    int n_within = 0, n_cross = 0;
    for (int i = 0; i < dict.n_classes(); ++i) {
      for (int j = i + 1; j < dict.n_classes(); ++j) {
        const auto ci = world.find_answer(dict.answer(i));
        const auto cj = world.find_answer(dict.answer(j));
        REQUIRE(ci.has_value());
        REQUIRE(cj.has_value());
        const double cos = cosine(sp->row(i), sp->row(j), kDefaultCosineEps);
        if (ci->first == cj->first) {
          within += cos;
          ++n_within;
        } else {
          cross += cos;
          ++n_cross;
        }
      }
    }
    REQUIRE(n_within > 0);
    REQUIRE(n_cross > 0);
    CHECK(within / n_within > cross / n_cross);
  }

  // cross-category pairs never co-occur, so their cooc scores vanish
  for (int i = 0; i < dict.n_classes(); ++i) {
    for (int j = 0; j < dict.n_classes(); ++j) {
      const auto ci = world.find_answer(dict.answer(i));
      const auto cj = world.find_answer(dict.answer(j));
      if (ci->first != cj->first) CHECK(cooc.vectors.at(i, j) == 0.0);
    }
  }
}

TEST_CASE("the synthetic lexicon covers every answer token of the world") {
  const WorldSpec world = default_world();
  const WordVectorLexicon lex = gen_category_lexicon(world, 16, 0.25, 5);
  CHECK(lex.dim == 16);
  for (const Category& cat : world.categories) {
    for (const std::string& answer : cat.answers) {
      std::istringstream ts(answer);
      std::string token;
      while (ts >> token) CHECK(lex.contains(token));
    }
  }
}
