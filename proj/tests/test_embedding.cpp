#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vqasem/cooc.hpp"
#include "vqasem/loss.hpp"
#include "vqasem/rng.hpp"
#include "vqasem/word_vectors.hpp"

using namespace vqasem;

namespace {

AnnotationRecord rec(const std::string& id, std::vector<std::string> answers) {
  AnnotationRecord r;
  r.question_id = id;
  r.question_tokens = {"q"};
  r.scene.id = "s";
  while (answers.size() < kAnnotatorsPerQuestion) answers.push_back(answers.front());
  r.annotator_answers = std::move(answers);
  return r;
}

// The worked 4-record corpus: distinct answer sets
// {dog,puppy}, {dog,puppy}, {dog}, {cat}.
std::vector<AnnotationRecord> four_record_corpus() {
  return {rec("1", {"dog", "puppy", "dog", "puppy", "dog"}),
          rec("2", {"puppy", "dog"}),
          rec("3", {"dog"}),
          rec("4", {"cat"})};
}

// Reference counter: a plain double loop over (record, answer pair).
CoocStats brute_force_cooc(const std::vector<AnnotationRecord>& records,
                           const AnswerSpace& space) {
  const int n = space.n_classes();
  CoocStats stats;
  stats.occ.assign(n, 0);
  stats.cooc.assign(static_cast<std::size_t>(n) * n, 0);
  stats.n_questions = static_cast<std::int64_t>(records.size());
  for (const AnnotationRecord& r : records) {
    std::vector<bool> present(n, false);
    for (const std::string& a : r.annotator_answers) {
      if (const auto id = space.class_of(a)) present[*id] = true;
    }
    for (int i = 0; i < n; ++i) {
      if (present[i]) ++stats.occ[i];
      for (int j = 0; j < n; ++j) {
        if (present[i] && present[j]) ++stats.cooc[static_cast<std::size_t>(i) * n + j];
      }
    }
  }
  return stats;
}

}  // namespace

TEST_CASE("count_cooc matches the hand count on the 4-record corpus") {
  const auto records = four_record_corpus();
  const AnswerSpace space = build_answer_space(records, 1);
  const int dog = *space.class_of("dog");
  const int puppy = *space.class_of("puppy");
  const int cat = *space.class_of("cat");

  const CoocStats stats = count_cooc(records, space);
  CHECK(stats.n_questions == 4);
  CHECK(stats.occ[dog] == 3);
  CHECK(stats.occ[puppy] == 2);
  CHECK(stats.occ[cat] == 1);
  CHECK(stats.cooc_at(dog, puppy) == 2);
  CHECK(stats.cooc_at(puppy, dog) == 2);
  CHECK(stats.cooc_at(dog, cat) == 0);
  CHECK(stats.cooc_at(dog, dog) == stats.occ[dog]);
}

TEST_CASE("count_cooc on an empty stream yields all-zero counts") {
  const AnswerSpace space = AnswerSpace::from_answers({"a", "b"});
  const CoocStats stats = count_cooc({}, space);
  CHECK(stats.n_questions == 0);
  for (auto v : stats.occ) CHECK(v == 0);
  for (auto v : stats.cooc) CHECK(v == 0);
}

TEST_CASE("a unanimous record increments occ but no off-diagonal pair") {
  const AnswerSpace space = AnswerSpace::from_answers({"a", "b"});
  const CoocStats stats = count_cooc({rec("1", {"a"})}, space);
  CHECK(stats.occ[0] == 1);
  CHECK(stats.cooc_at(0, 0) == 1);
  CHECK(stats.cooc_at(0, 1) == 0);
}

TEST_CASE("count_cooc equals the brute-force double loop on a random corpus") {
  const AnswerSpace space =
      AnswerSpace::from_answers({"a", "b", "c", "d", "e", "f", "g", "h"});
  Rng rng(17);
  std::vector<AnnotationRecord> records;
  for (int i = 0; i < 700; ++i) {
    std::vector<std::string> answers;
    for (int a = 0; a < kAnnotatorsPerQuestion; ++a) {
      answers.push_back(space.answer(static_cast<int>(rng.below(space.n_classes()))));
    }
    records.push_back(rec("q" + std::to_string(i), answers));
  }
  const CoocStats fast = count_cooc(records, space);
  const CoocStats slow = brute_force_cooc(records, space);
  CHECK(fast.occ == slow.occ);
  CHECK(fast.cooc == slow.cooc);
  CHECK(fast.n_questions == slow.n_questions);
}

TEST_CASE("build_cooc_space reproduces the worked normalization value") {
  const auto records = four_record_corpus();
  const AnswerSpace space = build_answer_space(records, 1);
  const SemanticSpace cooc = build_cooc_space(count_cooc(records, space), space);

  const int dog = *space.class_of("dog");
  const int puppy = *space.class_of("puppy");
  const int cat = *space.class_of("cat");

  // c(dog,puppy) = ln(1+2) / (ln(1+3) ln(1+2)) = 1/ln 4
  CHECK(cooc.vectors.at(dog, puppy) == doctest::Approx(1.0 / std::log(4.0)).epsilon(1e-12));
  CHECK(cooc.vectors.at(dog, puppy) == doctest::Approx(0.7213475).epsilon(1e-6));
  CHECK(cooc.vectors.at(dog, cat) == 0.0);   // never co-occur
  CHECK(cooc.kind == SpaceKind::cooc);
  CHECK(cooc.dim == space.n_classes());

  const CoocStats stats = count_cooc(records, space);
  for (int i = 0; i < cooc.n_classes(); ++i) {
    for (int j = 0; j < cooc.n_classes(); ++j) {
      CHECK(cooc.vectors.at(i, j) == cooc.vectors.at(j, i));  // bitwise symmetric
      CHECK(cooc.vectors.at(i, j) >= 0.0);
      CHECK(std::isfinite(cooc.vectors.at(i, j)));
      // zero iff the pair never co-occurs
      CHECK((cooc.vectors.at(i, j) == 0.0) == (stats.cooc_at(i, j) == 0));
    }
  }
}

TEST_CASE("build_cooc_space rejects a dictionary answer with zero occurrences") {
  const AnswerSpace space = AnswerSpace::from_answers({"a", "b", "ghost"});
  const CoocStats stats = count_cooc({rec("1", {"a", "b"})}, space);
  CHECK_THROWS_WITH_AS(build_cooc_space(stats, space),
                       doctest::Contains("ghost"), std::runtime_error);
}

TEST_CASE("build_cooc_space rejects inconsistent hand-made stats") {
  const AnswerSpace space = AnswerSpace::from_answers({"a", "b"});
  CoocStats stats = count_cooc({rec("1", {"a", "b"}), rec("2", {"a"})}, space);
  stats.validate();

  CoocStats asym = stats;
  asym.cooc[1] += 1;  // break symmetry
  CHECK_THROWS_WITH_AS(build_cooc_space(asym, space), doctest::Contains("symmetric"),
                       std::runtime_error);

  CoocStats too_big = stats;
  too_big.cooc[1] = too_big.cooc[2] = 5;  // pair count above occ
  CHECK_THROWS_AS(build_cooc_space(too_big, space), std::runtime_error);
}

TEST_CASE("load_word_vectors parses, validates dimensions, keeps the last duplicate") {
  const std::string path = "test_tmp_vectors.txt";
  {
    std::ofstream out(path);
    out << "red 1.0 0.0 0.0 0.5\n";
    out << "blue 0.0 1.0 0.0 0.25\n";
    out << "red 9.0 8.0 7.0 6.0\n";
  }
  const WordVectorLexicon lex = load_word_vectors(path);
  CHECK(lex.dim == 4);
  CHECK(lex.vectors.size() == 2);
  CHECK(lex.vectors.at("red") == std::vector<double>{9.0, 8.0, 7.0, 6.0});

  {
    std::ofstream out(path);
    out << "red 1.0 2.0\n";
    out << "blue 1.0\n";
  }
  try {
    load_word_vectors(path);
    FAIL("expected dimension error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << "red 1.0 oops\n";
  }
  CHECK_THROWS_AS(load_word_vectors(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("build_wordvec_space averages tokens and flags uncovered answers") {
  const AnswerSpace space = AnswerSpace::from_answers({"palm tree", "red", "qqqq"});
  WordVectorLexicon lex;
  lex.dim = 2;
  lex.vectors["palm"] = {1.0, 3.0};
  lex.vectors["tree"] = {3.0, 5.0};
  lex.vectors["red"] = {-1.0, 0.5};

  const WordvecBuild built = build_wordvec_space(space, lex);
  CHECK(built.space.kind == SpaceKind::wordvec);
  CHECK(built.space.dim == 2);

  const int palm_tree = *space.class_of("palm tree");
  const int red = *space.class_of("red");
  const int qqqq = *space.class_of("qqqq");
  CHECK(built.space.vectors.at(palm_tree, 0) == 2.0);  // (1+3)/2
  CHECK(built.space.vectors.at(palm_tree, 1) == 4.0);  // (3+5)/2
  CHECK(built.space.vectors.at(red, 0) == -1.0);       // single token kept exactly
  CHECK(built.space.vectors.at(red, 1) == 0.5);
  CHECK(built.space.vectors.at(qqqq, 0) == 0.0);
  CHECK(built.uncovered_classes == std::vector<int>{qqqq});
}

TEST_CASE("single-token answers preserve lexicon cosine similarities") {
  const AnswerSpace space = AnswerSpace::from_answers({"cat", "dog"});
  WordVectorLexicon lex;
  lex.dim = 3;
  lex.vectors["cat"] = {0.3, -0.7, 1.1};
  lex.vectors["dog"] = {0.25, -0.5, 0.9};
  const SemanticSpace sp = build_wordvec_space(space, lex).space;
  const double direct = cosine(lex.vectors["cat"], lex.vectors["dog"], kDefaultCosineEps);
  const double through = cosine(sp.row(0), sp.row(1), kDefaultCosineEps);
  CHECK(through == direct);
}

TEST_CASE("export/import round trip is exact") {
  const auto records = four_record_corpus();
  const AnswerSpace space = build_answer_space(records, 1);
  const SemanticSpace cooc = build_cooc_space(count_cooc(records, space), space);

  const std::string path = "test_tmp_space.tsv";
  export_space(cooc, path);

  // Row structure: N_c lines, each 1 + N_c tab-separated fields.
  {
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
      ++lines;
      int fields = 1;
      for (char c : line) {
        if (c == '\t') ++fields;
      }
      CHECK(fields == 1 + space.n_classes());
    }
    CHECK(lines == space.n_classes());
  }

  const SemanticSpace back = import_space(path);
  CHECK(back.kind == SpaceKind::cooc);  // inferred: square and nonnegative
  CHECK(back.answers == cooc.answers);
  REQUIRE(back.vectors.data.size() == cooc.vectors.data.size());
  for (std::size_t i = 0; i < back.vectors.data.size(); ++i) {
    CHECK(std::abs(back.vectors.data[i] - cooc.vectors.data[i]) <= 1e-9);
    CHECK(back.vectors.data[i] == cooc.vectors.data[i]);  // %.17g round-trips doubles
  }
  std::remove(path.c_str());
}

TEST_CASE("nearest_classes ranks by cosine with deterministic ties") {
  SemanticSpace sp;
  sp.kind = SpaceKind::wordvec;
  sp.dim = 2;
  sp.answers = {"a", "b", "c", "d"};
  sp.vectors = Tensor2(4, 2);
  sp.vectors.at(0, 0) = 1.0;                            // query
  sp.vectors.at(1, 0) = 2.0;                            // colinear, cos=1
  sp.vectors.at(2, 0) = 1.0; sp.vectors.at(2, 1) = 1.0; // cos=1/sqrt(2)
  sp.vectors.at(3, 1) = 1.0;                            // orthogonal

  const auto nn = nearest_classes(sp, 0, 2);
  REQUIRE(nn.size() == 2);
  CHECK(nn[0].first == 1);
  CHECK(nn[0].second == doctest::Approx(1.0));
  CHECK(nn[1].first == 2);
  CHECK(nn[1].second == doctest::Approx(1.0 / std::sqrt(2.0)));
}
