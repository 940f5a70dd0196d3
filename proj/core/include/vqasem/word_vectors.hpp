#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "vqasem/answer_space.hpp"
#include "vqasem/semantic_space.hpp"

namespace vqasem {

struct WordVectorLexicon {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  bool contains(const std::string& token) const { return vectors.count(token) > 0; }
};

// Text format: one "token v1 ... vd" line per entry, whitespace separated.
// Dimensions must agree across lines; a duplicated token keeps its last
// vector. Parse failures report the offending line number.
WordVectorLexicon load_word_vectors(const std::string& path);

struct WordvecBuild {
  SemanticSpace space;
  std::vector<int> uncovered_classes;  // zero rows: no answer token found in the lexicon
};

// Row i = unweighted mean of the lexicon vectors of answer i's tokens.
// Tokens missing from the lexicon are skipped; answers with no covered token
// get a zero row and are reported in uncovered_classes.
WordvecBuild build_wordvec_space(const AnswerSpace& space, const WordVectorLexicon& lexicon);

}  // namespace vqasem
