#pragma once

#include <cstdint>
#include <vector>

#include "vqasem/answer_space.hpp"
#include "vqasem/semantic_space.hpp"

namespace vqasem {

// Occurrence and co-occurrence counts over question instances. A record
// contributes at most 1 to any count: only the set of distinct in-dictionary
// answers among its annotators matters.
struct CoocStats {
  std::vector<std::int64_t> occ;   // occ[i] = #records where answer i occurs
  std::vector<std::int64_t> cooc;  // n x n row-major; cooc[i][j] = #records with both i and j
  std::int64_t n_questions = 0;

  int n_classes() const { return static_cast<int>(occ.size()); }
  std::int64_t cooc_at(int i, int j) const {
    return cooc[static_cast<std::size_t>(i) * occ.size() + j];
  }

  // Symmetry, cooc[i][j] <= min(occ[i], occ[j]), diagonal == occ,
  // occ[i] <= n_questions.
  void validate() const;
};

CoocStats count_cooc(const std::vector<AnnotationRecord>& records, const AnswerSpace& space);

// Normalized log co-occurrence scores with L(x) = ln(1 + x):
//   c_ij = L(cooc[i][j]) / (L(occ[i]) * L(occ[j]))
// The +1 smoothing keeps singleton answers well-defined; c_ij = 0 exactly
// when i and j never co-occur. Throws when some dictionary answer has
// occ = 0 (dictionary/stat mismatch).
SemanticSpace build_cooc_space(const CoocStats& stats, const AnswerSpace& space);

}  // namespace vqasem
