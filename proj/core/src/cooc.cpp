#include "vqasem/cooc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vqasem {

void CoocStats::validate() const {
  const int n = n_classes();
  if (cooc.size() != static_cast<std::size_t>(n) * n) {
    throw std::runtime_error("cooc stats: matrix size != n_classes^2");
  }
  for (int i = 0; i < n; ++i) {
    if (occ[i] < 0 || occ[i] > n_questions) {
      throw std::runtime_error("cooc stats: occ out of [0, n_questions] at class " +
                               std::to_string(i));
    }
    if (cooc_at(i, i) != occ[i]) {
      throw std::runtime_error("cooc stats: diagonal != occ at class " + std::to_string(i));
    }
    for (int j = 0; j < n; ++j) {
      if (cooc_at(i, j) != cooc_at(j, i)) {
        throw std::runtime_error("cooc stats: matrix not symmetric");
      }
      if (cooc_at(i, j) > std::min(occ[i], occ[j])) {
        throw std::runtime_error("cooc stats: pair count exceeds occurrence count");
      }
    }
  }
}

CoocStats count_cooc(const std::vector<AnnotationRecord>& records, const AnswerSpace& space) {
  const int n = space.n_classes();
  CoocStats stats;
  stats.occ.assign(n, 0);
  stats.cooc.assign(static_cast<std::size_t>(n) * n, 0);
  stats.n_questions = static_cast<std::int64_t>(records.size());

  std::vector<int> ids;
  for (const AnnotationRecord& rec : records) {
    ids.clear();
    for (const std::string& raw : rec.annotator_answers) {
      if (const auto id = space.class_of(raw)) ids.push_back(*id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int i : ids) {
      ++stats.occ[i];
      for (int j : ids) ++stats.cooc[static_cast<std::size_t>(i) * n + j];
    }
  }
  return stats;
}

SemanticSpace build_cooc_space(const CoocStats& stats, const AnswerSpace& space) {
  const int n = stats.n_classes();
  if (n != space.n_classes()) {
    throw std::runtime_error("build_cooc_space: stats cover " + std::to_string(n) +
                             " classes but dictionary has " + std::to_string(space.n_classes()));
  }
  stats.validate();
  std::vector<double> log_occ(n);
  for (int i = 0; i < n; ++i) {
    if (stats.occ[i] <= 0) {
      throw std::runtime_error("build_cooc_space: answer '" + space.answer(i) +
                               "' (class " + std::to_string(i) + ") never occurs in the corpus");
    }
    log_occ[i] = std::log1p(static_cast<double>(stats.occ[i]));
  }

  SemanticSpace out;
  out.kind = SpaceKind::cooc;
  out.dim = n;
  out.answers = space.answers();
  out.vectors = Tensor2(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::int64_t c = stats.cooc_at(i, j);
      out.vectors.at(i, j) =
          c == 0 ? 0.0 : std::log1p(static_cast<double>(c)) / (log_occ[i] * log_occ[j]);
    }
  }
  out.validate();
  return out;
}

}  // namespace vqasem
