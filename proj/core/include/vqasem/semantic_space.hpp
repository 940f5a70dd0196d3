#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vqasem/tensor.hpp"

namespace vqasem {

enum class SpaceKind { cooc, wordvec };

std::string space_kind_name(SpaceKind kind);
SpaceKind space_kind_from_name(const std::string& name);

// Per-class embedding matrix; row i maps class i into the semantic space.
// Immutable after build and safe to share across threads.
struct SemanticSpace {
  SpaceKind kind = SpaceKind::wordvec;
  int dim = 0;
  std::vector<std::string> answers;  // row labels, class order
  Tensor2 vectors;                   // n_classes x dim

  int n_classes() const { return vectors.rows; }
  std::span<const double> row(int class_id) const { return vectors.row(class_id); }

  void validate() const;  // shape, finiteness, cooc nonnegativity
};

// Tab-separated export: answer string then dim values per line, printed with
// enough digits that re-importing reproduces each value bit-exactly.
void export_space(const SemanticSpace& space, const std::string& path);

// Reads the export format back. When kind is not given it is inferred:
// square nonnegative matrices are treated as cooc, anything else as wordvec.
SemanticSpace import_space(const std::string& path, std::optional<SpaceKind> kind = std::nullopt);

// Classes nearest to class_id by cosine similarity, excluding class_id
// itself, sorted by descending similarity with index ties going lower-first.
std::vector<std::pair<int, double>> nearest_classes(const SemanticSpace& space, int class_id,
                                                    int top_n);

}  // namespace vqasem
