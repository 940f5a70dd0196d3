#include "vqasem/semantic_space.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "vqasem/loss.hpp"

namespace vqasem {

std::string space_kind_name(SpaceKind kind) {
  return kind == SpaceKind::cooc ? "cooc" : "wordvec";
}

SpaceKind space_kind_from_name(const std::string& name) {
  if (name == "cooc") return SpaceKind::cooc;
  if (name == "wordvec") return SpaceKind::wordvec;
  throw std::invalid_argument("unknown space kind '" + name + "' (expected cooc or wordvec)");
}

void SemanticSpace::validate() const {
  if (vectors.rows != static_cast<int>(answers.size())) {
    throw std::runtime_error("semantic space: row count " + std::to_string(vectors.rows) +
                             " != answer count " + std::to_string(answers.size()));
  }
  if (vectors.cols != dim) throw std::runtime_error("semantic space: dim mismatch");
  if (!all_finite(vectors.data)) throw std::runtime_error("semantic space: non-finite entry");
  if (kind == SpaceKind::cooc) {
    if (dim != vectors.rows) throw std::runtime_error("cooc space must be square");
    for (double v : vectors.data) {
      if (v < 0.0) throw std::runtime_error("cooc space entries must be nonnegative");
    }
  }
}

void export_space(const SemanticSpace& space, const std::string& path) {
  space.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  char buf[40];
  for (int i = 0; i < space.n_classes(); ++i) {
    out << space.answers[i];
    for (double v : space.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: '" + path + "'");
}

SemanticSpace import_space(const std::string& path, std::optional<SpaceKind> kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open space file '" + path + "'");

  std::vector<std::string> answers;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fail = [&](const std::string& what) -> std::runtime_error {
      return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
    };
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw fail("expected tab-separated answer and values");
    answers.push_back(line.substr(0, tab));
    std::vector<double> values;
    std::size_t pos = tab + 1;
    while (pos <= line.size()) {
      std::size_t next = line.find('\t', pos);
      const std::size_t end = (next == std::string::npos) ? line.size() : next;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + end, v);
      if (ec != std::errc() || ptr != line.data() + end) {
        throw fail("unparsable value '" + line.substr(pos, end - pos) + "'");
      }
      values.push_back(v);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (dim < 0) {
      dim = static_cast<int>(values.size());
      if (dim == 0) throw fail("row has no values");
    } else if (static_cast<int>(values.size()) != dim) {
      throw fail("row width " + std::to_string(values.size()) + " != " + std::to_string(dim));
    }
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) throw std::runtime_error(path + ": fewer than 2 rows");

  SemanticSpace space;
  space.dim = dim;
  space.answers = std::move(answers);
  space.vectors = Tensor2(static_cast<int>(rows.size()), dim);
  for (int i = 0; i < space.vectors.rows; ++i) {
    std::copy(rows[i].begin(), rows[i].end(), space.vectors.row(i).begin());
  }
  if (kind) {
    space.kind = *kind;
  } else {
    const bool square = space.vectors.rows == dim;
    const bool nonneg =
        std::all_of(space.vectors.data.begin(), space.vectors.data.end(), [](double v) { return v >= 0.0; });
    space.kind = (square && nonneg) ? SpaceKind::cooc : SpaceKind::wordvec;
  }
  space.validate();
  return space;
}

std::vector<std::pair<int, double>> nearest_classes(const SemanticSpace& space, int class_id,
                                                    int top_n) {
  if (class_id < 0 || class_id >= space.n_classes()) {
    throw std::out_of_range("nearest_classes: class id out of range");
  }
  if (top_n < 1) throw std::invalid_argument("nearest_classes: top_n must be positive");
  std::vector<std::pair<int, double>> sims;
  sims.reserve(space.n_classes() - 1);
  const auto query = space.row(class_id);
  for (int j = 0; j < space.n_classes(); ++j) {
    if (j == class_id) continue;
    sims.emplace_back(j, cosine(query, space.row(j), kDefaultCosineEps));
  }
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(sims.size()) > top_n) sims.resize(top_n);
  return sims;
}

}  // namespace vqasem
