#include "vqasem/word_vectors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vqasem {

WordVectorLexicon load_word_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word-vector file '" + path + "'");

  WordVectorLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (ls >> field) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unparsable value '" +
                                 field + "'");
      }
      values.push_back(v);
    }
    if (values.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": token '" + token +
                               "' has no values");
    }
    if (lexicon.dim == 0) {
      lexicon.dim = static_cast<int>(values.size());
    } else if (static_cast<int>(values.size()) != lexicon.dim) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": dimension " +
                               std::to_string(values.size()) + " != " +
                               std::to_string(lexicon.dim));
    }
    lexicon.vectors[token] = std::move(values);  // last occurrence wins
  }
  if (lexicon.vectors.empty()) throw std::runtime_error(path + ": no word vectors found");
  return lexicon;
}

WordvecBuild build_wordvec_space(const AnswerSpace& space, const WordVectorLexicon& lexicon) {
  if (lexicon.dim < 1) throw std::invalid_argument("build_wordvec_space: empty lexicon");

  WordvecBuild out;
  out.space.kind = SpaceKind::wordvec;
  out.space.dim = lexicon.dim;
  out.space.answers = space.answers();
  out.space.vectors = Tensor2(space.n_classes(), lexicon.dim);

  for (int i = 0; i < space.n_classes(); ++i) {
    std::istringstream ts(space.answer(i));
    std::string token;
    int covered = 0;
    auto row = out.space.vectors.row(i);
    while (ts >> token) {
      const auto it = lexicon.vectors.find(token);
      if (it == lexicon.vectors.end()) continue;
      ++covered;
      for (int d = 0; d < lexicon.dim; ++d) row[d] += it->second[d];
    }
    if (covered == 0) {
      out.uncovered_classes.push_back(i);
    } else {
      for (int d = 0; d < lexicon.dim; ++d) row[d] /= covered;
    }
  }
  out.space.validate();
  return out;
}

}  // namespace vqasem
