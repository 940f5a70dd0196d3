#include "vqasem/answer_space.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vqasem {

std::string normalize_answer(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

AnswerSpace AnswerSpace::from_answers(std::vector<std::string> answers) {
  if (answers.size() < 2) {
    throw std::runtime_error("answer dictionary needs at least 2 classes, got " +
                             std::to_string(answers.size()));
  }
  AnswerSpace space;
  space.answers_ = std::move(answers);
  space.index_.reserve(space.answers_.size());
  for (std::size_t i = 0; i < space.answers_.size(); ++i) {
    const std::string& a = space.answers_[i];
    if (a.empty()) throw std::runtime_error("empty answer string at class id " + std::to_string(i));
    if (a != normalize_answer(a)) {
      throw std::runtime_error("answer not normalized: '" + a + "'");
    }
    if (!space.index_.emplace(a, static_cast<int>(i)).second) {
      throw std::runtime_error("duplicate answer string: '" + a + "'");
    }
  }
  return space;
}

const std::string& AnswerSpace::answer(int class_id) const {
  if (class_id < 0 || class_id >= n_classes()) {
    throw std::out_of_range("class id " + std::to_string(class_id) + " out of range [0, " +
                            std::to_string(n_classes()) + ")");
  }
  return answers_[class_id];
}

std::optional<int> AnswerSpace::class_of(std::string_view raw_answer) const {
  const auto it = index_.find(normalize_answer(raw_answer));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

AnswerSpace build_answer_space(const std::vector<AnnotationRecord>& records, int min_count) {
  if (records.empty()) throw std::runtime_error("cannot build answer dictionary from zero records");
  if (min_count < 1) throw std::invalid_argument("min_count must be positive");

  std::unordered_map<std::string, std::int64_t> record_freq;
  for (const AnnotationRecord& rec : records) {
    std::set<std::string> distinct;
    for (const std::string& raw : rec.annotator_answers) {
      std::string norm = normalize_answer(raw);
      if (!norm.empty()) distinct.insert(std::move(norm));
    }
    for (const std::string& a : distinct) ++record_freq[a];
  }

  std::vector<std::pair<std::int64_t, std::string>> kept;
  for (const auto& [answer, count] : record_freq) {
    if (count >= min_count) kept.emplace_back(count, answer);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  if (kept.size() < 2) {
    throw std::runtime_error("answer dictionary construction failed: only " +
                             std::to_string(kept.size()) + " answers reach min_count=" +
                             std::to_string(min_count));
  }

  std::vector<std::string> answers;
  answers.reserve(kept.size());
  for (auto& [count, answer] : kept) answers.push_back(std::move(answer));
  return AnswerSpace::from_answers(std::move(answers));
}

SoftTarget soft_targets(const AnnotationRecord& record, const AnswerSpace& space) {
  SoftTarget target;
  target.values.assign(space.n_classes(), 0.0);
  std::vector<int> votes(space.n_classes(), 0);
  for (const std::string& raw : record.annotator_answers) {
    if (const auto id = space.class_of(raw)) ++votes[*id];
  }
  for (int i = 0; i < space.n_classes(); ++i) {
    target.values[i] = std::min(votes[i] / 3.0, 1.0);
  }
  return target;
}

SoftTarget one_hot(int class_id, const AnswerSpace& space) {
  if (class_id < 0 || class_id >= space.n_classes()) {
    throw std::out_of_range("one_hot: class id " + std::to_string(class_id) +
                            " out of range [0, " + std::to_string(space.n_classes()) + ")");
  }
  SoftTarget target;
  target.values.assign(space.n_classes(), 0.0);
  target.values[class_id] = 1.0;
  return target;
}

void export_dictionary(const AnswerSpace& space, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const std::string& a : space.answers()) out << a << '\n';
  if (!out) throw std::runtime_error("write failed: '" + path + "'");
}

AnswerSpace load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dictionary file '" + path + "'");
  std::vector<std::string> answers;
  std::string line;
  while (std::getline(in, line)) answers.push_back(line);
  while (!answers.empty() && answers.back().empty()) answers.pop_back();
  return AnswerSpace::from_answers(std::move(answers));
}

namespace {

using nlohmann::json;

AnnotationRecord record_from_json(const json& j, const std::string& path, std::size_t line_no) {
  const auto fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
  };
  AnnotationRecord rec;
  try {
    rec.question_id = j.at("question_id").get<std::string>();
    const std::string question = j.at("question").get<std::string>();
    std::istringstream qs(question);
    std::string tok;
    while (qs >> tok) rec.question_tokens.push_back(tok);

    const json& scene = j.at("scene");
    if (scene.is_string()) {
      rec.scene.id = scene.get<std::string>();
    } else if (scene.is_array()) {
      rec.scene.features = scene.get<std::vector<double>>();
    } else {
      throw fail("field 'scene' must be a string id or a numeric array");
    }

    rec.annotator_answers = j.at("answers").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  if (rec.annotator_answers.size() != kAnnotatorsPerQuestion) {
    throw fail("expected " + std::to_string(kAnnotatorsPerQuestion) + " answers, got " +
               std::to_string(rec.annotator_answers.size()));
  }
  for (const std::string& a : rec.annotator_answers) {
    if (a.empty()) throw fail("empty annotator answer");
  }
  return rec;
}

}  // namespace

std::vector<AnnotationRecord> read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotation file '" + path + "'");
  std::vector<AnnotationRecord> records;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    AnnotationRecord rec = record_from_json(j, path, line_no);
    if (!seen_ids.insert(rec.question_id).second) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate question_id '" +
                               rec.question_id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_annotations(const std::vector<AnnotationRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const AnnotationRecord& rec : records) {
    nlohmann::ordered_json j;
    j["question_id"] = rec.question_id;
    std::string question;
    for (std::size_t i = 0; i < rec.question_tokens.size(); ++i) {
      if (i > 0) question += ' ';
      question += rec.question_tokens[i];
    }
    j["question"] = question;
    if (rec.scene.has_inline_features()) {
      j["scene"] = rec.scene.features;
    } else {
      j["scene"] = rec.scene.id;
    }
    j["answers"] = rec.annotator_answers;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: '" + path + "'");
}

}  // namespace vqasem
