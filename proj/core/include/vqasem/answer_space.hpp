#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vqasem {

// Number of independent annotations per question.
inline constexpr int kAnnotatorsPerQuestion = 10;

// A scene is either referenced by id or carries its feature vector inline.
struct SceneRef {
  std::string id;
  std::vector<double> features;

  bool has_inline_features() const { return !features.empty(); }
};

struct AnnotationRecord {
  std::string question_id;
  std::vector<std::string> question_tokens;
  SceneRef scene;
  std::vector<std::string> annotator_answers;  // exactly kAnnotatorsPerQuestion entries
};

// Per-class ground truth probabilities in [0, 1].
struct SoftTarget {
  std::vector<double> values;
};

// Lowercase, trim, collapse internal whitespace runs. No stemming: "girl"
// and "girls" stay distinct classes.
std::string normalize_answer(std::string_view raw);

// Ordered answer dictionary; class ids are dense 0..n_classes()-1.
// Immutable after construction and safe to share across threads.
class AnswerSpace {
 public:
  // Validates: >= 2 answers, all normalized, non-empty, no duplicates.
  static AnswerSpace from_answers(std::vector<std::string> answers);

  int n_classes() const { return static_cast<int>(answers_.size()); }
  const std::vector<std::string>& answers() const { return answers_; }
  const std::string& answer(int class_id) const;

  // Normalizes the query before lookup; nullopt when out of dictionary.
  std::optional<int> class_of(std::string_view raw_answer) const;

 private:
  AnswerSpace() = default;
  std::vector<std::string> answers_;
  std::unordered_map<std::string, int> index_;
};

// Dictionary of all answers given in >= min_count records, ordered by
// descending record frequency, ties broken lexicographically. An answer is
// counted once per record no matter how many annotators gave it.
// Throws when fewer than 2 answers survive the threshold.
AnswerSpace build_answer_space(const std::vector<AnnotationRecord>& records, int min_count);

// values[i] = min(m_i / 3, 1) where m_i annotators gave answer i.
// Out-of-dictionary answers contribute nothing; an all-zero target is legal.
SoftTarget soft_targets(const AnnotationRecord& record, const AnswerSpace& space);

// Throws std::out_of_range for an invalid class id.
SoftTarget one_hot(int class_id, const AnswerSpace& space);

// Plain-text dictionary: one answer per line, line number = class id.
void export_dictionary(const AnswerSpace& space, const std::string& path);
AnswerSpace load_dictionary(const std::string& path);

// Line-delimited annotation records, one JSON object per line with fields
// question_id, question (whitespace-tokenized), scene (string id or numeric
// array), answers. Unknown fields are ignored on read.
std::vector<AnnotationRecord> read_annotations(const std::string& path);
void write_annotations(const std::vector<AnnotationRecord>& records, const std::string& path);

}  // namespace vqasem
