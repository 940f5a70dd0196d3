#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vqasem/answer_space.hpp"
#include "vqasem/rng.hpp"
#include "vqasem/tensor.hpp"
#include "vqasem/word_vectors.hpp"

namespace vqasem {

struct Category {
  std::string name;
  std::string keyword;  // appended to every question of this category
  std::vector<std::string> answers;
};

struct QuestionTemplate {
  std::string id;
  std::vector<std::string> tokens;
  int category = 0;  // index into WorldSpec::categories
};

// Synthetic world: category-structured answers, question templates, image
// feature generator, and the annotator model.
struct WorldSpec {
  std::vector<Category> categories;
  std::vector<QuestionTemplate> templates;
  int feature_dim = 16;
  double prototype_scale = 0.25;  // per-answer prototype magnitude
  double feature_noise = 0.5;     // sigma of the additive Gaussian noise
  double annotator_noise = 0.36;  // rho: per-annotator substitution probability
  std::uint64_t prototype_seed = 7;
  // Optional per-category substitution distributions, rows = truth member,
  // zero diagonal. Empty = uniform over the other members.
  std::vector<Tensor2> confusion;

  void validate() const;
  int answer_count() const;
  // (category index, member index) of an answer string; nullopt if unknown.
  std::optional<std::pair<int, int>> find_answer(const std::string& answer) const;
};

// Fig-style default: 4 categories of 10/9/4/4 answers, 2 templates each.
// Annotators substitute mostly to ring neighbors, giving the category an
// internal proximity structure.
WorldSpec default_world();

// Members sit on a ring; substitution probability falls geometrically with
// ring distance, weight decay^(d-1) at distance d.
Tensor2 ring_confusion_kernel(int members, double decay = 0.25);

WorldSpec parse_world_json(const std::string& json_text);
std::string world_to_json(const WorldSpec& world);
WorldSpec load_world(const std::string& path);
void save_world(const WorldSpec& world, const std::string& path);

// Per-template answer distributions for the two splits. The test prior is a
// mode-swapped copy of the train prior, linearly interpolated by shift
// strength s, so the total-variation distance between the splits grows
// monotonically with s.
struct PriorShiftConfig {
  std::vector<std::vector<double>> train_priors;  // one per template, over its category members
  std::vector<std::vector<double>> test_priors;
  double shift = 0.8;

  void validate(const WorldSpec& world) const;
};

PriorShiftConfig make_mode_swap_shift(const WorldSpec& world, double s, double mode_mass = 0.5);

struct LatentTruth {
  std::string template_id;
  std::string true_answer;
  std::vector<double> attributes;  // noiseless feature vector of the true answer
};

struct SynthRecord {
  AnnotationRecord annotation;
  LatentTruth latent;
};

// Ten annotators: each answers the truth with probability 1 - annotator_noise,
// otherwise a same-category substitute drawn from the confusion kernel.
// Cross-category answers never occur.
std::vector<std::string> simulate_annotators(int category, int member, const WorldSpec& world,
                                             Rng& rng);
std::vector<std::string> simulate_annotators(const std::string& true_answer,
                                             const WorldSpec& world, std::uint64_t seed);

// Deterministic under seed; image features carry the true answer's prototype
// plus Gaussian noise, so only the priors differ between splits.
std::pair<std::vector<SynthRecord>, std::vector<SynthRecord>> gen_dataset(
    const WorldSpec& world, const PriorShiftConfig& shift, int n_train, int n_test,
    std::uint64_t seed);

// Per-answer prototype vectors in world order (category-major).
std::vector<std::vector<double>> answer_prototypes(const WorldSpec& world);

// Line-delimited records in the annotation format plus the latent fields.
void write_dataset(const std::vector<SynthRecord>& records, const std::string& path);
std::vector<SynthRecord> read_dataset(const std::string& path);

// Category-correlated synthetic lexicon: tokens of the same category's
// answers are drawn near a shared centroid, standing in for a pretrained
// word-vector file when exercising the wordvec space on synthetic data.
WordVectorLexicon gen_category_lexicon(const WorldSpec& world, int dim, double spread,
                                       std::uint64_t seed);

}  // namespace vqasem
