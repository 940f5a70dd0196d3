#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqasem/answer_space.hpp"
#include "vqasem/dense_net.hpp"
#include "vqasem/loss.hpp"

namespace vqasem {

// Token dictionary for the question encoder; id 0 is the reserved <unk> row.
class TokenVocab {
 public:
  static TokenVocab from_tokens(const std::vector<std::string>& tokens);  // sorted, deduplicated
  int id_of(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct ModelDims {
  int question_dim = 32;
  int image_feat_dim = 16;
  int image_dim = 32;
  int hidden_dim = 64;
  // The question-only branch is kept lean: it only needs the per-template
  // prior, and a light mask leaves the main branch's gradients informative.
  int rubi_hidden_dim = 16;
};

// Classifier over the answer dictionary: bag-of-tokens question encoder
// (embedding table + mean pool), linear image encoder, fusion MLP on the
// concatenated encodings. Deterministic given parameters and inputs.
class ToyVqaModel {
 public:
  ToyVqaModel(TokenVocab vocab, int n_classes, const ModelDims& dims, std::uint64_t seed);

  Prediction forward(std::span<const double> image_feat,
                     const std::vector<std::string>& question_tokens);

  // Accumulates parameter gradients for the recorded forward pass.
  void backward(std::span<const double> grad_logits);

  void zero_grad();
  std::vector<ParamBlock*> param_blocks();
  std::vector<const ParamBlock*> param_blocks() const;

  const TokenVocab& vocab() const { return vocab_; }
  const ModelDims& dims() const { return dims_; }
  int n_classes() const { return n_classes_; }

 private:
  TokenVocab vocab_;
  ModelDims dims_;
  int n_classes_ = 0;
  ParamBlock q_embedding_;  // vocab x question_dim
  DenseNet image_encoder_;
  DenseNet fusion_;
  std::vector<int> token_ids_;  // cached by forward for the embedding backward
  bool forward_recorded_ = false;
};

// Question-only branch used during training to absorb the question prior.
// Has its own embedding table; never evaluated at inference.
class RubiBranch {
 public:
  RubiBranch(TokenVocab vocab, int n_classes, int question_dim, int hidden_dim,
             std::uint64_t seed);

  std::vector<double> forward(const std::vector<std::string>& question_tokens);
  void backward(std::span<const double> grad_logits);
  void zero_grad();
  std::vector<ParamBlock*> param_blocks();
  int n_classes() const { return net_.output_dim(); }

 private:
  TokenVocab vocab_;
  int question_dim_ = 0;
  ParamBlock q_embedding_;
  DenseNet net_;
  std::vector<int> token_ids_;
  bool forward_recorded_ = false;
};

struct RubiForward {
  Prediction output;               // masked logits when training, plain otherwise
  std::vector<double> vqa_logits;  // cached for backward
  std::vector<double> mask;        // sigmoid of the question-only logits; empty at inference
  bool training = false;
};

// training=true: output = vqa_logits * sigmoid(question_only_logits), both
// branches recorded for backward. training=false: the branch is not
// evaluated and the output bit-equals model.forward.
RubiForward rubi_forward(ToyVqaModel& model, RubiBranch& branch,
                         std::span<const double> image_feat,
                         const std::vector<std::string>& question_tokens, bool training);

// Backward through the mask composition of a training rubi_forward.
void rubi_backward(ToyVqaModel& model, RubiBranch& branch, const RubiForward& fwd,
                   std::span<const double> grad_output);

// Text checkpoint: model dims, answer dictionary, token vocabulary, then the
// named parameter blocks in deterministic order.
void save_checkpoint(const std::string& path, const ToyVqaModel& model, const AnswerSpace& space);

struct LoadedCheckpoint {
  ToyVqaModel model;
  AnswerSpace space;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace vqasem
