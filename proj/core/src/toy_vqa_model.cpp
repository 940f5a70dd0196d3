#include "vqasem/toy_vqa_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vqasem {

TokenVocab TokenVocab::from_tokens(const std::vector<std::string>& tokens) {
  std::set<std::string> unique(tokens.begin(), tokens.end());
  unique.erase("<unk>");
  TokenVocab vocab;
  vocab.tokens_.push_back("<unk>");
  for (const std::string& t : unique) vocab.tokens_.push_back(t);
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    vocab.index_[vocab.tokens_[i]] = static_cast<int>(i);
  }
  return vocab;
}

int TokenVocab::id_of(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

ToyVqaModel::ToyVqaModel(TokenVocab vocab, int n_classes, const ModelDims& dims,
                         std::uint64_t seed)
    : vocab_(std::move(vocab)),
      dims_(dims),
      n_classes_(n_classes),
      q_embedding_("q_embedding", vocab_.size(), dims.question_dim),
      image_encoder_([&] {
        Rng rng(seed);
        return DenseNet({dims.image_feat_dim, dims.image_dim}, {LayerActivation::identity}, "img",
                        rng);
      }()),
      fusion_([&] {
        Rng rng(seed + 1);
        return DenseNet({dims.question_dim + dims.image_dim, dims.hidden_dim, n_classes},
                        {LayerActivation::relu, LayerActivation::identity}, "fusion", rng);
      }()) {
  if (n_classes < 2) throw std::invalid_argument("ToyVqaModel: need at least 2 classes");
  Rng rng(seed + 2);
  init_glorot(q_embedding_.value, vocab_.size(), dims.question_dim, rng);
}

Prediction ToyVqaModel::forward(std::span<const double> image_feat,
                                const std::vector<std::string>& question_tokens) {
  if (static_cast<int>(image_feat.size()) != dims_.image_feat_dim) {
    throw std::invalid_argument("ToyVqaModel::forward: image feature dim " +
                                std::to_string(image_feat.size()) + " != " +
                                std::to_string(dims_.image_feat_dim));
  }
  token_ids_.clear();
  for (const std::string& t : question_tokens) token_ids_.push_back(vocab_.id_of(t));
  // Bag-of-tokens: summing in id order makes the pooling exactly
  // permutation-invariant instead of merely up-to-rounding.
  std::sort(token_ids_.begin(), token_ids_.end());

  std::vector<double> h_q(dims_.question_dim, 0.0);
  if (!token_ids_.empty()) {
    for (int id : token_ids_) {
      const auto row = q_embedding_.value.row(id);
      for (int d = 0; d < dims_.question_dim; ++d) h_q[d] += row[d];
    }
    for (double& v : h_q) v /= static_cast<double>(token_ids_.size());
  }

  const std::vector<double> h_v = image_encoder_.forward(image_feat);

  std::vector<double> fused;
  fused.reserve(h_q.size() + h_v.size());
  fused.insert(fused.end(), h_q.begin(), h_q.end());
  fused.insert(fused.end(), h_v.begin(), h_v.end());

  Prediction pred;
  pred.logits = fusion_.forward(fused);
  forward_recorded_ = true;
  return pred;
}

void ToyVqaModel::backward(std::span<const double> grad_logits) {
  if (!forward_recorded_) {
    throw std::logic_error("ToyVqaModel::backward called without a recorded forward pass");
  }
  const std::vector<double> g_fused = fusion_.backward(grad_logits);

  const std::span<const double> g_q(g_fused.data(), dims_.question_dim);
  const std::span<const double> g_v(g_fused.data() + dims_.question_dim, dims_.image_dim);
  image_encoder_.backward(g_v);

  if (!token_ids_.empty()) {
    const double scale = 1.0 / static_cast<double>(token_ids_.size());
    for (int id : token_ids_) {
      auto row = q_embedding_.grad.row(id);
      for (int d = 0; d < dims_.question_dim; ++d) row[d] += scale * g_q[d];
    }
  }
  forward_recorded_ = false;
}

void ToyVqaModel::zero_grad() {
  q_embedding_.zero_grad();
  image_encoder_.zero_grad();
  fusion_.zero_grad();
}

std::vector<ParamBlock*> ToyVqaModel::param_blocks() {
  std::vector<ParamBlock*> blocks{&q_embedding_};
  for (ParamBlock* b : image_encoder_.param_blocks()) blocks.push_back(b);
  for (ParamBlock* b : fusion_.param_blocks()) blocks.push_back(b);
  return blocks;
}

std::vector<const ParamBlock*> ToyVqaModel::param_blocks() const {
  std::vector<const ParamBlock*> blocks{&q_embedding_};
  for (const ParamBlock* b : image_encoder_.param_blocks()) blocks.push_back(b);
  for (const ParamBlock* b : fusion_.param_blocks()) blocks.push_back(b);
  return blocks;
}

RubiBranch::RubiBranch(TokenVocab vocab, int n_classes, int question_dim, int hidden_dim,
                       std::uint64_t seed)
    : vocab_(std::move(vocab)),
      question_dim_(question_dim),
      q_embedding_("rubi.q_embedding", vocab_.size(), question_dim),
      net_([&] {
        Rng rng(seed);
        return DenseNet({question_dim, hidden_dim, n_classes},
                        {LayerActivation::relu, LayerActivation::identity}, "rubi", rng);
      }()) {
  Rng rng(seed + 1);
  init_glorot(q_embedding_.value, vocab_.size(), question_dim, rng);
}

std::vector<double> RubiBranch::forward(const std::vector<std::string>& question_tokens) {
  token_ids_.clear();
  for (const std::string& t : question_tokens) token_ids_.push_back(vocab_.id_of(t));
  std::sort(token_ids_.begin(), token_ids_.end());
  std::vector<double> h_q(question_dim_, 0.0);
  if (!token_ids_.empty()) {
    for (int id : token_ids_) {
      const auto row = q_embedding_.value.row(id);
      for (int d = 0; d < question_dim_; ++d) h_q[d] += row[d];
    }
    for (double& v : h_q) v /= static_cast<double>(token_ids_.size());
  }
  forward_recorded_ = true;
  return net_.forward(h_q);
}

void RubiBranch::backward(std::span<const double> grad_logits) {
  if (!forward_recorded_) {
    throw std::logic_error("RubiBranch::backward called without a recorded forward pass");
  }
  const std::vector<double> g_q = net_.backward(grad_logits);
  if (!token_ids_.empty()) {
    const double scale = 1.0 / static_cast<double>(token_ids_.size());
    for (int id : token_ids_) {
      auto row = q_embedding_.grad.row(id);
      for (int d = 0; d < question_dim_; ++d) row[d] += scale * g_q[d];
    }
  }
  forward_recorded_ = false;
}

void RubiBranch::zero_grad() {
  q_embedding_.zero_grad();
  net_.zero_grad();
}

std::vector<ParamBlock*> RubiBranch::param_blocks() {
  std::vector<ParamBlock*> blocks{&q_embedding_};
  for (ParamBlock* b : net_.param_blocks()) blocks.push_back(b);
  return blocks;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

RubiForward rubi_forward(ToyVqaModel& model, RubiBranch& branch,
                         std::span<const double> image_feat,
                         const std::vector<std::string>& question_tokens, bool training) {
  if (branch.n_classes() != model.n_classes()) {
    throw std::invalid_argument("rubi_forward: branch classes != model classes");
  }
  RubiForward out;
  out.training = training;
  out.output = model.forward(image_feat, question_tokens);
  if (!training) return out;  // question-only branch removed at inference

  out.vqa_logits = out.output.logits;
  const std::vector<double> q_logits = branch.forward(question_tokens);
  out.mask.resize(q_logits.size());
  for (std::size_t i = 0; i < q_logits.size(); ++i) out.mask[i] = sigmoid(q_logits[i]);
  for (std::size_t i = 0; i < out.output.logits.size(); ++i) out.output.logits[i] *= out.mask[i];
  return out;
}

void rubi_backward(ToyVqaModel& model, RubiBranch& branch, const RubiForward& fwd,
                   std::span<const double> grad_output) {
  if (!fwd.training) {
    throw std::logic_error("rubi_backward: forward pass was not in training mode");
  }
  const std::size_t n = grad_output.size();
  std::vector<double> g_vqa(n), g_qlogits(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = fwd.mask[i];
    g_vqa[i] = grad_output[i] * m;
    g_qlogits[i] = grad_output[i] * fwd.vqa_logits[i] * m * (1.0 - m);
  }
  branch.backward(g_qlogits);
  model.backward(g_vqa);
}

void save_checkpoint(const std::string& path, const ToyVqaModel& model, const AnswerSpace& space) {
  if (space.n_classes() != model.n_classes()) {
    throw std::invalid_argument("save_checkpoint: dictionary size != model classes");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  const ModelDims& d = model.dims();
  out << "vqasem-checkpoint 1\n";
  out << "dims " << d.question_dim << ' ' << d.image_feat_dim << ' ' << d.image_dim << ' '
      << d.hidden_dim << '\n';
  out << "answers " << space.n_classes() << '\n';
  for (const std::string& a : space.answers()) out << a << '\n';
  out << "vocab " << model.vocab().size() << '\n';
  for (const std::string& t : model.vocab().tokens()) out << t << '\n';
  char buf[40];
  for (const ParamBlock* block : model.param_blocks()) {
    out << "block " << block->name << ' ' << block->value.rows << ' ' << block->value.cols << '\n';
    for (int r = 0; r < block->value.rows; ++r) {
      const auto row = block->value.row(r);
      for (int c = 0; c < block->value.cols; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  const auto fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error(path + ": " + what);
  };

  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != "vqasem-checkpoint" || version != 1) throw fail("not a v1 checkpoint");

  ModelDims dims;
  in >> word >> dims.question_dim >> dims.image_feat_dim >> dims.image_dim >> dims.hidden_dim;
  if (word != "dims") throw fail("expected dims");

  int n_answers = 0;
  in >> word >> n_answers;
  if (word != "answers") throw fail("expected answers");
  in.ignore();
  std::vector<std::string> answers(n_answers);
  for (std::string& a : answers) {
    if (!std::getline(in, a)) throw fail("truncated answer list");
  }

  int n_tokens = 0;
  in >> word >> n_tokens;
  if (word != "vocab") throw fail("expected vocab");
  in.ignore();
  std::vector<std::string> tokens(n_tokens);
  for (std::string& t : tokens) {
    if (!std::getline(in, t)) throw fail("truncated vocabulary");
  }
  if (tokens.empty() || tokens.front() != "<unk>") throw fail("vocabulary must start with <unk>");

  AnswerSpace space = AnswerSpace::from_answers(std::move(answers));
  TokenVocab vocab = TokenVocab::from_tokens(tokens);
  if (vocab.size() != n_tokens) throw fail("vocabulary entries are not unique");
  ToyVqaModel model(std::move(vocab), space.n_classes(), dims, /*seed=*/0);

  for (ParamBlock* block : model.param_blocks()) {
    std::string name;
    int rows = 0, cols = 0;
    in >> word >> name >> rows >> cols;
    if (word != "block" || name != block->name) throw fail("expected block " + block->name);
    if (rows != block->value.rows || cols != block->value.cols) {
      throw fail("shape mismatch in block " + name);
    }
    for (double& v : block->value.data) {
      if (!(in >> v)) throw fail("truncated values in block " + name);
    }
  }
  return LoadedCheckpoint{std::move(model), std::move(space)};
}

}  // namespace vqasem
