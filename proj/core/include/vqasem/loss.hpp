#pragma once

#include <span>
#include <vector>

#include "vqasem/answer_space.hpp"
#include "vqasem/semantic_space.hpp"

namespace vqasem {

inline constexpr double kDefaultCosineEps = 1e-12;

// Raw classifier output over the answer dictionary.
struct Prediction {
  std::vector<double> logits;
};

enum class Activation { softmax, sigmoid };

struct LossConfig {
  double lambda = 10.0;
  int k = 10;
  Activation activation = Activation::sigmoid;
  double eps = kDefaultCosineEps;
};

struct LossValue {
  double total = 0.0;
  double ce_or_bce = 0.0;
  double sem = 0.0;
  std::vector<double> grad_logits;
};

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> sigmoid_each(std::span<const double> logits);
std::vector<double> activate(std::span<const double> logits, Activation act);

// Indices of the k largest entries, highest first; equal values break toward
// the smaller index. Throws when k is outside [1, p.size()].
std::vector<int> topk_indices(std::span<const double> p, int k);

// Probability-weighted sum of the class embeddings of the top-k classes.
// Weights are the raw entries of p, not renormalized over the selection.
std::vector<double> gamma_project(std::span<const double> p, const SemanticSpace& space, int k);

// (u.v) / (max(|u|, eps) * max(|v|, eps)); the guard makes zero vectors
// orthogonal to everything instead of an error.
double cosine(std::span<const double> u, std::span<const double> v, double eps);

// Diagnostic variant: throws on an exactly-zero vector.
double cosine_strict(std::span<const double> u, std::span<const double> v);

// 1 - cosine(gamma(act(logits)), gamma(target)). The target side feeds its
// values through the same top-k truncation, without activation.
double sem_loss(const Prediction& y, const SoftTarget& y_star, const SemanticSpace& space,
                const LossConfig& cfg);

// Exact gradient of sem_loss w.r.t. the logits, treating the top-k index set
// as constant (the loss is smooth within each selection cell). Softmax chains
// through the full Jacobian, sigmoid through its diagonal.
std::vector<double> sem_loss_grad(const Prediction& y, const SoftTarget& y_star,
                                  const SemanticSpace& space, const LossConfig& cfg);

struct ScalarLoss {
  double value = 0.0;
  std::vector<double> grad_logits;
};

// -sum_i t_i log softmax(y)_i with the exact logit-space gradient
// (sum_i t_i) * softmax(y) - t.
ScalarLoss ce_loss(const Prediction& y, const SoftTarget& y_star);

// Mean over classes of the binary cross-entropy between sigmoid(y_i) and
// t_i, computed in the overflow-safe form; gradient (sigmoid(y) - t) / n.
ScalarLoss bce_loss(const Prediction& y, const SoftTarget& y_star);

// base + lambda * sem, where base is ce for softmax and bce for sigmoid.
// With lambda == 0 the result bit-equals the base loss and space may be null;
// otherwise space is required.
LossValue combined_loss(const Prediction& y, const SoftTarget& y_star, const SemanticSpace* space,
                        const LossConfig& cfg);

}  // namespace vqasem
