#include "vqasem/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vqasem/tensor.hpp"

namespace vqasem {

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

}  // namespace

std::vector<double> sigmoid_each(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = sigmoid(logits[i]);
  return p;
}

std::vector<double> activate(std::span<const double> logits, Activation act) {
  return act == Activation::softmax ? softmax(logits) : sigmoid_each(logits);
}

std::vector<int> topk_indices(std::span<const double> p, int k) {
  const int n = static_cast<int>(p.size());
  if (k < 1 || k > n) {
    throw std::invalid_argument("topk_indices: k=" + std::to_string(k) + " out of range [1, " +
                                std::to_string(n) + "]");
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (p[a] != p[b]) return p[a] > p[b];
    return a < b;
  });
  idx.resize(k);
  return idx;
}

std::vector<double> gamma_project(std::span<const double> p, const SemanticSpace& space, int k) {
  if (static_cast<int>(p.size()) != space.n_classes()) {
    throw std::invalid_argument("gamma_project: vector length " + std::to_string(p.size()) +
                                " != n_classes " + std::to_string(space.n_classes()));
  }
  std::vector<double> out(space.dim, 0.0);
  for (int i : topk_indices(p, k)) {
    const auto g = space.row(i);
    for (int d = 0; d < space.dim; ++d) out[d] += p[i] * g[d];
  }
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v, double eps) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  if (eps <= 0.0) throw std::invalid_argument("cosine: eps must be positive");
  const double nu = std::max(l2_norm(u), eps);
  const double nv = std::max(l2_norm(v), eps);
  return dot(u, v) / (nu * nv);
}

double cosine_strict(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw std::domain_error("cosine_strict: zero vector");
  return dot(u, v) / (nu * nv);
}

double sem_loss(const Prediction& y, const SoftTarget& y_star, const SemanticSpace& space,
                const LossConfig& cfg) {
  const std::vector<double> p = activate(y.logits, cfg.activation);
  const std::vector<double> u = gamma_project(p, space, cfg.k);
  const std::vector<double> v = gamma_project(y_star.values, space, cfg.k);
  return 1.0 - cosine(u, v, cfg.eps);
}

std::vector<double> sem_loss_grad(const Prediction& y, const SoftTarget& y_star,
                                  const SemanticSpace& space, const LossConfig& cfg) {
  const int n = static_cast<int>(y.logits.size());
  const std::vector<double> p = activate(y.logits, cfg.activation);
  const std::vector<int> selected = topk_indices(p, cfg.k);
  std::vector<double> u(space.dim, 0.0);
  for (int i : selected) {
    const auto g = space.row(i);
    for (int d = 0; d < space.dim; ++d) u[d] += p[i] * g[d];
  }
  const std::vector<double> v = gamma_project(y_star.values, space, cfg.k);

  const double norm_u = l2_norm(u);
  const double norm_v = l2_norm(v);
  const double nu = std::max(norm_u, cfg.eps);
  const double nv = std::max(norm_v, cfg.eps);
  const double cos_uv = dot(u, v) / (nu * nv);

  // dL/du for L = 1 - (u.v)/(nu*nv). When |u| <= eps the guard freezes nu,
  // so the u-direction term drops out.
  std::vector<double> grad_u(space.dim);
  for (int d = 0; d < space.dim; ++d) {
    grad_u[d] = -(v[d] / (nu * nv));
    if (norm_u > cfg.eps) grad_u[d] += cos_uv * u[d] / (nu * nu);
  }

  // du/dp_i = g(i) on the selection, 0 elsewhere (index set held fixed).
  std::vector<double> grad_p(n, 0.0);
  for (int i : selected) grad_p[i] = dot(space.row(i), grad_u);

  std::vector<double> grad_logits(n, 0.0);
  if (cfg.activation == Activation::sigmoid) {
    for (int j = 0; j < n; ++j) grad_logits[j] = grad_p[j] * p[j] * (1.0 - p[j]);
  } else {
    double weighted = 0.0;
    for (int i = 0; i < n; ++i) weighted += grad_p[i] * p[i];
    for (int j = 0; j < n; ++j) grad_logits[j] = p[j] * (grad_p[j] - weighted);
  }
  return grad_logits;
}

ScalarLoss ce_loss(const Prediction& y, const SoftTarget& y_star) {
  const int n = static_cast<int>(y.logits.size());
  if (static_cast<int>(y_star.values.size()) != n) {
    throw std::invalid_argument("ce_loss: dimension mismatch");
  }
  const std::vector<double> lsm = log_softmax(y.logits);
  ScalarLoss out;
  double mass = 0.0;
  for (int i = 0; i < n; ++i) {
    out.value -= y_star.values[i] * lsm[i];
    mass += y_star.values[i];
  }
  out.grad_logits.resize(n);
  for (int i = 0; i < n; ++i) out.grad_logits[i] = mass * std::exp(lsm[i]) - y_star.values[i];
  return out;
}

ScalarLoss bce_loss(const Prediction& y, const SoftTarget& y_star) {
  const int n = static_cast<int>(y.logits.size());
  if (static_cast<int>(y_star.values.size()) != n) {
    throw std::invalid_argument("bce_loss: dimension mismatch");
  }
  ScalarLoss out;
  out.grad_logits.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = y.logits[i];
    const double t = y_star.values[i];
    // -t log s(x) - (1-t) log(1-s(x)) in the overflow-safe arrangement.
    out.value += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    out.grad_logits[i] = (sigmoid(x) - t) / n;
  }
  out.value /= n;
  return out;
}

LossValue combined_loss(const Prediction& y, const SoftTarget& y_star, const SemanticSpace* space,
                        const LossConfig& cfg) {
  if (cfg.lambda < 0.0) throw std::invalid_argument("combined_loss: lambda must be nonnegative");
  ScalarLoss base =
      cfg.activation == Activation::softmax ? ce_loss(y, y_star) : bce_loss(y, y_star);

  LossValue out;
  out.ce_or_bce = base.value;
  if (cfg.lambda == 0.0) {
    out.total = base.value;
    out.sem = 0.0;
    out.grad_logits = std::move(base.grad_logits);
    return out;
  }
  if (space == nullptr) {
    throw std::invalid_argument("combined_loss: semantic space required when lambda > 0");
  }
  out.sem = sem_loss(y, y_star, *space, cfg);
  out.total = base.value + cfg.lambda * out.sem;
  out.grad_logits = std::move(base.grad_logits);
  const std::vector<double> sg = sem_loss_grad(y, y_star, *space, cfg);
  for (std::size_t i = 0; i < out.grad_logits.size(); ++i) {
    out.grad_logits[i] += cfg.lambda * sg[i];
  }
  return out;
}

}  // namespace vqasem
