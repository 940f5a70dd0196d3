#include "vqasem/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace vqasem {

AdamState make_adam_state(const std::vector<ParamBlock*>& blocks) {
  AdamState state;
  state.m.reserve(blocks.size());
  state.v.reserve(blocks.size());
  for (const ParamBlock* b : blocks) {
    state.m.emplace_back(b->value.size(), 0.0);
    state.v.emplace_back(b->value.size(), 0.0);
  }
  return state;
}

namespace {

void check_state(const std::vector<ParamBlock*>& blocks, const AdamState& state) {
  if (state.m.size() != blocks.size() || state.v.size() != blocks.size()) {
    throw std::invalid_argument("optimizer state does not match block list");
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (state.m[b].size() != blocks[b]->value.size()) {
      throw std::invalid_argument("optimizer state shape mismatch in block " + blocks[b]->name);
    }
    for (double g : blocks[b]->grad.data) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("non-finite gradient in block '" + blocks[b]->name + "'");
      }
    }
  }
}

}  // namespace

void step_adam(const std::vector<ParamBlock*>& blocks, AdamState& state, double lr,
               const AdamConfig& cfg) {
  check_state(blocks, state);
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto& value = blocks[b]->value.data;
    const auto& grad = blocks[b]->grad.data;
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void step_adamax(const std::vector<ParamBlock*>& blocks, AdamState& state, double lr,
                 const AdamConfig& cfg) {
  check_state(blocks, state);
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto& value = blocks[b]->value.data;
    const auto& grad = blocks[b]->grad.data;
    auto& m = state.m[b];
    auto& u = state.v[b];  // reused as the infinity-norm accumulator
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      u[i] = std::max(cfg.beta2 * u[i], std::abs(grad[i]));
      value[i] -= lr * (m[i] / bc1) / (u[i] + cfg.eps);
    }
  }
}

}  // namespace vqasem
