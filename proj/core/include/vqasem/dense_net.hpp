#pragma once

#include <span>
#include <string>
#include <vector>

#include "vqasem/rng.hpp"
#include "vqasem/tensor.hpp"

namespace vqasem {

enum class LayerActivation { relu, identity };

// Named parameter tensor with its gradient accumulator.
struct ParamBlock {
  std::string name;
  Tensor2 value;
  Tensor2 grad;

  ParamBlock() = default;
  ParamBlock(std::string n, int rows, int cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

// Fully connected stack with reverse-mode gradients. forward caches the
// activations backward needs; backward accumulates into the blocks' grads
// and consumes the recorded forward.
class DenseNet {
 public:
  // dims = [in, h1, ..., out]; acts has one entry per layer.
  DenseNet(const std::vector<int>& dims, const std::vector<LayerActivation>& acts,
           const std::string& name_prefix, Rng& rng);

  std::vector<double> forward(std::span<const double> input);

  // Returns the gradient w.r.t. the input. Throws std::logic_error when no
  // forward pass is recorded.
  std::vector<double> backward(std::span<const double> grad_output);

  void zero_grad();
  std::vector<ParamBlock*> param_blocks();
  std::vector<const ParamBlock*> param_blocks() const;
  int input_dim() const { return input_dim_; }
  int output_dim() const;

 private:
  struct Layer {
    ParamBlock weight;  // out x in
    ParamBlock bias;    // 1 x out
    LayerActivation activation;
  };
  std::vector<Layer> layers_;
  int input_dim_ = 0;
  std::vector<std::vector<double>> inputs_;   // per-layer input, cached by forward
  std::vector<std::vector<double>> preacts_;  // per-layer pre-activation
  bool forward_recorded_ = false;
};

// Glorot-style uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void init_glorot(Tensor2& w, int fan_in, int fan_out, Rng& rng);

}  // namespace vqasem
