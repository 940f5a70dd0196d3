#include "vqasem/dense_net.hpp"

#include <cmath>
#include <stdexcept>

namespace vqasem {

void init_glorot(Tensor2& w, int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : w.data) v = rng.uniform(-a, a);
}

DenseNet::DenseNet(const std::vector<int>& dims, const std::vector<LayerActivation>& acts,
                   const std::string& name_prefix, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("DenseNet: need at least one layer");
  if (acts.size() != dims.size() - 1) {
    throw std::invalid_argument("DenseNet: activation count must match layer count");
  }
  input_dim_ = dims.front();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer{ParamBlock(name_prefix + ".w" + std::to_string(l), dims[l + 1], dims[l]),
                ParamBlock(name_prefix + ".b" + std::to_string(l), 1, dims[l + 1]), acts[l]};
    init_glorot(layer.weight.value, dims[l], dims[l + 1], rng);
    layers_.push_back(std::move(layer));
  }
  inputs_.resize(layers_.size());
  preacts_.resize(layers_.size());
}

int DenseNet::output_dim() const { return layers_.back().weight.value.rows; }

std::vector<double> DenseNet::forward(std::span<const double> input) {
  if (static_cast<int>(input.size()) != input_dim_) {
    throw std::invalid_argument("DenseNet::forward: input dim " + std::to_string(input.size()) +
                                " != " + std::to_string(input_dim_));
  }
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    inputs_[l] = x;
    const Tensor2& w = layer.weight.value;
    std::vector<double> z(w.rows);
    for (int r = 0; r < w.rows; ++r) {
      z[r] = layer.bias.value.at(0, r) + dot(w.row(r), x);
    }
    preacts_[l] = z;
    if (layer.activation == LayerActivation::relu) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    x = std::move(z);
  }
  forward_recorded_ = true;
  return x;
}

std::vector<double> DenseNet::backward(std::span<const double> grad_output) {
  if (!forward_recorded_) {
    throw std::logic_error("DenseNet::backward called without a recorded forward pass");
  }
  if (static_cast<int>(grad_output.size()) != output_dim()) {
    throw std::invalid_argument("DenseNet::backward: gradient dim mismatch");
  }
  std::vector<double> g(grad_output.begin(), grad_output.end());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    Layer& layer = layers_[l];
    if (layer.activation == LayerActivation::relu) {
      for (std::size_t r = 0; r < g.size(); ++r) {
        if (preacts_[l][r] <= 0.0) g[r] = 0.0;
      }
    }
    const std::vector<double>& x = inputs_[l];
    Tensor2& wg = layer.weight.grad;
    for (int r = 0; r < wg.rows; ++r) {
      const double gr = g[r];
      auto row = wg.row(r);
      for (int c = 0; c < wg.cols; ++c) row[c] += gr * x[c];
      layer.bias.grad.at(0, r) += gr;
    }
    const Tensor2& w = layer.weight.value;
    std::vector<double> gx(w.cols, 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double gr = g[r];
      const auto row = w.row(r);
      for (int c = 0; c < w.cols; ++c) gx[c] += gr * row[c];
    }
    g = std::move(gx);
  }
  forward_recorded_ = false;
  return g;
}

void DenseNet::zero_grad() {
  for (Layer& layer : layers_) {
    layer.weight.zero_grad();
    layer.bias.zero_grad();
  }
}

std::vector<ParamBlock*> DenseNet::param_blocks() {
  std::vector<ParamBlock*> blocks;
  blocks.reserve(layers_.size() * 2);
  for (Layer& layer : layers_) {
    blocks.push_back(&layer.weight);
    blocks.push_back(&layer.bias);
  }
  return blocks;
}

std::vector<const ParamBlock*> DenseNet::param_blocks() const {
  std::vector<const ParamBlock*> blocks;
  blocks.reserve(layers_.size() * 2);
  for (const Layer& layer : layers_) {
    blocks.push_back(&layer.weight);
    blocks.push_back(&layer.bias);
  }
  return blocks;
}

}  // namespace vqasem
