#pragma once

#include <cstdint>
#include <vector>

#include "vqasem/dense_net.hpp"

namespace vqasem {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one pair per parameter block.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const std::vector<ParamBlock*>& blocks);

// Standard bias-corrected update. Throws on a non-finite gradient, naming
// the offending block.
void step_adam(const std::vector<ParamBlock*>& blocks, AdamState& state, double lr,
               const AdamConfig& cfg = {});

// Infinity-norm variant of the second moment.
void step_adamax(const std::vector<ParamBlock*>& blocks, AdamState& state, double lr,
                 const AdamConfig& cfg = {});

}  // namespace vqasem
