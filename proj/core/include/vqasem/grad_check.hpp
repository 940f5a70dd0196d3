#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vqasem/dense_net.hpp"
#include "vqasem/rng.hpp"

namespace vqasem {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string worst_block;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int coords_checked = 0;

  std::string summary() const;  // single PASS/FAIL line naming the worst coordinate
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;          // central-difference half step
  int samples_per_block = 16;  // coordinates sampled per parameter block
  // Relative error uses max(|analytic|, |numeric|, denom_floor) as the
  // denominator; the floor absorbs finite-difference noise on coordinates
  // whose true gradient is (near) zero.
  double denom_floor = 1e-4;
};

// Compares analytic gradients (already accumulated in the blocks' grads)
// against central finite differences of loss_fn over sampled coordinates.
// loss_fn must re-evaluate the loss from the blocks' current values without
// touching the stored gradients.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::vector<ParamBlock*>& blocks, const GradCheckOptions& options,
                           Rng& rng);

}  // namespace vqasem
