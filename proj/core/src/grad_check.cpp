#include "vqasem/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vqasem {

std::string GradCheckReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s max_rel_error=%.3e tolerance=%.1e coords=%d worst=%s[%d] analytic=%.6e "
                "numeric=%.6e",
                passed ? "PASS" : "FAIL", max_rel_error, tolerance, coords_checked,
                worst_block.empty() ? "-" : worst_block.c_str(), worst_index, worst_analytic,
                worst_numeric);
  return buf;
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::vector<ParamBlock*>& blocks, const GradCheckOptions& options,
                           Rng& rng) {
  if (options.step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
  GradCheckReport report;
  report.tolerance = options.tolerance;

  for (ParamBlock* block : blocks) {
    const std::size_t size = block->value.size();
    if (size == 0) continue;
    const int samples = std::min<int>(options.samples_per_block, static_cast<int>(size));
    for (int s = 0; s < samples; ++s) {
      const std::size_t idx = static_cast<std::size_t>(rng.below(size));
      const double saved = block->value.data[idx];

      block->value.data[idx] = saved + options.step;
      const double f_plus = loss_fn();
      block->value.data[idx] = saved - options.step;
      const double f_minus = loss_fn();
      block->value.data[idx] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * options.step);
      const double analytic = block->grad.data[idx];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), options.denom_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_block = block->name;
        report.worst_index = static_cast<int>(idx);
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace vqasem
