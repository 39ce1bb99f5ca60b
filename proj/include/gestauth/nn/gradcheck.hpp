#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gestauth/nn/graph.hpp"

namespace gestauth::nn {

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates checked per block; 0 checks every coordinate.
  std::size_t max_coords_per_block = 0;
  std::uint64_t seed = 0;
  bool check_inputs = true;
};

struct BlockError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;
  double max_rel_error = 0.0;
  [[nodiscard]] bool passed(double tolerance) const { return max_rel_error <= tolerance; }
};

/// Builds the model output from graph leaves for the given inputs.
using ForwardFn = std::function<Id(Graph&, const std::vector<Id>& inputs)>;

/// Compares reverse-mode gradients with central finite differences of the
/// scalar <r, f(x)> for a fixed random projection r. The relative error of a
/// coordinate is |a - n| / max(1e-6, |a| + |n|).
GradCheckReport grad_check(const ForwardFn& forward, const std::vector<Tensor>& inputs,
                           const std::vector<Parameter*>& params, const GradCheckOptions& opts = {});

}  // namespace gestauth::nn
