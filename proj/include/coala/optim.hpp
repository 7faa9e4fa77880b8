// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coala/tensor.hpp"

namespace coala {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct SgdOptions {
  double learning_rate = 0.005;
  double momentum = 0.0;
  /// Rescale the global gradient norm down to this value when exceeded.
  std::optional<double> clip_norm;
};

/// Plain (optionally momentum) SGD: v <- m*v + g, p <- p - lr*v.
class Sgd {
 public:
  Sgd(std::vector<NamedParameter> params, SgdOptions options);

  /// Applies one update and zeroes the gradients. If any gradient is
  /// non-finite nothing is updated and NumericalError names the parameter.
  void step();
  void zero_grad();

  /// Global L2 norm of the gradients seen by the last step (before clipping).
  double last_grad_norm() const { return last_grad_norm_; }
  const SgdOptions& options() const { return options_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }

 private:
  std::vector<NamedParameter> params_;
  std::vector<std::vector<float>> velocity_;
  SgdOptions options_;
  double last_grad_norm_ = 0.0;
};

}  // namespace coala
