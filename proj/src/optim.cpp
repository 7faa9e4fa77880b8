// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/optim.hpp"

#include <cmath>
#include <sstream>

namespace coala {

Sgd::Sgd(std::vector<NamedParameter> params, SgdOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) {
    throw std::invalid_argument("sgd: learning rate must be positive");
  }
  if (options_.momentum < 0.0 || options_.momentum >= 1.0) {
    throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
  }
  if (options_.clip_norm && !(*options_.clip_norm > 0.0)) {
    throw std::invalid_argument("sgd: clip norm must be positive");
  }
  for (auto& p : params_) {
    if (!p.tensor.requires_grad()) {
      throw std::invalid_argument("sgd: parameter '" + p.name + "' does not require grad");
    }
    p.tensor.mutable_grad();
  }
  if (options_.momentum > 0.0) {
    velocity_.reserve(params_.size());
    for (const auto& p : params_) velocity_.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void Sgd::step() {
  double squared = 0.0;
  for (const auto& p : params_) {
    auto g = p.tensor.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        std::ostringstream msg;
        msg << "sgd: non-finite gradient " << g[i] << " in parameter '" << p.name << "' "
            << shape_to_string(p.tensor.shape()) << " at flat index " << i
            << "; step aborted";
        throw NumericalError(msg.str());
      }
      squared += static_cast<double>(g[i]) * g[i];
    }
  }
  last_grad_norm_ = std::sqrt(squared);
  double scale = 1.0;
  if (options_.clip_norm && last_grad_norm_ > *options_.clip_norm) {
    scale = *options_.clip_norm / last_grad_norm_;
  }

  const auto lr = static_cast<float>(options_.learning_rate);
  const auto momentum = static_cast<float>(options_.momentum);
  const auto gscale = static_cast<float>(scale);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    auto values = p.tensor.mutable_data();
    auto g = p.tensor.mutable_grad();
    if (velocity_.empty()) {
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * (gscale * g[i]);
    } else {
      auto& v = velocity_[k];
      for (std::size_t i = 0; i < values.size(); ++i) {
        v[i] = momentum * v[i] + gscale * g[i];
        values[i] -= lr * v[i];
      }
    }
  }
  zero_grad();
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace coala
