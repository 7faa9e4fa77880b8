// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "coala/ops.hpp"
#include "coala/rng.hpp"
#include "coala/tensor.hpp"

namespace coala {

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout
};

/// Walks trainable parameters and non-trainable buffers with dotted names.
class ParameterVisitor {
 public:
  virtual ~ParameterVisitor() = default;
  virtual void parameter(const std::string& name, Tensor& tensor) = 0;
  virtual void buffer(const std::string& name, std::vector<float>& values) = 0;
};

/// Kaiming-uniform (fan-in, ReLU gain) weights; zero biases.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t padding, Rng& rng);

  Tensor operator()(const Tensor& input) const;
  void visit(const std::string& prefix, ParameterVisitor& visitor);

  Tensor weight;
  Tensor bias;
  Conv2dOptions options;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  std::size_t stride, std::size_t padding, Rng& rng);

  Tensor operator()(const Tensor& input) const;
  void visit(const std::string& prefix, ParameterVisitor& visitor);

  Tensor weight;
  Tensor bias;
  Conv2dOptions options;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

  Tensor operator()(const Tensor& input) const;
  void visit(const std::string& prefix, ParameterVisitor& visitor);

  Tensor weight;
  Tensor bias;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);

  Tensor operator()(const Tensor& input, bool training);
  void visit(const std::string& prefix, ParameterVisitor& visitor);

  Tensor gamma;
  Tensor beta;
  BatchNormStats<float> stats;
};

}  // namespace coala
