// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "coala/rng.hpp"
#include "coala/tensor.hpp"

namespace coala {

struct Conv2dOptions {
  std::array<std::size_t, 2> stride{1, 1};
  std::array<std::size_t, 2> padding{0, 0};
};

/// Output extent of a convolution along one axis.
std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                             std::size_t padding);
/// Output extent of a transposed convolution along one axis.
std::size_t conv_transpose_output_size(std::size_t input, std::size_t kernel,
                                       std::size_t stride, std::size_t padding);

/// input [B,Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout] or undefined.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv2dOptions& options);

/// input [B,Cin,H,W], weight [Cin,Cout,kh,kw], bias [Cout] or undefined.
/// The forward map is the adjoint of conv2d's input map.
template <typename T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                                const BasicTensor<T>& bias, const Conv2dOptions& options);

/// input [B,in], weight [out,in], bias [out] or undefined.
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias);

template <typename T>
struct BatchNormStats {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

/// Per-channel normalization over every axis except 1. input [B,C,...].
/// Training mode needs B >= 2 and updates `stats` (unbiased running var).
template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                         const BasicTensor<T>& beta, BatchNormStats<T>& stats, bool training);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input);

/// Inverted dropout: survivors scaled by 1/(1-rate). Identity unless training.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& input, double rate, bool training, Rng& rng);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& input, Shape shape);

/// Scalar sum of all elements.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& input);

/// Elementwise product of equal-shape tensors.
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Σ weight_i · term_i over scalar terms.
template <typename T>
BasicTensor<T> weighted_sum(const std::vector<BasicTensor<T>>& terms,
                            const std::vector<double>& weights);

}  // namespace coala
