// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/nn.hpp"

#include <cmath>

namespace coala {

namespace {

Tensor kaiming_uniform(Shape shape, double fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  std::vector<float> values(shape_numel(shape));
  for (float& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor(std::move(shape), std::move(values), true);
}

}  // namespace

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t padding, Rng& rng)
    : weight(kaiming_uniform({out_channels, in_channels, kernel, kernel},
                             static_cast<double>(in_channels * kernel * kernel), rng)),
      bias(Tensor::zeros({out_channels}, true)),
      options{{stride, stride}, {padding, padding}} {}

Tensor Conv2d::operator()(const Tensor& input) const { return conv2d(input, weight, bias, options); }

void Conv2d::visit(const std::string& prefix, ParameterVisitor& visitor) {
  visitor.parameter(prefix + ".weight", weight);
  visitor.parameter(prefix + ".bias", bias);
}

// Each output pixel of a stride-s transposed conv receives kernel²/s² taps
// per input channel; that is its effective fan-in.
ConvTranspose2d::ConvTranspose2d(std::size_t in_channels, std::size_t out_channels,
                                 std::size_t kernel, std::size_t stride, std::size_t padding,
                                 Rng& rng)
    : weight(kaiming_uniform(
          {in_channels, out_channels, kernel, kernel},
          std::max(1.0, static_cast<double>(in_channels * kernel * kernel) /
                            static_cast<double>(stride * stride)),
          rng)),
      bias(Tensor::zeros({out_channels}, true)),
      options{{stride, stride}, {padding, padding}} {}

Tensor ConvTranspose2d::operator()(const Tensor& input) const {
  return conv_transpose2d(input, weight, bias, options);
}

void ConvTranspose2d::visit(const std::string& prefix, ParameterVisitor& visitor) {
  visitor.parameter(prefix + ".weight", weight);
  visitor.parameter(prefix + ".bias", bias);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng)
    : weight(kaiming_uniform({out_features, in_features}, static_cast<double>(in_features), rng)),
      bias(Tensor::zeros({out_features}, true)) {}

Tensor Linear::operator()(const Tensor& input) const { return linear(input, weight, bias); }

void Linear::visit(const std::string& prefix, ParameterVisitor& visitor) {
  visitor.parameter(prefix + ".weight", weight);
  visitor.parameter(prefix + ".bias", bias);
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(Tensor::full({channels}, 1.0f, true)),
      beta(Tensor::zeros({channels}, true)),
      stats(channels) {}

Tensor BatchNorm::operator()(const Tensor& input, bool training) {
  return batchnorm(input, gamma, beta, stats, training);
}

void BatchNorm::visit(const std::string& prefix, ParameterVisitor& visitor) {
  visitor.parameter(prefix + ".gamma", gamma);
  visitor.parameter(prefix + ".beta", beta);
  visitor.buffer(prefix + ".running_mean", stats.running_mean);
  visitor.buffer(prefix + ".running_var", stats.running_var);
}

}  // namespace coala
