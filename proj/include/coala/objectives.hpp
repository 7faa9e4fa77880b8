// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "coala/tensor.hpp"

namespace coala {

inline constexpr double kLossEpsilon = 1e-7;

struct LossWeights {
  double audio = 5.0;        // lambda_a
  double tags = 5.0;         // lambda_t
  double contrastive = 10.0; // lambda_xi
  double temperature = 0.1;  // tau

  void validate() const;
};

/// Which in-batch pairs sit in the contrastive denominator for anchor b.
enum class ContrastiveDenominator {
  kExcludePositive,  // i != b only
  kIncludePositive,  // all i
};

std::string_view to_string(ContrastiveDenominator d);
ContrastiveDenominator parse_denominator(std::string_view text);

/// Generalized KL (I-divergence) summed over every element:
///   sum x*log((x+eps)/(xhat+eps)) - x + xhat.
/// Differentiable w.r.t. `reconstruction`; `target` is treated as data.
template <typename T>
BasicTensor<T> kl_reconstruction(const BasicTensor<T>& target,
                                 const BasicTensor<T>& reconstruction);

/// Element-wise binary cross-entropy summed over classes and batch, with
/// logs clamped at eps.
template <typename T>
BasicTensor<T> binary_cross_entropy(const BasicTensor<T>& target,
                                    const BasicTensor<T>& prediction);

/// Temperature-scaled cosine contrastive loss over paired rows of
/// `audio` [N,D] and `tags` [N,D], summed over anchors b:
///   -log( exp(s_bb/tau) / sum_{i in D_b} exp(s_bi/tau) )
/// where s is cosine similarity (norms floored at eps).
template <typename T>
BasicTensor<T> contrastive_loss(const BasicTensor<T>& audio, const BasicTensor<T>& tags,
                                double temperature,
                                ContrastiveDenominator denominator =
                                    ContrastiveDenominator::kExcludePositive);

/// Mean softmax cross-entropy of logits [B,K] against class ids.
template <typename T>
BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels);

/// Cosine similarity matrix [N,N] between rows; no autodiff.
std::vector<double> cosine_similarity_matrix(const Tensor& a, const Tensor& b);

enum class TrainMode { kAeC, kEC, kCnn };

std::string_view to_string(TrainMode mode);
TrainMode parse_mode(std::string_view text);

struct LossBreakdown {
  double audio = 0.0;        // L_a summed over the batch
  double tags = 0.0;         // L_t summed over the batch
  double contrastive = 0.0;  // L_xi
  double total = 0.0;

  nlohmann::json to_json() const;
};

/// Terms computed by the networks for one minibatch. Fields a mode does not
/// use may be left undefined.
struct BatchTerms {
  Tensor patches;          // X_a [B,1,P,P]
  Tensor reconstruction;   // Xhat_a
  Tensor tags;             // y_t [B,C]
  Tensor tag_reconstruction;  // yhat_t, or the CNN head's prediction in CNN mode
  Tensor audio_projection; // phi_a [B,D]
  Tensor tag_projection;   // phi_t [B,D]
};

struct TotalLoss {
  Tensor value;
  LossBreakdown breakdown;
};

/// AE-C: la*L_a + lt*L_t + lx*L_xi; E-C: lx*L_xi; CNN: BCE of the head.
TotalLoss total_loss(const BatchTerms& terms, const LossWeights& weights, TrainMode mode,
                     ContrastiveDenominator denominator = ContrastiveDenominator::kExcludePositive);

}  // namespace coala
