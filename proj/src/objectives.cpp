// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coala/ops.hpp"

namespace coala {

void LossWeights::validate() const {
  if (audio < 0.0 || tags < 0.0 || contrastive < 0.0) {
    throw std::invalid_argument("loss weights must be nonnegative");
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
}

std::string_view to_string(ContrastiveDenominator d) {
  return d == ContrastiveDenominator::kExcludePositive ? "exclude-positive" : "include-positive";
}

ContrastiveDenominator parse_denominator(std::string_view text) {
  if (text == "exclude-positive") return ContrastiveDenominator::kExcludePositive;
  if (text == "include-positive") return ContrastiveDenominator::kIncludePositive;
  throw std::invalid_argument("unknown contrastive denominator '" + std::string(text) +
                              "' (expected exclude-positive or include-positive)");
}

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kAeC: return "ae-c";
    case TrainMode::kEC: return "e-c";
    case TrainMode::kCnn: return "cnn";
  }
  return "unknown";
}

TrainMode parse_mode(std::string_view text) {
  if (text == "ae-c" || text == "AE-C") return TrainMode::kAeC;
  if (text == "e-c" || text == "E-C") return TrainMode::kEC;
  if (text == "cnn" || text == "CNN") return TrainMode::kCnn;
  throw std::invalid_argument("unknown training mode '" + std::string(text) +
                              "' (expected ae-c, e-c or cnn)");
}

nlohmann::json LossBreakdown::to_json() const {
  return {{"L_a", audio}, {"L_t", tags}, {"L_xi", contrastive}, {"total", total}};
}

template <typename T>
BasicTensor<T> kl_reconstruction(const BasicTensor<T>& target,
                                 const BasicTensor<T>& reconstruction) {
  if (target.shape() != reconstruction.shape()) {
    throw DimensionError("kl_reconstruction: target " + shape_to_string(target.shape()) +
                         " vs reconstruction " + shape_to_string(reconstruction.shape()));
  }
  auto x = target.data();
  auto xhat = reconstruction.data();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < T(0) || xhat[i] < T(0)) {
      throw std::domain_error("kl_reconstruction: negative input at flat index " +
                              std::to_string(i));
    }
    const double xi = x[i];
    const double ri = xhat[i];
    total += xi * std::log((xi + kLossEpsilon) / (ri + kLossEpsilon)) - xi + ri;
  }
  auto target_node = target.node();
  auto recon_node = reconstruction.node();
  return make_result<T>(
      "kl_reconstruction", Shape{1}, std::vector<T>{static_cast<T>(total)}, {recon_node},
      [target_node, recon_node](TensorNode<T>& self) {
        auto& d = recon_node->ensure_grad();
        const T g = self.grad[0];
        for (std::size_t i = 0; i < d.size(); ++i) {
          const T xi = target_node->data[i];
          const T ri = recon_node->data[i];
          d[i] += g * (T(1) - xi / (ri + static_cast<T>(kLossEpsilon)));
        }
      });
}

template <typename T>
BasicTensor<T> binary_cross_entropy(const BasicTensor<T>& target,
                                    const BasicTensor<T>& prediction) {
  if (target.shape() != prediction.shape()) {
    throw DimensionError("binary_cross_entropy: target " + shape_to_string(target.shape()) +
                         " vs prediction " + shape_to_string(prediction.shape()));
  }
  auto y = target.data();
  auto p = prediction.data();
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double pi = std::max<double>(p[i], kLossEpsilon);
    const double qi = std::max<double>(1.0 - p[i], kLossEpsilon);
    total -= y[i] * std::log(pi) + (1.0 - y[i]) * std::log(qi);
  }
  auto target_node = target.node();
  auto pred_node = prediction.node();
  return make_result<T>(
      "binary_cross_entropy", Shape{1}, std::vector<T>{static_cast<T>(total)}, {pred_node},
      [target_node, pred_node](TensorNode<T>& self) {
        auto& d = pred_node->ensure_grad();
        const T g = self.grad[0];
        const T eps = static_cast<T>(kLossEpsilon);
        for (std::size_t i = 0; i < d.size(); ++i) {
          const T yi = target_node->data[i];
          const T pi = pred_node->data[i];
          T grad = T(0);
          if (pi > eps) grad -= yi / pi;
          if (T(1) - pi > eps) grad += (T(1) - yi) / (T(1) - pi);
          d[i] += g * grad;
        }
      });
}

namespace {

struct NormalizedRows {
  std::vector<double> unit;   // N x D
  std::vector<double> norms;  // floored at eps
  std::vector<bool> floored;
};

template <typename T>
NormalizedRows normalize_rows(std::span<const T> values, std::size_t rows, std::size_t cols) {
  NormalizedRows out{std::vector<double>(rows * cols), std::vector<double>(rows),
                     std::vector<bool>(rows)};
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sq += double(values[r * cols + c]) * values[r * cols + c];
    const double norm = std::sqrt(sq);
    out.floored[r] = norm <= kLossEpsilon;
    out.norms[r] = std::max(norm, kLossEpsilon);
    for (std::size_t c = 0; c < cols; ++c) out.unit[r * cols + c] = values[r * cols + c] / out.norms[r];
  }
  return out;
}

// Gradient of row-normalization: d a = (d u - u (u . d u)) / |a|.
template <typename T>
void normalize_backward(const NormalizedRows& rows, const std::vector<double>& d_unit,
                        std::size_t n, std::size_t d, std::vector<T>& grad) {
  for (std::size_t r = 0; r < n; ++r) {
    double dot = 0.0;
    if (!rows.floored[r]) {
      for (std::size_t c = 0; c < d; ++c) dot += rows.unit[r * d + c] * d_unit[r * d + c];
    }
    for (std::size_t c = 0; c < d; ++c) {
      grad[r * d + c] += static_cast<T>(
          (d_unit[r * d + c] - rows.unit[r * d + c] * dot) / rows.norms[r]);
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> contrastive_loss(const BasicTensor<T>& audio, const BasicTensor<T>& tags,
                                double temperature, ContrastiveDenominator denominator) {
  if (audio.rank() != 2 || audio.shape() != tags.shape()) {
    throw DimensionError("contrastive_loss: projections must be equal [N,D], got " +
                         shape_to_string(audio.shape()) + " and " + shape_to_string(tags.shape()));
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("contrastive_loss: temperature must be > 0");
  const std::size_t n = audio.dim(0);
  const std::size_t d = audio.dim(1);
  if (n < 2) {
    throw std::invalid_argument("contrastive_loss: batch of " + std::to_string(n) +
                                " leaves the denominator empty (need at least 2)");
  }
  const bool include_positive = denominator == ContrastiveDenominator::kIncludePositive;

  auto ua = std::make_shared<NormalizedRows>(normalize_rows(audio.data(), n, d));
  auto ut = std::make_shared<NormalizedRows>(normalize_rows(tags.data(), n, d));

  // probs[b][i]: softmax over the denominator set of anchor b.
  auto probs = std::make_shared<std::vector<double>>(n * n, 0.0);
  std::vector<double> logits(n * n);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += ua->unit[b * d + c] * ut->unit[i * d + c];
      logits[b * n + i] = dot / temperature;
    }
  }
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (i != b || include_positive) peak = std::max(peak, logits[b * n + i]);
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != b || include_positive) {
        (*probs)[b * n + i] = std::exp(logits[b * n + i] - peak);
        mass += (*probs)[b * n + i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) (*probs)[b * n + i] /= mass;
    total += -logits[b * n + b] + peak + std::log(mass);
  }

  auto a_node = audio.node();
  auto t_node = tags.node();
  return make_result<T>(
      "contrastive_loss", Shape{1}, std::vector<T>{static_cast<T>(total)}, {a_node, t_node},
      [a_node, t_node, ua, ut, probs, n, d, temperature](TensorNode<T>& self) {
        const double g = self.grad[0];
        // dL/dlogit[b][i] = p_bi - [i == b]
        std::vector<double> dlogits(n * n);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t i = 0; i < n; ++i) {
            dlogits[b * n + i] = g * ((*probs)[b * n + i] - (i == b ? 1.0 : 0.0)) / temperature;
          }
        }
        if (a_node->requires_grad) {
          std::vector<double> d_unit(n * d, 0.0);
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t i = 0; i < n; ++i) {
              const double w = dlogits[b * n + i];
              for (std::size_t c = 0; c < d; ++c) d_unit[b * d + c] += w * ut->unit[i * d + c];
            }
          }
          normalize_backward(*ua, d_unit, n, d, a_node->ensure_grad());
        }
        if (t_node->requires_grad) {
          std::vector<double> d_unit(n * d, 0.0);
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t i = 0; i < n; ++i) {
              const double w = dlogits[b * n + i];
              for (std::size_t c = 0; c < d; ++c) d_unit[i * d + c] += w * ua->unit[b * d + c];
            }
          }
          normalize_backward(*ut, d_unit, n, d, t_node->ensure_grad());
        }
      });
}

template <typename T>
BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("softmax_cross_entropy: logits " + shape_to_string(logits.shape()) +
                         " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  auto z = logits.data();
  auto probs = std::make_shared<std::vector<double>>(batch * classes);
  auto targets = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                              " outside [0," + std::to_string(classes) + ")");
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < classes; ++k) peak = std::max<double>(peak, z[b * classes + k]);
    double mass = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      (*probs)[b * classes + k] = std::exp(z[b * classes + k] - peak);
      mass += (*probs)[b * classes + k];
    }
    for (std::size_t k = 0; k < classes; ++k) (*probs)[b * classes + k] /= mass;
    total += peak + std::log(mass) - z[b * classes + static_cast<std::size_t>(label)];
  }
  auto node = logits.node();
  return make_result<T>(
      "softmax_cross_entropy", Shape{1}, std::vector<T>{static_cast<T>(total / double(batch))},
      {node}, [node, probs, targets, batch, classes](TensorNode<T>& self) {
        auto& dz = node->ensure_grad();
        const double g = self.grad[0] / static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t k = 0; k < classes; ++k) {
            const double onehot = static_cast<int>(k) == (*targets)[b] ? 1.0 : 0.0;
            dz[b * classes + k] += static_cast<T>(g * ((*probs)[b * classes + k] - onehot));
          }
        }
      });
}

std::vector<double> cosine_similarity_matrix(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw DimensionError("cosine_similarity_matrix: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  const auto ua = normalize_rows(a.data(), a.dim(0), a.dim(1));
  const auto ub = normalize_rows(b.data(), b.dim(0), b.dim(1));
  const std::size_t d = a.dim(1);
  std::vector<double> sims(a.dim(0) * b.dim(0));
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < b.dim(0); ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += ua.unit[i * d + c] * ub.unit[j * d + c];
      sims[i * b.dim(0) + j] = dot;
    }
  }
  return sims;
}

TotalLoss total_loss(const BatchTerms& terms, const LossWeights& weights, TrainMode mode,
                     ContrastiveDenominator denominator) {
  weights.validate();
  TotalLoss result;
  std::vector<Tensor> parts;
  std::vector<double> coefficients;
  switch (mode) {
    case TrainMode::kAeC: {
      Tensor la = kl_reconstruction(terms.patches, terms.reconstruction);
      Tensor lt = binary_cross_entropy(terms.tags, terms.tag_reconstruction);
      Tensor lx = contrastive_loss(terms.audio_projection, terms.tag_projection,
                                   weights.temperature, denominator);
      result.breakdown.audio = la.item();
      result.breakdown.tags = lt.item();
      result.breakdown.contrastive = lx.item();
      parts = {la, lt, lx};
      coefficients = {weights.audio, weights.tags, weights.contrastive};
      break;
    }
    case TrainMode::kEC: {
      Tensor lx = contrastive_loss(terms.audio_projection, terms.tag_projection,
                                   weights.temperature, denominator);
      result.breakdown.contrastive = lx.item();
      parts = {lx};
      coefficients = {weights.contrastive};
      break;
    }
    case TrainMode::kCnn: {
      Tensor lt = binary_cross_entropy(terms.tags, terms.tag_reconstruction);
      result.breakdown.tags = lt.item();
      parts = {lt};
      coefficients = {1.0};
      break;
    }
  }
  result.value = weighted_sum(parts, coefficients);
  result.breakdown.total = result.value.item();
  return result;
}

#define COALA_INSTANTIATE_LOSSES(T)                                                           \
  template BasicTensor<T> kl_reconstruction(const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> binary_cross_entropy(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> contrastive_loss(const BasicTensor<T>&, const BasicTensor<T>&,      \
                                           double, ContrastiveDenominator);                   \
  template BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>&, std::span<const int>);

COALA_INSTANTIATE_LOSSES(float)
COALA_INSTANTIATE_LOSSES(double)

}  // namespace coala
