// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "coala/objectives.hpp"
#include "gradcheck.hpp"

namespace coala {
namespace {

using testing::DTensor;
using testing::gradcheck;
using testing::random_tensor;

constexpr int kSeeds = 20;

// Direct evaluation of the contrastive sum in double precision, without
// log-sum-exp, for moderate similarities.
double contrastive_reference(const DTensor& a, const DTensor& t, double tau, bool include) {
  const std::size_t n = a.dim(0), d = a.dim(1);
  auto sim = [&](std::size_t i, std::size_t j) {
    double dot = 0, na = 0, nt = 0;
    for (std::size_t k = 0; k < d; ++k) {
      dot += a.data()[i * d + k] * t.data()[j * d + k];
      na += a.data()[i * d + k] * a.data()[i * d + k];
      nt += t.data()[j * d + k] * t.data()[j * d + k];
    }
    return dot / (std::max(std::sqrt(na), kLossEpsilon) * std::max(std::sqrt(nt), kLossEpsilon));
  };
  double total = 0;
  for (std::size_t b = 0; b < n; ++b) {
    double denom = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == b && !include) continue;
      denom += std::exp(sim(b, i) / tau);
    }
    total += -std::log(std::exp(sim(b, b) / tau) / denom);
  }
  return total;
}

TEST(KlReconstruction, IdentityIsZero) {
  Rng rng(1);
  DTensor x = random_tensor({4, 1, 6, 6}, rng, 0.0, 1.0, false);
  EXPECT_LE(std::abs(kl_reconstruction(x, x).item()), 1e-5);
}

TEST(KlReconstruction, HandValue) {
  DTensor x({1}, {0.8});
  DTensor xh({1}, {0.4});
  const double eps = kLossEpsilon;
  const double expected = 0.8 * std::log((0.8 + eps) / (0.4 + eps)) - 0.8 + 0.4;
  EXPECT_NEAR(kl_reconstruction(x, xh).item(), expected, 1e-12);
  EXPECT_NEAR(kl_reconstruction(x, xh).item(), 0.8 * std::log(2.0) - 0.4, 1e-6);
}

TEST(KlReconstruction, ZeroTargetContributesReconstruction) {
  DTensor x({3}, {0.0, 0.0, 0.0});
  DTensor xh({3}, {0.1, 0.2, 0.3});
  EXPECT_NEAR(kl_reconstruction(x, xh).item(), 0.6, 1e-12);
}

TEST(KlReconstruction, NegativeInputRejected) {
  DTensor x({2}, {0.5, -0.1});
  DTensor xh({2}, {0.5, 0.5});
  EXPECT_THROW(kl_reconstruction(x, xh), std::domain_error);
  EXPECT_THROW(kl_reconstruction(xh, x), std::domain_error);
}

TEST(KlReconstruction, IncreasesAwayFromTarget) {
  Rng rng(5);
  DTensor x = random_tensor({16}, rng, 0.1, 0.9, false);
  const double base = kl_reconstruction(x, x).item();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    for (double delta : {-0.05, 0.05}) {
      std::vector<double> v(x.data().begin(), x.data().end());
      v[i] += delta;
      EXPECT_GT(kl_reconstruction(x, DTensor({16}, v)).item(), base);
    }
  }
}

TEST(BinaryCrossEntropy, HandValues) {
  EXPECT_NEAR(binary_cross_entropy(DTensor({1}, {1.0}), DTensor({1}, {0.5})).item(),
              std::log(2.0), 1e-6);
  EXPECT_NEAR(binary_cross_entropy(DTensor({1}, {0.0}), DTensor({1}, {0.5})).item(),
              std::log(2.0), 1e-6);
  EXPECT_NEAR(binary_cross_entropy(DTensor({2}, {1.0, 0.0}), DTensor({2}, {1.0, 0.0})).item(),
              0.0, 1e-6);
}

TEST(Contrastive, HandCaseAsWritten) {
  DTensor a({2, 2}, {1, 0, 0, 1});
  DTensor t({2, 2}, {1, 0, 0, 1});
  EXPECT_NEAR(contrastive_loss(a, t, 0.1).item(), -20.0, 1e-3);
}

TEST(Contrastive, HandCaseIncludingPositive) {
  DTensor a({2, 2}, {1, 0, 0, 1});
  const double expected = 2.0 * std::log1p(std::exp(-10.0));
  EXPECT_NEAR(contrastive_loss(a, a, 0.1, ContrastiveDenominator::kIncludePositive).item(),
              expected, 1e-9);
}

TEST(Contrastive, IdenticalRowsClosedForm) {
  for (std::size_t n : {2u, 3u, 8u}) {
    std::vector<double> v(n * 4);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 4; ++k) v[i * 4 + k] = 0.3 + 0.1 * k;
    DTensor a({n, 4}, v);
    EXPECT_NEAR(contrastive_loss(a, a, 0.1).item(), n * std::log(double(n - 1)), 1e-8);
  }
}

TEST(Contrastive, MatchesDirectEvaluation) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(100 + seed);
    DTensor a = random_tensor({6, 5}, rng, 0.0, 1.0, false);
    DTensor t = random_tensor({6, 5}, rng, 0.0, 1.0, false);
    for (bool include : {false, true}) {
      auto mode = include ? ContrastiveDenominator::kIncludePositive
                          : ContrastiveDenominator::kExcludePositive;
      EXPECT_NEAR(contrastive_loss(a, t, 0.1, mode).item(),
                  contrastive_reference(a, t, 0.1, include), 1e-9);
    }
  }
}

TEST(Contrastive, StableAtSmallTemperature) {
  Rng rng(9);
  DTensor a = random_tensor({8, 4}, rng, 0.0, 1.0, false);
  DTensor t = random_tensor({8, 4}, rng, 0.0, 1.0, false);
  EXPECT_TRUE(std::isfinite(contrastive_loss(a, t, 1e-4).item()));
}

TEST(Contrastive, RowScaleInvariance) {
  Rng rng(11);
  DTensor a = random_tensor({5, 7}, rng, 0.0, 1.0, false);
  DTensor t = random_tensor({5, 7}, rng, 0.0, 1.0, false);
  const double base = contrastive_loss(a, t, 0.1).item();
  std::vector<double> scaled(a.data().begin(), a.data().end());
  for (std::size_t k = 0; k < 7; ++k) scaled[2 * 7 + k] *= 37.5;
  std::vector<double> tscaled(t.data().begin(), t.data().end());
  for (std::size_t k = 0; k < 7; ++k) tscaled[4 * 7 + k] *= 0.02;
  EXPECT_NEAR(contrastive_loss(DTensor({5, 7}, scaled), DTensor({5, 7}, tscaled), 0.1).item(),
              base, 1e-5);
}

TEST(Contrastive, RequiresTwoRows) {
  DTensor a({1, 3}, {1, 2, 3});
  EXPECT_THROW(contrastive_loss(a, a, 0.1), std::invalid_argument);
}

TEST(Losses, ConsistentRowPermutationInvariance) {
  Rng rng(21);
  const std::size_t n = 6, d = 4;
  DTensor a = random_tensor({n, d}, rng, 0.0, 1.0, false);
  DTensor t = random_tensor({n, d}, rng, 0.0, 1.0, false);
  DTensor xh = random_tensor({n, d}, rng, 0.05, 0.95, false);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span(perm));
  auto permute = [&](const DTensor& m) {
    std::vector<double> v(m.numel());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) v[i * d + k] = m.data()[perm[i] * d + k];
    return DTensor(m.shape(), v);
  };
  EXPECT_NEAR(contrastive_loss(permute(a), permute(t), 0.1).item(),
              contrastive_loss(a, t, 0.1).item(), 1e-9);
  EXPECT_NEAR(kl_reconstruction(permute(a), permute(xh)).item(),
              kl_reconstruction(a, xh).item(), 1e-9);
  EXPECT_NEAR(binary_cross_entropy(permute(a), permute(xh)).item(),
              binary_cross_entropy(a, xh).item(), 1e-9);
}

TEST(LossGradients, KlReconstruction) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed);
    std::vector<DTensor> in{random_tensor({3, 1, 4, 4}, rng, 0.0, 1.0, false),
                            random_tensor({3, 1, 4, 4}, rng, 0.05, 0.95)};
    auto r = gradcheck([](auto& v) { return kl_reconstruction(v[0], v[1]); }, in);
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(LossGradients, BinaryCrossEntropy) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed);
    std::vector<double> y(12);
    for (double& v : y) v = rng.below(2);
    std::vector<DTensor> in{DTensor({3, 4}, y), random_tensor({3, 4}, rng, 0.05, 0.95)};
    auto r = gradcheck([](auto& v) { return binary_cross_entropy(v[0], v[1]); }, in);
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(LossGradients, Contrastive) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    for (auto mode : {ContrastiveDenominator::kExcludePositive,
                      ContrastiveDenominator::kIncludePositive}) {
      Rng rng(seed);
      std::vector<DTensor> in{random_tensor({5, 6}, rng, 0.0, 1.0),
                              random_tensor({5, 6}, rng, 0.0, 1.0)};
      auto r = gradcheck([&](auto& v) { return contrastive_loss(v[0], v[1], 0.1, mode); }, in);
      EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
    }
  }
}

TEST(LossGradients, SoftmaxCrossEntropy) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed);
    std::vector<int> labels{0, 2, 1, 2};
    std::vector<DTensor> in{random_tensor({4, 3}, rng, -2.0, 2.0)};
    auto r = gradcheck([&](auto& v) { return softmax_cross_entropy(v[0], labels); }, in);
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
  DTensor logits = DTensor::zeros({2, 4});
  std::vector<int> labels{1, 3};
  EXPECT_NEAR(softmax_cross_entropy(logits, labels).item(), std::log(4.0), 1e-12);
}

BatchTerms hand_terms() {
  BatchTerms t;
  t.patches = Tensor({2, 1}, {0.8f, 0.5f});
  t.reconstruction = Tensor({2, 1}, {0.4f, 0.5f});
  t.tags = Tensor({2, 1}, {1.0f, 0.0f});
  t.tag_reconstruction = Tensor({2, 1}, {0.5f, 0.5f});
  t.audio_projection = Tensor({2, 2}, {1, 0, 0, 1});
  t.tag_projection = Tensor({2, 2}, {1, 0, 0, 1});
  return t;
}

TEST(TotalLoss, ECModeComposition) {
  auto r = total_loss(hand_terms(), LossWeights{}, TrainMode::kEC);
  EXPECT_NEAR(r.value.item(), -200.0, 1e-2);
  EXPECT_NEAR(r.breakdown.contrastive, -20.0, 1e-3);
}

TEST(TotalLoss, ZeroWeightsGiveZero) {
  LossWeights w{0.0, 0.0, 0.0, 0.1};
  EXPECT_EQ(total_loss(hand_terms(), w, TrainMode::kAeC).value.item(), 0.0f);
  EXPECT_EQ(total_loss(hand_terms(), w, TrainMode::kEC).value.item(), 0.0f);
}

TEST(TotalLoss, AeCIsWeightedSumOfTerms) {
  BatchTerms t = hand_terms();
  LossWeights w;
  auto r = total_loss(t, w, TrainMode::kAeC);
  const double la = kl_reconstruction(t.patches, t.reconstruction).item();
  const double lt = binary_cross_entropy(t.tags, t.tag_reconstruction).item();
  const double lx = contrastive_loss(t.audio_projection, t.tag_projection, 0.1).item();
  EXPECT_NEAR(r.value.item(), 5 * la + 5 * lt + 10 * lx, 1e-4);
  auto j = r.breakdown.to_json();
  EXPECT_NEAR(j["L_a"].get<double>(), la, 1e-6);
  EXPECT_NEAR(j["L_t"].get<double>(), lt, 1e-6);
  EXPECT_NEAR(j["L_xi"].get<double>(), lx, 1e-6);
}

TEST(TotalLoss, CnnModeIsBceOnly) {
  BatchTerms t = hand_terms();
  auto r = total_loss(t, LossWeights{}, TrainMode::kCnn);
  EXPECT_NEAR(r.value.item(), 2 * std::log(2.0), 1e-5);
}

TEST(LossWeights, ValidationRejectsBadValues) {
  EXPECT_THROW((LossWeights{-1, 5, 10, 0.1}.validate()), std::invalid_argument);
  EXPECT_THROW((LossWeights{5, 5, 10, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(LossWeights{}.validate());
}

TEST(Modes, ParseRoundTrip) {
  for (auto m : {TrainMode::kAeC, TrainMode::kEC, TrainMode::kCnn})
    EXPECT_EQ(parse_mode(to_string(m)), m);
  for (auto d : {ContrastiveDenominator::kExcludePositive,
                 ContrastiveDenominator::kIncludePositive})
    EXPECT_EQ(parse_denominator(to_string(d)), d);
  EXPECT_THROW(parse_mode("vae"), std::invalid_argument);
}

}  // namespace
}  // namespace coala
