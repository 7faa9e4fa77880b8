// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coala/audio.hpp"

namespace coala {

enum class Statistic { kMean, kVar, kSkew };
enum class DescriptorFamily { kMfcc, kChroma, kCentroid, kBandwidth };

inline constexpr std::array<Statistic, 3> kStatistics{Statistic::kMean, Statistic::kVar, Statistic::kSkew};
inline constexpr std::array<DescriptorFamily, 4> kDescriptorFamilies{
    DescriptorFamily::kMfcc, DescriptorFamily::kChroma, DescriptorFamily::kCentroid,
    DescriptorFamily::kBandwidth};

std::string to_string(Statistic s);
std::string to_string(DescriptorFamily f);

/// Per-row statistic over the columns (frames) of a dims x frames matrix.
/// Population moments; skew of a zero-variance row is 0.
std::vector<double> stat(const Matrix& matrix, Statistic which);

struct CcaOptions {
  /// Fraction of spectral energy kept per side before CCA; 1 disables.
  double x_energy = 1.0;
  double y_energy = 1.0;
  /// Whitening discards directions whose covariance eigenvalue is below
  /// this fraction of the largest.
  double eigen_floor = 1e-6;
  /// Average only the k largest correlations.
  std::optional<std::size_t> top_k;
};

struct CcaResult {
  double similarity = 0.0;
  std::vector<double> correlations;  // descending
  std::size_t x_dims = 0;  // after energy reduction
  std::size_t y_dims = 0;
};

/// Canonical correlations between the columns of X (n x p) and Y (n x q).
/// Throws std::invalid_argument unless n > max(p', q') after reduction.
CcaResult cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const CcaOptions& options = {});
double cca_similarity(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const CcaOptions& options = {});

/// Similarities of X against row-permuted copies of Y.
std::vector<double> permutation_null(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                     std::size_t draws, std::uint64_t seed,
                                     const CcaOptions& options = {});
/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// mean/var/skew of each descriptor family over frames, for one clip.
struct ClipStatistics {
  std::string clip_id;
  std::array<std::array<std::vector<double>, 3>, 4> values;  // [family][statistic]
};
ClipStatistics clip_statistics(const std::string& clip_id, const AcousticDescriptors& d);

/// Clip-aligned rows: family x statistic -> n x dims.
Eigen::MatrixXd statistic_matrix(const std::vector<ClipStatistics>& clips, DescriptorFamily family,
                                 Statistic which);

struct CcaCell {
  DescriptorFamily family;
  Statistic statistic;
  double similarity = 0.0;
  std::size_t components = 0;
};

struct ModelCcaReport {
  std::string model;
  std::size_t clips = 0;
  std::size_t embedding_dims = 0;  // after energy reduction
  double self_similarity = 0.0;
  double noise_similarity = 0.0;  // against one Gaussian column
  std::vector<CcaCell> cells;     // 4 x 3, family-major
};

struct CcaReport {
  std::vector<ModelCcaReport> models;
  void write_text(std::ostream& out) const;
  void write_csv(std::ostream& out) const;
};

struct EmbeddingSet {
  std::string model;
  std::vector<std::string> clip_ids;
  Eigen::MatrixXd values;  // clips x dims
};

struct ReportOptions {
  /// Energy kept on the embedding side; descriptors are used unreduced.
  double embedding_energy = 0.99;
  std::optional<std::size_t> top_k;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Errors with the offending ids when an embedding set and the statistics
/// cover different clips. Rows are matched by clip id.
CcaReport build_report(const std::vector<EmbeddingSet>& models, const std::vector<ClipStatistics>& stats,
                       const ReportOptions& options = {});

}  // namespace coala
