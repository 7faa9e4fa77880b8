// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/cca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "coala/parallel.hpp"
#include "coala/rng.hpp"
#include "coala/tensor.hpp"

namespace coala {

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::kMean: return "mean";
    case Statistic::kVar: return "var";
    case Statistic::kSkew: return "skew";
  }
  return "?";
}

std::string to_string(DescriptorFamily f) {
  switch (f) {
    case DescriptorFamily::kMfcc: return "mfcc";
    case DescriptorFamily::kChroma: return "chroma";
    case DescriptorFamily::kCentroid: return "centroid";
    case DescriptorFamily::kBandwidth: return "bandwidth";
  }
  return "?";
}

std::vector<double> stat(const Matrix& matrix, Statistic which) {
  if (matrix.cols == 0) throw std::invalid_argument("stat: no frames");
  if (which == Statistic::kSkew && matrix.cols < 3) {
    throw std::invalid_argument("stat: skew needs at least 3 frames, got " + std::to_string(matrix.cols));
  }
  std::vector<double> out(matrix.rows);
  const double n = static_cast<double>(matrix.cols);
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    const auto row = matrix.row(r);
    double mean = 0.0;
    for (float v : row) mean += v;
    mean /= n;
    if (which == Statistic::kMean) {
      out[r] = mean;
      continue;
    }
    double m2 = 0.0, m3 = 0.0;
    for (float v : row) {
      const double d = v - mean;
      m2 += d * d;
      m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (which == Statistic::kVar) {
      out[r] = m2;
    } else {
      // Relative guard: rounding leaves a tiny m2 on constant rows.
      const bool flat = m2 <= 1e-24 * std::max(1.0, mean * mean);
      out[r] = flat ? 0.0 : m3 / std::pow(m2, 1.5);
    }
  }
  return out;
}

namespace {

struct Basis {
  Eigen::MatrixXd u;  // orthonormal columns spanning the kept directions
  std::size_t dims = 0;
};

Basis orthonormal_basis(const Eigen::MatrixXd& m, double energy, double floor) {
  const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
  const Eigen::VectorXd s = svd.singularValues();
  std::size_t keep = static_cast<std::size_t>(m.cols());
  if (energy < 1.0) {
    const double total = s.squaredNorm();
    double acc = 0.0;
    keep = 0;
    while (keep < static_cast<std::size_t>(s.size()) && acc < energy * total) {
      acc += s(keep) * s(keep);
      ++keep;
    }
    keep = std::max<std::size_t>(keep, 1);
  }
  Basis b;
  b.dims = keep;
  const std::size_t available = std::min<std::size_t>(keep, s.size());
  std::size_t rank = 0;
  const double top = s.size() > 0 ? s(0) * s(0) : 0.0;
  while (rank < available && top > 0.0 && s(rank) * s(rank) > floor * top) ++rank;
  b.u = svd.matrixU().leftCols(rank);
  return b;
}

}  // namespace

CcaResult cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const CcaOptions& options) {
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("cca: row counts differ (" + std::to_string(x.rows()) + " vs " +
                                std::to_string(y.rows()) + ")");
  }
  if (x.cols() == 0 || y.cols() == 0) throw std::invalid_argument("cca: empty view");
  if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("cca: non-finite input");
  const Basis bx = orthonormal_basis(x, options.x_energy, options.eigen_floor);
  const Basis by = orthonormal_basis(y, options.y_energy, options.eigen_floor);
  const auto n = static_cast<std::size_t>(x.rows());
  if (n <= std::max(bx.dims, by.dims)) {
    throw std::invalid_argument("cca: " + std::to_string(n) + " samples for " + std::to_string(bx.dims) + " and " +
                                std::to_string(by.dims) +
                                " dimensions; add samples or reduce the views further");
  }
  CcaResult result;
  result.x_dims = bx.dims;
  result.y_dims = by.dims;
  if (bx.u.cols() == 0 || by.u.cols() == 0) return result;  // a constant view carries no correlation

  const Eigen::MatrixXd cross = bx.u.transpose() * by.u;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  const Eigen::VectorXd rho = svd.singularValues();
  for (Eigen::Index i = 0; i < rho.size(); ++i) result.correlations.push_back(std::clamp(rho(i), 0.0, 1.0));
  std::size_t k = result.correlations.size();
  if (options.top_k) k = std::min(k, std::max<std::size_t>(*options.top_k, 1));
  result.similarity = std::accumulate(result.correlations.begin(), result.correlations.begin() + k, 0.0) / k;
  result.similarity = std::clamp(result.similarity, 0.0, 1.0);
  return result;
}

double cca_similarity(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const CcaOptions& options) {
  return cca(x, y, options).similarity;
}

std::vector<double> permutation_null(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::size_t draws,
                                     std::uint64_t seed, const CcaOptions& options) {
  Rng rng(seed);
  std::vector<Eigen::Index> order(y.rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> out;
  Eigen::MatrixXd permuted(y.rows(), y.cols());
  for (std::size_t d = 0; d < draws; ++d) {
    rng.shuffle(std::span(order));
    for (Eigen::Index r = 0; r < y.rows(); ++r) permuted.row(r) = y.row(order[r]);
    out.push_back(cca_similarity(x, permuted, options));
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

ClipStatistics clip_statistics(const std::string& clip_id, const AcousticDescriptors& d) {
  ClipStatistics cs;
  cs.clip_id = clip_id;
  const Matrix* families[] = {&d.mfcc, &d.chroma, &d.centroid, &d.bandwidth};
  for (std::size_t f = 0; f < 4; ++f) {
    for (std::size_t s = 0; s < 3; ++s) cs.values[f][s] = stat(*families[f], kStatistics[s]);
  }
  return cs;
}

Eigen::MatrixXd statistic_matrix(const std::vector<ClipStatistics>& clips, DescriptorFamily family,
                                 Statistic which) {
  if (clips.size() < 2) throw std::invalid_argument("statistic matrix needs at least 2 clips");
  const auto f = static_cast<std::size_t>(family);
  const auto s = static_cast<std::size_t>(which);
  const std::size_t dims = clips.front().values[f][s].size();
  Eigen::MatrixXd m(clips.size(), dims);
  for (std::size_t r = 0; r < clips.size(); ++r) {
    const auto& v = clips[r].values[f][s];
    if (v.size() != dims) throw DimensionError("statistic matrix: inconsistent dimensionality for " + clips[r].clip_id);
    for (std::size_t c = 0; c < dims; ++c) {
      if (!std::isfinite(v[c])) throw std::invalid_argument("non-finite statistic for " + clips[r].clip_id);
      m(r, c) = v[c];
    }
  }
  return m;
}

CcaReport build_report(const std::vector<EmbeddingSet>& models, const std::vector<ClipStatistics>& stats,
                       const ReportOptions& options) {
  std::map<std::string, const ClipStatistics*> by_id;
  for (const auto& s : stats) by_id[s.clip_id] = &s;

  CcaReport report;
  for (const auto& model : models) {
    if (static_cast<std::size_t>(model.values.rows()) != model.clip_ids.size()) {
      throw DimensionError("embedding rows and clip ids differ for " + model.model);
    }
    std::vector<std::string> missing;
    std::map<std::string, int> seen;
    std::vector<ClipStatistics> aligned;
    for (const auto& id : model.clip_ids) {
      ++seen[id];
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        missing.push_back(id + " (no descriptors)");
      } else {
        aligned.push_back(*it->second);
      }
    }
    for (const auto& [id, ptr] : by_id) {
      if (!seen.contains(id)) missing.push_back(id + " (no embedding)");
    }
    if (!missing.empty()) {
      std::string msg = "clip sets differ for " + model.model + ":";
      for (const auto& m : missing) msg += "\n  " + m;
      throw std::invalid_argument(msg);
    }

    ModelCcaReport mr;
    mr.model = model.model;
    mr.clips = aligned.size();
    CcaOptions self_opts{options.embedding_energy, options.embedding_energy, 1e-6, options.top_k};
    const CcaResult self = cca(model.values, model.values, self_opts);
    mr.self_similarity = self.similarity;
    mr.embedding_dims = self.x_dims;

    Rng rng(options.seed);
    Eigen::MatrixXd noise(model.values.rows(), 1);
    for (Eigen::Index r = 0; r < noise.rows(); ++r) noise(r, 0) = rng.normal();
    const CcaOptions opts{options.embedding_energy, 1.0, 1e-6, options.top_k};
    mr.noise_similarity = cca_similarity(model.values, noise, opts);

    mr.cells.resize(kDescriptorFamilies.size() * kStatistics.size());
    parallel_for(mr.cells.size(), options.threads, [&](std::size_t i) {
      CcaCell& cell = mr.cells[i];
      cell.family = kDescriptorFamilies[i / kStatistics.size()];
      cell.statistic = kStatistics[i % kStatistics.size()];
      const CcaResult r = cca(model.values, statistic_matrix(aligned, cell.family, cell.statistic), opts);
      cell.similarity = r.similarity;
      cell.components = r.correlations.size();
    });
    report.models.push_back(std::move(mr));
  }
  return report;
}

void CcaReport::write_text(std::ostream& out) const {
  char line[160];
  for (const auto& m : models) {
    std::snprintf(line, sizeof line, "%s  (%zu clips, %zu embedding dims, self %.4f, noise %.4f)\n",
                  m.model.c_str(), m.clips, m.embedding_dims, m.self_similarity, m.noise_similarity);
    out << line;
    std::snprintf(line, sizeof line, "  %-10s %8s %8s %8s\n", "", "mean", "var", "skew");
    out << line;
    for (std::size_t f = 0; f < kDescriptorFamilies.size(); ++f) {
      std::snprintf(line, sizeof line, "  %-10s %8.4f %8.4f %8.4f\n", to_string(kDescriptorFamilies[f]).c_str(),
                    m.cells[f * 3].similarity, m.cells[f * 3 + 1].similarity, m.cells[f * 3 + 2].similarity);
      out << line;
    }
  }
}

void CcaReport::write_csv(std::ostream& out) const {
  out << "model,descriptor,statistic,similarity,components\n";
  char line[64];
  for (const auto& m : models) {
    for (const auto& c : m.cells) {
      std::snprintf(line, sizeof line, "%.6f,%zu\n", c.similarity, c.components);
      out << m.model << ',' << to_string(c.family) << ',' << to_string(c.statistic) << ',' << line;
    }
    std::snprintf(line, sizeof line, "%.6f,%zu\n", m.self_similarity, m.embedding_dims);
    out << m.model << ",embedding,self," << line;
    std::snprintf(line, sizeof line, "%.6f,1\n", m.noise_similarity);
    out << m.model << ",noise,gaussian," << line;
  }
}

}  // namespace coala
