// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "coala/cca.hpp"
#include "coala/rng.hpp"

namespace coala {
namespace {

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index p, Rng& rng) {
  Eigen::MatrixXd m(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) m(i, j) = rng.normal();
  return m;
}

Matrix row_matrix(std::vector<float> v) {
  Matrix m(1, v.size());
  m.values = std::move(v);
  return m;
}

TEST(Stat, HandMoments) {
  const Matrix m = row_matrix({0, 0, 0, 1});
  EXPECT_DOUBLE_EQ(stat(m, Statistic::kMean)[0], 0.25);
  EXPECT_DOUBLE_EQ(stat(m, Statistic::kVar)[0], 0.1875);
  // m3 = 0.140625, m2^1.5 = 0.0811899
  EXPECT_NEAR(stat(m, Statistic::kSkew)[0], 1.1547005, 1e-6);
  EXPECT_NEAR(stat(row_matrix({-1, 0, 1}), Statistic::kSkew)[0], 0.0, 1e-12);
  EXPECT_EQ(stat(row_matrix({2, 2, 2}), Statistic::kVar)[0], 0.0);
  EXPECT_EQ(stat(row_matrix({0.1f, 0.1f, 0.1f, 0.1f}), Statistic::kSkew)[0], 0.0);
  EXPECT_THROW(stat(row_matrix({1, 2}), Statistic::kSkew), std::invalid_argument);
  EXPECT_NO_THROW(stat(row_matrix({1, 2}), Statistic::kVar));
}

TEST(Cca, SelfAndAffineInvariance) {
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd x = gaussian(200, 6, rng);
    EXPECT_NEAR(cca_similarity(x, x), 1.0, 1e-6);
    Eigen::MatrixXd a = gaussian(6, 6, rng);
    a += 3.0 * Eigen::MatrixXd::Identity(6, 6);
    const Eigen::RowVectorXd b = gaussian(1, 6, rng);
    const Eigen::MatrixXd y = (x * a).rowwise() + b;
    EXPECT_NEAR(cca_similarity(x, y), 1.0, 1e-6);
  }
}

TEST(Cca, Symmetric) {
  Rng rng(2);
  const Eigen::MatrixXd x = gaussian(150, 4, rng);
  Eigen::MatrixXd y = gaussian(150, 3, rng);
  y.col(0) += x.col(1);
  EXPECT_NEAR(cca_similarity(x, y), cca_similarity(y, x), 1e-6);
  CcaOptions reduced;
  reduced.x_energy = reduced.y_energy = 0.9;
  EXPECT_NEAR(cca_similarity(x, y, reduced), cca_similarity(y, x, reduced), 1e-6);
}

TEST(Cca, IndependentNoiseIsLow) {
  Rng rng(3);
  const Eigen::MatrixXd x = gaussian(2000, 5, rng), y = gaussian(2000, 5, rng);
  const double s = cca_similarity(x, y);
  EXPECT_LT(s, 0.15);
  const auto null = permutation_null(x, y, 50, 4);
  EXPECT_LT(s, quantile(null, 1.0) + 0.05);
}

// One shared direction among otherwise independent columns: the top
// correlation is 1 and the rest follow the noise; cross-checked against the
// eigenvalues of Cxx^-1 Cxy Cyy^-1 Cyx.
TEST(Cca, ConstructedCaseMatchesDirectSolve) {
  Rng rng(5);
  const Eigen::MatrixXd x = gaussian(300, 3, rng);
  Eigen::MatrixXd y = gaussian(300, 3, rng);
  y.col(0) = x.col(0);
  const CcaResult r = cca(x, y);
  ASSERT_EQ(r.correlations.size(), 3u);
  EXPECT_NEAR(r.correlations[0], 1.0, 1e-9);

  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
  const Eigen::MatrixXd cxx = xc.transpose() * xc, cyy = yc.transpose() * yc, cxy = xc.transpose() * yc;
  const Eigen::MatrixXd m = cxx.inverse() * cxy * cyy.inverse() * cxy.transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  std::vector<double> rho;
  for (int i = 0; i < 3; ++i) rho.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i).real())));
  std::sort(rho.rbegin(), rho.rend());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.correlations[i], rho[i], 1e-8);
  const double mean = (rho[0] + rho[1] + rho[2]) / 3.0;
  EXPECT_NEAR(r.similarity, mean, 1e-8);
  EXPECT_GT(r.similarity, 1.0 / 3.0);
  EXPECT_LT(r.similarity, 0.5);

  CcaOptions top;
  top.top_k = 1;
  EXPECT_NEAR(cca_similarity(x, y, top), 1.0, 1e-9);
}

TEST(Cca, TooFewSamplesIsAnError) {
  Rng rng(6);
  const Eigen::MatrixXd x = gaussian(10, 10, rng), y = gaussian(10, 2, rng);
  EXPECT_THROW(cca(x, y), std::invalid_argument);
  CcaOptions reduced;
  reduced.x_energy = 0.5;
  EXPECT_NO_THROW(cca(x, y, reduced));
}

TEST(Cca, ConstantViewGivesZero) {
  Rng rng(7);
  const Eigen::MatrixXd x = gaussian(50, 3, rng);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(50, 1, 2.0);
  EXPECT_EQ(cca_similarity(x, y), 0.0);
}

TEST(Report, GridAndMismatch) {
  Rng rng(8);
  std::vector<ClipStatistics> stats;
  EmbeddingSet emb{"toy", {}, gaussian(40, 6, rng)};
  for (int i = 0; i < 40; ++i) {
    ClipStatistics cs;
    cs.clip_id = "c" + std::to_string(i);
    const std::size_t dims[] = {20, 12, 1, 1};
    for (int f = 0; f < 4; ++f)
      for (int s = 0; s < 3; ++s)
        for (std::size_t d = 0; d < dims[f]; ++d) cs.values[f][s].push_back(rng.normal());
    // Centroid mean tracks the first embedding column.
    cs.values[2][0][0] = emb.values(i, 0);
    emb.clip_ids.push_back(cs.clip_id);
    stats.push_back(std::move(cs));
  }
  ReportOptions opts;
  opts.embedding_energy = 1.0;
  // 20-dim MFCC stats need n > 20; 40 rows suffice.
  CcaReport report = build_report({emb}, stats, opts);
  ASSERT_EQ(report.models.size(), 1u);
  const auto& m = report.models[0];
  ASSERT_EQ(m.cells.size(), 12u);
  EXPECT_NEAR(m.self_similarity, 1.0, 1e-6);
  EXPECT_EQ(m.cells[6].family, DescriptorFamily::kCentroid);
  EXPECT_EQ(m.cells[6].statistic, Statistic::kMean);
  EXPECT_NEAR(m.cells[6].similarity, 1.0, 1e-9);
  for (const auto& c : m.cells) {
    EXPECT_GE(c.similarity, 0.0);
    EXPECT_LE(c.similarity, 1.0);
  }
  std::ostringstream csv, text;
  report.write_csv(csv);
  report.write_text(text);
  EXPECT_EQ(csv.str().substr(0, 45), "model,descriptor,statistic,similarity,compone");
  EXPECT_NE(text.str().find("centroid"), std::string::npos);

  stats.pop_back();
  try {
    build_report({emb}, stats, opts);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("c39"), std::string::npos);
  }
}

}  // namespace
}  // namespace coala
