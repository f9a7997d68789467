#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"
#include "qpnls/surface.hpp"

using namespace qpnls;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double max_asymmetry(const Eigen::SparseMatrix<double>& a) {
  const Eigen::MatrixXd d(a);
  return (d - d.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(RevolutionMetric, TorusGeometry) {
  const auto m = RevolutionMetric::torus(2.0);
  EXPECT_NEAR(m(0.0), 9.0, 1e-15);
  EXPECT_NEAR(m(std::numbers::pi), 1.0, 1e-15);
  EXPECT_NEAR(m.period(), kTwoPi, 1e-15);
  EXPECT_NEAR(m.g_max(), 9.0, 1e-12);
  EXPECT_NEAR(std::remainder(m.max_location(), kTwoPi), 0.0, 1e-8);
  // (1/g)'' at x = 0 for g = (R + cos x)^2 is 2/(R+1)^3.
  EXPECT_NEAR(m.nondegeneracy(), 2.0 / 27.0, 1e-6);
  EXPECT_NEAR(m.second_derivative(0.0), -6.0, 1e-5);
  EXPECT_FALSE(m.is_flat());
  EXPECT_GT(m.c3_bound(), 0.0);
}

TEST(RevolutionMetric, TwoEqualMaximaRejected) {
  std::vector<double> x, g;
  for (int i = 0; i < 64; ++i) {
    x.push_back(kTwoPi * i / 64);
    g.push_back(std::pow(2.0 + std::cos(2.0 * x.back()), 2));
  }
  EXPECT_THROW(RevolutionMetric::from_samples(x, g), ValidationError);
  g.assign(64, -1.0);
  EXPECT_THROW(RevolutionMetric::from_samples(x, g), ValidationError);
}

TEST(RevolutionMetric, ProfileFileMatchesAnalyticTorus) {
  const auto path = std::filesystem::temp_directory_path() / "qpnls_torus_profile.txt";
  {
    std::ofstream os(path);
    os << "# x g\n";
    for (int i = 0; i < 128; ++i) {
      const double x = kTwoPi * i / 128;
      os.precision(17);
      os << x << " " << std::pow(2.0 + std::cos(x), 2) << "\n";
    }
  }
  const auto sampled = RevolutionMetric::load_profile(path.string());
  const auto exact = RevolutionMetric::torus(2.0);
  for (double x : {0.1, 1.7, 3.3, 5.9}) EXPECT_NEAR(sampled(x), exact(x), 1e-12);
  const auto a = ground_state(separated_operator(sampled, 32), sampled);
  const auto b = ground_state(separated_operator(exact, 32), exact);
  EXPECT_NEAR(a.lambda, b.lambda, 1e-9 * b.lambda);
  std::filesystem::remove(path);
  EXPECT_THROW(RevolutionMetric::load_profile("/nonexistent/profile.txt"), ValidationError);
}

TEST(SeparatedOperator, SymmetricAfterHalfWeightSimilarity) {
  const auto m = RevolutionMetric::torus(2.0);
  const auto op = separated_operator(m, 8);
  const Eigen::SparseMatrix<double> A = op.matrix();
  EXPECT_EQ(max_asymmetry(A), 0.0);
  const Eigen::MatrixXd H(op.unsymmetrized());
  Eigen::VectorXd s(op.n);
  for (int i = 0; i < op.n; ++i) s[i] = std::sqrt(op.h[i]);
  const Eigen::MatrixXd sim = s.asDiagonal() * H * s.cwiseInverse().asDiagonal();
  EXPECT_LT((sim - Eigen::MatrixXd(A)).cwiseAbs().maxCoeff(), 1e-9 * Eigen::MatrixXd(A).cwiseAbs().maxCoeff());
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(op.n, 0.0, 1.0);
  EXPECT_LT((op.apply(v) - A * v).norm(), 1e-10 * (A * v).norm());
}

TEST(SeparatedOperator, UnderResolvedGridRejected) {
  const auto m = RevolutionMetric::torus(2.0);
  EXPECT_THROW(separated_operator(m, 256, 64), ValidationError);
  EXPECT_GE(min_grid_size(m, 256), min_grid_size(m, 32));
  EXPECT_EQ(separated_operator(m, 16).n, min_grid_size(m, 16));
}

TEST(GroundState, FlatTorusSpectrum) {
  const auto m = RevolutionMetric::flat(1.0);
  for (int k : {0, 3, 10}) {
    const auto op = separated_operator(m, k, 128);
    const auto gs = ground_state(op, m);
    EXPECT_NEAR(gs.lambda, static_cast<double>(k) * k, 1e-9 * std::max(1, k * k));
    // First excited level of the discrete Laplacian: 4 sin^2(dx/2)/dx^2 + k^2.
    const double dx = op.dx;
    const double m1 = 4.0 * std::pow(std::sin(dx / 2.0), 2) / (dx * dx);
    EXPECT_NEAR(gs.lambda2, m1 + k * k, 1e-8 * (1.0 + k * k));
    EXPECT_NEAR(m1, 1.0, 1e-3);
    // Constant eigenfunction with 2 pi * 2 pi * psi^2 = 1.
    for (double v : gs.psi) EXPECT_NEAR(std::abs(v), 1.0 / kTwoPi, 1e-8);
  }
}

TEST(GroundState, HarmonicApproximationForTorus) {
  const auto m = RevolutionMetric::torus(2.0);
  for (int k : {64, 256}) {
    const auto gs = ground_state(separated_operator(m, k), m);
    const double harmonic = m.harmonic_ground_energy(k);
    const double ck = m.harmonic_constant() * k;
    EXPECT_LT(std::abs(gs.lambda - harmonic), 0.1 * ck) << "k = " << k;
    EXPECT_NEAR(gs.localization_width, 1.0 / std::sqrt(2.0 * ck), 0.05 / std::sqrt(2.0 * ck)) << "k = " << k;
  }
}

TEST(GroundState, GridDoublingConvergesAtLargestK) {
  const auto m = RevolutionMetric::torus(2.0);
  const int k = 256;
  const int n = min_grid_size(m, k);
  const auto a = ground_state(separated_operator(m, k, n), m);
  const auto b = ground_state(separated_operator(m, k, 2 * n), m);
  EXPECT_LT(std::abs(a.lambda - b.lambda) / b.lambda, 1e-6);
}

TEST(GroundStateProperty, PositiveSimpleAndAccurate) {
  const auto m = RevolutionMetric::torus(2.0);
  for (int k : {1, 8, 32, 128}) {
    const auto gs = ground_state(separated_operator(m, k), m);
    EXPECT_TRUE(gs.sign_definite) << k;
    EXPECT_GT(gs.lambda2 - gs.lambda, 0.0) << k;
    EXPECT_LE(gs.residual, 1e-9) << k;
    double norm = 0.0;
    const double dx = gs.x[1] - gs.x[0];
    const auto op = separated_operator(m, k);
    for (std::size_t i = 0; i < gs.psi.size(); ++i) norm += gs.psi[i] * gs.psi[i] * op.h[i] * dx;
    EXPECT_NEAR(kTwoPi * norm, 1.0, 1e-10);
  }
}

TEST(ScalingStudy, FlatMetricHasZeroSlope) {
  const auto st = scaling_study(RevolutionMetric::flat(1.0), {4, 16, 64});
  EXPECT_NEAR(st.slope, 0.0, 1e-8);
  for (const auto& r : st.records) EXPECT_NEAR(r.sup_norm, 1.0 / kTwoPi, 1e-8);
}

TEST(ScalingStudy, TorusSlopeIsOneEighthAndStable) {
  const auto st = scaling_study(RevolutionMetric::torus(2.0), {32, 64, 128, 256});
  EXPECT_NEAR(st.slope, 0.125, 0.02);
  EXPECT_LT(std::abs(st.slope - st.slope_without_lowest), 0.01);
  EXPECT_NEAR(st.width_slope, -0.25, 0.02);
  std::ostringstream os;
  write_csv(os, st.records);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "k,lambda,sup_norm,localization_width");
  const nlohmann::json j = st;
  EXPECT_TRUE(j.contains("slope"));
}

TEST(ScalingStudy, NarrowRangeRejected) {
  EXPECT_THROW(scaling_study(RevolutionMetric::torus(2.0), {32, 40}), ValidationError);
}
