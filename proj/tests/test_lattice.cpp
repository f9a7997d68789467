#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"
#include "qpnls/fourier_field.hpp"
#include "qpnls/lattice.hpp"
#include "qpnls/seed.hpp"

using namespace qpnls;

namespace {

// Independent count by nested odometer.
std::size_t brute_count(const TruncationBox& box, int b, int d) {
  std::size_t n = 0;
  std::vector<int> c(b + d);
  for (int k = 0; k < b + d; ++k) c[k] = -(k < b ? box.n_time : box.n_space);
  while (true) {
    ++n;
    int k = b + d - 1;
    for (; k >= 0; --k) {
      const int r = k < b ? box.n_time : box.n_space;
      if (c[k] < r) {
        ++c[k];
        break;
      }
      c[k] = -r;
    }
    if (k < 0) break;
  }
  return n;
}

SparseCoeffs random_coeffs(std::mt19937_64& rng, int b, int d, int count) {
  std::uniform_int_distribution<int> site(-3, 3);
  std::normal_distribution<double> g;
  SparseCoeffs c;
  for (int i = 0; i < count; ++i) {
    MultiIndex m(b, d);
    for (int k = 0; k < b + d; ++k) m.set_coord(k, site(rng));
    c[m] += cplx{g(rng), g(rng)};
  }
  return c;
}

}  // namespace

TEST(Lattice, OriginOnlyBox) {
  const auto sites = enumerate_box({0, 0}, 1, 1);
  ASSERT_EQ(sites.size(), 1u);
  EXPECT_TRUE(sites[0].is_origin());
}

TEST(Lattice, ThreeByThreeBox) { EXPECT_EQ(enumerate_box({1, 1}, 1, 1).size(), 9u); }

TEST(Lattice, MixedBoxCountMatchesFormulaAndBruteForce) {
  const TruncationBox box{2, 3};
  EXPECT_EQ(enumerate_box(box, 2, 2).size(), 1225u);
  EXPECT_EQ(box.site_count(2, 2), 1225u);
  EXPECT_EQ(brute_count(box, 2, 2), 1225u);
}

TEST(Lattice, EnumerationIsStrictlySortedAndIdempotent) {
  for (auto [b, d] : {std::pair{1, 1}, {2, 1}, {1, 3}, {3, 2}}) {
    const TruncationBox box{1, 2};
    const auto a = enumerate_box(box, b, d);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_TRUE(std::adjacent_find(a.begin(), a.end()) == a.end());
    EXPECT_EQ(a, enumerate_box(box, b, d));
    EXPECT_EQ(a.size(), brute_count(box, b, d));
  }
}

TEST(Lattice, BoxGridMatchesEnumerationOrder) {
  const TruncationBox box{1, 2};
  const BoxGrid g(2, 1, box);
  const auto sites = enumerate_box(box, 2, 1);
  ASSERT_EQ(g.size(), sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    EXPECT_EQ(g.site(i), sites[i]);
    EXPECT_EQ(g.index(sites[i]), i);
  }
}

TEST(Lattice, SiteCapRaisesResourceError) {
  EXPECT_THROW(enumerate_box({10, 10}, 3, 3, 1000), ResourceError);
}

TEST(Lattice, L1NormZeroOnlyAtOrigin) {
  EXPECT_EQ(MultiIndex({0}, {0, 0}).l1(), 0);
  EXPECT_EQ(MultiIndex({-1, 2}, {3}).l1(), 6);
  EXPECT_EQ(MultiIndex({0}, {-2, 1}).space_sq(), 5);
}

TEST(AnalyticNorm, EmptyFieldIsZero) { EXPECT_EQ(analytic_norm(SparseCoeffs{}, AnalyticWeight{}), 0.0); }

TEST(AnalyticNorm, OriginHasUnitWeight) {
  SparseCoeffs c{{MultiIndex({0}, {0}), cplx{0.5, 0.0}}};
  EXPECT_DOUBLE_EQ(analytic_norm(c, {0.7, 1.3}), 0.5);
}

TEST(AnalyticNorm, HandEvaluationWithLogTwoStrips) {
  SparseCoeffs c{{MultiIndex({1}, {1}), cplx{0.1, 0.0}}, {MultiIndex({0}, {0}), cplx{0.2, 0.0}}};
  const AnalyticWeight w{std::log(2.0), std::log(2.0)};
  EXPECT_NEAR(analytic_norm(c, w), 0.6, 1e-15);
  // Naive summation oracle.
  double s = 0.0;
  for (const auto& [m, v] : c) s += std::abs(v) * std::exp(w.rho_time * m.time_l1() + w.rho_space * m.space_l1());
  EXPECT_NEAR(analytic_norm(c, w), s, 1e-15);
}

TEST(AnalyticNorm, WeightIsAtLeastOneAndOneOnlyAtOrigin) {
  const AnalyticWeight w{0.3, 0.4};
  for (const auto& m : enumerate_box({1, 1}, 1, 2)) {
    if (m.is_origin()) {
      EXPECT_EQ(w(m), 1.0);
    } else {
      EXPECT_GT(w(m), 1.0);
    }
  }
}

TEST(AnalyticNormProperty, HomogeneityTriangleAndMonotonicity) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_coeffs(rng, 2, 1, 12);
    const auto b = random_coeffs(rng, 2, 1, 12);
    const AnalyticWeight w{0.4, 0.6};
    const cplx lam{-1.7, 0.4};
    SparseCoeffs la = a, sum = a;
    for (auto& [m, v] : la) v *= lam;
    for (const auto& [m, v] : b) sum[m] += v;
    const double na = analytic_norm(a, w);
    EXPECT_NEAR(analytic_norm(la, w), std::abs(lam) * na, 1e-12 * na);
    EXPECT_LE(analytic_norm(sum, w), na + analytic_norm(b, w) + 1e-12);
    EXPECT_GE(analytic_norm(a, {0.5, 0.6}), na);
    EXPECT_GE(analytic_norm(a, {0.4, 0.9}), na);
  }
}

TEST(FourierField, ConjMirrorAndRealityDefect) {
  FourierField f(1, 1, {2, 2});
  f.u[MultiIndex({-1}, {2})] = {0.3, 0.4};
  f.v = conj_mirror(f.u);
  EXPECT_EQ(f.v.at(MultiIndex({1}, {-2})), cplx(0.3, -0.4));
  EXPECT_EQ(reality_defect(f), 0.0);
  f.v.begin()->second += cplx{0.0, 1e-3};
  EXPECT_NEAR(reality_defect(f), 1e-3, 1e-15);
}

TEST(FourierField, DenseSparseRoundTrip) {
  std::mt19937_64 rng(3);
  const BoxGrid g(1, 2, {3, 3});
  const auto c = random_coeffs(rng, 1, 2, 20);
  EXPECT_EQ(to_sparse(to_dense(c, g), g), c);
}

TEST(FourierField, JsonRoundTrip) {
  FourierField f(2, 1, {1, 3});
  f.u[MultiIndex({-1, 0}, {1})] = {1.0, -2.0};
  f.v[MultiIndex({1, 0}, {-1})] = {1.0, 2.0};
  const nlohmann::json j = f;
  const auto g = j.get<FourierField>();
  EXPECT_EQ(g.u, f.u);
  EXPECT_EQ(g.v, f.v);
  EXPECT_EQ(g.box, f.box);
}

TEST(Seed, SupportOmegaAndValidation) {
  SeedSolution s{2, {{1, 0}, {1, 2}}, {{0.1, 0.0}, {0.0, 0.2}}};
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.omega0(), (std::vector<long>{1, 5}));
  EXPECT_EQ(s.u_site(1), MultiIndex({0, -1}, {1, 2}));
  EXPECT_EQ(s.v_site(1), MultiIndex({0, 1}, {-1, -2}));
  EXPECT_EQ(s.anchor_sites().size(), 4u);
  SeedSolution zero{1, {{0}}, {{1.0, 0.0}}};
  EXPECT_THROW(zero.validate(), ValidationError);
  SeedSolution dup{1, {{1}, {1}}, {{1.0, 0.0}, {1.0, 0.0}}};
  EXPECT_THROW(dup.validate(), ValidationError);
}
