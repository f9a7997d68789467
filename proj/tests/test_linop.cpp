#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"
#include "qpnls/krylov.hpp"
#include "qpnls/linop.hpp"

using namespace qpnls;

namespace {

NlsProblem problem_for(const SeedSolution& s, int p = 1, double delta = 1.0) {
  NlsProblem pr;
  pr.b = s.b();
  pr.d = s.d;
  pr.p = p;
  pr.delta = delta;
  return pr;
}

std::vector<double> omega0_of(const SeedSolution& s) {
  std::vector<double> w;
  for (long x : s.omega0()) w.push_back(static_cast<double>(x));
  return w;
}

CVec stack(const DenseCoeffs& u, const DenseCoeffs& v) {
  CVec h(static_cast<Eigen::Index>(u.size() + v.size()));
  for (std::size_t i = 0; i < u.size(); ++i) h[i] = u[i];
  for (std::size_t i = 0; i < v.size(); ++i) h[u.size() + i] = v[i];
  return h;
}

ResonanceGraph graph_for(const SeedSolution& s, const TruncationBox& box, int p) {
  return build_resonance_graph(s, bicharacteristics(s, box), p);
}

}  // namespace

TEST(Assemble, ZeroFieldIsTheDiagonal) {
  const SeedSolution s{1, {{2}}, {{0.0, 0.0}}};
  const TruncationBox box{2, 3};
  const std::vector<double> w{4.0};
  const auto op = assemble(FourierField(1, 1, box), w, problem_for(s));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, op.dim() - 1);
  for (int t = 0; t < 10; ++t) {
    const std::size_t r = pick(rng);
    CVec e = CVec::Zero(static_cast<Eigen::Index>(op.dim()));
    e[r] = 1.0;
    const CVec y = op.apply(e);
    const bool u_row = r < op.sites();
    const auto m = op.grid().site(u_row ? r : r - op.sites());
    const double expect = (u_row ? 1.0 : -1.0) * m.time_dot(w) + static_cast<double>(m.space_sq());
    EXPECT_NEAR(std::abs(y[r] - expect), 0.0, 1e-13);
    EXPECT_NEAR((y - expect * e).norm(), 0.0, 1e-13);
    EXPECT_EQ(op.diag_d(r), expect);
  }
  EXPECT_EQ(op.kernel_norm(), 0.0);
}

TEST(Assemble, SingleModeKernels) {
  const cplx a{0.3, 0.2};
  const SeedSolution s{1, {{2}}, {a}};
  const TruncationBox box{2, 6};
  const auto op = assemble(s.field(box), omega0_of(s), problem_for(s));
  const MultiIndex zero(1, 1);
  const MultiIndex uu_off = s.u_site(0) + s.u_site(0);
  EXPECT_NEAR(std::abs(op.kernel(Kernel::kUU, zero) - 2.0 * std::norm(a)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(op.kernel(Kernel::kUV, uu_off) - a * a), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(op.kernel(Kernel::kVU, -uu_off) - std::conj(a * a)), 0.0, 1e-15);
  // Dense oracle: each u row has diagonal 2|a|^2 and one coupling to the v row shifted by -2 s0.
  const auto dense = op.dense();
  const std::size_t r = op.row(MultiIndex({0}, {1}), RowSign::kPlus);
  EXPECT_NEAR(std::abs(dense(r, r) - (1.0 + 2.0 * std::norm(a))), 0.0, 1e-14);
  const auto partner = MultiIndex({0}, {1}) - uu_off;
  ASSERT_TRUE(op.grid().contains(partner));
  const std::size_t c = op.row(partner, RowSign::kMinus);
  EXPECT_NEAR(std::abs(dense(r, c) - a * a), 0.0, 1e-15);
  int nonzero = 0;
  for (Eigen::Index k = 0; k < dense.cols(); ++k) nonzero += std::abs(dense(r, k)) > 1e-14;
  EXPECT_EQ(nonzero, 2);
}

TEST(AssembleProperty, MatchesFiniteDifferenceJacobian) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    const int p = 1 + trial % 2;
    const SeedSolution s{1, trial % 2 ? std::vector<SpatialVec>{{1}, {3}} : std::vector<SpatialVec>{{2}},
                         trial % 2 ? std::vector<cplx>{{0.3, 0.1}, {-0.2, 0.2}} : std::vector<cplx>{{0.4, -0.1}}};
    const auto pr = problem_for(s, p, 0.7);
    const TruncationBox box{2, 6};
    auto ev = std::make_shared<NonlinearEvaluator>(pr, box);
    const auto f = s.field(box);
    const auto u = to_dense(f.u, ev->grid()), v = to_dense(f.v, ev->grid());
    std::vector<double> w = omega0_of(s);
    for (double& x : w) x += 0.01;
    const LinearizedOp op(ev, u, v, w);
    DenseCoeffs hu(u.size()), hv(v.size());
    for (auto& x : hu) x = {g(rng), g(rng)};
    for (auto& x : hv) x = {g(rng), g(rng)};
    const CVec Fh = op.apply(stack(hu, hv));
    double prev = 0.0;
    for (double eps : {1e-4, 1e-5}) {
      DenseCoeffs up = u, vp = v;
      for (std::size_t i = 0; i < u.size(); ++i) {
        up[i] += eps * hu[i];
        vp[i] += eps * hv[i];
      }
      const auto F1 = residual_dense(*ev, up, vp, w);
      const auto F0 = residual_dense(*ev, u, v, w);
      const CVec fd = (stack(F1.u, F1.v) - stack(F0.u, F0.v)) / eps;
      const double err = (fd - Fh).norm() / Fh.norm();
      EXPECT_LT(err, 50.0 * eps) << "trial " << trial;
      if (prev > 0.0) {
        EXPECT_LT(err, 0.2 * prev);
      }
      prev = err;
    }
  }
}

TEST(AssembleProperty, KernelMirrorSymmetryAndNormScaling) {
  const SeedSolution s{1, {{1}, {2}}, {{0.3, 0.1}, {-0.1, 0.25}}};
  const TruncationBox box{3, 6};
  const auto op = assemble(s.field(box), omega0_of(s), problem_for(s));
  for (const auto& o : enumerate_box({2, 6}, 2, 1)) {
    EXPECT_NEAR(std::abs(op.kernel(Kernel::kVU, -o) - std::conj(op.kernel(Kernel::kUV, o))), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(op.kernel(Kernel::kUU, -o) - std::conj(op.kernel(Kernel::kUU, o))), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(op.kernel(Kernel::kVV, o) - op.kernel(Kernel::kUU, o)), 0.0, 1e-15);
  }
  const auto half = assemble(s.scaled_amplitudes(0.5).field(box), omega0_of(s), problem_for(s));
  EXPECT_NEAR(op.kernel_norm() / half.kernel_norm(), 4.0, 1e-10);
}

TEST(Schur, ZeroFieldReducesToMinusZ) {
  const SeedSolution s{1, {{1}}, {{1.0, 0.0}}};
  const TruncationBox box{1, 1};
  const auto op = assemble(FourierField(1, 1, box), omega0_of(s), problem_for(s));
  const cplx z{0.1, 0.05};
  const auto red = schur_reduce(op, graph_for(s, box, 1), z);
  ASSERT_GT(red.rows.size(), 0u);
  const Eigen::MatrixXcd expect = -z * Eigen::MatrixXcd::Identity(red.reduced.rows(), red.reduced.cols());
  EXPECT_NEAR((red.reduced - expect).norm(), 0.0, 1e-15);
  const auto rep = invertibility_report(resonant_blocks(op, graph_for(s, box, 1), 0.0), 0.1, 1);
  EXPECT_EQ(rep.min_singular_value, 0.0);
  EXPECT_FALSE(rep.bound_ok);
}

TEST(Schur, SingleModeSpectrumMatchesDenseOracle) {
  const SeedSolution s{1, {{1}}, {{0.2, 0.1}}};
  const TruncationBox box{3, 3};
  const auto op = assemble(s.field(box), omega0_of(s), problem_for(s));
  const auto graph = graph_for(s, box, 1);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(op.dense(), false);
  std::vector<cplx> dense;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()[i]) < 0.5) dense.push_back(es.eigenvalues()[i]);
  }
  const auto reduced = schur_spectrum(op, graph, 0.5);
  ASSERT_EQ(reduced.size(), dense.size());
  for (const auto& z : dense) {
    double best = 1e300;
    for (const auto& y : reduced) best = std::min(best, std::abs(y - z));
    EXPECT_LT(best, 1e-8) << z;
  }
  // At z = 0 the reduced eigenvalues agree to the size of the coupling squared.
  const auto red = schur_reduce(op, graph, 0.0);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> er(red.reduced, false);
  for (Eigen::Index i = 0; i < er.eigenvalues().size(); ++i) {
    double best = 1e300;
    for (const auto& z : dense) best = std::min(best, std::abs(er.eigenvalues()[i] - z));
    EXPECT_LT(best, 4.0 * std::pow(std::norm(s.amps[0]), 2));
  }
}

TEST(Schur, GapViolationThrows) {
  const SeedSolution s{1, {{1}}, {{0.2, 0.0}}};
  const TruncationBox box{2, 2};
  const auto op = assemble(s.field(box), omega0_of(s), problem_for(s));
  EXPECT_THROW(schur_reduce(op, graph_for(s, box, 1), cplx{0.8, 0.0}), NumericalError);
}

TEST(Schur, GenericD2BlocksAreSmallToeplitzAndDecoupled) {
  const SeedSolution s{2, {{1, 0}, {0, 1}}, {{0.1, 0.02}, {-0.05, 0.08}}};
  const TruncationBox box = minimal_certificate_box(s, 1);
  const auto op = assemble(s.field(box), omega0_of(s), problem_for(s));
  const auto graph = graph_for(s, box, 1);
  const auto red = resonant_blocks(op, graph, 0.0);
  ASSERT_FALSE(red.blocks.empty());
  std::vector<std::size_t> comp_of_row(op.dim(), SIZE_MAX);
  for (std::size_t k = 0; k < red.blocks.size(); ++k) {
    EXPECT_LE(red.toeplitz_blocks[k].rows(), 6);
    for (std::size_t a : red.blocks[k]) comp_of_row[red.rows[a]] = k;
  }
  const std::size_t n = op.sites();
  for (std::size_t k = 0; k < red.blocks.size(); ++k) {
    const auto& blk = red.blocks[k];
    for (std::size_t x = 0; x < blk.size(); ++x) {
      for (std::size_t y = 0; y < blk.size(); ++y) {
        if (x == y) continue;
        const std::size_t r = red.rows[blk[x]], c = red.rows[blk[y]];
        const bool ru = r < n, cu = c < n;
        const auto off = op.grid().site(ru ? r : r - n) - op.grid().site(cu ? c : c - n);
        const Kernel kk = ru ? (cu ? Kernel::kUU : Kernel::kUV) : (cu ? Kernel::kVU : Kernel::kVV);
        EXPECT_NEAR(std::abs(red.toeplitz_blocks[k](x, y) - op.kernel(kk, off)), 0.0, 1e-15);
      }
    }
  }
  for (std::size_t r : red.rows) {
    for (std::size_t c : red.rows) {
      if (comp_of_row[r] != comp_of_row[c]) {
        EXPECT_LT(std::abs(op.entry(r, c)), 1e-15);
      }
    }
  }
}

TEST(Invertibility, SingleModeOffAnchorBlockIsTwiceModulusSquared) {
  for (double delta : {0.1, 0.03}) {
    const SeedSolution s{1, {{2}}, {{delta, 0.0}}};
    const TruncationBox box{3, 6};
    const auto op = assemble(s.field(box), omega0_of(s), problem_for(s));
    const auto anchors = s.anchor_sites();
    const auto red = resonant_blocks(op, graph_for(s, box, 1), 0.0, anchors);
    const auto rep = invertibility_report(red, delta, 1);
    EXPECT_NEAR(rep.min_singular_value, 2.0 * delta * delta, 1e-12);
    EXPECT_TRUE(rep.bound_ok);
    const nlohmann::json j = rep;
    for (const char* k : {"min_singular_value", "block_sizes", "complement_condition", "bound_ok"}) {
      EXPECT_TRUE(j.contains(k));
    }
  }
}

TEST(Invertibility, ExcisionFractionGrowsAsConstantShrinks) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mod(0.0, 1.0), ph(0.0, 2.0 * M_PI);
  const double delta = 0.1;
  const std::vector<double> cs{1.0, 0.3, 0.1, 0.01};
  std::vector<int> pass(cs.size(), 0);
  for (int t = 0; t < 30; ++t) {
    const SeedSolution s{1,
                         {{1}, {2}},
                         {std::polar(delta * mod(rng), ph(rng)), std::polar(delta * mod(rng), ph(rng))}};
    const TruncationBox box = minimal_certificate_box(s, 1);
    const auto op = assemble(s.field(box), omega0_of(s), problem_for(s));
    const auto anchors = s.anchor_sites();
    const auto red = resonant_blocks(op, graph_for(s, box, 1), 0.0, anchors);
    for (std::size_t k = 0; k < cs.size(); ++k) pass[k] += invertibility_report(red, delta, 1, cs[k]).bound_ok;
  }
  for (std::size_t k = 1; k < cs.size(); ++k) EXPECT_GE(pass[k], pass[k - 1]);
  EXPECT_GE(pass.back(), 27);
}

TEST(Gmres, SolvesDiagonallyDominantSystem) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  const int n = 80;
  Eigen::MatrixXcd A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = cplx{g(rng), g(rng)} * 0.05;
    A(i, i) += 3.0 + i * 0.1;
  }
  CVec x(n);
  for (int i = 0; i < n; ++i) x[i] = {g(rng), g(rng)};
  const CVec b = A * x;
  const auto res = gmres([&](const CVec& h) { return CVec(A * h); }, {}, b);
  EXPECT_TRUE(res.converged);
  EXPECT_LT((res.x - x).norm() / x.norm(), 1e-12);
  const CVec dinv = A.diagonal().cwiseInverse();
  const auto pre = gmres([&](const CVec& h) { return CVec(A * h); },
                         [&](const CVec& h) { return CVec(dinv.cwiseProduct(h)); }, b);
  EXPECT_TRUE(pre.converged);
  EXPECT_LE(pre.iterations, res.iterations);
  EXPECT_LT((pre.x - x).norm() / x.norm(), 1e-12);
}
