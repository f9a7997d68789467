#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <vector>

#include "qpnls/fourier_field.hpp"
#include "qpnls/seed.hpp"
#include "qpnls/spectral_grid.hpp"

namespace qpnls {

using SpatialCoeffs = std::map<SpatialVec, cplx>;

// Higher-order terms sum_m alpha_m(x) |u|^(2p+2m) u, stored through the
// Fourier coefficients of each alpha_m.
struct TailTerm {
  int m = 1;
  SpatialCoeffs alpha_hat;
};

struct TailSpec {
  std::vector<TailTerm> terms;
  double decay_C = 1.0;
  double decay_c = 1.0;

  bool empty() const { return terms.empty(); }
  int max_m() const;
  int max_alpha_radius() const;
  // Checks |alpha_hat_m(l)| <= C exp(-c |l|_1) and m >= 1.
  void validate(int d) const;
  // Smallest M with C e^{-c} uv_norm^(p+M+1) < 0.01 * tol.
  static int truncation_order(double decay_C, double decay_c, double uv_norm, int p, double tol, int cap = 64);
};

// i u_t = -kappa Laplace u + delta (|u|^{2p} u + H). delta = 1 with small
// amplitudes is the perturbative normalization; delta < 1 with O(1)
// amplitudes is the Cauchy normalization. kappa rescales the dispersion, so a
// seed on K Z^d is the same problem as its K-reduced template with kappa = K^2.
struct NlsProblem {
  int b = 1;
  int d = 1;
  int p = 1;
  double delta = 1.0;
  double kappa = 1.0;
  TailSpec tail;

  int degree() const { return 2 * (p + (tail.empty() ? 0 : tail.max_m())) + 1; }
  void validate() const;
};

// Amplitude map between the two normalizations when H = 0: a field solving
// the delta-weighted equation, multiplied by delta^{1/(2p)}, solves the
// unweighted one.
FourierField absorb_coupling(const FourierField& f, double delta, int p);

// Evaluates (u*v)^{*p}*u and its relatives on a fixed box by pointwise
// products on an alias-free space-time grid.
class NonlinearEvaluator {
 public:
  NonlinearEvaluator(const NlsProblem& problem, const TruncationBox& box);

  const NlsProblem& problem() const { return problem_; }
  const BoxGrid& grid() const { return grid_; }
  const SpectralGrid& spectral() const { return *spectral_; }

  struct Rows {
    DenseCoeffs u;
    DenseCoeffs v;
  };
  // Relative level below which transformed coefficients are treated as zero.
  static constexpr double kRoundoffFloor = 1e-14;

  // Leading term plus tail, truncated to the box, without the delta factor.
  // Coefficients below kRoundoffFloor times the largest are zeroed.
  Rows nonlinear(const DenseCoeffs& u, const DenseCoeffs& v) const;
  // Only (u*v)^{*p}*u (and its v mirror); the tail is ignored.
  Rows leading(const DenseCoeffs& u, const DenseCoeffs& v, int p) const;

  // Physical samples of the four linearization kernels (no delta factor).
  struct Kernels {
    std::vector<cplx> uu, uv, vu, vv;
  };
  Kernels kernels(const DenseCoeffs& u, const DenseCoeffs& v) const;

  // Physical samples of alpha_m(x) on the grid.
  const std::vector<std::vector<cplx>>& alpha_samples() const { return alpha_; }

 private:
  NlsProblem problem_;
  BoxGrid grid_;
  std::unique_ptr<SpectralGrid> spectral_;
  std::vector<std::vector<cplx>> alpha_;
};

// (u*v)^{*p}*u truncated to the field's box. Coefficients below
// floor_rel * max|coefficient| are dropped.
SparseCoeffs conv_power(const FourierField& field, int p, double floor_rel = 1e-14);

// F(u, v): diag(n.w + kappa|j|^2) u + delta N_u and the mirrored v row.
FourierField residual(const FourierField& field, std::span<const double> omega, const NlsProblem& problem);

// Same residual without truncating the nonlinearity to the box; the result
// lives on the enlarged box that holds the full product.
FourierField residual_untruncated(const FourierField& field, std::span<const double> omega,
                                  const NlsProblem& problem);

// Dense residual rows on `ev.grid()`.
NonlinearEvaluator::Rows residual_dense(const NonlinearEvaluator& ev, const DenseCoeffs& u, const DenseCoeffs& v,
                                        std::span<const double> omega);

// Combinatorial support of (u0*v0)^{*p}*u0 (u row). The v row is its negation.
std::set<MultiIndex> f0_support(const SeedSolution& seed, int p);

// Sumset helpers on lattice supports.
std::set<MultiIndex> sumset(const std::set<MultiIndex>& a, const std::set<MultiIndex>& b);
// supp (u0*v0)^{*p}.
std::set<MultiIndex> uv_power_support(const SeedSolution& seed, int p);
// supp (u0*v0)^{*(p-1)} * u0 * u0.
std::set<MultiIndex> uu_coupling_support(const SeedSolution& seed, int p);

}  // namespace qpnls
