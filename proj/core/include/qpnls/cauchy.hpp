#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qpnls/qp_solver.hpp"
#include "qpnls/spectral_grid.hpp"

namespace qpnls {

// Dense indexing of [-n, n]^d in lexicographic order.
class SpatialBox {
 public:
  SpatialBox() = default;
  SpatialBox(int d, int n);

  int d() const { return d_; }
  int n() const { return n_; }
  std::size_t size() const { return size_; }
  bool contains(const SpatialVec& j) const;
  std::size_t index(const SpatialVec& j) const;
  SpatialVec site(std::size_t idx) const;
  long space_sq(std::size_t idx) const;
  long l1(std::size_t idx) const;

 private:
  int d_ = 1;
  int n_ = 0;
  std::size_t size_ = 1;
};

// Spatial Fourier coefficients of u(t, .) for i u_t = -kappa Laplace u + delta |u|^{2p} u.
struct CauchyState {
  int d = 1;
  int p = 1;
  double delta = 0.0;
  double kappa = 1.0;
  int n_space = 1;
  double time = 0.0;
  std::vector<cplx> coeffs;

  static CauchyState zero(int d, int n_space, int p, double delta, double kappa = 1.0);
  SpatialBox box() const { return SpatialBox(d, n_space); }
  cplx at(const SpatialVec& j) const;
  void set(const SpatialVec& j, cplx c);
  double l2_norm() const;
  double l1_norm() const;
  double analytic_norm(double rho_space) const;
};

// Analytic norm of a - b on a's box (b is read where it exists).
double analytic_distance(const CauchyState& a, const CauchyState& b, double rho_space);

// Strang splitting: half linear step, exact pointwise nonlinear phase on a
// (2p+2)-fold padded grid, half linear step. The state is projected back to its box.
class SplitStep {
 public:
  SplitStep(int d, int n_space, int p, double delta, double kappa = 1.0);

  // `steps` Strang steps of size dt (dt may be negative). Throws NumericalError
  // when the sup norm grows tenfold within a step.
  void advance(CauchyState& s, double dt, long steps) const;
  void step(CauchyState& s, double dt) const { advance(s, dt, 1); }
  double sup_norm(const CauchyState& s) const;
  int padded_length() const { return m_; }

 private:
  void check(const CauchyState& s) const;
  std::vector<std::size_t> positions_;
  SpatialBox box_;
  int p_;
  double delta_;
  double kappa_;
  int m_;
  std::unique_ptr<SpectralGrid> grid_;
};

// dt = safety * min(0.1 / (delta |u0|_inf^{2p}), 0.5 / (kappa max|j|^2)), with |u0|_inf bounded by the l1 norm.
double default_dt(const CauchyState& s, double safety = 0.5);

// u(t, x) = sum over the branch's u row of c(n, j) e^{i n.omega t} e^{i j.x}.
class QuasiPeriodicEvaluator {
 public:
  QuasiPeriodicEvaluator() = default;
  explicit QuasiPeriodicEvaluator(const SolutionBranch& branch);

  CauchyState at(double t, int n_space) const;
  const std::vector<double>& omega() const { return omega_; }
  int d() const { return d_; }
  int p() const { return p_; }
  double delta() const { return delta_; }
  double kappa() const { return kappa_; }

 private:
  struct Term {
    std::vector<int> n;
    SpatialVec j;
    cplx c;
  };
  std::vector<Term> terms_;
  std::vector<double> omega_;
  int d_ = 1;
  int p_ = 1;
  double delta_ = 0.0;
  double kappa_ = 1.0;
};

struct ApproximantOptions {
  SolveOptions solve{};
  int max_steps = 20;
  int mode_cap = -1;  // negative: ceil(|log10 delta|) * b
  double fd_step = 1e-7;
  double rho_space = 0.5;
};

struct Approximant {
  SolutionBranch branch;
  QuasiPeriodicEvaluator v;
  double matching_error = 0.0;
  std::vector<double> error_history;  // after each accepted step, starting with the initial error
  int steps = 0;
  int added_modes = 0;
  bool stagnated = false;
};

// Picks the library branch closest to u0 at t = 0, adds off-support modes up to
// the cap, then runs damped Gauss-Newton on the seed amplitudes.
Approximant build_approximant(const CauchyState& u0, const std::vector<SolutionBranch>& library, double r_target,
                              const ApproximantOptions& opt = {});

struct DriftOptions {
  double horizon = 1.0;
  double dt = 0.0;  // 0: default_dt
  double t_min = 0.1;
  int samples_per_decade = 10;
  double rho_space = 0.5;
  double drift_tol = 0.0;     // > 0: breach when |drift| exceeds it
  double distance_tol = 0.0;  // > 0: breach when the distance to v exceeds it
};

struct DriftReport {
  std::vector<double> times;
  std::vector<double> l2_norm;
  std::vector<double> analytic_norm;
  std::vector<double> analytic_norm_drift;
  std::vector<double> distance_to_qp;  // empty without an evaluator
  double horizon_reached = 0.0;
  std::optional<double> breach_time;
  double dt = 0.0;
  long steps = 0;
  CauchyState final_state;

  double max_abs_drift() const;
  void write_csv(std::ostream& os) const;
};

DriftReport drift_monitor(const CauchyState& u0, const QuasiPeriodicEvaluator* v, const DriftOptions& opt);

struct IntegrityReport {
  double horizon = 0.0;
  double dt = 0.0;
  double l2_drift_rate = 0.0;   // |l2(t) - l2(0)| / t
  double order = 0.0;           // log2 of successive self-convergence errors at dt, dt/2, dt/4
  bool order_resolved = false;  // errors above the round-off floor
  double richardson = 0.0;      // error estimate of the dt/4 run
  double reversal_error = 0.0;  // l2 distance after t forward and t backward
  double reversal_bound = 0.0;  // 100 richardson + 1e-14 sqrt(steps) max(1, |u0|)
  bool ok = false;

  static constexpr double kL2RateTol = 1e-10;
  static constexpr double kOrderTol = 0.2;
};

// Conservation, self-convergence and time-reversal checks over [0, horizon]
// with coarse step dt (runs dt, dt/2 and dt/4).
IntegrityReport integrator_integrity(const CauchyState& u0, double horizon, double dt);

void to_json(nlohmann::json& j, const CauchyState& s);
void from_json(const nlohmann::json& j, CauchyState& s);
void to_json(nlohmann::json& j, const DriftReport& r);
void to_json(nlohmann::json& j, const IntegrityReport& r);

}  // namespace qpnls
