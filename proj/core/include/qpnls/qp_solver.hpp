#pragma once

#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "qpnls/krylov.hpp"
#include "qpnls/linop.hpp"
#include "qpnls/nonlinearity.hpp"
#include "qpnls/resonance.hpp"

namespace qpnls {

struct IterationRecord {
  double residual_norm = 0.0;    // before the step
  double correction_norm = 0.0;  // analytic norm of the field update
  double omega_shift = 0.0;      // max |change of omega| over the step
  double min_singular_value = 0.0;
  int krylov_iterations = 0;
  std::vector<double> omega_increment;  // linear-step shift of omega, before the Q re-solve
};

struct DiophantineResult {
  double gamma = 0.05;
  double tau = 3.0;
  int n_max = 100;
  int m_cap = 0;
  bool ok = false;
  std::vector<int> witness;  // first violating n, empty when ok
  int witness_m = 0;
  double witness_value = 0.0;
};

struct SolutionBranch {
  SeedSolution seed;
  NlsProblem problem;
  TruncationBox box;
  std::vector<double> omega;
  FourierField field;
  double residual_norm = 0.0;        // in-box residual, analytic norm
  double spill_residual_norm = -1.0;  // untruncated residual, negative when not computed
  std::vector<IterationRecord> iterations;
  bool converged = false;
  bool excision_ok = false;
  InvertibilityReport excision;
  std::optional<DiophantineResult> diophantine;

  double first_correction_norm() const { return iterations.empty() ? 0.0 : iterations.front().correction_norm; }
  double first_omega_shift() const { return iterations.empty() ? 0.0 : iterations.front().omega_shift; }
  std::vector<double> residual_history() const;
};

struct SolveOptions {
  std::optional<TruncationBox> box;  // auto-sized when empty
  double tol = 1e-12;                // relative to max(1, |seed|)
  int max_iterations = 20;
  double excision_c = 0.1;
  bool enforce_excision = true;
  bool compute_spill = false;
  GmresOptions gmres{};
  AnalyticWeight weight{};
};

// N_space = (2p+3) max|j_k|, N_time = 2p+3.
TruncationBox auto_box(const SeedSolution& seed, int p);

struct LsSplit {
  std::vector<MultiIndex> p_sites;
  std::vector<MultiIndex> q_sites;
};
LsSplit lyapunov_schmidt_split(const FourierField& field, const SeedSolution& seed);

// Bordered Newton on (u_P, v_P, omega) with u|_S pinned to the seed.
class QpSolver {
 public:
  QpSolver(const SeedSolution& seed, const NlsProblem& problem, const SolveOptions& opt = {});

  // Branch at the seed: field = seed, omega = kappa * omega0.
  SolutionBranch initial_branch() const;
  // One step; updates field, omega and appends an IterationRecord.
  void newton_step(SolutionBranch& branch) const;
  // Iterate to the stopping rule, then attach certificates.
  SolutionBranch solve() const;

  double amplitude_scale() const;
  double residual_norm(const SolutionBranch& br) const;
  InvertibilityReport excision_report(const SolutionBranch& br) const;
  const ResonanceGraph& graph() const { return graph_; }
  const NonlinearEvaluator& evaluator() const { return *ev_; }
  const SolveOptions& options() const { return opt_; }

 private:
  SeedSolution seed_;
  NlsProblem problem_;
  SolveOptions opt_;
  TruncationBox box_;
  std::shared_ptr<const NonlinearEvaluator> ev_;
  ResonanceGraph graph_;
  std::vector<char> mask_;  // 1 on P rows
  std::vector<std::size_t> anchor_u_;  // u row of s_k
  std::vector<std::size_t> anchor_v_;  // v row of conj(s_k)
};

SolutionBranch solve_branch(const SeedSolution& seed, const NlsProblem& problem, const SolveOptions& opt = {});

struct FrequencyJacobian {
  Eigen::MatrixXd jacobian;  // d omega^(1) / d |a|
  double det_abs = 0.0;
  double det_root = 0.0;     // |det|^{1/b}
  bool transversal = false;  // det_abs >= c * amp_scale^{b(2p-1)}
};

// Central differences in the amplitude moduli of the first Newton increment of omega.
FrequencyJacobian frequency_jacobian(const SeedSolution& seed, const NlsProblem& problem,
                                     const SolveOptions& opt = {}, double rel_step = 1e-4, double c = 0.1);

DiophantineResult diophantine_check(std::span<const double> omega, double gamma, double tau, int n_max,
                                    int m_cap = 0);

struct SemiclassicalResult {
  int K = 1;
  SolutionBranch branch;
  double remainder = 0.0;                // analytic norm of field - seed
  std::vector<double> frequency_offsets;  // omega_k - K^2 |j_k|^2
};

// delta = 1, O(1) amplitudes, frequencies K j_k handled as kappa = K^2 on the template lattice.
SemiclassicalResult semiclassical_run(const SeedSolution& tmpl, int K, int p, const SolveOptions& opt = {});

// Quadratic convergence: r_{k+1} <= max(C r_k^2, floor) over the last `count` steps.
bool quadratic_convergence(const std::vector<double>& residuals, double C, double floor, int count = 3);

// Kantorovich-type constant for the convergence test.
double newton_constant(const SolutionBranch& br);

void to_json(nlohmann::json& j, const IterationRecord& r);
void to_json(nlohmann::json& j, const DiophantineResult& r);
void to_json(nlohmann::json& j, const SolutionBranch& br);

struct SweepRow {
  double delta_or_k = 0.0;
  double first_correction_norm = 0.0;
  double omega_shift_norm = 0.0;
  double det_jacobian = 0.0;
  double remainder = 0.0;
};
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace qpnls
