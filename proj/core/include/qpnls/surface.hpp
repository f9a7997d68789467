#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <nlohmann/json_fwd.hpp>

namespace qpnls {

// Metric ds^2 = dx^2 + g(x) dy^2 on a torus of revolution, g periodic in x.
class RevolutionMetric {
 public:
  // g(x) = g0.
  static RevolutionMetric flat(double g0 = 1.0);
  // g(x) = (R + cos x)^2.
  static RevolutionMetric torus(double R = 2.0);
  // Equispaced samples x_i = x0 + i * period / N, evaluated by trigonometric interpolation.
  static RevolutionMetric from_samples(const std::vector<double>& x, const std::vector<double>& g);
  // Plain text "x g" pairs, one per line; '#' starts a comment.
  static RevolutionMetric load_profile(const std::string& path);

  double operator()(double x) const { return eval_(x); }
  double second_derivative(double x) const;

  const std::string& name() const { return name_; }
  double period() const { return period_; }
  bool is_flat() const { return flat_; }
  double g_max() const { return g_max_; }
  double max_location() const { return x_max_; }
  // d^2/dx^2 (1/g) at the maximum of g.
  double nondegeneracy() const { return nondegeneracy_; }
  // Finite-difference bound on |g'''| over the check grid.
  double c3_bound() const { return c3_bound_; }
  // k^2/g(x0) + c k, the harmonic-oscillator ground-state energy.
  double harmonic_ground_energy(int k) const;
  double harmonic_constant() const;
  // Harmonic localization length 1/sqrt(c k) (the period when flat).
  double localization_length(int k) const;

 private:
  RevolutionMetric(std::string name, double period, std::function<double(double)> eval);
  void analyze();

  std::string name_;
  double period_ = 0.0;
  std::function<double(double)> eval_;
  bool flat_ = false;
  double g_max_ = 0.0;
  double x_max_ = 0.0;
  double nondegeneracy_ = 0.0;
  double c3_bound_ = 0.0;
};

// H_k psi = -(1/h)(h psi')' + (k^2/g) psi with h = sqrt(g), on n periodic nodes,
// in the symmetric form A = S H S^{-1} with S = diag(sqrt(h)).
struct SeparatedOperator {
  int k = 0;
  int n = 0;
  double dx = 0.0;
  std::vector<double> x;
  std::vector<double> h;
  std::vector<double> diag;
  std::vector<double> offdiag;  // A(i, i+1 mod n)

  Eigen::SparseMatrix<double> matrix() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& phi) const;
  // Entries of the unsymmetrized H; its similarity by S is exactly symmetric.
  Eigen::SparseMatrix<double> unsymmetrized() const;
};

// Minimum node count: 64 nodes per harmonic localization length, at least 64.
int min_grid_size(const RevolutionMetric& metric, int k);

// Throws ValidationError when grid_n violates min_grid_size; grid_n = 0 picks it.
SeparatedOperator separated_operator(const RevolutionMetric& metric, int k, int grid_n = 0);

struct GroundStateRecord {
  int k = 0;
  int grid_n = 0;
  double lambda = 0.0;
  double lambda2 = 0.0;
  std::vector<double> x;
  // Eigenfunction of H_k with 2 pi sum psi^2 h dx = 1 (unit L2 on the surface with the e^{iky} factor).
  std::vector<double> psi;
  double sup_norm = 0.0;
  double localization_width = 0.0;  // sqrt of the second moment of |psi|^2 about argmax g
  double residual = 0.0;            // |A phi - lambda phi| / |lambda| for unit phi
  bool sign_definite = false;
  int iterations = 0;
};

struct EigenOptions {
  double tol = 1e-11;
  int max_iterations = 500;
};

// Lowest two eigenpairs by shifted inverse iteration (the second by deflation).
GroundStateRecord ground_state(const SeparatedOperator& op, const RevolutionMetric& metric,
                               const EigenOptions& opt = {});

struct ScalingStudy {
  double slope = 0.0;
  double intercept = 0.0;
  double fit_residual = 0.0;          // max |log residual|
  double slope_without_lowest = 0.0;  // refit with the smallest k dropped (needs >= 3 points)
  double width_slope = 0.0;           // log width against log lambda
  std::vector<GroundStateRecord> records;
};

struct ScalingOptions {
  int grid_n = 0;  // 0: per-k policy
  double max_fit_residual = 0.05;
  EigenOptions eigen{};
};

// Fits log sup_norm against log lambda. Requires lambda to span at least a
// decade; throws NumericalError when the fit residual exceeds the threshold.
ScalingStudy scaling_study(const RevolutionMetric& metric, const std::vector<int>& k_list,
                           const ScalingOptions& opt = {});

// Columns k, lambda, sup_norm, localization_width.
void write_csv(std::ostream& os, const std::vector<GroundStateRecord>& records);
void to_json(nlohmann::json& j, const GroundStateRecord& r);
void to_json(nlohmann::json& j, const ScalingStudy& s);

}  // namespace qpnls
