#pragma once

#include <functional>

#include <Eigen/Dense>

namespace qpnls {

using CVec = Eigen::VectorXcd;
using LinearMap = std::function<CVec(const CVec&)>;

struct GmresOptions {
  int restart = 60;
  int max_iterations = 600;
  double rel_tol = 1e-14;
  // Stop early once |r| falls below this absolute level.
  double abs_tol = 0.0;
};

struct GmresResult {
  CVec x;
  int iterations = 0;
  double residual = 0.0;  // |b - A x|
  bool converged = false;
};

// Restarted GMRES with right preconditioning: solves A M y = b, x = M y.
// An empty `precond` means M = I.
GmresResult gmres(const LinearMap& apply, const LinearMap& precond, const CVec& rhs,
                  const GmresOptions& opt = {});

}  // namespace qpnls
