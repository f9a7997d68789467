#include "qpnls/krylov.hpp"

#include <cmath>
#include <vector>

namespace qpnls {

GmresResult gmres(const LinearMap& apply, const LinearMap& precond, const CVec& rhs, const GmresOptions& opt) {
  const Eigen::Index n = rhs.size();
  GmresResult out;
  out.x = CVec::Zero(n);
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  const double target = std::max(opt.rel_tol * bnorm, opt.abs_tol);
  const auto M = [&](const CVec& y) { return precond ? precond(y) : y; };
  const int m = std::max(1, opt.restart);

  CVec r = rhs;
  double beta = bnorm;
  while (out.iterations < opt.max_iterations) {
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<std::complex<double>> cs(m), sn(m);
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
    V.col(0) = r / beta;
    g(0) = beta;
    int k = 0;
    for (; k < m && out.iterations < opt.max_iterations; ++k) {
      ++out.iterations;
      CVec w = apply(M(V.col(k)));
      // Modified Gram-Schmidt, repeated once for stability.
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= k; ++i) {
          const auto h = V.col(i).dot(w);
          H(i, k) += h;
          w -= h * V.col(i);
        }
      }
      const double hn = w.norm();
      H(k + 1, k) = hn;
      if (hn > 0) V.col(k + 1) = w / hn;
      for (int i = 0; i < k; ++i) {
        const auto t = std::conj(cs[i]) * H(i, k) + std::conj(sn[i]) * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double a = std::abs(H(k, k));
      const double rho = std::hypot(a, hn);
      if (rho == 0.0) {
        cs[k] = 1.0;
        sn[k] = 0.0;
      } else {
        cs[k] = H(k, k) / rho;
        sn[k] = hn / rho;
      }
      H(k, k) = rho;
      H(k + 1, k) = 0.0;
      g(k + 1) = -sn[k] * g(k);
      g(k) = std::conj(cs[k]) * g(k);
      if (std::abs(g(k + 1)) <= target || hn == 0.0) {
        ++k;
        break;
      }
    }
    const auto R = H.topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const CVec y = R.solve(g.head(k));
    out.x += M(V.leftCols(k) * y);
    r = rhs - apply(out.x);
    beta = r.norm();
    out.residual = beta;
    if (beta <= target) {
      out.converged = true;
      return out;
    }
  }
  out.converged = out.residual <= target;
  return out;
}

}  // namespace qpnls
