#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "qpnls/krylov.hpp"
#include "qpnls/nonlinearity.hpp"
#include "qpnls/resonance.hpp"

namespace qpnls {

// Dense row layout on a box: rows [0, n) are u rows, rows [n, 2n) are v rows.
enum class Kernel : int { kUU = 0, kUV = 1, kVU = 2, kVV = 3 };

// F' = D + delta K on a truncation box, applied matrix-free through FFTs.
class LinearizedOp {
 public:
  LinearizedOp(std::shared_ptr<const NonlinearEvaluator> ev, const DenseCoeffs& u, const DenseCoeffs& v,
               std::span<const double> omega);

  const NonlinearEvaluator& evaluator() const { return *ev_; }
  const BoxGrid& grid() const { return ev_->grid(); }
  std::size_t sites() const { return grid().size(); }
  std::size_t dim() const { return 2 * sites(); }
  const std::vector<double>& omega() const { return omega_; }

  std::size_t row(const MultiIndex& site, RowSign sign) const {
    return grid().index(site) + (sign == RowSign::kPlus ? 0 : sites());
  }

  // Exact D entry: n.w + kappa|j|^2 on u rows, -n.w + kappa|j|^2 on v rows.
  double diag_d(std::size_t r) const { return d_[r]; }
  // Full diagonal entry of F'.
  cplx diagonal(std::size_t r) const;

  // Kernel coefficient at an offset with |offset| <= twice the box (no delta).
  cplx kernel(Kernel k, const MultiIndex& offset) const;
  cplx entry(std::size_t r, std::size_t c) const;

  CVec apply(const CVec& h) const;
  Eigen::MatrixXcd dense(std::size_t cap = 8000) const;
  Eigen::MatrixXcd submatrix(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const;

  // Weighted l1 norm of delta times the four kernels: a bound for |A|.
  double kernel_norm(const AnalyticWeight& w = {}) const;

 private:
  std::shared_ptr<const NonlinearEvaluator> ev_;
  std::vector<double> omega_;
  std::vector<double> d_;
  NonlinearEvaluator::Kernels samples_;
  BoxGrid kernel_grid_;
  std::array<DenseCoeffs, 4> kernel_coeffs_;
};

LinearizedOp assemble(const FourierField& field, std::span<const double> omega, const NlsProblem& problem);

struct SchurOptions {
  double margin = 0.5;
  double tol = 1e-12;
  int max_iterations = 500;
  // Sites whose u and v rows are removed from the operator (the anchored set S).
  std::vector<MultiIndex> excluded_sites;
};

struct SchurReduction {
  cplx z{};
  std::vector<std::size_t> rows;        // resonant rows kept, in op row numbering
  Eigen::MatrixXcd reduced;             // M(z) - z I on those rows
  double complement_condition = 0.0;    // min |F'_rr - z| over complement rows
  std::vector<std::vector<std::size_t>> blocks;  // positions into `rows`, one per graph component
  std::vector<Eigen::MatrixXcd> toeplitz_blocks;  // F' restricted to each component
};

// Rows of the resonance-graph vertices inside the op's box, minus excluded sites.
std::vector<std::size_t> resonant_rows(const LinearizedOp& op, const ResonanceGraph& graph,
                                       std::span<const MultiIndex> excluded = {});

SchurReduction schur_reduce(const LinearizedOp& op, const ResonanceGraph& graph, cplx z,
                            const SchurOptions& opt = {});

// Component blocks and complement condition only; `reduced` is left empty.
SchurReduction resonant_blocks(const LinearizedOp& op, const ResonanceGraph& graph, cplx z,
                               std::span<const MultiIndex> excluded = {});

// Eigenvalues of the full operator inside |lambda| < window, obtained from
// fixed points lambda in the spectrum of M(lambda).
std::vector<cplx> schur_spectrum(const LinearizedOp& op, const ResonanceGraph& graph, double window = 0.5,
                                 const SchurOptions& opt = {});

struct InvertibilityReport {
  double min_singular_value = 0.0;
  double threshold = 0.0;
  bool bound_ok = false;
  std::vector<std::size_t> block_sizes;
  double complement_condition = 0.0;
};

// bound_ok = sigma_min >= c * amp_scale^{2p}.
InvertibilityReport invertibility_report(const SchurReduction& red, double amp_scale, int p, double c = 0.1);

void to_json(nlohmann::json& j, const InvertibilityReport& r);

// Right preconditioner for the operator restricted to `mask` rows: dense LU on
// each resonant component, diagonal elsewhere.
class BlockPreconditioner {
 public:
  BlockPreconditioner(const LinearizedOp& op, const ResonanceGraph& graph, const std::vector<char>& mask);
  CVec operator()(const CVec& x) const;
  // Smallest singular value over the component blocks (infinity when none).
  double min_singular_value() const { return sigma_min_; }

 private:
  double sigma_min_ = std::numeric_limits<double>::infinity();
  std::vector<cplx> inv_diag_;
  std::vector<std::vector<std::size_t>> block_rows_;
  std::vector<Eigen::MatrixXcd> block_inv_;
};

}  // namespace qpnls
