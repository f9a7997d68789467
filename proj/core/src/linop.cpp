#include "qpnls/linop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"

namespace qpnls {

namespace {

Kernel block_of(bool row_u, bool col_u) {
  if (row_u) return col_u ? Kernel::kUU : Kernel::kUV;
  return col_u ? Kernel::kVU : Kernel::kVV;
}

}  // namespace

LinearizedOp::LinearizedOp(std::shared_ptr<const NonlinearEvaluator> ev, const DenseCoeffs& u, const DenseCoeffs& v,
                           std::span<const double> omega)
    : ev_(std::move(ev)), omega_(omega.begin(), omega.end()) {
  const auto& prob = ev_->problem();
  if (static_cast<int>(omega_.size()) != prob.b) throw ValidationError("omega must have b entries");
  const std::size_t n = sites();
  if (u.size() != n || v.size() != n) throw ValidationError("field does not match the operator box");
  d_.resize(2 * n);
  grid().for_each([&](std::size_t i, const MultiIndex& m) {
    const double nw = m.time_dot(std::span<const double>(omega_));
    const double lap = prob.kappa * static_cast<double>(m.space_sq());
    d_[i] = nw + lap;
    d_[i + n] = -nw + lap;
  });
  samples_ = ev_->kernels(u, v);
  const auto& box = grid().box();
  kernel_grid_ = BoxGrid(prob.b, prob.d, box.scaled(2));
  const std::array<const std::vector<cplx>*, 4> src{&samples_.uu, &samples_.uv, &samples_.vu, &samples_.vv};
  for (int k = 0; k < 4; ++k) kernel_coeffs_[k] = ev_->spectral().analyze(*src[k], kernel_grid_);
}

cplx LinearizedOp::kernel(Kernel k, const MultiIndex& offset) const {
  if (!kernel_grid_.contains(offset)) return {};
  return kernel_coeffs_[static_cast<int>(k)][kernel_grid_.index(offset)];
}

cplx LinearizedOp::diagonal(std::size_t r) const {
  const bool u_row = r < sites();
  const MultiIndex zero(grid().b(), grid().d());
  return d_[r] + ev_->problem().delta * kernel(u_row ? Kernel::kUU : Kernel::kVV, zero);
}

cplx LinearizedOp::entry(std::size_t r, std::size_t c) const {
  const std::size_t n = sites();
  const bool ru = r < n, cu = c < n;
  const MultiIndex off = grid().site(ru ? r : r - n) - grid().site(cu ? c : c - n);
  cplx val = ev_->problem().delta * kernel(block_of(ru, cu), off);
  if (r == c) val += d_[r];
  return val;
}

CVec LinearizedOp::apply(const CVec& h) const {
  const std::size_t n = sites();
  if (static_cast<std::size_t>(h.size()) != 2 * n) throw ValidationError("vector size does not match operator");
  const auto& sg = ev_->spectral();
  const DenseCoeffs hu(h.data(), h.data() + n), hv(h.data() + n, h.data() + 2 * n);
  const auto Hu = sg.synthesize(hu, grid());
  const auto Hv = sg.synthesize(hv, grid());
  std::vector<cplx> Ou(Hu.size()), Ov(Hu.size());
  for (std::size_t i = 0; i < Hu.size(); ++i) {
    Ou[i] = samples_.uu[i] * Hu[i] + samples_.uv[i] * Hv[i];
    Ov[i] = samples_.vu[i] * Hu[i] + samples_.vv[i] * Hv[i];
  }
  const auto ou = sg.analyze(std::move(Ou), grid());
  const auto ov = sg.analyze(std::move(Ov), grid());
  const double delta = ev_->problem().delta;
  CVec out(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = d_[i] * h[i] + delta * ou[i];
    out[i + n] = d_[i + n] * h[i + n] + delta * ov[i];
  }
  return out;
}

Eigen::MatrixXcd LinearizedOp::dense(std::size_t cap) const {
  if (dim() > cap) throw ResourceError("dense operator of dimension " + std::to_string(dim()) + " exceeds cap");
  std::vector<std::size_t> all(dim());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return submatrix(all, all);
}

Eigen::MatrixXcd LinearizedOp::submatrix(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const {
  Eigen::MatrixXcd m(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) m(a, b) = entry(rows[a], cols[b]);
  return m;
}

double LinearizedOp::kernel_norm(const AnalyticWeight& w) const {
  double s = 0.0;
  kernel_grid_.for_each([&](std::size_t i, const MultiIndex& m) {
    double a = 0.0;
    for (const auto& k : kernel_coeffs_) a += std::abs(k[i]);
    s += a * w(m);
  });
  return std::abs(ev_->problem().delta) * s;
}

LinearizedOp assemble(const FourierField& field, std::span<const double> omega, const NlsProblem& problem) {
  NlsProblem prob = problem;
  prob.b = field.b;
  prob.d = field.d;
  auto ev = std::make_shared<const NonlinearEvaluator>(prob, field.box);
  return LinearizedOp(ev, to_dense(field.u, ev->grid()), to_dense(field.v, ev->grid()), omega);
}

std::vector<std::size_t> resonant_rows(const LinearizedOp& op, const ResonanceGraph& graph,
                                       std::span<const MultiIndex> excluded) {
  const std::set<MultiIndex> ex(excluded.begin(), excluded.end());
  std::vector<std::size_t> rows;
  for (const auto& v : graph.vertices()) {
    if (!op.grid().contains(v.site) || ex.count(v.site)) continue;
    rows.push_back(op.row(v.site, v.sign));
  }
  return rows;
}

namespace {

std::vector<char> excluded_mask(const LinearizedOp& op, std::span<const MultiIndex> excluded) {
  std::vector<char> mask(op.dim(), 0);
  for (const auto& s : excluded) {
    if (!op.grid().contains(s)) continue;
    mask[op.row(s, RowSign::kPlus)] = 1;
    mask[op.row(s, RowSign::kMinus)] = 1;
  }
  return mask;
}

}  // namespace

SchurReduction resonant_blocks(const LinearizedOp& op, const ResonanceGraph& graph, cplx z,
                               std::span<const MultiIndex> excluded) {
  SchurReduction red;
  red.z = z;
  red.rows = resonant_rows(op, graph, excluded);
  const auto ex = excluded_mask(op, excluded);
  std::vector<char> in_c(op.dim(), 0);
  for (std::size_t r : red.rows) in_c[r] = 1;
  red.complement_condition = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < op.dim(); ++r) {
    if (in_c[r] || ex[r]) continue;
    red.complement_condition = std::min(red.complement_condition, std::abs(op.diagonal(r) - z));
  }

  std::unordered_map<std::size_t, std::size_t> comp_slot;
  std::unordered_map<std::size_t, std::size_t> pos_of_row;
  for (std::size_t a = 0; a < red.rows.size(); ++a) pos_of_row[red.rows[a]] = a;
  const auto& vs = graph.vertices();
  for (std::size_t vi = 0; vi < vs.size(); ++vi) {
    if (!op.grid().contains(vs[vi].site)) continue;
    auto it = pos_of_row.find(op.row(vs[vi].site, vs[vi].sign));
    if (it == pos_of_row.end()) continue;
    auto [slot, fresh] = comp_slot.emplace(graph.component_of()[vi], red.blocks.size());
    if (fresh) red.blocks.emplace_back();
    red.blocks[slot->second].push_back(it->second);
  }
  for (const auto& blk : red.blocks) {
    std::vector<std::size_t> rows;
    for (std::size_t a : blk) rows.push_back(red.rows[a]);
    Eigen::MatrixXcd m = op.submatrix(rows, rows);
    m.diagonal().array() -= z;
    red.toeplitz_blocks.push_back(std::move(m));
  }
  return red;
}

SchurReduction schur_reduce(const LinearizedOp& op, const ResonanceGraph& graph, cplx z, const SchurOptions& opt) {
  SchurReduction red = resonant_blocks(op, graph, z, opt.excluded_sites);
  if (red.complement_condition < opt.margin) {
    throw NumericalError("Schur gap violation: a complement diagonal entry lies within " +
                         std::to_string(opt.margin) + " of z");
  }
  const std::size_t dim = op.dim();
  const auto excluded = excluded_mask(op, opt.excluded_sites);
  std::vector<char> comp(dim, 1);
  for (std::size_t r : red.rows) comp[r] = 0;
  std::vector<cplx> dg(dim, 1.0);
  for (std::size_t r = 0; r < dim; ++r) {
    if (excluded[r]) comp[r] = 0;
    if (comp[r]) dg[r] = op.diagonal(r) - z;
  }

  const std::size_t nc = red.rows.size();
  red.reduced.resize(nc, nc);
  for (std::size_t a = 0; a < nc; ++a) {
    CVec e = CVec::Zero(dim);
    e[red.rows[a]] = 1.0;
    const CVec col = op.apply(e);
    CVec rhs = CVec::Zero(dim);
    for (std::size_t r = 0; r < dim; ++r)
      if (comp[r]) rhs[r] = col[r];

    // Jacobi iteration for (F'_{C'C'} - z) y = rhs.
    CVec y = CVec::Zero(dim);
    for (std::size_t r = 0; r < dim; ++r)
      if (comp[r]) y[r] = rhs[r] / dg[r];
    bool done = rhs.cwiseAbs().maxCoeff() == 0.0;
    for (int it = 0; it < opt.max_iterations && !done; ++it) {
      const CVec Fy = op.apply(y);
      double change = 0.0, scale = 0.0;
      for (std::size_t r = 0; r < dim; ++r) {
        if (!comp[r]) continue;
        const cplx off = Fy[r] - (dg[r] + z) * y[r];
        const cplx next = (rhs[r] - off) / dg[r];
        change = std::max(change, std::abs(next - y[r]));
        scale = std::max(scale, std::abs(next));
        y[r] = next;
      }
      done = change <= opt.tol * std::max(scale, 1e-300);
    }
    if (!done) {
      throw NumericalError("Schur complement solve did not converge; enlarge the box or reduce the amplitudes");
    }
    const CVec Fy = op.apply(y);
    for (std::size_t b = 0; b < nc; ++b) {
      const std::size_t r = red.rows[b];
      red.reduced(b, a) = col[r] - Fy[r] - (a == b ? z : cplx{});
    }
  }
  return red;
}

std::vector<cplx> schur_spectrum(const LinearizedOp& op, const ResonanceGraph& graph, double window,
                                 const SchurOptions& opt) {
  const auto by_real = [](cplx a, cplx b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); };
  // Eigenvalues of M(z), ordered so that index i follows one continuous branch.
  const auto eig = [&](cplx z) {
    const auto red = schur_reduce(op, graph, z, opt);
    Eigen::MatrixXcd M = red.reduced;
    M.diagonal().array() += z;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, false);
    std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(ev.begin(), ev.end(), by_real);
    return ev;
  };
  const std::vector<cplx> start = eig(0.0);
  const std::size_t n = start.size();
  std::vector<char> done(n, 0);
  std::vector<cplx> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i] || std::abs(start[i]) >= window + 0.1) continue;
    // Secant iteration on g(z) = lambda_i(M(z)) - z, started from z = 0 and z = lambda_i(M(0)).
    cplx z_prev = 0.0, g_prev = start[i];
    cplx z = start[i];
    std::vector<cplx> ev = eig(z);
    for (int it = 0; it < 60; ++it) {
      const cplx g = ev[i] - z;
      if (std::abs(g) <= 1e-14 * std::max(1.0, std::abs(z))) break;
      const cplx slope = (g - g_prev) / (z - z_prev);
      cplx next = std::abs(slope) > 1e-3 && std::isfinite(std::abs(slope)) ? z - g / slope : ev[i];
      if (!std::isfinite(std::abs(next))) next = ev[i];
      z_prev = z;
      g_prev = g;
      z = next;
      ev = eig(z);
    }
    // Every branch that passes through z at z is a fixed point too; count them once each.
    for (std::size_t j = 0; j < n; ++j) {
      if (done[j] || std::abs(ev[j] - z) > 1e-11 * std::max(1.0, std::abs(z))) continue;
      done[j] = 1;
      if (std::abs(z) < window) out.push_back(z);
    }
    if (!done[i]) {
      done[i] = 1;
      if (std::abs(z) < window) out.push_back(z);
    }
  }
  std::sort(out.begin(), out.end(), by_real);
  return out;
}

InvertibilityReport invertibility_report(const SchurReduction& red, double amp_scale, int p, double c) {
  InvertibilityReport rep;
  rep.complement_condition = red.complement_condition;
  rep.min_singular_value = std::numeric_limits<double>::infinity();
  for (const auto& b : red.toeplitz_blocks) {
    rep.block_sizes.push_back(static_cast<std::size_t>(b.rows()));
    if (b.size() == 0) continue;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(b);
    rep.min_singular_value = std::min(rep.min_singular_value, svd.singularValues().minCoeff());
  }
  if (red.toeplitz_blocks.empty()) rep.min_singular_value = 0.0;
  rep.threshold = c * std::pow(amp_scale, 2 * p);
  rep.bound_ok = rep.min_singular_value >= rep.threshold;
  return rep;
}

void to_json(nlohmann::json& j, const InvertibilityReport& r) {
  j = nlohmann::json{{"min_singular_value", r.min_singular_value},
                     {"threshold", r.threshold},
                     {"block_sizes", r.block_sizes},
                     {"complement_condition", r.complement_condition},
                     {"bound_ok", r.bound_ok}};
}

BlockPreconditioner::BlockPreconditioner(const LinearizedOp& op, const ResonanceGraph& graph,
                                         const std::vector<char>& mask)
    : inv_diag_(op.dim(), 1.0) {
  std::vector<char> in_block(op.dim(), 0);
  std::unordered_map<std::size_t, std::size_t> slot;
  const auto& vs = graph.vertices();
  for (std::size_t vi = 0; vi < vs.size(); ++vi) {
    if (!op.grid().contains(vs[vi].site)) continue;
    const std::size_t r = op.row(vs[vi].site, vs[vi].sign);
    if (!mask[r]) continue;
    auto [it, fresh] = slot.emplace(graph.component_of()[vi], block_rows_.size());
    if (fresh) block_rows_.emplace_back();
    block_rows_[it->second].push_back(r);
    in_block[r] = 1;
  }
  for (const auto& rows : block_rows_) {
    const Eigen::MatrixXcd m = op.submatrix(rows, rows);
    sigma_min_ = std::min(sigma_min_, Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues().minCoeff());
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(m);
    if (lu.isInvertible()) {
      block_inv_.push_back(lu.inverse());
    } else {
      block_inv_.push_back(m.completeOrthogonalDecomposition().pseudoInverse());
    }
  }
  for (std::size_t r = 0; r < op.dim(); ++r) {
    if (!mask[r] || in_block[r]) continue;
    const cplx d = op.diagonal(r);
    inv_diag_[r] = std::abs(d) > 1e-12 ? 1.0 / d : 1.0;
  }
}

CVec BlockPreconditioner::operator()(const CVec& x) const {
  CVec y(x.size());
  for (Eigen::Index r = 0; r < x.size(); ++r) y[r] = inv_diag_[r] * x[r];
  for (std::size_t b = 0; b < block_rows_.size(); ++b) {
    const auto& rows = block_rows_[b];
    CVec xb(rows.size());
    for (std::size_t a = 0; a < rows.size(); ++a) xb[a] = x[rows[a]];
    const CVec yb = block_inv_[b] * xb;
    for (std::size_t a = 0; a < rows.size(); ++a) y[rows[a]] = yb[a];
  }
  return y;
}

}  // namespace qpnls
