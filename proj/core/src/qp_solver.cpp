#include "qpnls/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"

namespace qpnls {

namespace {

double rows_norm(const DenseCoeffs& u, const DenseCoeffs& v, const BoxGrid& g, const AnalyticWeight& w) {
  return std::max(analytic_norm(u, g, w), analytic_norm(v, g, w));
}

CVec stack(const DenseCoeffs& u, const DenseCoeffs& v) {
  CVec x(u.size() + v.size());
  for (std::size_t i = 0; i < u.size(); ++i) x[i] = u[i];
  for (std::size_t i = 0; i < v.size(); ++i) x[u.size() + i] = v[i];
  return x;
}

}  // namespace

std::vector<double> SolutionBranch::residual_history() const {
  std::vector<double> r;
  for (const auto& it : iterations) r.push_back(it.residual_norm);
  r.push_back(residual_norm);
  return r;
}

TruncationBox auto_box(const SeedSolution& seed, int p) {
  seed.validate();
  return {2 * p + 3, (2 * p + 3) * seed.max_frequency_linf()};
}

LsSplit lyapunov_schmidt_split(const FourierField& field, const SeedSolution& seed) {
  LsSplit s;
  const auto anchors = seed.anchor_sites();
  const std::set<MultiIndex> S(anchors.begin(), anchors.end());
  for (const auto& m : S) {
    if (!field.box.contains(m)) throw ValidationError("seed support does not fit the truncation box");
  }
  s.q_sites.assign(S.begin(), S.end());
  for (const auto& m : enumerate_box(field.box, field.b, field.d)) {
    if (!S.count(m)) s.p_sites.push_back(m);
  }
  return s;
}

QpSolver::QpSolver(const SeedSolution& seed, const NlsProblem& problem, const SolveOptions& opt)
    : seed_(seed), problem_(problem), opt_(opt) {
  seed_.validate();
  problem_.b = seed_.b();
  problem_.d = seed_.d;
  problem_.validate();
  box_ = opt_.box ? *opt_.box : auto_box(seed_, problem_.p);
  for (const auto& s : seed_.anchor_sites()) {
    if (!box_.contains(s)) throw ValidationError("seed support does not fit the truncation box");
  }
  ev_ = std::make_shared<const NonlinearEvaluator>(problem_, box_);
  graph_ = build_resonance_graph(seed_, bicharacteristics(seed_, box_), problem_.p);
  const auto& g = ev_->grid();
  const std::size_t n = g.size();
  mask_.assign(2 * n, 1);
  for (const auto& s : seed_.anchor_sites()) {
    mask_[g.index(s)] = 0;
    mask_[n + g.index(s)] = 0;
  }
  for (int k = 0; k < seed_.b(); ++k) {
    anchor_u_.push_back(g.index(seed_.u_site(k)));
    anchor_v_.push_back(n + g.index(seed_.v_site(k)));
  }
}

SolutionBranch QpSolver::initial_branch() const {
  SolutionBranch br;
  br.seed = seed_;
  br.problem = problem_;
  br.box = box_;
  br.field = seed_.field(box_);
  for (long w : seed_.omega0()) br.omega.push_back(problem_.kappa * static_cast<double>(w));
  return br;
}

double QpSolver::amplitude_scale() const {
  double a = 0.0;
  for (const auto& z : seed_.amps) a = std::max(a, std::abs(z));
  return std::pow(std::abs(problem_.delta), 1.0 / (2.0 * problem_.p)) * a;
}

double QpSolver::residual_norm(const SolutionBranch& br) const {
  const auto& g = ev_->grid();
  const auto F = residual_dense(*ev_, to_dense(br.field.u, g), to_dense(br.field.v, g), br.omega);
  return rows_norm(F.u, F.v, g, opt_.weight);
}

InvertibilityReport QpSolver::excision_report(const SolutionBranch& br) const {
  const auto& g = ev_->grid();
  const LinearizedOp op(ev_, to_dense(br.field.u, g), to_dense(br.field.v, g), br.omega);
  const auto anchors = seed_.anchor_sites();
  const auto red = resonant_blocks(op, graph_, 0.0, anchors);
  return invertibility_report(red, amplitude_scale(), problem_.p, opt_.excision_c);
}

void QpSolver::newton_step(SolutionBranch& br) const {
  const auto& g = ev_->grid();
  const std::size_t n = g.size();
  const int b = seed_.b();
  DenseCoeffs u = to_dense(br.field.u, g), v = to_dense(br.field.v, g);
  const LinearizedOp op(ev_, u, v, br.omega);
  const auto F = residual_dense(*ev_, u, v, br.omega);

  IterationRecord rec;
  rec.residual_norm = rows_norm(F.u, F.v, g, opt_.weight);

  const BlockPreconditioner M(op, graph_, mask_);
  rec.min_singular_value = M.min_singular_value();
  const LinearMap A = [&](const CVec& h) {
    CVec hm = h;
    for (std::size_t r = 0; r < 2 * n; ++r)
      if (!mask_[r]) hm[r] = 0.0;
    CVec out = op.apply(hm);
    for (std::size_t r = 0; r < 2 * n; ++r)
      if (!mask_[r]) out[r] = h[r];
    return out;
  };
  const LinearMap P = [&](const CVec& x) { return M(x); };
  const auto solve = [&](const CVec& rhs) {
    auto res = gmres(A, P, rhs, opt_.gmres);
    rec.krylov_iterations += res.iterations;
    if (!res.converged && res.residual > 1e-10 * std::max(1.0, rhs.norm())) {
      throw NumericalError("Newton linear solve stalled (residual " + std::to_string(res.residual) +
                           "); enlarge the truncation box or reduce the amplitudes");
    }
    return res.x;
  };

  const CVec Fx = stack(F.u, F.v);
  CVec rhs = -Fx;
  for (std::size_t r = 0; r < 2 * n; ++r)
    if (!mask_[r]) rhs[r] = 0.0;
  const CVec X0 = solve(rhs);

  std::vector<CVec> X1(b, CVec::Zero(2 * n));
  for (int l = 0; l < b; ++l) {
    CVec B = CVec::Zero(2 * n);
    g.for_each([&](std::size_t i, const MultiIndex& m) {
      if (mask_[i]) B[i] = static_cast<double>(m.n(l)) * u[i];
      if (mask_[n + i]) B[n + i] = -static_cast<double>(m.n(l)) * v[i];
    });
    if (B.cwiseAbs().maxCoeff() > 0.0) X1[l] = solve(-B);
  }

  // Q equations G_k = Re(conj(a_k) F_u(s_k) + a_k F_v(conj s_k)) / (2|a_k|^2); dG/domega = -I.
  const auto q_of = [&](const CVec& rows) {
    Eigen::VectorXd q(b);
    for (int k = 0; k < b; ++k) {
      const cplx a = seed_.amps[k];
      q[k] = (std::conj(a) * rows[anchor_u_[k]] + a * rows[anchor_v_[k]]).real() / (2.0 * std::norm(a));
    }
    return q;
  };
  const Eigen::VectorXd G = q_of(Fx);
  const Eigen::VectorXd c0 = q_of(op.apply(X0));
  Eigen::MatrixXd R(b, b);
  for (int l = 0; l < b; ++l) R.col(l) = q_of(op.apply(X1[l]));
  const Eigen::MatrixXd J = R - Eigen::MatrixXd::Identity(b, b);
  const Eigen::VectorXd dw = J.fullPivLu().solve(-(G + c0));

  CVec h = X0;
  for (int l = 0; l < b; ++l) h += dw[l] * X1[l];
  for (std::size_t i = 0; i < n; ++i) {
    u[i] += h[i];
    v[i] += h[n + i];
  }
  const std::vector<double> omega_old = br.omega;
  for (int l = 0; l < b; ++l) br.omega[l] += dw[l];
  rec.omega_increment.assign(dw.data(), dw.data() + b);

  // Re-solve the Q equations exactly at the new field.
  const auto F2 = residual_dense(*ev_, u, v, br.omega);
  const Eigen::VectorXd G2 = q_of(stack(F2.u, F2.v));
  for (int l = 0; l < b; ++l) br.omega[l] += G2[l];

  DenseCoeffs hu(h.data(), h.data() + n), hv(h.data() + n, h.data() + 2 * n);
  rec.correction_norm = rows_norm(hu, hv, g, opt_.weight);
  for (int l = 0; l < b; ++l) rec.omega_shift = std::max(rec.omega_shift, std::abs(br.omega[l] - omega_old[l]));

  br.field.u = to_sparse(u, g);
  br.field.v = to_sparse(v, g);
  // Anchoring is exact: h vanishes on S.
  for (int k = 0; k < b; ++k) br.field.u[seed_.u_site(k)] = seed_.amps[k];
  for (int k = 0; k < b; ++k) br.field.v[seed_.v_site(k)] = std::conj(seed_.amps[k]);
  br.iterations.push_back(rec);
}

SolutionBranch QpSolver::solve() const {
  SolutionBranch br = initial_branch();
  br.excision = excision_report(br);
  br.excision_ok = br.excision.bound_ok;
  if (opt_.enforce_excision && !br.excision_ok) {
    throw NumericalError("excision: smallest resonant block singular value " +
                         std::to_string(br.excision.min_singular_value) + " below threshold " +
                         std::to_string(br.excision.threshold));
  }
  const double seed_norm = analytic_norm(br.field, opt_.weight);
  const double target = opt_.tol * std::max(1.0, seed_norm);
  for (;;) {
    br.residual_norm = residual_norm(br);
    // At least one step, so the first correction is always recorded.
    if (br.residual_norm <= target && !br.iterations.empty()) {
      br.converged = true;
      break;
    }
    if (static_cast<int>(br.iterations.size()) >= opt_.max_iterations) break;
    newton_step(br);
  }
  if (opt_.compute_spill) {
    const auto spill = residual_untruncated(br.field, br.omega, problem_);
    br.spill_residual_norm = analytic_norm(spill, opt_.weight);
  }
  const int b = seed_.b();
  br.diophantine = diophantine_check(br.omega, 0.05, b + 1.0, b <= 3 ? 100 : 20, 0);
  return br;
}

SolutionBranch solve_branch(const SeedSolution& seed, const NlsProblem& problem, const SolveOptions& opt) {
  return QpSolver(seed, problem, opt).solve();
}

FrequencyJacobian frequency_jacobian(const SeedSolution& seed, const NlsProblem& problem, const SolveOptions& opt,
                                     double rel_step, double c) {
  seed.validate();
  const int b = seed.b();
  SolveOptions o = opt;
  o.enforce_excision = false;
  FrequencyJacobian fj;
  fj.jacobian.resize(b, b);
  double amax = 0.0;
  for (const auto& a : seed.amps) amax = std::max(amax, std::abs(a));
  for (int l = 0; l < b; ++l) {
    const double step = rel_step * std::abs(seed.amps[l]);
    std::array<std::vector<double>, 2> w;
    for (int s = 0; s < 2; ++s) {
      SeedSolution pert = seed;
      pert.amps[l] *= (std::abs(seed.amps[l]) + (s == 0 ? step : -step)) / std::abs(seed.amps[l]);
      const QpSolver solver(pert, problem, o);
      auto br = solver.initial_branch();
      solver.newton_step(br);
      w[s] = br.iterations.front().omega_increment;
    }
    for (int k = 0; k < b; ++k) fj.jacobian(k, l) = (w[0][k] - w[1][k]) / (2.0 * step);
  }
  fj.det_abs = std::abs(fj.jacobian.determinant());
  fj.det_root = std::pow(fj.det_abs, 1.0 / b);
  const int p = problem.p;
  fj.transversal = fj.det_abs >= c * std::pow(std::abs(problem.delta) * std::pow(amax, 2 * p - 1), b);
  return fj;
}

DiophantineResult diophantine_check(std::span<const double> omega, double gamma, double tau, int n_max, int m_cap) {
  DiophantineResult r;
  r.gamma = gamma;
  r.tau = tau;
  r.n_max = n_max;
  r.m_cap = m_cap;
  r.ok = true;
  const int b = static_cast<int>(omega.size());
  if (b < 1 || n_max < 1) return r;
  std::vector<int> n(b, -n_max);
  for (;;) {
    // Half space: first nonzero coordinate positive; -n gives the same test.
    int first = 0;
    while (first < b && n[first] == 0) ++first;
    if (first < b && n[first] > 0) {
      double dot = 0.0;
      long l1 = 0;
      for (int i = 0; i < b; ++i) {
        dot += n[i] * omega[i];
        l1 += std::abs(n[i]);
      }
      const double m = std::clamp(-std::round(dot), static_cast<double>(-m_cap), static_cast<double>(m_cap));
      const double val = std::abs(dot + m);
      if (val < gamma * std::pow(static_cast<double>(l1), -tau)) {
        r.ok = false;
        r.witness = n;
        r.witness_m = static_cast<int>(m);
        r.witness_value = val;
        return r;
      }
    }
    int k = b - 1;
    while (k >= 0 && n[k] == n_max) n[k--] = -n_max;
    if (k < 0) break;
    ++n[k];
  }
  return r;
}

SemiclassicalResult semiclassical_run(const SeedSolution& tmpl, int K, int p, const SolveOptions& opt) {
  if (K < 1) throw ValidationError("K must be a positive integer");
  for (const auto& a : tmpl.amps) {
    if (std::abs(a) > 1.0) throw ValidationError("semiclassical amplitudes must lie in (0, 1]");
  }
  NlsProblem prob;
  prob.b = tmpl.b();
  prob.d = tmpl.d;
  prob.p = p;
  prob.delta = 1.0;
  prob.kappa = static_cast<double>(K) * K;
  SemiclassicalResult res;
  res.K = K;
  res.branch = solve_branch(tmpl, prob, opt);
  FourierField diff = res.branch.field;
  for (int k = 0; k < tmpl.b(); ++k) {
    diff.u.erase(tmpl.u_site(k));
    diff.v.erase(tmpl.v_site(k));
  }
  res.remainder = analytic_norm(diff, opt.weight);
  const auto w0 = tmpl.omega0();
  for (int k = 0; k < tmpl.b(); ++k) res.frequency_offsets.push_back(res.branch.omega[k] - prob.kappa * w0[k]);
  return res;
}

bool quadratic_convergence(const std::vector<double>& r, double C, double floor, int count) {
  const int n = static_cast<int>(r.size());
  for (int k = std::max(0, n - 1 - count); k + 1 < n; ++k) {
    if (r[k + 1] > std::max(C * r[k] * r[k], floor)) return false;
  }
  return true;
}

double newton_constant(const SolutionBranch& br) {
  const int p = br.problem.p;
  const double unorm = analytic_norm(br.field, AnalyticWeight{});
  const double sigma = std::max(br.excision.min_singular_value, 1e-300);
  const double second = (2.0 * p + 1) * (2.0 * p) * std::pow(unorm, 2 * p - 1) * std::abs(br.problem.delta);
  return 10.0 * second / (sigma * sigma);
}

void to_json(nlohmann::json& j, const IterationRecord& r) {
  j = nlohmann::json{{"residual_norm", r.residual_norm},
                     {"correction_norm", r.correction_norm},
                     {"omega_shift", r.omega_shift},
                     {"min_singular_value", r.min_singular_value},
                     {"krylov_iterations", r.krylov_iterations}};
}

void to_json(nlohmann::json& j, const DiophantineResult& r) {
  j = nlohmann::json{{"gamma", r.gamma}, {"tau", r.tau}, {"n_max", r.n_max}, {"m_cap", r.m_cap}, {"ok", r.ok}};
  if (!r.ok) {
    j["witness_n"] = r.witness;
    j["witness_m"] = r.witness_m;
    j["witness_value"] = r.witness_value;
  }
}

void to_json(nlohmann::json& j, const SolutionBranch& br) {
  j = nlohmann::json{{"seed", br.seed},
                     {"p", br.problem.p},
                     {"delta", br.problem.delta},
                     {"kappa", br.problem.kappa},
                     {"box", br.box},
                     {"omega", br.omega},
                     {"residual_norm", br.residual_norm},
                     {"converged", br.converged},
                     {"iterations", br.iterations},
                     {"certificates", {{"excision", br.excision}, {"excision_ok", br.excision_ok}}},
                     {"field", br.field}};
  if (br.spill_residual_norm >= 0) j["spill_residual_norm"] = br.spill_residual_norm;
  if (br.diophantine) j["certificates"]["diophantine"] = *br.diophantine;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "delta_or_K,first_correction_norm,omega_shift_norm,det_jacobian,remainder\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.delta_or_k << ',' << r.first_correction_norm << ',' << r.omega_shift_norm << ',' << r.det_jacobian << ','
       << r.remainder << '\n';
  }
}

}  // namespace qpnls
