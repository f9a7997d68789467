#include "qpnls/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qpnls/error.hpp"

namespace qpnls {

namespace {

std::vector<cplx> ipow(const std::vector<cplx>& w, int e) {
  std::vector<cplx> out(w.size(), cplx{1.0, 0.0});
  for (int k = 0; k < e; ++k)
    for (std::size_t i = 0; i < w.size(); ++i) out[i] *= w[i];
  return out;
}

// Zeroes coefficients at the FFT round-off level relative to the largest one.
void drop_roundoff(DenseCoeffs& c) {
  double mx = 0.0;
  for (const auto& z : c) mx = std::max(mx, std::abs(z));
  const double floor = NonlinearEvaluator::kRoundoffFloor * mx;
  for (auto& z : c) {
    if (std::abs(z) < floor) z = 0.0;
  }
}

}  // namespace

int TailSpec::max_m() const {
  int m = 0;
  for (const auto& t : terms) m = std::max(m, t.m);
  return m;
}

int TailSpec::max_alpha_radius() const {
  int r = 0;
  for (const auto& t : terms)
    for (const auto& [l, a] : t.alpha_hat)
      for (int c : l) r = std::max(r, std::abs(c));
  return r;
}

void TailSpec::validate(int d) const {
  if (decay_C <= 0 || decay_c <= 0) throw ValidationError("tail decay constants must be positive");
  for (const auto& t : terms) {
    if (t.m < 1) throw ValidationError("tail term order m must be >= 1");
    for (const auto& [l, a] : t.alpha_hat) {
      if (static_cast<int>(l.size()) != d) throw ValidationError("tail coefficient has wrong dimension");
      long l1 = 0;
      for (int c : l) l1 += std::abs(c);
      const double bound = decay_C * std::exp(-decay_c * static_cast<double>(l1));
      if (std::abs(a) > bound * (1 + 1e-12)) {
        throw ValidationError("tail coefficient violates the analytic decay bound C' exp(-c'|l|)");
      }
    }
  }
}

int TailSpec::truncation_order(double decay_C, double decay_c, double uv_norm, int p, double tol, int cap) {
  for (int m = 0; m <= cap; ++m) {
    if (decay_C * std::exp(-decay_c) * std::pow(uv_norm, p + m + 1) < 0.01 * tol) return m;
  }
  return cap;
}

void NlsProblem::validate() const {
  if (b < 1 || d < 1 || b + d > kMaxLatticeDim) throw ValidationError("problem dimensions out of range");
  if (p < 1) throw ValidationError("nonlinearity power p must be >= 1");
  if (!std::isfinite(delta)) throw ValidationError("delta must be finite");
  if (!(kappa > 0)) throw ValidationError("dispersion scale kappa must be positive");
  tail.validate(d);
}

FourierField absorb_coupling(const FourierField& f, double delta, int p) {
  const double s = std::pow(std::abs(delta), 1.0 / (2.0 * p));
  FourierField g = f;
  for (auto& [m, z] : g.u) z *= s;
  for (auto& [m, z] : g.v) z *= s;
  return g;
}

NonlinearEvaluator::NonlinearEvaluator(const NlsProblem& problem, const TruncationBox& box)
    : problem_(problem), grid_(problem.b, problem.d, box) {
  problem_.validate();
  spectral_ = SpectralGrid::for_products(problem_.b, problem_.d, box, problem_.degree(),
                                         problem_.tail.max_alpha_radius());
  for (const auto& t : problem_.tail.terms) {
    SparseCoeffs a;
    for (const auto& [l, z] : t.alpha_hat) {
      MultiIndex m(problem_.b, problem_.d);
      for (int i = 0; i < problem_.d; ++i) m.set_j(i, l[i]);
      a[m] += z;
    }
    alpha_.push_back(spectral_->synthesize(a));
  }
}

NonlinearEvaluator::Rows NonlinearEvaluator::leading(const DenseCoeffs& u, const DenseCoeffs& v, int p) const {
  const auto U = spectral_->synthesize(u, grid_);
  const auto V = spectral_->synthesize(v, grid_);
  std::vector<cplx> W(U.size());
  for (std::size_t i = 0; i < W.size(); ++i) W[i] = U[i] * V[i];
  auto Wp = ipow(W, p);
  std::vector<cplx> Nu(U.size()), Nv(U.size());
  for (std::size_t i = 0; i < W.size(); ++i) {
    Nu[i] = Wp[i] * U[i];
    Nv[i] = Wp[i] * V[i];
  }
  return {spectral_->analyze(std::move(Nu), grid_), spectral_->analyze(std::move(Nv), grid_)};
}

NonlinearEvaluator::Rows NonlinearEvaluator::nonlinear(const DenseCoeffs& u, const DenseCoeffs& v) const {
  const int p = problem_.p;
  const auto U = spectral_->synthesize(u, grid_);
  const auto V = spectral_->synthesize(v, grid_);
  std::vector<cplx> W(U.size());
  for (std::size_t i = 0; i < W.size(); ++i) W[i] = U[i] * V[i];
  const auto Wp = ipow(W, p);
  std::vector<cplx> Nu(U.size()), Nv(U.size());
  for (std::size_t i = 0; i < W.size(); ++i) {
    Nu[i] = Wp[i] * U[i];
    Nv[i] = Wp[i] * V[i];
  }
  for (std::size_t t = 0; t < problem_.tail.terms.size(); ++t) {
    const auto Wq = ipow(W, p + problem_.tail.terms[t].m);
    const auto& A = alpha_[t];
    for (std::size_t i = 0; i < W.size(); ++i) {
      Nu[i] += A[i] * Wq[i] * U[i];
      Nv[i] += std::conj(A[i]) * Wq[i] * V[i];
    }
  }
  Rows out{spectral_->analyze(std::move(Nu), grid_), spectral_->analyze(std::move(Nv), grid_)};
  drop_roundoff(out.u);
  drop_roundoff(out.v);
  return out;
}

NonlinearEvaluator::Kernels NonlinearEvaluator::kernels(const DenseCoeffs& u, const DenseCoeffs& v) const {
  const int p = problem_.p;
  const auto U = spectral_->synthesize(u, grid_);
  const auto V = spectral_->synthesize(v, grid_);
  const std::size_t n = U.size();
  std::vector<cplx> W(n);
  for (std::size_t i = 0; i < n; ++i) W[i] = U[i] * V[i];
  const auto Wp1 = ipow(W, p - 1);
  Kernels k{std::vector<cplx>(n), std::vector<cplx>(n), std::vector<cplx>(n), std::vector<cplx>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const cplx wp = Wp1[i] * W[i];
    k.uu[i] = double(p + 1) * wp;
    k.vv[i] = double(p + 1) * wp;
    k.uv[i] = double(p) * Wp1[i] * U[i] * U[i];
    k.vu[i] = double(p) * Wp1[i] * V[i] * V[i];
  }
  for (std::size_t t = 0; t < problem_.tail.terms.size(); ++t) {
    const int q = p + problem_.tail.terms[t].m;
    const auto Wq1 = ipow(W, q - 1);
    const auto& A = alpha_[t];
    for (std::size_t i = 0; i < n; ++i) {
      const cplx wq = Wq1[i] * W[i];
      const cplx a = A[i], ac = std::conj(A[i]);
      k.uu[i] += a * double(q + 1) * wq;
      k.vv[i] += ac * double(q + 1) * wq;
      k.uv[i] += a * double(q) * Wq1[i] * U[i] * U[i];
      k.vu[i] += ac * double(q) * Wq1[i] * V[i] * V[i];
    }
  }
  return k;
}

SparseCoeffs conv_power(const FourierField& field, int p, double floor_rel) {
  NlsProblem prob;
  prob.b = field.b;
  prob.d = field.d;
  prob.p = p;
  NonlinearEvaluator ev(prob, field.box);
  const auto u = to_dense(field.u, ev.grid());
  const auto v = to_dense(field.v, ev.grid());
  const auto rows = ev.leading(u, v, p);
  double mx = 0.0;
  for (const auto& z : rows.u) mx = std::max(mx, std::abs(z));
  return to_sparse(rows.u, ev.grid(), floor_rel * mx);
}

NonlinearEvaluator::Rows residual_dense(const NonlinearEvaluator& ev, const DenseCoeffs& u, const DenseCoeffs& v,
                                        std::span<const double> omega) {
  const auto& prob = ev.problem();
  auto rows = ev.nonlinear(u, v);
  ev.grid().for_each([&](std::size_t i, const MultiIndex& m) {
    const double nw = m.time_dot(omega);
    const double lap = prob.kappa * static_cast<double>(m.space_sq());
    rows.u[i] = (nw + lap) * u[i] + prob.delta * rows.u[i];
    rows.v[i] = (-nw + lap) * v[i] + prob.delta * rows.v[i];
  });
  return rows;
}

FourierField residual(const FourierField& field, std::span<const double> omega, const NlsProblem& problem) {
  if (static_cast<int>(omega.size()) != field.b) throw ValidationError("omega must have b entries");
  NlsProblem prob = problem;
  prob.b = field.b;
  prob.d = field.d;
  NonlinearEvaluator ev(prob, field.box);
  const auto rows = residual_dense(ev, to_dense(field.u, ev.grid()), to_dense(field.v, ev.grid()), omega);
  FourierField out(field.b, field.d, field.box);
  out.u = to_sparse(rows.u, ev.grid());
  out.v = to_sparse(rows.v, ev.grid());
  return out;
}

FourierField residual_untruncated(const FourierField& field, std::span<const double> omega,
                                  const NlsProblem& problem) {
  if (static_cast<int>(omega.size()) != field.b) throw ValidationError("omega must have b entries");
  NlsProblem prob = problem;
  prob.b = field.b;
  prob.d = field.d;
  prob.validate();
  const int deg = prob.degree();
  const int extra = prob.tail.max_alpha_radius();
  const TruncationBox wide{deg * field.box.n_time, deg * field.box.n_space + extra};
  auto sg = SpectralGrid::for_full_products(prob.b, prob.d, field.box, deg, extra);
  const BoxGrid window(prob.b, prob.d, wide);

  const auto U = sg->synthesize(field.u);
  const auto V = sg->synthesize(field.v);
  const std::size_t n = U.size();
  std::vector<cplx> W(n), Nu(n), Nv(n);
  for (std::size_t i = 0; i < n; ++i) W[i] = U[i] * V[i];
  const auto Wp = ipow(W, prob.p);
  for (std::size_t i = 0; i < n; ++i) {
    Nu[i] = Wp[i] * U[i];
    Nv[i] = Wp[i] * V[i];
  }
  for (const auto& t : prob.tail.terms) {
    SparseCoeffs a;
    for (const auto& [l, z] : t.alpha_hat) {
      MultiIndex m(prob.b, prob.d);
      for (int i = 0; i < prob.d; ++i) m.set_j(i, l[i]);
      a[m] += z;
    }
    const auto A = sg->synthesize(a);
    const auto Wq = ipow(W, prob.p + t.m);
    for (std::size_t i = 0; i < n; ++i) {
      Nu[i] += A[i] * Wq[i] * U[i];
      Nv[i] += std::conj(A[i]) * Wq[i] * V[i];
    }
  }
  auto ru = sg->analyze(std::move(Nu), window);
  auto rv = sg->analyze(std::move(Nv), window);
  window.for_each([&](std::size_t i, const MultiIndex& m) {
    ru[i] *= prob.delta;
    rv[i] *= prob.delta;
    const double nw = m.time_dot(omega);
    const double lap = prob.kappa * static_cast<double>(m.space_sq());
    if (auto it = field.u.find(m); it != field.u.end()) ru[i] += (nw + lap) * it->second;
    if (auto it = field.v.find(m); it != field.v.end()) rv[i] += (-nw + lap) * it->second;
  });
  FourierField out(prob.b, prob.d, wide);
  out.u = to_sparse(ru, window);
  out.v = to_sparse(rv, window);
  return out;
}

std::set<MultiIndex> sumset(const std::set<MultiIndex>& a, const std::set<MultiIndex>& b) {
  std::set<MultiIndex> out;
  for (const auto& x : a)
    for (const auto& y : b) out.insert(x + y);
  return out;
}

namespace {

std::set<MultiIndex> seed_u_support(const SeedSolution& seed) {
  std::set<MultiIndex> s;
  for (int k = 0; k < seed.b(); ++k) s.insert(seed.u_site(k));
  return s;
}

std::set<MultiIndex> seed_v_support(const SeedSolution& seed) {
  std::set<MultiIndex> s;
  for (int k = 0; k < seed.b(); ++k) s.insert(seed.v_site(k));
  return s;
}

}  // namespace

std::set<MultiIndex> uv_power_support(const SeedSolution& seed, int p) {
  seed.validate();
  const auto uv = sumset(seed_u_support(seed), seed_v_support(seed));
  std::set<MultiIndex> acc{MultiIndex(seed.b(), seed.d)};
  for (int k = 0; k < p; ++k) acc = sumset(acc, uv);
  return acc;
}

std::set<MultiIndex> uu_coupling_support(const SeedSolution& seed, int p) {
  const auto u = seed_u_support(seed);
  return sumset(sumset(uv_power_support(seed, p - 1), u), u);
}

std::set<MultiIndex> f0_support(const SeedSolution& seed, int p) {
  if (p < 1) throw ValidationError("p must be >= 1");
  return sumset(uv_power_support(seed, p), seed_u_support(seed));
}

}  // namespace qpnls
