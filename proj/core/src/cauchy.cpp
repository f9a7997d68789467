#include "qpnls/cauchy.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"

namespace qpnls {

SpatialBox::SpatialBox(int d, int n) : d_(d), n_(n) {
  if (d < 1 || d > kMaxLatticeDim) throw ValidationError("spatial dimension out of range");
  if (n < 0) throw ValidationError("spatial box radius must be nonnegative");
  for (int i = 0; i < d; ++i) size_ *= static_cast<std::size_t>(2 * n + 1);
}

bool SpatialBox::contains(const SpatialVec& j) const {
  if (static_cast<int>(j.size()) != d_) return false;
  return std::all_of(j.begin(), j.end(), [&](int c) { return std::abs(c) <= n_; });
}

std::size_t SpatialBox::index(const SpatialVec& j) const {
  std::size_t idx = 0;
  for (int c : j) idx = idx * static_cast<std::size_t>(2 * n_ + 1) + static_cast<std::size_t>(c + n_);
  return idx;
}

SpatialVec SpatialBox::site(std::size_t idx) const {
  SpatialVec j(d_);
  const std::size_t w = static_cast<std::size_t>(2 * n_ + 1);
  for (int i = d_ - 1; i >= 0; --i) {
    j[i] = static_cast<int>(idx % w) - n_;
    idx /= w;
  }
  return j;
}

long SpatialBox::space_sq(std::size_t idx) const {
  long s = 0;
  for (int c : site(idx)) s += static_cast<long>(c) * c;
  return s;
}

long SpatialBox::l1(std::size_t idx) const {
  long s = 0;
  for (int c : site(idx)) s += std::abs(c);
  return s;
}

CauchyState CauchyState::zero(int d, int n_space, int p, double delta, double kappa) {
  CauchyState s;
  s.d = d;
  s.p = p;
  s.delta = delta;
  s.kappa = kappa;
  s.n_space = n_space;
  s.coeffs.assign(SpatialBox(d, n_space).size(), cplx{});
  return s;
}

cplx CauchyState::at(const SpatialVec& j) const {
  const auto b = box();
  return b.contains(j) ? coeffs[b.index(j)] : cplx{};
}

void CauchyState::set(const SpatialVec& j, cplx c) {
  const auto b = box();
  if (!b.contains(j)) throw ValidationError("spatial frequency outside the state box");
  coeffs[b.index(j)] = c;
}

double CauchyState::l2_norm() const {
  double s = 0.0;
  for (const auto& c : coeffs) s += std::norm(c);
  return std::sqrt(s);
}

double CauchyState::l1_norm() const {
  double s = 0.0;
  for (const auto& c : coeffs) s += std::abs(c);
  return s;
}

double CauchyState::analytic_norm(double rho_space) const {
  const auto b = box();
  double s = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i] != cplx{}) s += std::abs(coeffs[i]) * std::exp(rho_space * static_cast<double>(b.l1(i)));
  }
  return s;
}

double analytic_distance(const CauchyState& a, const CauchyState& b, double rho_space) {
  const auto box = a.box();
  double s = 0.0;
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) {
    const auto j = box.site(i);
    s += std::abs(a.coeffs[i] - b.at(j)) * std::exp(rho_space * static_cast<double>(box.l1(i)));
  }
  return s;
}

SplitStep::SplitStep(int d, int n_space, int p, double delta, double kappa)
    : box_(d, n_space), p_(p), delta_(delta), kappa_(kappa) {
  if (p < 1) throw ValidationError("p must be >= 1");
  m_ = fft_friendly_size((2 * p + 2) * n_space + 1);
  std::array<int, kMaxLatticeDim> len{};
  for (int i = 0; i < d; ++i) len[i] = m_;
  grid_ = std::make_unique<SpectralGrid>(0, d, len);
  positions_.resize(box_.size());
  for (std::size_t idx = 0; idx < box_.size(); ++idx) {
    std::size_t pos = 0;
    for (int c : box_.site(idx)) pos = pos * static_cast<std::size_t>(m_) + static_cast<std::size_t>((c + m_) % m_);
    positions_[idx] = pos;
  }
}

void SplitStep::check(const CauchyState& s) const {
  if (s.d != box_.d() || s.n_space != box_.n() || s.coeffs.size() != box_.size()) {
    throw ValidationError("state does not match the integrator box");
  }
}

void SplitStep::advance(CauchyState& s, double dt, long steps) const {
  check(s);
  if (steps <= 0) return;
  const std::size_t n = box_.size();
  std::vector<cplx> half(n), full(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = kappa_ * static_cast<double>(box_.space_sq(i));
    half[i] = std::polar(1.0, -w * dt / 2);
    full[i] = std::polar(1.0, -w * dt);
  }
  std::vector<cplx> c = s.coeffs;
  for (std::size_t i = 0; i < n; ++i) c[i] *= half[i];
  std::vector<cplx> buf(grid_->size());
  const double scale = 1.0 / static_cast<double>(grid_->size());
  double prev_sup2 = -1.0;
  for (long k = 0; k < steps; ++k) {
    std::fill(buf.begin(), buf.end(), cplx{});
    for (std::size_t i = 0; i < n; ++i) buf[positions_[i]] = c[i];
    grid_->transform(buf, false);
    double sup2 = 0.0;
    for (auto& x : buf) {
      const double a2 = std::norm(x);
      sup2 = std::max(sup2, a2);
      double pw = 1.0;
      for (int q = 0; q < p_; ++q) pw *= a2;
      x *= std::polar(1.0, -delta_ * pw * dt);
    }
    if (!std::isfinite(sup2) || (prev_sup2 > 0 && sup2 > 100.0 * prev_sup2)) {
      s.time += static_cast<double>(k) * dt;
      throw NumericalError("split-step blow-up guard triggered at t = " + std::to_string(s.time));
    }
    prev_sup2 = sup2;
    grid_->transform(buf, true);
    const auto& lin = (k + 1 < steps) ? full : half;
    for (std::size_t i = 0; i < n; ++i) c[i] = buf[positions_[i]] * scale * lin[i];
  }
  s.coeffs = std::move(c);
  s.time += static_cast<double>(steps) * dt;
}

double SplitStep::sup_norm(const CauchyState& s) const {
  check(s);
  std::vector<cplx> buf(grid_->size());
  for (std::size_t i = 0; i < box_.size(); ++i) buf[positions_[i]] = s.coeffs[i];
  grid_->transform(buf, false);
  double m = 0.0;
  for (const auto& x : buf) m = std::max(m, std::abs(x));
  return m;
}

double default_dt(const CauchyState& s, double safety) {
  const double inf = std::numeric_limits<double>::infinity();
  const double nl = std::abs(s.delta) * std::pow(s.l1_norm(), 2 * s.p);
  const double lin = s.kappa * s.d * static_cast<double>(s.n_space) * s.n_space;
  const double dt = std::min(nl > 0 ? 0.1 / nl : inf, lin > 0 ? 0.5 / lin : inf);
  return safety * (std::isfinite(dt) ? dt : 0.02);
}

QuasiPeriodicEvaluator::QuasiPeriodicEvaluator(const SolutionBranch& br)
    : omega_(br.omega), d_(br.field.d), p_(br.problem.p), delta_(br.problem.delta), kappa_(br.problem.kappa) {
  for (const auto& [m, c] : br.field.u) {
    if (c == cplx{}) continue;
    auto t = m.time();
    auto s = m.space();
    terms_.push_back({std::vector<int>(t.begin(), t.end()), SpatialVec(s.begin(), s.end()), c});
  }
}

CauchyState QuasiPeriodicEvaluator::at(double t, int n_space) const {
  CauchyState s = CauchyState::zero(d_, n_space, p_, delta_, kappa_);
  s.time = t;
  const auto box = s.box();
  for (const auto& term : terms_) {
    if (!box.contains(term.j)) continue;
    double phase = 0.0;
    for (std::size_t l = 0; l < term.n.size(); ++l) phase += term.n[l] * omega_[l];
    s.coeffs[box.index(term.j)] += term.c * std::polar(1.0, phase * t);
  }
  return s;
}

namespace {

struct MatchEval {
  SolutionBranch branch;
  std::vector<cplx> err;  // v(0) - u0 on u0's box
  double norm = 0.0;
};

MatchEval match_eval(const SeedSolution& seed, const NlsProblem& prob, const CauchyState& u0,
                     const ApproximantOptions& opt) {
  SolveOptions so = opt.solve;
  so.enforce_excision = false;
  MatchEval e;
  e.branch = solve_branch(seed, prob, so);
  const auto v0 = QuasiPeriodicEvaluator(e.branch).at(0.0, u0.n_space);
  e.err.resize(u0.coeffs.size());
  for (std::size_t i = 0; i < e.err.size(); ++i) e.err[i] = v0.coeffs[i] - u0.coeffs[i];
  e.norm = analytic_distance(v0, u0, opt.rho_space);
  return e;
}

}  // namespace

Approximant build_approximant(const CauchyState& u0, const std::vector<SolutionBranch>& library, double r_target,
                              const ApproximantOptions& opt) {
  if (library.empty()) throw ValidationError("branch library is empty");
  Approximant res;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& br : library) {
    if (br.field.d != u0.d) continue;
    const double e = analytic_distance(QuasiPeriodicEvaluator(br).at(0.0, u0.n_space), u0, opt.rho_space);
    if (e < best) {
      best = e;
      res.branch = br;
    }
  }
  if (!std::isfinite(best)) throw ValidationError("no library branch matches the state dimension");
  res.v = QuasiPeriodicEvaluator(res.branch);
  res.matching_error = best;
  res.error_history.push_back(best);
  if (best <= r_target) return res;

  SeedSolution seed = res.branch.seed;
  const NlsProblem prob = res.branch.problem;
  const auto box = u0.box();

  // Off-support modes: largest remaining coefficients first.
  double amax = 0.0;
  for (const auto& a : seed.amps) amax = std::max(amax, std::abs(a));
  const double scale = std::abs(prob.delta) < 1.0 ? std::abs(prob.delta) : std::min(amax, 0.5);
  const int cap = opt.mode_cap >= 0 ? opt.mode_cap
                                    : static_cast<int>(std::ceil(std::abs(std::log10(scale)))) * seed.b();
  const auto v0 = res.v.at(0.0, u0.n_space);
  std::vector<std::pair<double, std::size_t>> cand;
  const std::set<SpatialVec> have(seed.freqs.begin(), seed.freqs.end());
  for (std::size_t i = 0; i < box.size(); ++i) {
    const auto j = box.site(i);
    if (std::all_of(j.begin(), j.end(), [](int c) { return c == 0; }) || have.count(j)) continue;
    const double w = std::abs(u0.coeffs[i] - v0.coeffs[i]) * std::exp(opt.rho_space * static_cast<double>(box.l1(i)));
    if (w > 0.1 * r_target) cand.emplace_back(w, i);
  }
  std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [w, i] : cand) {
    if (res.added_modes >= cap || seed.b() + seed.d >= kMaxLatticeDim) break;
    const auto j = box.site(i);
    if (opt.solve.box) {
      if (std::any_of(j.begin(), j.end(), [&](int c) { return std::abs(c) > opt.solve.box->n_space; })) continue;
    }
    seed.freqs.push_back(j);
    seed.amps.push_back(u0.coeffs[i] - v0.coeffs[i]);
    ++res.added_modes;
  }

  MatchEval cur = match_eval(seed, prob, u0, opt);
  if (cur.norm < best) {
    res.branch = cur.branch;
    res.matching_error = cur.norm;
    res.error_history.push_back(cur.norm);
  } else {
    seed = res.branch.seed;
    cur = match_eval(seed, prob, u0, opt);
  }

  const int b = seed.b();
  std::vector<double> wts(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) wts[i] = std::exp(opt.rho_space * static_cast<double>(box.l1(i)));
  const auto stack_err = [&](const std::vector<cplx>& e) {
    Eigen::VectorXd r(2 * e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      r[2 * i] = wts[i] * e[i].real();
      r[2 * i + 1] = wts[i] * e[i].imag();
    }
    return r;
  };

  while (res.steps < opt.max_steps && cur.norm > r_target) {
    double amp = 0.0;
    for (const auto& a : seed.amps) amp = std::max(amp, std::abs(a));
    const double h = opt.fd_step * std::max(amp, 1e-8);
    const Eigen::VectorXd e0 = stack_err(cur.err);
    Eigen::MatrixXd J(e0.size(), 2 * b);
    for (int q = 0; q < 2 * b; ++q) {
      SeedSolution s = seed;
      s.amps[q / 2] += (q % 2 == 0) ? cplx{h, 0.0} : cplx{0.0, h};
      const auto e = match_eval(s, prob, u0, opt);
      J.col(q) = (stack_err(e.err) - e0) / h;
    }
    const Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-e0);
    bool accepted = false;
    for (double lam = 1.0; lam > 1e-3; lam *= 0.5) {
      SeedSolution s = seed;
      bool valid = true;
      for (int k = 0; k < b; ++k) {
        s.amps[k] += lam * cplx{step[2 * k], step[2 * k + 1]};
        if (std::abs(s.amps[k]) == 0.0) valid = false;
      }
      if (!valid) continue;
      auto trial = match_eval(s, prob, u0, opt);
      if (trial.norm < cur.norm) {
        seed = s;
        cur = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.stagnated = true;
      break;
    }
    ++res.steps;
    res.error_history.push_back(cur.norm);
    res.branch = cur.branch;
    res.matching_error = cur.norm;
  }
  res.v = QuasiPeriodicEvaluator(res.branch);
  return res;
}

double DriftReport::max_abs_drift() const {
  double m = 0.0;
  for (double x : analytic_norm_drift) m = std::max(m, std::abs(x));
  return m;
}

void DriftReport::write_csv(std::ostream& os) const {
  os << "time,l2_norm,analytic_norm,distance_to_qp\n" << std::setprecision(17);
  for (std::size_t i = 0; i < times.size(); ++i) {
    os << times[i] << ',' << l2_norm[i] << ',' << analytic_norm[i] << ',';
    if (i < distance_to_qp.size()) os << distance_to_qp[i];
    os << '\n';
  }
}

DriftReport drift_monitor(const CauchyState& u0, const QuasiPeriodicEvaluator* v, const DriftOptions& opt) {
  if (!(opt.horizon > 0)) throw ValidationError("drift horizon must be positive");
  DriftReport rep;
  rep.dt = opt.dt > 0 ? opt.dt : default_dt(u0);
  const SplitStep ss(u0.d, u0.n_space, u0.p, u0.delta, u0.kappa);

  std::vector<long> marks;
  const long last = std::max<long>(1, std::llround(opt.horizon / rep.dt));
  if (opt.t_min < opt.horizon && opt.samples_per_decade > 0) {
    for (int k = 0;; ++k) {
      const double t = opt.t_min * std::pow(10.0, static_cast<double>(k) / opt.samples_per_decade);
      if (t >= opt.horizon) break;
      marks.push_back(std::max<long>(1, std::llround(t / rep.dt)));
    }
  }
  marks.push_back(last);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  CauchyState s = u0;
  const double t0 = u0.time;
  const double n0 = u0.analytic_norm(opt.rho_space);
  const auto record = [&]() {
    const double t = s.time - t0;
    rep.times.push_back(t);
    rep.l2_norm.push_back(s.l2_norm());
    const double a = s.analytic_norm(opt.rho_space);
    rep.analytic_norm.push_back(a);
    rep.analytic_norm_drift.push_back(a - n0);
    bool breach = opt.drift_tol > 0 && std::abs(a - n0) > opt.drift_tol;
    if (v) {
      const double dist = analytic_distance(s, v->at(t, s.n_space), opt.rho_space);
      rep.distance_to_qp.push_back(dist);
      breach = breach || (opt.distance_tol > 0 && dist > opt.distance_tol);
    }
    return breach;
  };
  record();
  long done = 0;
  for (long m : marks) {
    const double before = s.time - t0;
    ss.advance(s, rep.dt, m - done);
    done = m;
    rep.steps = done;
    if (record()) {
      rep.breach_time = s.time - t0;
      rep.horizon_reached = before;
      rep.final_state = std::move(s);
      return rep;
    }
  }
  rep.horizon_reached = s.time - t0;
  rep.final_state = std::move(s);
  return rep;
}

IntegrityReport integrator_integrity(const CauchyState& u0, double horizon, double dt) {
  if (!(horizon > 0) || !(dt > 0)) throw ValidationError("integrity check needs positive horizon and dt");
  IntegrityReport r;
  r.horizon = horizon;
  const SplitStep ss(u0.d, u0.n_space, u0.p, u0.delta, u0.kappa);
  const long n1 = std::max<long>(1, std::lround(horizon / dt));
  r.dt = horizon / static_cast<double>(n1);
  const auto l2_diff = [](const CauchyState& a, const CauchyState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.coeffs.size(); ++i) s += std::norm(a.coeffs[i] - b.coeffs[i]);
    return std::sqrt(s);
  };
  CauchyState s1 = u0, s2 = u0, s4 = u0;
  ss.advance(s1, r.dt, n1);
  ss.advance(s2, r.dt / 2, 2 * n1);
  ss.advance(s4, r.dt / 4, 4 * n1);
  const double norm0 = u0.l2_norm();
  r.l2_drift_rate = std::max({std::abs(s1.l2_norm() - norm0), std::abs(s2.l2_norm() - norm0),
                              std::abs(s4.l2_norm() - norm0)}) / horizon;
  const double e1 = l2_diff(s1, s2), e2 = l2_diff(s2, s4);
  const double floor = 1e-14 * std::max(1.0, norm0) * std::sqrt(static_cast<double>(4 * n1));
  r.order_resolved = e2 > 10.0 * floor;
  r.order = (e1 > 0 && e2 > 0) ? std::log2(e1 / e2) : 0.0;
  r.richardson = e2 / 3.0;
  CauchyState back = s4;
  ss.advance(back, -r.dt / 4, 4 * n1);
  r.reversal_error = l2_diff(back, u0);
  r.reversal_bound = 100.0 * r.richardson + floor;
  r.ok = r.l2_drift_rate <= IntegrityReport::kL2RateTol && r.reversal_error <= r.reversal_bound &&
         (!r.order_resolved || std::abs(r.order - 2.0) <= IntegrityReport::kOrderTol);
  return r;
}

void to_json(nlohmann::json& j, const IntegrityReport& r) {
  j = nlohmann::json{{"horizon", r.horizon},           {"dt", r.dt},
                     {"l2_drift_rate", r.l2_drift_rate}, {"order", r.order},
                     {"order_resolved", r.order_resolved}, {"richardson", r.richardson},
                     {"reversal_error", r.reversal_error}, {"reversal_bound", r.reversal_bound},
                     {"ok", r.ok}};
}

void to_json(nlohmann::json& j, const CauchyState& s) {
  auto c = nlohmann::json::array();
  for (const auto& z : s.coeffs) c.push_back({z.real(), z.imag()});
  j = nlohmann::json{{"d", s.d},         {"p", s.p},       {"delta", s.delta}, {"kappa", s.kappa},
                     {"n_space", s.n_space}, {"time", s.time}, {"coeffs", c}};
}

void from_json(const nlohmann::json& j, CauchyState& s) {
  s = CauchyState::zero(j.at("d").get<int>(), j.at("n_space").get<int>(), j.at("p").get<int>(),
                        j.at("delta").get<double>(), j.value("kappa", 1.0));
  s.time = j.at("time").get<double>();
  const auto& c = j.at("coeffs");
  if (c.size() != s.coeffs.size()) throw ValidationError("checkpoint coefficient count does not match its box");
  for (std::size_t i = 0; i < c.size(); ++i) s.coeffs[i] = {c[i].at(0).get<double>(), c[i].at(1).get<double>()};
}

void to_json(nlohmann::json& j, const DriftReport& r) {
  double max_dist = 0.0;
  for (double x : r.distance_to_qp) max_dist = std::max(max_dist, x);
  j = nlohmann::json{{"horizon_reached", r.horizon_reached},
                     {"dt", r.dt},
                     {"steps", r.steps},
                     {"samples", r.times.size()},
                     {"max_abs_analytic_norm_drift", r.max_abs_drift()},
                     {"final_l2_norm", r.l2_norm.empty() ? 0.0 : r.l2_norm.back()}};
  if (!r.distance_to_qp.empty()) j["max_distance_to_qp"] = max_dist;
  if (r.breach_time) j["breach_time"] = *r.breach_time;
}

}  // namespace qpnls
