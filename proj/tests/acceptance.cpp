// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qpnls/cauchy.hpp"
#include "qpnls/error.hpp"
#include "qpnls/fit.hpp"
#include "qpnls/linop.hpp"
#include "qpnls/nonlinearity.hpp"
#include "qpnls/qp_solver.hpp"
#include "qpnls/resonance.hpp"
#include "qpnls/surface.hpp"

using namespace qpnls;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds, <= 0 for none
  std::function<Outcome()> body;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

NlsProblem problem_for(const SeedSolution& s, int p, double delta) {
  NlsProblem pr;
  pr.b = s.b();
  pr.d = s.d;
  pr.p = p;
  pr.delta = delta;
  return pr;
}

std::vector<double> omega0_of(const SeedSolution& s) {
  std::vector<double> w;
  for (long x : s.omega0()) w.push_back(static_cast<double>(x));
  return w;
}

// Converged branches collected along the way for the Newton convergence check.
std::vector<SolutionBranch>& branch_log() {
  static std::vector<SolutionBranch> log;
  return log;
}

void record(const SolutionBranch& br) { branch_log().push_back(br); }

// ---------------------------------------------------------------------------
// 1. Single-mode periodic solution.

Outcome exact_periodic() {
  double worst_omega = 0.0, worst_res = 0.0, slowest = 0.0;
  bool ok = true;
  const std::vector<SpatialVec> js{{2}, {1, -2}, {1, 1, -1}};
  const cplx a{0.6, -0.3};
  for (const auto& j : js) {
    for (int p : {1, 2}) {
      const SeedSolution s{static_cast<int>(j.size()), {j}, {a}};
      const double delta = 0.1;
      // The exact solution lives on S, so the smallest certificate box suffices.
      SolveOptions opt;
      opt.box = minimal_certificate_box(s, p);
      const auto t0 = std::chrono::steady_clock::now();
      const auto br = solve_branch(s, problem_for(s, p, delta), opt);
      slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      double jj = 0.0;
      for (int x : j) jj += x * x;
      const double expect = jj + delta * std::pow(std::abs(a), 2 * p);
      worst_omega = std::max(worst_omega, std::abs(br.omega[0] - expect));
      worst_res = std::max(worst_res, br.residual_norm);
      ok = ok && br.converged;
      record(br);
    }
  }
  ok = ok && worst_omega <= 1e-12 && worst_res <= 1e-12 && slowest < 1.0;
  return {ok, "6 cases, max |omega - exact| = " + fmt(worst_omega) + ", max residual = " + fmt(worst_res) +
                  ", slowest solve " + fmt(slowest) + " s"};
}

// ---------------------------------------------------------------------------
// 2 and 3. Delta sweeps in the amplitude normalization.

struct SweepCase {
  std::string label;
  SeedSolution unit;
  int p;
};

struct SweepSlopes {
  double correction = 0.0;
  double omega = 0.0;
  double det = 0.0;
  double det_root = 0.0;
  bool generic = false;
};

const std::vector<double> kDeltas{1e-2, 3e-3, 1e-3};

std::vector<SweepCase> sweep_cases() {
  const std::vector<cplx> amps{{1.0, 0.0}, {0.7, 0.4}};
  return {{"d=1 p=1", {1, {{1}, {2}}, amps}, 1},
          {"d=2 p=1", {2, {{1, 0}, {0, 1}}, amps}, 1},
          {"d=1 p=2", {1, {{1}, {2}}, amps}, 2}};
}

const SweepSlopes& sweep(const SweepCase& c) {
  static std::map<std::string, SweepSlopes> cache;
  if (auto it = cache.find(c.label); it != cache.end()) return it->second;
  SweepSlopes out;
  out.generic = certify_seed(c.unit, c.p, minimal_certificate_box(c.unit, c.p)).is_generic;
  std::vector<double> corr, dom, det, root;
  for (double delta : kDeltas) {
    const SeedSolution s = c.unit.scaled_amplitudes(delta);
    const auto pr = problem_for(s, c.p, 1.0);
    SolveOptions opt;
    opt.enforce_excision = false;
    const auto br = solve_branch(s, pr, opt);
    if (br.converged) record(br);
    corr.push_back(br.first_correction_norm());
    dom.push_back(br.first_omega_shift());
    const auto fj = frequency_jacobian(s, pr, opt);
    det.push_back(fj.det_abs);
    root.push_back(fj.det_root);
  }
  out.correction = loglog_fit(kDeltas, corr).slope;
  out.omega = loglog_fit(kDeltas, dom).slope;
  out.det = loglog_fit(kDeltas, det).slope;
  out.det_root = loglog_fit(kDeltas, root).slope;
  return cache[c.label] = out;
}

Outcome first_correction() {
  bool ok = true;
  std::string detail;
  for (const auto& c : sweep_cases()) {
    const auto& s = sweep(c);
    ok = ok && s.generic;
    if (c.p == 1) {
      ok = ok && std::abs(s.correction - 3.0) <= 0.2 && std::abs(s.omega - 2.0) <= 0.2;
      detail += c.label + ": du slope " + fmt(s.correction) + ", dw slope " + fmt(s.omega) + "; ";
    } else {
      ok = ok && std::abs(s.omega - 4.0) <= 0.3;
      detail += c.label + ": dw slope " + fmt(s.omega) + "; ";
    }
  }
  return {ok, detail};
}

Outcome transversality() {
  bool ok = true;
  std::string detail;
  for (const auto& c : sweep_cases()) {
    const auto& s = sweep(c);
    const double target = 2.0 * c.p - 1.0;
    ok = ok && std::abs(s.det - target) <= 0.2;
    detail += c.label + ": det slope " + fmt(s.det) + " (target " + fmt(target) + ", |det|^(1/b) slope " +
              fmt(s.det_root) + "); ";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 4. Resonance projection in d = 1, p = 1 against brute force.

using Vertex = std::pair<MultiIndex, int>;

std::set<MultiIndex> brute_sumset(const std::set<MultiIndex>& a, const std::set<MultiIndex>& b) {
  std::set<MultiIndex> out;
  for (const auto& x : a) {
    for (const auto& y : b) out.insert(x + y);
  }
  return out;
}

// Non-singleton components by BFS over a full box scan with explicit offset sets.
std::vector<std::vector<Vertex>> oracle_components(const SeedSolution& s, int p, const TruncationBox& box) {
  const auto w0 = s.omega0();
  std::vector<Vertex> verts;
  for (const auto& m : enumerate_box(box, s.b(), s.d)) {
    const long nw = m.time_dot(w0), sq = m.space_sq();
    if (nw + sq == 0) verts.push_back({m, 1});
    if (-nw + sq == 0) verts.push_back({m, -1});
  }
  std::set<MultiIndex> u, v;
  for (int k = 0; k < s.b(); ++k) {
    u.insert(s.u_site(k));
    v.insert(s.v_site(k));
  }
  const MultiIndex origin(s.b(), s.d);
  std::set<MultiIndex> same{origin};
  for (int k = 0; k < p; ++k) same = brute_sumset(same, brute_sumset(u, v));
  std::set<MultiIndex> opp{origin};
  for (int k = 0; k < p - 1; ++k) opp = brute_sumset(opp, brute_sumset(u, v));
  opp = brute_sumset(brute_sumset(opp, u), u);
  auto linked = [&](const Vertex& a, const Vertex& b) {
    const auto diff = a.first - b.first;
    if (a.second == b.second) return !diff.is_origin() && same.count(diff) > 0;
    if (a.second > 0) return opp.count(diff) > 0;
    return opp.count(b.first - a.first) > 0;
  };
  std::vector<bool> seen(verts.size(), false);
  std::vector<std::vector<Vertex>> comps;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    if (seen[i]) continue;
    std::vector<Vertex> comp;
    std::queue<std::size_t> q;
    q.push(i);
    seen[i] = true;
    while (!q.empty()) {
      const auto a = q.front();
      q.pop();
      comp.push_back(verts[a]);
      for (std::size_t b = 0; b < verts.size(); ++b) {
        if (!seen[b] && linked(verts[a], verts[b])) {
          seen[b] = true;
          q.push(b);
        }
      }
    }
    if (comp.size() > 1) comps.push_back(comp);
  }
  return comps;
}

Outcome resonance_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> mag(1, 10), coin(0, 1), bdist(1, 4);
  int mismatches = 0, instances = 0;
  std::string first;
  for (int t = 0; t < 100; ++t) {
    const int b = bdist(rng);
    SeedSolution s;
    s.d = 1;
    std::set<int> used;
    while (s.b() < b) {
      const int m = mag(rng);
      if (!used.insert(m).second) continue;
      s.freqs.push_back({coin(rng) ? m : -m});
      s.amps.push_back({1.0, 0.0});
    }
    std::set<int> expect;
    for (const auto& j : s.freqs) {
      expect.insert(j[0]);
      expect.insert(-j[0]);
    }
    const TruncationBox box = minimal_certificate_box(s, 1);
    const auto g = build_resonance_graph(s, bicharacteristics(s, box), 1);
    std::set<int> graph_proj;
    std::multiset<std::size_t> graph_sizes;
    for (const auto& c : g.components()) {
      if (c.size() < 2) continue;
      graph_sizes.insert(c.size());
      for (auto v : c) graph_proj.insert(g.vertices()[v].site.j(0));
    }
    std::set<int> oracle_proj;
    std::multiset<std::size_t> oracle_sizes;
    for (const auto& c : oracle_components(s, 1, box)) {
      oracle_sizes.insert(c.size());
      for (const auto& v : c) oracle_proj.insert(v.first.j(0));
    }
    // Direct evaluation of the cubic resonance conditions over the spatial window.
    std::set<int> formula;
    for (int j = -box.n_space; j <= box.n_space; ++j) {
      for (int k = 0; k < b; ++k) {
        for (int l = 0; l < b; ++l) {
          if (k == l) continue;
          if (cubic_resonance_test(s.freqs[k], s.freqs[l], {j}, CubicCase::kSameSign) ||
              cubic_resonance_test(s.freqs[k], s.freqs[l], {j}, CubicCase::kOppositeSign)) {
            formula.insert(j);
            formula.insert(-j);
          }
        }
      }
    }
    // With one frequency there are no pairs, and the conditions reduce to the anchors themselves.
    if (b == 1) formula = expect;
    ++instances;
    const bool match = graph_proj == expect && oracle_proj == expect && formula == expect && graph_sizes == oracle_sizes;
    if (!match) {
      ++mismatches;
      if (first.empty()) {
        std::ostringstream os;
        os << "first mismatch b=" << b << " j=";
        for (const auto& j : s.freqs) os << j[0] << ' ';
        first = os.str();
      }
    }
  }
  return {mismatches == 0,
          std::to_string(instances) + " instances, " + std::to_string(mismatches) + " mismatches" +
              (first.empty() ? "" : "; " + first)};
}

// ---------------------------------------------------------------------------
// 5. Component bound on random certified seeds.

Outcome component_bound() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> bdist(1, 3), ddist(1, 3), pdist(1, 2);
  int certified = 0, draws = 0, violations = 0, unsaturated = 0;
  std::size_t worst = 0;
  std::string example;
  while (certified < 100 && draws < 2000) {
    ++draws;
    const int b = bdist(rng), d = ddist(rng), p = pdist(rng);
    std::uniform_int_distribution<int> coord(d == 3 ? -2 : -3, d == 3 ? 2 : 3);
    SeedSolution s;
    s.d = d;
    while (s.b() < b) {
      SpatialVec j(d);
      for (int& x : j) x = coord(rng);
      if (std::all_of(j.begin(), j.end(), [](int x) { return x == 0; })) continue;
      if (std::find(s.freqs.begin(), s.freqs.end(), j) != s.freqs.end()) continue;
      s.freqs.push_back(j);
      s.amps.push_back({1.0, 0.0});
    }
    const TruncationBox box = minimal_certificate_box(s, p);
    const auto cert = certify_seed(s, p, box);
    if (!cert.is_generic) continue;
    ++certified;
    const std::size_t bound = std::max<std::size_t>(2 * b, d + 2);
    const auto growth = box_growth(s, p, box);
    worst = std::max(worst, growth.size_2n);
    const bool bad = growth.size_n > bound || growth.size_2n > bound || !growth.saturated();
    if (growth.size_n > bound || growth.size_2n > bound) ++violations;
    if (!growth.saturated()) ++unsaturated;
    if (bad && example.empty()) {
      std::ostringstream os;
      os << "; first failure p=" << p << " j=";
      for (const auto& j : s.freqs) {
        os << '(';
        for (int x : j) os << x << ' ';
        os << ')';
      }
      os << " sizes " << growth.size_n << " -> " << growth.size_2n << " bound " << bound;
      example = os.str();
    }
  }
  const bool ok = certified == 100 && violations == 0 && unsaturated == 0;
  return {ok, std::to_string(certified) + " certified of " + std::to_string(draws) + " draws, " +
                  std::to_string(violations) + " bound violations, " + std::to_string(unsaturated) +
                  " unsaturated, largest component " + std::to_string(worst) + example};
}

// ---------------------------------------------------------------------------
// 6. Reduced spectrum against dense eigenvalues.

Outcome schur_equivalence() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(-2, 2);
  std::uniform_real_distribution<double> mod(0.05, 0.25), phase(0.0, 2.0 * M_PI);
  double worst = 0.0;
  int count_mismatch = 0, total_eigs = 0;
  for (int t = 0; t < 20; ++t) {
    const int b = 1 + t % 2, d = 1 + (t / 2) % 2;
    SeedSolution s;
    s.d = d;
    while (s.b() < b) {
      SpatialVec j(d);
      for (int& x : j) x = coord(rng);
      if (std::all_of(j.begin(), j.end(), [](int x) { return x == 0; })) continue;
      if (std::find(s.freqs.begin(), s.freqs.end(), j) != s.freqs.end()) continue;
      s.freqs.push_back(j);
      s.amps.push_back(std::polar(mod(rng), phase(rng)));
    }
    const TruncationBox box = b == 1 && d == 1 ? TruncationBox{3, 3} : b == 2 && d == 2 ? TruncationBox{1, 3}
                                                                                          : TruncationBox{2, 3};
    const auto op = assemble(s.field(box), omega0_of(s), problem_for(s, 1, 1.0));
    const auto graph = build_resonance_graph(s, bicharacteristics(s, box), 1);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(op.dense(), false);
    std::vector<cplx> dense;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      if (std::abs(es.eigenvalues()[i]) < 0.5) dense.push_back(es.eigenvalues()[i]);
    }
    const auto reduced = schur_spectrum(op, graph, 0.5);
    if (reduced.size() != dense.size()) ++count_mismatch;
    total_eigs += static_cast<int>(dense.size());
    for (const auto& z : dense) {
      double best = 1e300;
      for (const auto& y : reduced) best = std::min(best, std::abs(y - z));
      worst = std::max(worst, best);
    }
    for (const auto& y : reduced) {
      double best = 1e300;
      for (const auto& z : dense) best = std::min(best, std::abs(y - z));
      worst = std::max(worst, best);
    }
  }
  return {count_mismatch == 0 && worst <= 1e-8,
          "20 instances, " + std::to_string(total_eigs) + " eigenvalues in window, count mismatches " +
              std::to_string(count_mismatch) + ", max distance " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 7. Assembled operator against central differences of the residual.

Outcome jacobian_consistency() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const SeedSolution s{2, {{1, 0}, {0, 1}}, {{0.3, 0.1}, {-0.2, 0.25}}};
  double worst = 0.0;
  for (int p : {1, 2}) {
    const auto pr = problem_for(s, p, 0.7);
    const TruncationBox box{2, 3};
    auto ev = std::make_shared<NonlinearEvaluator>(pr, box);
    const auto f = s.field(box);
    DenseCoeffs u = to_dense(f.u, ev->grid()), v = to_dense(f.v, ev->grid());
    // Move off the seed so every kernel is populated.
    for (std::size_t i = 0; i < u.size(); ++i) {
      const cplx z{0.01 * g(rng), 0.01 * g(rng)};
      u[i] += z;
      v[i] += std::conj(z);
    }
    std::vector<double> w = omega0_of(s);
    for (double& x : w) x += 0.013;
    const LinearizedOp op(ev, u, v, w);
    const double eps = 1e-6;
    for (int t = 0; t < 25; ++t) {
      DenseCoeffs hu(u.size()), hv(v.size());
      for (auto& x : hu) x = {g(rng), g(rng)};
      for (auto& x : hv) x = {g(rng), g(rng)};
      CVec h(static_cast<Eigen::Index>(2 * u.size()));
      for (std::size_t i = 0; i < u.size(); ++i) {
        h[i] = hu[i];
        h[u.size() + i] = hv[i];
      }
      const CVec Fh = op.apply(h);
      DenseCoeffs up = u, vp = v, um = u, vm = v;
      for (std::size_t i = 0; i < u.size(); ++i) {
        up[i] += eps * hu[i];
        vp[i] += eps * hv[i];
        um[i] -= eps * hu[i];
        vm[i] -= eps * hv[i];
      }
      const auto Fp = residual_dense(*ev, up, vp, w);
      const auto Fm = residual_dense(*ev, um, vm, w);
      CVec fd(h.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        fd[i] = (Fp.u[i] - Fm.u[i]) / (2.0 * eps);
        fd[u.size() + i] = (Fp.v[i] - Fm.v[i]) / (2.0 * eps);
      }
      worst = std::max(worst, (fd - Fh).norm() / Fh.norm());
    }
  }
  return {worst <= 1e-5, "50 directions, max relative error " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 8. Quadratic convergence on every accepted branch solved above.

Outcome newton_quadratic() {
  int accepted = 0, multi = 0, failed = 0;
  std::string example;
  for (const auto& br : branch_log()) {
    if (!br.converged || !br.excision_ok) continue;
    ++accepted;
    const auto r = br.residual_history();
    if (r.size() >= 3) ++multi;
    const double floor = 1e-13 * std::max(1.0, analytic_norm(br.field, AnalyticWeight{}));
    if (!quadratic_convergence(r, newton_constant(br), floor)) {
      ++failed;
      if (example.empty()) {
        example = "; first failure C = " + fmt(newton_constant(br)) + ", residuals";
        for (double x : r) example += " " + fmt(x);
      }
    }
  }
  return {accepted > 0 && multi > 0 && failed == 0,
          std::to_string(accepted) + " accepted branches (" + std::to_string(multi) +
              " with >= 2 steps), " + std::to_string(failed) + " failures" + example};
}

// ---------------------------------------------------------------------------
// 9 and 12. Cauchy problem from a converged branch.

struct CauchyRun {
  bool ok = false;
  std::string detail;
  CauchyState u0;
};

const CauchyRun& cauchy_run() {
  static std::optional<CauchyRun> cached;
  if (cached) return *cached;
  CauchyRun out;
  const double delta = 1e-2;
  const SeedSolution s{2, {{1, 0}, {0, 2}}, {{0.5, 0.0}, {0.3, 0.2}}};
  SolveOptions opt;
  opt.enforce_excision = false;
  const auto br = solve_branch(s, problem_for(s, 1, delta), opt);
  if (!br.converged) {
    out.detail = "branch did not converge";
    cached = out;
    return *cached;
  }
  record(br);
  const QuasiPeriodicEvaluator v(br);
  out.u0 = v.at(0.0, br.box.n_space);
  DriftOptions near;
  near.horizon = 1.0 / delta;
  near.dt = 5e-4;
  near.samples_per_decade = 10;
  const auto close = drift_monitor(out.u0, &v, near);
  double worst_ratio = 0.0;
  bool dist_ok = close.horizon_reached >= near.horizon * (1.0 - 1e-12);
  for (std::size_t i = 0; i < close.times.size(); ++i) {
    const double allowed = 10.0 * br.residual_norm * close.times[i] + 1e-8;
    worst_ratio = std::max(worst_ratio, close.distance_to_qp[i] / allowed);
    dist_ok = dist_ok && close.distance_to_qp[i] <= allowed;
  }
  DriftOptions dopt;
  dopt.horizon = 1.0 / (delta * delta);
  dopt.dt = 0.02;
  dopt.samples_per_decade = 10;
  const auto rep = drift_monitor(out.u0, &v, dopt);
  const double drift = rep.max_abs_drift();
  const bool horizon_ok = rep.horizon_reached >= dopt.horizon * (1.0 - 1e-12);
  out.ok = dist_ok && horizon_ok && drift <= 5.0 * delta;
  out.detail = "residual " + fmt(br.residual_norm) + ", max distance/allowed up to 1/delta " + fmt(worst_ratio) +
               ", max analytic-norm drift up to " + fmt(rep.horizon_reached) + " is " + fmt(drift) +
               " (limit " + fmt(5.0 * delta) + ")";
  cached = out;
  return *cached;
}

Outcome cauchy_consistency() {
  const auto& r = cauchy_run();
  return {r.ok, r.detail};
}

Outcome integrator_integrity_check() {
  std::vector<CauchyState> states;
  if (cauchy_run().u0.d > 0 && !cauchy_run().u0.coeffs.empty()) states.push_back(cauchy_run().u0);
  auto s = CauchyState::zero(1, 8, 1, 0.3);
  s.set({1}, {0.3, 0.1});
  s.set({-2}, {0.2, 0.0});
  s.set({3}, {0.05, 0.02});
  states.push_back(s);
  auto q = CauchyState::zero(2, 6, 2, 0.5);
  q.set({1, 0}, {0.4, 0.1});
  q.set({0, 2}, {0.2, 0.0});
  q.set({-1, 1}, {0.05, 0.02});
  states.push_back(q);
  bool ok = true;
  std::string detail;
  for (const auto& u0 : states) {
    const double dt = std::min(0.02, default_dt(u0));
    const auto rep = integrator_integrity(u0, 1.0, dt);
    ok = ok && rep.ok && rep.l2_drift_rate <= 1e-10 && std::abs(rep.order - 2.0) <= 0.2 &&
         rep.reversal_error <= rep.reversal_bound;
    detail += "[l2 rate " + fmt(rep.l2_drift_rate) + ", order " + fmt(rep.order) + ", reversal " +
              fmt(rep.reversal_error) + " <= " + fmt(rep.reversal_bound) + "] ";
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 10. Semi-classical remainder.

Outcome semiclassical() {
  const SeedSolution tmpl{1, {{1}, {2}}, {{0.5, 0.0}, {0.3, 0.2}}};
  std::vector<double> ks, rem;
  bool ok = certify_seed(tmpl, 1, minimal_certificate_box(tmpl, 1)).is_generic;
  for (int K : {4, 8, 16}) {
    const auto r = semiclassical_run(tmpl, K, 1);
    ok = ok && r.branch.converged;
    record(r.branch);
    ks.push_back(K);
    rem.push_back(r.remainder);
  }
  const double slope = loglog_fit(ks, rem).slope;
  ok = ok && std::abs(slope + 2.0) <= 0.3;
  return {ok, "remainders " + fmt(rem[0]) + ", " + fmt(rem[1]) + ", " + fmt(rem[2]) + "; slope " + fmt(slope)};
}

// ---------------------------------------------------------------------------
// 11. Ground-state sup-norm exponent.

Outcome eigenfunction_scaling() {
  const std::vector<int> ks{32, 64, 128, 256};
  const auto torus = scaling_study(RevolutionMetric::torus(2.0), ks);
  const auto flat = scaling_study(RevolutionMetric::flat(1.0), ks);
  const bool ok = std::abs(torus.slope - 0.125) <= 0.02 && std::abs(flat.slope) <= 0.01;
  return {ok, "torus slope " + fmt(torus.slope) + ", flat slope " + fmt(flat.slope)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<Criterion> criteria{
      {1, "exact periodic solution", 0.0, exact_periodic},
      {2, "first-correction exponent", 180.0, first_correction},
      {3, "Jacobian transversality exponent", 60.0, transversality},
      {4, "resonance oracle equivalence", 10.0, resonance_oracle},
      {5, "component bound", 120.0, component_bound},
      {6, "Schur spectral equivalence", 120.0, schur_equivalence},
      {7, "Jacobian consistency", 30.0, jacobian_consistency},
      {9, "Cauchy consistency", 600.0, cauchy_consistency},
      {10, "semi-classical exponent", 300.0, semiclassical},
      {11, "eigenfunction scaling", 120.0, eigenfunction_scaling},
      {12, "integrator integrity", 0.0, integrator_integrity_check},
      {8, "Newton quadratic convergence", 0.0, newton_quadratic},
  };
  std::map<int, std::string> lines;
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0 && secs > c.time_limit) {
      o.pass = false;
      o.detail += " [time limit " + fmt(c.time_limit) + " s exceeded]";
    }
    failures += !o.pass;
    std::ostringstream os;
    os << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << ") " << fmt(secs) << " s: "
       << o.detail;
    lines[c.id] = os.str();
    std::fprintf(stderr, "%s\n", os.str().c_str());
  }
  std::printf("\n");
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d of %zu criteria passed\n", static_cast<int>(lines.size()) - failures, lines.size());
  return failures == 0 ? 0 : 1;
}
