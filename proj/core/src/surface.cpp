#include "qpnls/surface.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"
#include "qpnls/fit.hpp"

namespace qpnls {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kCheckGrid = 4096;

}  // namespace

RevolutionMetric::RevolutionMetric(std::string name, double period, std::function<double(double)> eval)
    : name_(std::move(name)), period_(period), eval_(std::move(eval)) {
  if (!(period_ > 0)) throw ValidationError("metric period must be positive");
  analyze();
}

RevolutionMetric RevolutionMetric::flat(double g0) {
  if (!(g0 > 0)) throw ValidationError("flat metric needs g0 > 0");
  return RevolutionMetric("flat", kTwoPi, [g0](double) { return g0; });
}

RevolutionMetric RevolutionMetric::torus(double R) {
  if (!(R > 1)) throw ValidationError("torus metric needs R > 1 so that g > 0");
  return RevolutionMetric("torus", kTwoPi, [R](double x) {
    const double r = R + std::cos(x);
    return r * r;
  });
}

RevolutionMetric RevolutionMetric::from_samples(const std::vector<double>& x, const std::vector<double>& g) {
  const std::size_t n = x.size();
  if (n < 4 || g.size() != n) throw ValidationError("sampled profile needs at least 4 (x, g) pairs");
  const double dx = x[1] - x[0];
  if (!(dx > 0)) throw ValidationError("sampled profile x must increase");
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs((x[i] - x[i - 1]) - dx) > 1e-9 * std::max(1.0, std::abs(dx))) {
      throw ValidationError("sampled profile x must be equispaced");
    }
  }
  for (double v : g) {
    if (!(v > 0)) throw ValidationError("sampled profile needs g > 0");
  }
  const double period = dx * static_cast<double>(n);
  const double x0 = x[0];
  // Real trigonometric interpolant; the Nyquist term is split evenly.
  const int half = static_cast<int>(n / 2);
  std::vector<double> a(half + 1, 0.0), b(half + 1, 0.0);
  for (int m = 0; m <= half; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      const double th = kTwoPi * m * static_cast<double>(i) / static_cast<double>(n);
      a[m] += g[i] * std::cos(th);
      b[m] += g[i] * std::sin(th);
    }
    const double w = (m == 0 || (n % 2 == 0 && m == half)) ? 1.0 : 2.0;
    a[m] *= w / static_cast<double>(n);
    b[m] *= w / static_cast<double>(n);
  }
  auto eval = [a, b, x0, period](double xx) {
    const double th = kTwoPi * (xx - x0) / period;
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) {
      s += a[m] * std::cos(m * th) + b[m] * std::sin(m * th);
    }
    return s;
  };
  return RevolutionMetric("sampled", period, std::move(eval));
}

RevolutionMetric RevolutionMetric::load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open metric profile '" + path + "'");
  std::vector<double> x, g;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double xv, gv;
    if (!(ls >> xv)) continue;
    if (!(ls >> gv)) throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 'x g'");
    x.push_back(xv);
    g.push_back(gv);
  }
  auto m = from_samples(x, g);
  m.name_ = "profile:" + path;
  return m;
}

double RevolutionMetric::second_derivative(double x) const {
  const double h = period_ * 1e-4;
  return (eval_(x + h) - 2.0 * eval_(x) + eval_(x - h)) / (h * h);
}

void RevolutionMetric::analyze() {
  const double dx = period_ / kCheckGrid;
  std::vector<double> s(kCheckGrid);
  double lo = std::numeric_limits<double>::infinity();
  std::size_t imax = 0;
  for (int i = 0; i < kCheckGrid; ++i) {
    s[i] = eval_(i * dx);
    if (!(s[i] > 0) || !std::isfinite(s[i])) throw ValidationError("metric coefficient g must be positive and finite");
    lo = std::min(lo, s[i]);
    if (s[i] > s[imax]) imax = static_cast<std::size_t>(i);
  }
  g_max_ = s[imax];
  flat_ = (g_max_ - lo) <= 1e-12 * g_max_;
  for (int i = 0; i < kCheckGrid; ++i) {
    const auto at = [&](int o) { return s[static_cast<std::size_t>((i + o + kCheckGrid) % kCheckGrid)]; };
    c3_bound_ = std::max(c3_bound_, std::abs(at(2) - 2 * at(1) + 2 * at(-1) - at(-2)) / (2 * dx * dx * dx));
  }
  if (flat_) {
    x_max_ = 0.0;
    nondegeneracy_ = 0.0;
    return;
  }
  // Unique global maximum: every other local maximum must lie strictly lower.
  for (int i = 0; i < kCheckGrid; ++i) {
    const double l = s[static_cast<std::size_t>((i + kCheckGrid - 1) % kCheckGrid)];
    const double r = s[static_cast<std::size_t>((i + 1) % kCheckGrid)];
    if (s[i] >= l && s[i] >= r && static_cast<std::size_t>(i) != imax) {
      const int dist = std::abs(i - static_cast<int>(imax));
      if (std::min(dist, kCheckGrid - dist) > 2 && s[i] >= g_max_ * (1.0 - 1e-9)) {
        throw ValidationError("metric coefficient g must have a unique global maximum");
      }
    }
  }
  double x = static_cast<double>(imax) * dx;
  const double h = period_ * 1e-5;
  for (int it = 0; it < 20; ++it) {
    const double d1 = (eval_(x + h) - eval_(x - h)) / (2 * h);
    const double d2 = second_derivative(x);
    if (d2 >= 0) break;
    const double step = d1 / d2;
    x -= step;
    if (std::abs(step) < 1e-13 * period_) break;
  }
  x_max_ = std::fmod(std::fmod(x, period_) + period_, period_);
  g_max_ = eval_(x_max_);
  nondegeneracy_ = -second_derivative(x_max_) / (g_max_ * g_max_);
  if (!(nondegeneracy_ > 0)) throw ValidationError("maximum of g is degenerate (g'' = 0)");
}

double RevolutionMetric::harmonic_constant() const { return std::sqrt(nondegeneracy_ / 2.0); }

double RevolutionMetric::harmonic_ground_energy(int k) const {
  return static_cast<double>(k) * k / g_max_ + harmonic_constant() * std::abs(k);
}

double RevolutionMetric::localization_length(int k) const {
  if (flat_ || k == 0) return period_;
  return std::min(period_, 1.0 / std::sqrt(harmonic_constant() * std::abs(k)));
}

Eigen::SparseMatrix<double> SeparatedOperator::matrix() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(3 * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    t.emplace_back(i, i, diag[i]);
    t.emplace_back(i, j, offdiag[i]);
    t.emplace_back(j, i, offdiag[i]);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

Eigen::VectorXd SeparatedOperator::apply(const Eigen::VectorXd& phi) const {
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    const int l = (i + n - 1) % n, r = (i + 1) % n;
    out[i] = diag[i] * phi[i] + offdiag[i] * phi[r] + offdiag[l] * phi[l];
  }
  return out;
}

Eigen::SparseMatrix<double> SeparatedOperator::unsymmetrized() const {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const double sij = std::sqrt(h[j] / h[i]);
    t.emplace_back(i, i, diag[i]);
    t.emplace_back(i, j, offdiag[i] * sij);
    t.emplace_back(j, i, offdiag[i] / sij);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

int min_grid_size(const RevolutionMetric& metric, int k) {
  return std::max(64, static_cast<int>(std::ceil(64.0 * metric.period() / metric.localization_length(k))));
}

SeparatedOperator separated_operator(const RevolutionMetric& metric, int k, int grid_n) {
  const int need = min_grid_size(metric, k);
  if (grid_n == 0) grid_n = need;
  if (grid_n < need) {
    throw ValidationError("grid_n = " + std::to_string(grid_n) + " does not resolve k = " + std::to_string(k) +
                          " (need >= " + std::to_string(need) + ")");
  }
  SeparatedOperator op;
  op.k = k;
  op.n = grid_n;
  op.dx = metric.period() / grid_n;
  const double x0 = metric.max_location();
  const double dx2 = op.dx * op.dx;
  const double k2 = static_cast<double>(k) * k;
  op.x.resize(grid_n);
  op.h.resize(grid_n);
  op.diag.resize(grid_n);
  op.offdiag.resize(grid_n);
  std::vector<double> hmid(grid_n);  // h at x_i + dx/2
  for (int i = 0; i < grid_n; ++i) {
    op.x[i] = x0 + (i - grid_n / 2) * op.dx;
    op.h[i] = std::sqrt(metric(op.x[i]));
    hmid[i] = std::sqrt(metric(op.x[i] + op.dx / 2));
  }
  for (int i = 0; i < grid_n; ++i) {
    const int l = (i + grid_n - 1) % grid_n, r = (i + 1) % grid_n;
    op.diag[i] = (hmid[i] + hmid[l]) / (op.h[i] * dx2) + k2 / (op.h[i] * op.h[i]);
    op.offdiag[i] = -hmid[i] / (dx2 * std::sqrt(op.h[i] * op.h[r]));
  }
  return op;
}

namespace {

struct InverseIteration {
  Eigen::VectorXd phi;
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

InverseIteration inverse_iteration(const SeparatedOperator& op, const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& f,
                                   Eigen::VectorXd phi, const Eigen::VectorXd* deflate, const EigenOptions& opt) {
  InverseIteration r;
  const auto project = [&](Eigen::VectorXd& v) {
    if (deflate) v -= deflate->dot(v) * *deflate;
    v.normalize();
  };
  project(phi);
  for (r.iterations = 1; r.iterations <= opt.max_iterations; ++r.iterations) {
    phi = f.solve(phi);
    project(phi);
    const Eigen::VectorXd aphi = op.apply(phi);
    r.lambda = phi.dot(aphi);
    r.residual = (aphi - r.lambda * phi).norm() / std::max(1.0, std::abs(r.lambda));
    if (r.residual <= opt.tol) break;
  }
  r.iterations = std::min(r.iterations, opt.max_iterations);
  r.phi = std::move(phi);
  return r;
}

}  // namespace

GroundStateRecord ground_state(const SeparatedOperator& op, const RevolutionMetric& metric, const EigenOptions& opt) {
  const int n = op.n;
  const double c = metric.harmonic_constant() * std::abs(op.k);
  const double unit = std::pow(kTwoPi / metric.period(), 2);
  double sigma = metric.is_flat() ? static_cast<double>(op.k) * op.k / metric.g_max() - 0.5 * unit
                                  : static_cast<double>(op.k) * op.k / metric.g_max();
  const double back = std::max(c, 0.5 * unit);
  const Eigen::SparseMatrix<double> a = op.matrix();
  Eigen::SparseMatrix<double> id(n, n);
  id.setIdentity();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> f;
  for (int tries = 0;; ++tries) {
    f.compute(a - sigma * id);
    if (f.info() == Eigen::Success && (f.vectorD().array() > 0).all()) break;
    if (tries > 60) throw NumericalError("could not place the inverse-iteration shift below the spectrum");
    sigma -= back;
  }
  const auto g1 = inverse_iteration(op, f, Eigen::VectorXd::Ones(n), nullptr, opt);
  Eigen::VectorXd start(n);
  const double x0 = metric.max_location();
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * (op.x[i] - x0) / metric.period();
    start[i] = std::sin(t) + 0.25 * std::cos(2 * t) + 0.1 * std::sin(3 * t);
  }
  const auto g2 = inverse_iteration(op, f, start, &g1.phi, opt);

  GroundStateRecord rec;
  rec.k = op.k;
  rec.grid_n = n;
  rec.lambda = g1.lambda;
  rec.lambda2 = g2.lambda;
  rec.residual = g1.residual;
  rec.iterations = g1.iterations;
  rec.x = op.x;
  rec.psi.resize(n);
  double mass = 0.0, sum = 0.0;
  for (int i = 0; i < n; ++i) {
    rec.psi[i] = g1.phi[i] / std::sqrt(op.h[i]);
    mass += rec.psi[i] * rec.psi[i] * op.h[i] * op.dx;
    sum += rec.psi[i];
  }
  const double norm = (sum < 0 ? -1.0 : 1.0) / std::sqrt(kTwoPi * mass);
  double pmax = 0.0, pmin = 0.0, m2 = 0.0, m0 = 0.0;
  for (int i = 0; i < n; ++i) {
    rec.psi[i] *= norm;
    pmax = std::max(pmax, rec.psi[i]);
    pmin = std::min(pmin, rec.psi[i]);
    const double w = rec.psi[i] * rec.psi[i] * op.h[i];
    const double y = op.x[i] - x0;
    m2 += y * y * w;
    m0 += w;
  }
  rec.sup_norm = std::max(pmax, -pmin);
  rec.sign_definite = pmin >= -1e-10 * pmax;
  rec.localization_width = std::sqrt(m2 / m0);
  return rec;
}

ScalingStudy scaling_study(const RevolutionMetric& metric, const std::vector<int>& k_list, const ScalingOptions& opt) {
  if (k_list.size() < 2) throw ValidationError("scaling study needs at least two k values");
  std::vector<int> ks = k_list;
  std::sort(ks.begin(), ks.end());
  ScalingStudy st;
  std::vector<double> lam, sup, wid;
  for (int k : ks) {
    const auto op = separated_operator(metric, k, opt.grid_n);
    st.records.push_back(ground_state(op, metric, opt.eigen));
    lam.push_back(st.records.back().lambda);
    sup.push_back(st.records.back().sup_norm);
    wid.push_back(st.records.back().localization_width);
  }
  if (!(lam.front() > 0) || lam.back() < 10.0 * lam.front()) {
    throw ValidationError("k range must make lambda span at least one decade");
  }
  const auto fit = loglog_fit(lam, sup);
  st.slope = fit.slope;
  st.intercept = fit.intercept;
  st.fit_residual = fit.max_residual;
  st.width_slope = loglog_fit(lam, wid).slope;
  st.slope_without_lowest = st.slope;
  if (lam.size() >= 3) {
    st.slope_without_lowest =
        loglog_fit(std::span(lam).subspan(1), std::span(sup).subspan(1)).slope;
  }
  if (fit.max_residual > opt.max_fit_residual) {
    throw NumericalError("scaling fit rejected: log residual " + std::to_string(fit.max_residual) +
                         " exceeds " + std::to_string(opt.max_fit_residual) + " (pre-asymptotic k range)");
  }
  return st;
}

void write_csv(std::ostream& os, const std::vector<GroundStateRecord>& records) {
  os << "k,lambda,sup_norm,localization_width\n" << std::setprecision(17);
  for (const auto& r : records) os << r.k << ',' << r.lambda << ',' << r.sup_norm << ',' << r.localization_width << '\n';
}

void to_json(nlohmann::json& j, const GroundStateRecord& r) {
  j = nlohmann::json{{"k", r.k},
                     {"grid_n", r.grid_n},
                     {"lambda", r.lambda},
                     {"lambda2", r.lambda2},
                     {"sup_norm", r.sup_norm},
                     {"localization_width", r.localization_width},
                     {"residual", r.residual},
                     {"sign_definite", r.sign_definite}};
}

void to_json(nlohmann::json& j, const ScalingStudy& s) {
  j = nlohmann::json{{"slope", s.slope},
                     {"intercept", s.intercept},
                     {"fit_residual", s.fit_residual},
                     {"slope_without_lowest", s.slope_without_lowest},
                     {"width_slope", s.width_slope},
                     {"records", s.records}};
}

}  // namespace qpnls
