#include "qpnls/fourier_field.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"

namespace qpnls {

double analytic_norm(const SparseCoeffs& c, const AnalyticWeight& w) {
  double s = 0.0;
  for (const auto& [m, z] : c) s += std::abs(z) * w(m);
  return s;
}

double analytic_norm(const DenseCoeffs& c, const BoxGrid& grid, const AnalyticWeight& w) {
  double s = 0.0;
  grid.for_each([&](std::size_t i, const MultiIndex& m) {
    if (c[i] != cplx{}) s += std::abs(c[i]) * w(m);
  });
  return s;
}

double analytic_norm(const FourierField& f, const AnalyticWeight& w) {
  return std::max(analytic_norm(f.u, w), analytic_norm(f.v, w));
}

SparseCoeffs conj_mirror(const SparseCoeffs& c) {
  SparseCoeffs out;
  for (const auto& [m, z] : c) out.emplace(-m, std::conj(z));
  return out;
}

double reality_defect(const FourierField& f) {
  const SparseCoeffs mirror = conj_mirror(f.u);
  double worst = 0.0;
  for (const auto& [m, z] : f.v) {
    auto it = mirror.find(m);
    worst = std::max(worst, std::abs(z - (it == mirror.end() ? cplx{} : it->second)));
  }
  for (const auto& [m, z] : mirror) {
    if (!f.v.contains(m)) worst = std::max(worst, std::abs(z));
  }
  return worst;
}

DenseCoeffs to_dense(const SparseCoeffs& c, const BoxGrid& grid) {
  DenseCoeffs out(grid.size());
  for (const auto& [m, z] : c) {
    if (!grid.contains(m)) {
      throw ValidationError("coefficient at " + m.str() + " lies outside the truncation box");
    }
    out[grid.index(m)] = z;
  }
  return out;
}

SparseCoeffs to_sparse(const DenseCoeffs& c, const BoxGrid& grid, double floor) {
  SparseCoeffs out;
  grid.for_each([&](std::size_t i, const MultiIndex& m) {
    if (std::abs(c[i]) > floor) out.emplace_hint(out.end(), m, c[i]);
  });
  return out;
}

void to_json(nlohmann::json& j, const MultiIndex& m) {
  std::vector<int> n(m.time().begin(), m.time().end());
  std::vector<int> s(m.space().begin(), m.space().end());
  j = nlohmann::json{{"n", n}, {"j", s}};
}

void to_json(nlohmann::json& j, const TruncationBox& box) {
  j = nlohmann::json{{"n_time", box.n_time}, {"n_space", box.n_space}};
}

void from_json(const nlohmann::json& j, TruncationBox& box) {
  box.n_time = j.at("n_time").get<int>();
  box.n_space = j.at("n_space").get<int>();
}

namespace {

nlohmann::json entries_json(const SparseCoeffs& c) {
  auto arr = nlohmann::json::array();
  for (const auto& [m, z] : c) {
    nlohmann::json e = m;
    e["re"] = z.real();
    e["im"] = z.imag();
    arr.push_back(std::move(e));
  }
  return arr;
}

SparseCoeffs entries_from_json(const nlohmann::json& arr, int b, int d) {
  SparseCoeffs out;
  for (const auto& e : arr) {
    auto n = e.at("n").get<std::vector<int>>();
    auto s = e.at("j").get<std::vector<int>>();
    if (static_cast<int>(n.size()) != b || static_cast<int>(s.size()) != d) {
      throw ValidationError("field entry has wrong (b, d) shape");
    }
    out[MultiIndex(n, s)] = cplx(e.at("re").get<double>(), e.at("im").get<double>());
  }
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const FourierField& f) {
  j = nlohmann::json{{"b", f.b}, {"d", f.d}, {"box", f.box},
                     {"u", {{"entries", entries_json(f.u)}}},
                     {"v", {{"entries", entries_json(f.v)}}}};
}

void from_json(const nlohmann::json& j, FourierField& f) {
  f.b = j.at("b").get<int>();
  f.d = j.at("d").get<int>();
  f.box = j.at("box").get<TruncationBox>();
  f.u = entries_from_json(j.at("u").at("entries"), f.b, f.d);
  f.v = entries_from_json(j.at("v").at("entries"), f.b, f.d);
}

}  // namespace qpnls
