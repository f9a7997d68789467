#include "qpnls/seed.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"

namespace qpnls {

void SeedSolution::validate() const {
  if (freqs.empty()) throw ValidationError("seed needs at least one frequency");
  if (amps.size() != freqs.size()) throw ValidationError("seed needs one amplitude per frequency");
  if (d < 1 || b() + d > kMaxLatticeDim) throw ValidationError("seed dimension out of range");
  std::set<SpatialVec> seen;
  for (const auto& j : freqs) {
    if (static_cast<int>(j.size()) != d) throw ValidationError("seed frequency has wrong dimension");
    if (std::all_of(j.begin(), j.end(), [](int c) { return c == 0; })) {
      throw ValidationError("seed frequencies must be nonzero");
    }
    if (!seen.insert(j).second) throw ValidationError("seed frequencies must be pairwise distinct");
  }
  for (const auto& a : amps) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()) || a == cplx{}) {
      throw ValidationError("seed amplitudes must be finite and nonzero");
    }
  }
}

std::vector<long> SeedSolution::omega0() const {
  std::vector<long> w;
  w.reserve(freqs.size());
  for (const auto& j : freqs) {
    long s = 0;
    for (int c : j) s += static_cast<long>(c) * c;
    w.push_back(s);
  }
  return w;
}

MultiIndex SeedSolution::u_site(int k) const {
  MultiIndex m(b(), d);
  m.set_n(k, -1);
  for (int i = 0; i < d; ++i) m.set_j(i, freqs[k][i]);
  return m;
}

std::vector<MultiIndex> SeedSolution::anchor_sites() const {
  std::vector<MultiIndex> s;
  for (int k = 0; k < b(); ++k) {
    s.push_back(u_site(k));
    s.push_back(v_site(k));
  }
  return s;
}

int SeedSolution::max_frequency_linf() const {
  int m = 0;
  for (const auto& j : freqs)
    for (int c : j) m = std::max(m, std::abs(c));
  return m;
}

FourierField SeedSolution::field(const TruncationBox& box) const {
  FourierField f(b(), d, box);
  for (int k = 0; k < b(); ++k) {
    if (!box.contains(u_site(k))) throw ValidationError("seed support does not fit the truncation box");
    f.u[u_site(k)] = amps[k];
    f.v[v_site(k)] = std::conj(amps[k]);
  }
  return f;
}

SeedSolution SeedSolution::scaled_amplitudes(double factor) const {
  SeedSolution s = *this;
  for (auto& a : s.amps) a *= factor;
  return s;
}

SeedSolution SeedSolution::rotated(double theta) const {
  SeedSolution s = *this;
  for (auto& a : s.amps) a *= std::polar(1.0, theta);
  return s;
}

void to_json(nlohmann::json& j, const SeedSolution& s) {
  auto amps = nlohmann::json::array();
  for (const auto& a : s.amps) amps.push_back({a.real(), a.imag()});
  j = nlohmann::json{{"d", s.d}, {"frequencies", s.freqs}, {"amplitudes", amps}};
}

void from_json(const nlohmann::json& j, SeedSolution& s) {
  s.d = j.at("d").get<int>();
  s.freqs = j.at("frequencies").get<std::vector<SpatialVec>>();
  s.amps.clear();
  for (const auto& a : j.at("amplitudes")) s.amps.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
  s.validate();
}

}  // namespace qpnls
