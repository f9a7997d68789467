#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qpnls/fourier_field.hpp"

namespace qpnls {

using SpatialVec = std::vector<int>;

// A b-frequency solution sum_k a_k exp(-i |j_k|^2 t) exp(i j_k . x) of the
// free Schroedinger equation, used as the Newton initial guess.
struct SeedSolution {
  int d = 1;
  std::vector<SpatialVec> freqs;  // j_k, nonzero and pairwise distinct
  std::vector<cplx> amps;         // a_k

  int b() const { return static_cast<int>(freqs.size()); }
  // Throws ValidationError on an invalid seed.
  void validate() const;

  // omega0_k = |j_k|^2, exact.
  std::vector<long> omega0() const;
  // Site (-e_k, j_k) carrying a_k in the u row.
  MultiIndex u_site(int k) const;
  // Site (e_k, -j_k) carrying conj(a_k) in the v row.
  MultiIndex v_site(int k) const { return -u_site(k); }
  // S = supp u0 together with supp conj(u0), 2b sites.
  std::vector<MultiIndex> anchor_sites() const;
  int max_frequency_linf() const;

  // u = {a_k at (-e_k, j_k)}, v = {conj(a_k) at (e_k, -j_k)}.
  FourierField field(const TruncationBox& box) const;

  SeedSolution scaled_amplitudes(double factor) const;
  SeedSolution rotated(double theta) const;
};

void to_json(nlohmann::json& j, const SeedSolution& s);
void from_json(const nlohmann::json& j, SeedSolution& s);

}  // namespace qpnls
