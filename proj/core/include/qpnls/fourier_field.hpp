#pragma once

#include <complex>
#include <map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qpnls/lattice.hpp"

namespace qpnls {

using cplx = std::complex<double>;
using SparseCoeffs = std::map<MultiIndex, cplx>;
using DenseCoeffs = std::vector<cplx>;

// Sparse space-time Fourier data. The u and v rows are independent unknowns;
// for a physical solution v(n,j) = conj(u(-n,-j)) (see reality_defect).
struct FourierField {
  int b = 1;
  int d = 1;
  TruncationBox box{};
  SparseCoeffs u;
  SparseCoeffs v;

  FourierField() = default;
  FourierField(int b_, int d_, const TruncationBox& box_) : b(b_), d(d_), box(box_) {}

  bool empty() const { return u.empty() && v.empty(); }
};

// Sum over the support of |c| * weight.
double analytic_norm(const SparseCoeffs& c, const AnalyticWeight& w);
double analytic_norm(const DenseCoeffs& c, const BoxGrid& grid, const AnalyticWeight& w);
// max of the two row norms.
double analytic_norm(const FourierField& f, const AnalyticWeight& w);

// Conjugate mirror: out(n,j) = conj(c(-n,-j)).
SparseCoeffs conj_mirror(const SparseCoeffs& c);

// max over sites of |v(n,j) - conj(u(-n,-j))|.
double reality_defect(const FourierField& f);

DenseCoeffs to_dense(const SparseCoeffs& c, const BoxGrid& grid);
// Entries with |c| <= floor are dropped.
SparseCoeffs to_sparse(const DenseCoeffs& c, const BoxGrid& grid, double floor = 0.0);

void to_json(nlohmann::json& j, const MultiIndex& m);
void to_json(nlohmann::json& j, const TruncationBox& box);
void from_json(const nlohmann::json& j, TruncationBox& box);
void to_json(nlohmann::json& j, const FourierField& f);
void from_json(const nlohmann::json& j, FourierField& f);

}  // namespace qpnls
