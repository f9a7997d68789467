#pragma once

#include <array>
#include <memory>
#include <vector>

#include "qpnls/fourier_field.hpp"

namespace qpnls {

// Smallest 7-smooth integer >= n.
int fft_friendly_size(int n);

// Periodic sampling grid for a (b+d)-dimensional trigonometric polynomial.
// Coefficients live on box-shaped windows; products are formed pointwise on
// the grid. With length L >= (D+1) N + 1 along a coordinate of window radius N,
// any product of D window-supported factors is alias-free on the window.
class SpectralGrid {
 public:
  SpectralGrid(int b, int d, std::array<int, kMaxLatticeDim> lengths);
  ~SpectralGrid();
  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;

  // Grid that keeps products of `degree` factors supported in `box` (plus a
  // spatial-only factor of radius `extra_space`) alias-free on `box`.
  static std::unique_ptr<SpectralGrid> for_products(int b, int d, const TruncationBox& box, int degree,
                                                    int extra_space = 0);
  // Grid that holds the full, untruncated product of `degree` box factors.
  static std::unique_ptr<SpectralGrid> for_full_products(int b, int d, const TruncationBox& box, int degree,
                                                         int extra_space = 0);

  int b() const { return b_; }
  int d() const { return d_; }
  int length(int k) const { return len_[k]; }
  std::size_t size() const { return total_; }

  // Physical samples of sum_c c(m) e^{i m . theta}.
  std::vector<cplx> synthesize(const DenseCoeffs& c, const BoxGrid& window) const;
  std::vector<cplx> synthesize(const SparseCoeffs& c) const;
  // Fourier coefficients on `window` (radius per coordinate must fit the grid).
  DenseCoeffs analyze(std::vector<cplx> samples, const BoxGrid& window) const;
  // In-place unnormalized transform; forward uses exp(-i m . theta).
  void transform(std::vector<cplx>& samples, bool forward) const;
  // Wraps into [-L/2, L/2) and returns all nonnegligible coefficients.
  SparseCoeffs analyze_sparse(std::vector<cplx> samples, double floor) const;

 private:
  std::size_t position(const MultiIndex& m) const;
  void check_window(const BoxGrid& window) const;

  int b_;
  int d_;
  std::array<int, kMaxLatticeDim> len_{};
  std::array<std::size_t, kMaxLatticeDim> stride_{};
  std::size_t total_ = 1;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

}  // namespace qpnls
