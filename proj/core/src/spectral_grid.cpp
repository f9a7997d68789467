#include "qpnls/spectral_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <string>

#include "qpnls/error.hpp"

namespace qpnls {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr std::size_t kMaxGridPoints = std::size_t{1} << 27;

bool is_smooth(int n) {
  for (int p : {2, 3, 5, 7})
    while (n % p == 0) n /= p;
  return n == 1;
}

}  // namespace

int fft_friendly_size(int n) {
  n = std::max(n, 1);
  while (!is_smooth(n)) ++n;
  return n;
}

struct SpectralGrid::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

SpectralGrid::SpectralGrid(int b, int d, std::array<int, kMaxLatticeDim> lengths)
    : b_(b), d_(d), len_(lengths), plans_(std::make_unique<Plans>()) {
  const int rank = b + d;
  for (int k = 0; k < rank; ++k) {
    if (len_[k] < 1) throw ValidationError("spectral grid lengths must be positive");
    if (total_ > kMaxGridPoints / static_cast<std::size_t>(len_[k])) {
      throw ResourceError("FFT grid exceeds " + std::to_string(kMaxGridPoints) +
                          " points; reduce the truncation box or the nonlinearity degree p");
    }
    total_ *= static_cast<std::size_t>(len_[k]);
  }
  std::size_t s = 1;
  for (int k = rank - 1; k >= 0; --k) {
    stride_[k] = s;
    s *= static_cast<std::size_t>(len_[k]);
  }

  std::vector<int> dims(len_.begin(), len_.begin() + rank);
  std::vector<cplx> scratch(total_);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard lock(planner_mutex());
  // ESTIMATE keeps the chosen algorithm, and hence the rounding, reproducible.
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->forward = fftw_plan_dft(rank, dims.data(), buf, buf, FFTW_FORWARD, flags);
  plans_->backward = fftw_plan_dft(rank, dims.data(), buf, buf, FFTW_BACKWARD, flags);
  if (!plans_->forward || !plans_->backward) throw ResourceError("FFTW failed to create a plan");
}

SpectralGrid::~SpectralGrid() {
  std::lock_guard lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

std::unique_ptr<SpectralGrid> SpectralGrid::for_products(int b, int d, const TruncationBox& box, int degree,
                                                         int extra_space) {
  std::array<int, kMaxLatticeDim> len{};
  for (int k = 0; k < b; ++k) len[k] = fft_friendly_size((degree + 1) * box.n_time + 1);
  for (int k = b; k < b + d; ++k) len[k] = fft_friendly_size((degree + 1) * box.n_space + extra_space + 1);
  return std::make_unique<SpectralGrid>(b, d, len);
}

std::unique_ptr<SpectralGrid> SpectralGrid::for_full_products(int b, int d, const TruncationBox& box,
                                                              int degree, int extra_space) {
  std::array<int, kMaxLatticeDim> len{};
  for (int k = 0; k < b; ++k) len[k] = fft_friendly_size(2 * degree * box.n_time + 1);
  for (int k = b; k < b + d; ++k) len[k] = fft_friendly_size(2 * (degree * box.n_space + extra_space) + 1);
  return std::make_unique<SpectralGrid>(b, d, len);
}

std::size_t SpectralGrid::position(const MultiIndex& m) const {
  std::size_t pos = 0;
  for (int k = 0; k < b_ + d_; ++k) {
    int c = m.coord(k) % len_[k];
    if (c < 0) c += len_[k];
    pos += static_cast<std::size_t>(c) * stride_[k];
  }
  return pos;
}

void SpectralGrid::check_window(const BoxGrid& window) const {
  for (int k = 0; k < b_ + d_; ++k) {
    if (window.width(k) > len_[k]) throw ValidationError("coefficient window does not fit the spectral grid");
  }
}

std::vector<cplx> SpectralGrid::synthesize(const DenseCoeffs& c, const BoxGrid& window) const {
  check_window(window);
  std::vector<cplx> out(total_);
  window.for_each([&](std::size_t i, const MultiIndex& m) {
    if (c[i] != cplx{}) out[position(m)] = c[i];
  });
  auto* buf = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plans_->backward, buf, buf);
  return out;
}

std::vector<cplx> SpectralGrid::synthesize(const SparseCoeffs& c) const {
  std::vector<cplx> out(total_);
  for (const auto& [m, z] : c) {
    for (int k = 0; k < b_ + d_; ++k) {
      if (2 * std::abs(m.coord(k)) + 1 > len_[k]) throw ValidationError("coefficient does not fit the spectral grid");
    }
    out[position(m)] += z;
  }
  auto* buf = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plans_->backward, buf, buf);
  return out;
}

void SpectralGrid::transform(std::vector<cplx>& samples, bool forward) const {
  if (samples.size() != total_) throw ValidationError("sample vector does not match the spectral grid");
  auto* buf = reinterpret_cast<fftw_complex*>(samples.data());
  fftw_execute_dft(forward ? plans_->forward : plans_->backward, buf, buf);
}

DenseCoeffs SpectralGrid::analyze(std::vector<cplx> samples, const BoxGrid& window) const {
  check_window(window);
  auto* buf = reinterpret_cast<fftw_complex*>(samples.data());
  fftw_execute_dft(plans_->forward, buf, buf);
  const double scale = 1.0 / static_cast<double>(total_);
  DenseCoeffs out(window.size());
  window.for_each([&](std::size_t i, const MultiIndex& m) { out[i] = samples[position(m)] * scale; });
  return out;
}

SparseCoeffs SpectralGrid::analyze_sparse(std::vector<cplx> samples, double floor) const {
  auto* buf = reinterpret_cast<fftw_complex*>(samples.data());
  fftw_execute_dft(plans_->forward, buf, buf);
  const double scale = 1.0 / static_cast<double>(total_);
  SparseCoeffs out;
  const int rank = b_ + d_;
  MultiIndex m(b_, d_);
  for (std::size_t pos = 0; pos < total_; ++pos) {
    const cplx z = samples[pos] * scale;
    if (std::abs(z) <= floor) continue;
    std::size_t rem = pos;
    for (int k = 0; k < rank; ++k) {
      int c = static_cast<int>(rem / stride_[k]);
      rem %= stride_[k];
      m.set_coord(k, 2 * c < len_[k] ? c : c - len_[k]);
    }
    out[m] = z;
  }
  return out;
}

}  // namespace qpnls
