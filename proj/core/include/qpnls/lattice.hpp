#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace qpnls {

inline constexpr int kMaxLatticeDim = 8;

// A site (n, j) of the space-time lattice Z^(b+d). The first b coordinates are
// time frequencies, the last d are space frequencies.
class MultiIndex {
 public:
  MultiIndex() = default;
  MultiIndex(int b, int d);
  MultiIndex(std::span<const int> n, std::span<const int> j);
  MultiIndex(std::initializer_list<int> n, std::initializer_list<int> j);

  int b() const { return b_; }
  int d() const { return d_; }
  int rank() const { return b_ + d_; }

  int n(int i) const { return c_[i]; }
  int j(int i) const { return c_[b_ + i]; }
  void set_n(int i, int v) { c_[i] = v; }
  void set_j(int i, int v) { c_[b_ + i] = v; }
  int coord(int k) const { return c_[k]; }
  void set_coord(int k, int v) { c_[k] = v; }

  std::span<const std::int32_t> time() const { return {c_.data(), static_cast<std::size_t>(b_)}; }
  std::span<const std::int32_t> space() const {
    return {c_.data() + b_, static_cast<std::size_t>(d_)};
  }

  bool is_origin() const;
  long l1() const;
  long time_l1() const;
  long space_l1() const;
  int time_linf() const;
  int space_linf() const;
  long time_sum() const;
  // |j|^2 in exact integer arithmetic.
  long space_sq() const;
  // n . w for an integer frequency vector.
  long time_dot(std::span<const long> w) const;
  double time_dot(std::span<const double> w) const;

  MultiIndex operator-() const;
  MultiIndex& operator+=(const MultiIndex& o);
  MultiIndex& operator-=(const MultiIndex& o);
  friend MultiIndex operator+(MultiIndex a, const MultiIndex& o) { return a += o; }
  friend MultiIndex operator-(MultiIndex a, const MultiIndex& o) { return a -= o; }

  // Lexicographic: n first, then j, coordinate-wise.
  friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& o);
  friend bool operator==(const MultiIndex& a, const MultiIndex& o);

  std::string str() const;
  std::size_t hash() const;

 private:
  std::array<std::int32_t, kMaxLatticeDim> c_{};
  std::uint8_t b_ = 0;
  std::uint8_t d_ = 0;
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& m) const { return m.hash(); }
};

// Unit time vector e_k with zero space part.
MultiIndex time_unit(int b, int d, int k);

struct TruncationBox {
  int n_time = 1;   // max |n|_inf
  int n_space = 1;  // max |j|_inf

  bool contains(const MultiIndex& m) const {
    return m.time_linf() <= n_time && m.space_linf() <= n_space;
  }
  // (2 n_time + 1)^b (2 n_space + 1)^d, saturating at SIZE_MAX.
  std::size_t site_count(int b, int d) const;
  TruncationBox scaled(int factor) const { return {n_time * factor, n_space * factor}; }
  friend bool operator==(const TruncationBox&, const TruncationBox&) = default;
};

inline constexpr std::size_t kDefaultSiteCap = 50'000'000;

// All box sites in lexicographic order. Throws ResourceError above `cap`.
std::vector<MultiIndex> enumerate_box(const TruncationBox& box, int b, int d,
                                      std::size_t cap = kDefaultSiteCap);

struct AnalyticWeight {
  double rho_time = 0.5;
  double rho_space = 0.5;

  double operator()(const MultiIndex& m) const;
};

// Dense mixed-radix indexing of a symmetric window [-rt, rt]^b x [-rs, rs]^d.
// Linear order coincides with the lexicographic order of enumerate_box.
class BoxGrid {
 public:
  BoxGrid() = default;
  BoxGrid(int b, int d, const TruncationBox& box, std::size_t cap = kDefaultSiteCap);

  int b() const { return b_; }
  int d() const { return d_; }
  int rank() const { return b_ + d_; }
  const TruncationBox& box() const { return box_; }
  std::size_t size() const { return size_; }
  int radius(int k) const { return k < b_ ? box_.n_time : box_.n_space; }
  int width(int k) const { return 2 * radius(k) + 1; }

  bool contains(const MultiIndex& m) const { return box_.contains(m); }
  std::size_t index(const MultiIndex& m) const;
  MultiIndex site(std::size_t idx) const;

  // Calls f(idx, site) for every site in linear order.
  void for_each(const std::function<void(std::size_t, const MultiIndex&)>& f) const;

 private:
  int b_ = 0;
  int d_ = 0;
  TruncationBox box_{};
  std::size_t size_ = 0;
  std::array<std::size_t, kMaxLatticeDim> stride_{};
};

}  // namespace qpnls
