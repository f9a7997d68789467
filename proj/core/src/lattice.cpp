#include "qpnls/lattice.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "qpnls/error.hpp"

namespace qpnls {

namespace {

void check_dims(int b, int d) {
  if (b < 1 || d < 1 || b + d > kMaxLatticeDim) {
    throw ValidationError("lattice dimensions must satisfy b >= 1, d >= 1, b + d <= " +
                          std::to_string(kMaxLatticeDim) + " (got b=" + std::to_string(b) +
                          ", d=" + std::to_string(d) + ")");
  }
}

}  // namespace

MultiIndex::MultiIndex(int b, int d) : b_(static_cast<std::uint8_t>(b)), d_(static_cast<std::uint8_t>(d)) {
  check_dims(b, d);
}

MultiIndex::MultiIndex(std::span<const int> n, std::span<const int> j)
    : MultiIndex(static_cast<int>(n.size()), static_cast<int>(j.size())) {
  for (std::size_t i = 0; i < n.size(); ++i) c_[i] = n[i];
  for (std::size_t i = 0; i < j.size(); ++i) c_[b_ + i] = j[i];
}

MultiIndex::MultiIndex(std::initializer_list<int> n, std::initializer_list<int> j)
    : MultiIndex(std::span<const int>(n.begin(), n.size()), std::span<const int>(j.begin(), j.size())) {}

bool MultiIndex::is_origin() const {
  for (int k = 0; k < rank(); ++k)
    if (c_[k] != 0) return false;
  return true;
}

long MultiIndex::l1() const { return time_l1() + space_l1(); }

long MultiIndex::time_l1() const {
  long s = 0;
  for (int k = 0; k < b_; ++k) s += std::abs(c_[k]);
  return s;
}

long MultiIndex::space_l1() const {
  long s = 0;
  for (int k = b_; k < rank(); ++k) s += std::abs(c_[k]);
  return s;
}

int MultiIndex::time_linf() const {
  int m = 0;
  for (int k = 0; k < b_; ++k) m = std::max(m, std::abs(c_[k]));
  return m;
}

int MultiIndex::space_linf() const {
  int m = 0;
  for (int k = b_; k < rank(); ++k) m = std::max(m, std::abs(c_[k]));
  return m;
}

long MultiIndex::time_sum() const {
  long s = 0;
  for (int k = 0; k < b_; ++k) s += c_[k];
  return s;
}

long MultiIndex::space_sq() const {
  long s = 0;
  for (int k = b_; k < rank(); ++k) s += static_cast<long>(c_[k]) * c_[k];
  return s;
}

long MultiIndex::time_dot(std::span<const long> w) const {
  long s = 0;
  for (int k = 0; k < b_; ++k) s += c_[k] * w[k];
  return s;
}

double MultiIndex::time_dot(std::span<const double> w) const {
  double s = 0;
  for (int k = 0; k < b_; ++k) s += c_[k] * w[k];
  return s;
}

MultiIndex MultiIndex::operator-() const {
  MultiIndex r = *this;
  for (int k = 0; k < rank(); ++k) r.c_[k] = -c_[k];
  return r;
}

MultiIndex& MultiIndex::operator+=(const MultiIndex& o) {
  for (int k = 0; k < rank(); ++k) c_[k] += o.c_[k];
  return *this;
}

MultiIndex& MultiIndex::operator-=(const MultiIndex& o) {
  for (int k = 0; k < rank(); ++k) c_[k] -= o.c_[k];
  return *this;
}

std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& o) {
  if (auto c = a.b_ <=> o.b_; c != 0) return c;
  if (auto c = a.d_ <=> o.d_; c != 0) return c;
  for (int k = 0; k < a.rank(); ++k) {
    if (auto c = a.c_[k] <=> o.c_[k]; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

bool operator==(const MultiIndex& a, const MultiIndex& o) {
  return (a <=> o) == std::strong_ordering::equal;
}

std::string MultiIndex::str() const {
  std::ostringstream os;
  os << "((";
  for (int k = 0; k < b_; ++k) os << (k ? "," : "") << c_[k];
  os << "),(";
  for (int k = 0; k < d_; ++k) os << (k ? "," : "") << c_[b_ + k];
  os << "))";
  return os.str();
}

std::size_t MultiIndex::hash() const {
  // FNV-1a over the active coordinates.
  std::uint64_t h = 1469598103934665603ULL ^ (static_cast<std::uint64_t>(b_) << 8 | d_);
  for (int k = 0; k < rank(); ++k) {
    h ^= static_cast<std::uint32_t>(c_[k]);
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

MultiIndex time_unit(int b, int d, int k) {
  MultiIndex m(b, d);
  m.set_n(k, 1);
  return m;
}

std::size_t TruncationBox::site_count(int b, int d) const {
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  std::size_t count = 1;
  auto mul = [&](std::size_t w) {
    if (count > kMax / w) count = kMax;
    else count *= w;
  };
  for (int i = 0; i < b; ++i) mul(static_cast<std::size_t>(2 * n_time + 1));
  for (int i = 0; i < d; ++i) mul(static_cast<std::size_t>(2 * n_space + 1));
  return count;
}

std::vector<MultiIndex> enumerate_box(const TruncationBox& box, int b, int d, std::size_t cap) {
  BoxGrid grid(b, d, box, cap);
  std::vector<MultiIndex> out;
  out.reserve(grid.size());
  grid.for_each([&](std::size_t, const MultiIndex& m) { out.push_back(m); });
  return out;
}

double AnalyticWeight::operator()(const MultiIndex& m) const {
  return std::exp(rho_time * static_cast<double>(m.time_l1()) +
                  rho_space * static_cast<double>(m.space_l1()));
}

BoxGrid::BoxGrid(int b, int d, const TruncationBox& box, std::size_t cap) : b_(b), d_(d), box_(box) {
  check_dims(b, d);
  if (box.n_time < 0 || box.n_space < 0) throw ValidationError("truncation box radii must be nonnegative");
  size_ = box.site_count(b, d);
  if (size_ > cap) {
    throw ResourceError("truncation box has " + std::to_string(size_) + " sites, above the cap of " +
                        std::to_string(cap) + "; shrink the box");
  }
  std::size_t s = 1;
  for (int k = rank() - 1; k >= 0; --k) {
    stride_[k] = s;
    s *= static_cast<std::size_t>(width(k));
  }
}

std::size_t BoxGrid::index(const MultiIndex& m) const {
  std::size_t idx = 0;
  for (int k = 0; k < rank(); ++k) idx += static_cast<std::size_t>(m.coord(k) + radius(k)) * stride_[k];
  return idx;
}

MultiIndex BoxGrid::site(std::size_t idx) const {
  MultiIndex m(b_, d_);
  for (int k = 0; k < rank(); ++k) {
    m.set_coord(k, static_cast<int>(idx / stride_[k]) - radius(k));
    idx %= stride_[k];
  }
  return m;
}

void BoxGrid::for_each(const std::function<void(std::size_t, const MultiIndex&)>& f) const {
  MultiIndex m(b_, d_);
  for (int k = 0; k < rank(); ++k) m.set_coord(k, -radius(k));
  for (std::size_t idx = 0; idx < size_; ++idx) {
    f(idx, m);
    for (int k = rank() - 1; k >= 0; --k) {
      if (m.coord(k) < radius(k)) {
        m.set_coord(k, m.coord(k) + 1);
        break;
      }
      m.set_coord(k, -radius(k));
    }
  }
}

}  // namespace qpnls
