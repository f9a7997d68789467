#include "qpnls/resonance.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "qpnls/error.hpp"
#include "qpnls/fourier_field.hpp"
#include "qpnls/nonlinearity.hpp"

namespace qpnls {

namespace {

// Time slices of the box grouped by the value of n.w0.
std::unordered_map<long, std::vector<MultiIndex>> time_slices(const SeedSolution& seed, int n_time) {
  const auto w0 = seed.omega0();
  std::unordered_map<long, std::vector<MultiIndex>> out;
  for (const auto& n : enumerate_box({n_time, 0}, seed.b(), seed.d)) out[n.time_dot(w0)].push_back(n);
  return out;
}

template <class F>
void scan_resonant(const SeedSolution& seed, const TruncationBox& box, F&& emit) {
  seed.validate();
  const auto slices = time_slices(seed, box.n_time);
  for (const auto& j : enumerate_box({0, box.n_space}, seed.b(), seed.d)) {
    const long s = j.space_sq();
    for (int sign : {1, -1}) {
      // sign * n.w0 + |j|^2 = 0
      auto it = slices.find(-sign * s);
      if (it == slices.end()) continue;
      for (const auto& n : it->second) emit(n + j, sign, s == 0);
    }
  }
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

ResonantSet bicharacteristics(const SeedSolution& seed, const TruncationBox& box) {
  ResonantSet r;
  r.box = box;
  scan_resonant(seed, box, [&](const MultiIndex& m, int sign, bool j_zero) {
    if (j_zero) {
      (m.n(0) <= 0 ? r.plus : r.minus).insert(m);
    } else {
      (sign > 0 ? r.plus : r.minus).insert(m);
    }
  });
  return r;
}

std::vector<ResonantVertex> resonant_rows(const SeedSolution& seed, const TruncationBox& box) {
  std::set<std::pair<MultiIndex, int>> rows;
  scan_resonant(seed, box, [&](const MultiIndex& m, int sign, bool) { rows.insert({m, -sign}); });
  std::vector<ResonantVertex> out;
  out.reserve(rows.size());
  // The set orders - before + at equal sites; flip so + comes first.
  for (const auto& [m, neg] : rows) out.push_back({m, neg < 0 ? RowSign::kPlus : RowSign::kMinus});
  return out;
}

ResonanceGraph::ResonanceGraph(std::vector<ResonantVertex> vertices, std::vector<ResonanceEdge> edges,
                               TruncationBox box)
    : vertices_(std::move(vertices)), edges_(std::move(edges)), box_(box) {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    index_.emplace(Key{vertices_[i].site, static_cast<int>(vertices_[i].sign)}, i);
  }
  UnionFind uf(vertices_.size());
  for (const auto& e : edges_) uf.unite(e.a, e.b);
  component_of_.assign(vertices_.size(), 0);
  std::unordered_map<std::size_t, std::size_t> label;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const std::size_t r = uf.find(i);
    auto [it, fresh] = label.emplace(r, components_.size());
    if (fresh) components_.emplace_back();
    components_[it->second].push_back(i);
    component_of_[i] = it->second;
  }
}

std::optional<std::size_t> ResonanceGraph::find(const MultiIndex& site, RowSign sign) const {
  auto it = index_.find(Key{site, static_cast<int>(sign)});
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ResonanceGraph::max_component_size() const {
  std::size_t m = 0;
  for (const auto& c : components_) m = std::max(m, c.size());
  return m;
}

ResonanceGraph build_resonance_graph(const SeedSolution& seed, const ResonantSet& rset, int p) {
  if (p < 1) throw ValidationError("p must be >= 1");
  const auto w0 = seed.omega0();
  std::vector<ResonantVertex> vertices;
  std::set<MultiIndex> sites(rset.plus);
  sites.insert(rset.minus.begin(), rset.minus.end());
  for (const auto& s : sites) {
    const long nw = s.time_dot(w0);
    const long sq = s.space_sq();
    if (nw + sq == 0) vertices.push_back({s, RowSign::kPlus});
    if (-nw + sq == 0) vertices.push_back({s, RowSign::kMinus});
  }

  ResonanceGraph lookup(vertices, {}, rset.box);
  auto same = uv_power_support(seed, p);
  same.erase(MultiIndex(seed.b(), seed.d));
  const auto opposite = uu_coupling_support(seed, p);

  std::vector<ResonanceEdge> edges;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const auto& [s, sign] = vertices[i];
    for (const auto& o : same) {
      auto k = lookup.find(s - o, sign);
      if (k && *k > i) edges.push_back({i, *k, o});
    }
    if (sign == RowSign::kPlus) {
      for (const auto& o : opposite) {
        if (auto k = lookup.find(s - o, RowSign::kMinus)) edges.push_back({i, *k, o});
      }
    }
  }
  return ResonanceGraph(std::move(vertices), std::move(edges), rset.box);
}

GenericityCertificate certify_genericity(const ResonanceGraph& graph, const SeedSolution& seed, int p, int b,
                                         int d) {
  if (b != seed.b() || d != seed.d) throw ValidationError("certificate dimensions do not match the seed");
  GenericityCertificate c;
  c.box = graph.box();
  c.bound = static_cast<std::size_t>(std::max(2 * b, d + 2));

  const auto f0 = f0_support(seed, p);
  for (const auto& s : f0) {
    if (!graph.box().contains(s)) {
      throw ValidationError("box too small: supp F0 reaches " + s.str() + " outside the truncation box");
    }
  }
  const auto anchors = seed.anchor_sites();
  const std::set<MultiIndex> S(anchors.begin(), anchors.end());
  for (const auto& s : f0) {
    if (!S.count(s) && graph.find(s, RowSign::kPlus)) c.f0_hits.push_back(s);
  }
  c.f0_support_clean = c.f0_hits.empty();

  // With d = p = 1 every seed is generic.
  const bool screen = !(d == 1 && p == 1);
  for (int k = 0; k < b && screen && c.antipodal_free; ++k) {
    for (int l = k + 1; l < b; ++l) {
      SpatialVec neg(seed.freqs[l]);
      for (int& x : neg) x = -x;
      if (neg == seed.freqs[k]) c.antipodal_free = false;
    }
  }

  const auto& comps = graph.components();
  std::size_t worst = 0;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (comps[k].size() > c.max_component_size) {
      c.max_component_size = comps[k].size();
      worst = k;
    }
    if (comps[k].size() == 1) {
      ++c.singleton_count;
      continue;
    }
    std::vector<MultiIndex> sites;
    std::string pattern;
    for (std::size_t v : comps[k]) {
      sites.push_back(graph.vertices()[v].site);
      pattern.push_back(graph.vertices()[v].sign == RowSign::kPlus ? '+' : '-');
    }
    c.components.emplace_back(std::move(sites), std::move(pattern));
  }
  // Box-growth saturation: a component that keeps growing on the doubled box is degenerate.
  const ResonanceGraph doubled = build_resonance_graph(seed, bicharacteristics(seed, graph.box().scaled(2)), p);
  c.max_component_size_doubled = doubled.max_component_size();
  c.saturated = c.max_component_size_doubled == c.max_component_size;

  if (c.max_component_size > c.bound) {
    std::vector<MultiIndex> sites;
    for (std::size_t v : comps[worst]) sites.push_back(graph.vertices()[v].site);
    c.violating_component = std::move(sites);
  } else if (!c.saturated) {
    for (const auto& comp : doubled.components()) {
      if (comp.size() != c.max_component_size_doubled) continue;
      std::vector<MultiIndex> sites;
      for (std::size_t v : comp) sites.push_back(doubled.vertices()[v].site);
      c.violating_component = std::move(sites);
      break;
    }
  } else if (!c.antipodal_free) {
    // Report the component of the first anchor, which holds the coupled pair.
    std::vector<MultiIndex> sites;
    if (auto v = graph.find(seed.u_site(0), RowSign::kPlus)) {
      for (std::size_t i : comps[graph.component_of()[*v]]) sites.push_back(graph.vertices()[i].site);
    }
    c.violating_component = std::move(sites);
  }
  c.is_generic = c.max_component_size <= c.bound && c.saturated && c.f0_support_clean && c.antipodal_free;
  return c;
}

TruncationBox minimal_certificate_box(const SeedSolution& seed, int p) {
  seed.validate();
  return {p + 1, (2 * p + 1) * seed.max_frequency_linf()};
}

GenericityCertificate certify_seed(const SeedSolution& seed, int p, const TruncationBox& box) {
  const auto rset = bicharacteristics(seed, box);
  const auto graph = build_resonance_graph(seed, rset, p);
  return certify_genericity(graph, seed, p, seed.b(), seed.d);
}

SaturationReport box_growth(const SeedSolution& seed, int p, const TruncationBox& box) {
  SaturationReport r;
  r.size_n = build_resonance_graph(seed, bicharacteristics(seed, box), p).max_component_size();
  const auto big = box.scaled(2);
  r.size_2n = build_resonance_graph(seed, bicharacteristics(seed, big), p).max_component_size();
  return r;
}

bool cubic_resonance_test(const SpatialVec& jk, const SpatialVec& jk2, const SpatialVec& j, CubicCase c) {
  if (jk.size() != j.size() || jk2.size() != j.size()) throw ValidationError("cubic test vectors differ in dimension");
  long dot = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (c == CubicCase::kSameSign) {
      dot += static_cast<long>(jk[i] - jk2[i]) * (j[i] + jk[i]);
    } else {
      dot += static_cast<long>(j[i] + jk[i]) * (j[i] + jk2[i]);
    }
  }
  return dot == 0;
}

void to_json(nlohmann::json& j, const GenericityCertificate& c) {
  auto comps = nlohmann::json::array();
  for (const auto& [sites, pattern] : c.components) {
    comps.push_back({{"sites", sites}, {"sign_pattern", pattern}});
  }
  j = nlohmann::json{{"is_generic", c.is_generic},
                     {"max_component_size", c.max_component_size},
                     {"bound", c.bound},
                     {"saturated", c.saturated},
                     {"max_component_size_doubled", c.max_component_size_doubled},
                     {"components", comps},
                     {"singleton_components", c.singleton_count},
                     {"f0_support_clean", c.f0_support_clean},
                     {"antipodal_free", c.antipodal_free},
                     {"f0_resonant_hits", c.f0_hits},
                     {"box", c.box}};
  if (c.violating_component) j["violating_component"] = *c.violating_component;
}

}  // namespace qpnls
