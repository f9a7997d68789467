#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qpnls/lattice.hpp"
#include "qpnls/seed.hpp"

namespace qpnls {

// C restricted to a box, split into C+ and C- with the j = 0 tie-break on n_1.
struct ResonantSet {
  std::set<MultiIndex> plus;
  std::set<MultiIndex> minus;
  TruncationBox box;

  bool contains(const MultiIndex& m) const { return plus.count(m) || minus.count(m); }
  std::size_t size() const { return plus.size() + minus.size(); }
};

ResonantSet bicharacteristics(const SeedSolution& seed, const TruncationBox& box);

// +1: the u row n.w0 + |j|^2 vanishes at the site. -1: the v row -n.w0 + |j|^2 does.
enum class RowSign : int { kPlus = 1, kMinus = -1 };

struct ResonantVertex {
  MultiIndex site;
  RowSign sign;
};

struct ResonanceEdge {
  std::size_t a;
  std::size_t b;
  MultiIndex offset;  // site(a) - site(b)
};

// Vertices are resonant rows. At j = 0 with n.w0 = 0 both rows vanish and both
// are vertices.
class ResonanceGraph {
 public:
  ResonanceGraph() = default;
  ResonanceGraph(std::vector<ResonantVertex> vertices, std::vector<ResonanceEdge> edges, TruncationBox box);

  const std::vector<ResonantVertex>& vertices() const { return vertices_; }
  const std::vector<ResonanceEdge>& edges() const { return edges_; }
  // Component partition, each sorted by vertex index, ordered by smallest member.
  const std::vector<std::vector<std::size_t>>& components() const { return components_; }
  const std::vector<std::size_t>& component_of() const { return component_of_; }
  const TruncationBox& box() const { return box_; }

  std::optional<std::size_t> find(const MultiIndex& site, RowSign sign) const;
  std::size_t max_component_size() const;

 private:
  struct Key {
    MultiIndex site;
    int sign;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const { return k.site.hash() * 31u + static_cast<std::size_t>(k.sign + 1); }
  };

  std::vector<ResonantVertex> vertices_;
  std::vector<ResonanceEdge> edges_;
  std::vector<std::vector<std::size_t>> components_;
  std::vector<std::size_t> component_of_;
  std::unordered_map<Key, std::size_t, KeyHash> index_;
  TruncationBox box_;
};

// Every resonant row of the box.
std::vector<ResonantVertex> resonant_rows(const SeedSolution& seed, const TruncationBox& box);

ResonanceGraph build_resonance_graph(const SeedSolution& seed, const ResonantSet& rset, int p);

struct GenericityCertificate {
  bool is_generic = false;
  std::size_t max_component_size = 0;
  std::size_t bound = 0;
  // Largest component on the doubled box; saturated when it equals max_component_size.
  std::size_t max_component_size_doubled = 0;
  bool saturated = false;
  std::optional<std::vector<MultiIndex>> violating_component;
  bool f0_support_clean = false;
  std::vector<MultiIndex> f0_hits;
  // No pair j_k = -j_k' (such a pair is a standing wave sharing one time frequency).
  bool antipodal_free = true;
  // Non-singleton components as (sites, sign pattern).
  std::vector<std::pair<std::vector<MultiIndex>, std::string>> components;
  std::size_t singleton_count = 0;
  TruncationBox box;
};

// Throws ValidationError when supp F0 leaves the graph's box. Rebuilds the
// graph on the doubled box for the saturation check.
GenericityCertificate certify_genericity(const ResonanceGraph& graph, const SeedSolution& seed, int p, int b, int d);

// Convenience: bicharacteristics, graph and certificate on one box.
GenericityCertificate certify_seed(const SeedSolution& seed, int p, const TruncationBox& box);

// Smallest box holding supp F0 with room for one coupling step.
TruncationBox minimal_certificate_box(const SeedSolution& seed, int p);

// Max component size on box and on the doubled box.
struct SaturationReport {
  std::size_t size_n = 0;
  std::size_t size_2n = 0;
  bool saturated() const { return size_n == size_2n; }
};
SaturationReport box_growth(const SeedSolution& seed, int p, const TruncationBox& box);

enum class CubicCase { kSameSign, kOppositeSign };

bool cubic_resonance_test(const SpatialVec& jk, const SpatialVec& jk2, const SpatialVec& j, CubicCase c);

void to_json(nlohmann::json& j, const GenericityCertificate& c);

}  // namespace qpnls
