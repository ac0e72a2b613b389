#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvcar/sparse_symmetric.hpp"

namespace mvcar {

/// Undirected edge between two regions, 0-based, with a < b.
struct Edge {
  int a = 0;
  int b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Areal lattice: I regions and a set of unordered neighbour pairs.
///
/// Constructed from 1-based region ids (as they appear in adjacency files).
/// Either orientation of a pair is accepted and duplicates collapse to one
/// edge. Immutable after construction.
class ArealGraph {
 public:
  ArealGraph(int n_regions, std::span<const std::pair<int, int>> edges_one_based,
             std::vector<std::string> region_labels = {});

  int n_regions() const noexcept { return n_regions_; }
  std::size_t n_edges() const noexcept { return edges_.size(); }
  /// Sorted, 0-based.
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  /// 0-based sorted neighbour list of each region.
  const std::vector<std::vector<int>>& neighbors() const noexcept { return neighbors_; }
  const std::vector<std::string>& region_labels() const noexcept { return labels_; }

  bool has_isolated_regions() const;

 private:
  int n_regions_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::string> labels_;
};

/// Reads the edge-list format:
///
///     # comment
///     regions: 3
///     1 2
///     2 3
///
/// Throws ParseError (with line number) on malformed lines and
/// ValidationError on out-of-range ids or self-loops.
ArealGraph load_edge_list(const std::filesystem::path& path);
ArealGraph parse_edge_list(std::istream& in);

/// Degree n_i of every region.
std::vector<int> neighbor_counts(const ArealGraph& g);

/// Binary adjacency W (symmetric, zero diagonal).
SparseSym adjacency_matrix(const ArealGraph& g);

struct Components {
  std::vector<int> labels;  // 1-based component label per region
  int count = 0;
};

/// Labels are assigned in order of the smallest region id in each component.
Components connected_components(const ArealGraph& g);

}  // namespace mvcar
