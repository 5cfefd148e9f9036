#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sagelink/matrix.hpp"

namespace sagelink {

using NodeId = std::uint32_t;
/// Unordered edge in canonical form: first < second.
using NodePair = std::pair<NodeId, NodeId>;

/// Raised on malformed edge-list input; messages carry 1-based line numbers.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Canonical undirected edge list over dense node ids. Raw input ids are
/// remapped to [0, num_nodes) in order of first appearance, then stabilized
/// so the canonical export re-parses to exactly this list; pairs are held
/// with first < second, lexicographically sorted, without duplicates or
/// self-loops.
struct EdgeList {
  std::size_t num_nodes = 0;
  std::vector<NodePair> pairs;
};

/// Accepts '#' comment lines and data lines of two whitespace-separated
/// non-negative integers. Throws ParseError on malformed lines or when the
/// input has no data lines at all.
EdgeList parse_edge_list(std::istream& in);

/// Canonical "u v" text form, ascending; parse(write(x)) == x.
void write_edge_list(std::ostream& out, const EdgeList& edges);

/// Immutable CSR adjacency with optional per-node features. Neighbour runs
/// are sorted and deduplicated; both directions of every edge are stored.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t edge_count() const { return targets_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId v) const {
    if (v >= num_nodes_)
      throw std::out_of_range("node " + std::to_string(v) +
                              " out of range [0, " +
                              std::to_string(num_nodes_) + ")");
    return {targets_.data() + offsets_[v],
            static_cast<std::size_t>(offsets_[v + 1] - offsets_[v])};
  }

  std::size_t degree(NodeId v) const { return neighbors(v).size(); }

  bool has_edge(NodeId u, NodeId v) const;

  const Matrix& features() const { return features_; }
  /// Copy of this graph with the features replaced; rows must match
  /// num_nodes.
  Graph with_features(Matrix features) const;

  /// Canonical pair list (first < second, ascending).
  std::vector<NodePair> edge_pairs() const;

  const std::vector<std::uint32_t>& offsets() const { return offsets_; }
  const std::vector<NodeId>& targets() const { return targets_; }

 private:
  friend Graph build_graph(const EdgeList& edges, Matrix features);

  std::size_t num_nodes_ = 0;
  std::vector<std::uint32_t> offsets_{0};
  std::vector<NodeId> targets_;
  Matrix features_;
};

/// features must have num_nodes rows (throws std::invalid_argument) or be
/// empty, in which case the graph carries a num_nodes x 0 placeholder.
Graph build_graph(const EdgeList& edges, Matrix features = Matrix());

void write_edge_list(std::ostream& out, const Graph& g);

}  // namespace sagelink
