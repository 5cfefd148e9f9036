#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sagelink/graph.hpp"

namespace sagelink {

/// Disjoint partition of a graph's canonical edge list. train_pos holds the
/// first floor(train_fraction * E) edges of the seeded permutation.
struct EdgeSplit {
  std::vector<NodePair> train_pos;
  std::vector<NodePair> test_pos;
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
};

/// train_fraction must lie in (0, 1) and the graph must have at least two
/// edges; throws std::invalid_argument otherwise. Deterministic in seed.
EdgeSplit split_edges(const Graph& g, double train_fraction,
                      std::uint64_t seed);

/// Canonical node pairs that are not edges of g, sampled uniformly by
/// rejection without replacement. Pairs in exclude are never returned.
/// Throws std::invalid_argument when fewer than count distinct non-edges
/// remain outside exclude.
struct NegativeSample {
  std::vector<NodePair> pairs;
  std::uint64_t seed = 0;
};

NegativeSample sample_negatives(const Graph& g, std::size_t count,
                                std::uint64_t seed,
                                std::span<const NodePair> exclude = {});

/// One header line recording seed, fraction and section sizes, followed by
/// train then test pairs in canonical "u v" form.
void write_split(std::ostream& out, const EdgeSplit& split);
/// Throws ParseError on malformed headers, bodies or truncated sections.
EdgeSplit read_split(std::istream& in);

}  // namespace sagelink
