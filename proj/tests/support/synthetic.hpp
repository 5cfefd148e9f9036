#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sagelink/graph.hpp"
#include "sagelink/matrix.hpp"

namespace testsupport {

/// Preferential-attachment graph: node v attaches min(v, edges_per_node)
/// edges to earlier nodes sampled proportionally to degree. Heavy-tailed
/// degrees, always connected; deterministic in seed.
std::vector<sagelink::NodePair> preferential_attachment_pairs(
    std::size_t num_nodes, std::size_t edges_per_node, std::uint64_t seed);

/// Hub-and-leaf graph: a small core whose popularity follows a Zipf-like
/// law, a sparse core backbone, and leaves attaching one to three edges to
/// popularity-sampled hubs. Non-adjacent low-degree pairs have heterogeneous
/// neighborhoods, so link prediction from degree features genuinely learns
/// here, unlike on near-regular attachment graphs.
std::vector<sagelink::NodePair> hub_leaf_pairs(std::size_t hubs,
                                               std::size_t leaves,
                                               std::uint64_t seed);

/// Uniform random graph with exactly edge_count distinct edges.
std::vector<sagelink::NodePair> uniform_random_pairs(std::size_t num_nodes,
                                                     std::size_t edge_count,
                                                     std::uint64_t seed);

sagelink::EdgeList make_edge_list(std::size_t num_nodes,
                                  std::vector<sagelink::NodePair> pairs);

sagelink::Matrix random_features(std::size_t rows, std::size_t cols,
                                 std::uint64_t seed, double lo, double hi);

/// Raw "u v" lines, one edge per line, with a leading comment line.
void write_pairs_file(const std::filesystem::path& path,
                      const std::vector<sagelink::NodePair>& pairs);

/// Fresh unique directory under the system temp root.
std::filesystem::path make_temp_dir(const std::string& tag);

}  // namespace testsupport
