#include <doctest.h>

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sagelink/graph.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using sagelink::build_graph;
using sagelink::EdgeList;
using sagelink::Graph;
using sagelink::Matrix;
using sagelink::NodeId;
using sagelink::NodePair;
using sagelink::parse_edge_list;
using sagelink::ParseError;

namespace {

EdgeList parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_edge_list(in);
}

}  // namespace

TEST_CASE("parser canonicalizes ids, direction and duplicates") {
  // Both directions of the same link plus a self-loop collapse to one edge
  // over densely remapped ids.
  const EdgeList e = parse_text("5 7\n7 5\n5 5\n");
  CHECK(e.num_nodes == 2);
  REQUIRE(e.pairs.size() == 1);
  CHECK(e.pairs[0] == NodePair{0, 1});
}

TEST_CASE("parser remaps raw ids in order of first appearance") {
  const EdgeList e = parse_text("# comment\n10 3\n3 99\n99 10\n");
  CHECK(e.num_nodes == 3);  // 10 -> 0, 3 -> 1, 99 -> 2
  CHECK(e.pairs == std::vector<NodePair>{{0, 1}, {0, 2}, {1, 2}});
}

TEST_CASE("parser accepts comments, blank lines, tabs and CRLF") {
  const EdgeList e = parse_text("# FromNodeId\tToNodeId\r\n\r\n0\t1\r\n1 2\n");
  CHECK(e.num_nodes == 3);
  CHECK(e.pairs == std::vector<NodePair>{{0, 1}, {1, 2}});
}

TEST_CASE("parser reports malformed lines with their line number") {
  CHECK_THROWS_WITH_AS(parse_text("0 1\nx 2\n"),
                       "line 2: invalid integer token 'x'", ParseError);
  CHECK_THROWS_WITH_AS(parse_text("0 1\n-3 2\n"),
                       "line 2: invalid integer token '-3'", ParseError);
  CHECK_THROWS_WITH_AS(parse_text("0 1 2\n"),
                       "line 1: expected 2 integer tokens, got 3",
                       ParseError);
  CHECK_THROWS_WITH_AS(parse_text("7\n"),
                       "line 1: expected 2 integer tokens, got 1", ParseError);
  CHECK_THROWS_WITH_AS(parse_text("# only comments\n"), "edge list is empty",
                       ParseError);
  CHECK_THROWS_WITH_AS(parse_text(""), "edge list is empty", ParseError);
}

TEST_CASE("write then parse is the identity on parsed lists") {
  // Parsed ids are stabilized, so the canonical export is a fixed point of
  // the parser. Checked on several shapes whose raw appearance order is not
  // already dense-monotone.
  for (const std::uint64_t seed : {11, 12, 13, 14}) {
    const auto pairs =
        testsupport::preferential_attachment_pairs(40, 2, seed);
    std::ostringstream raw;
    for (const auto& [u, v] : pairs) raw << v << ' ' << u << '\n';
    const EdgeList e = parse_text(raw.str());

    std::ostringstream out;
    write_edge_list(out, e);
    const EdgeList back = parse_text(out.str());
    CHECK(back.num_nodes == e.num_nodes);
    CHECK(back.pairs == e.pairs);

    // Degree structure survives the relabeling.
    std::multiset<std::size_t> degrees_raw, degrees_parsed;
    std::map<NodeId, std::size_t> d0;
    for (const auto& [u, v] : pairs) {
      d0[u]++;
      d0[v]++;
    }
    for (const auto& [id, d] : d0) degrees_raw.insert(d);
    const Graph g = build_graph(e);
    for (NodeId v = 0; v < g.num_nodes(); ++v)
      degrees_parsed.insert(g.degree(v));
    CHECK(degrees_raw == degrees_parsed);
  }
}

TEST_CASE("csr stores both directions of every edge") {
  // Triangle: every node sees the other two.
  const Graph g = build_graph({3, {{0, 1}, {0, 2}, {1, 2}}});
  CHECK(g.num_nodes() == 3);
  CHECK(g.edge_count() == 3);
  CHECK(g.targets().size() == 6);
  for (NodeId v = 0; v < 3; ++v) CHECK(g.degree(v) == 2);

  std::size_t degree_sum = 0;
  for (NodeId v = 0; v < 3; ++v) degree_sum += g.degree(v);
  CHECK(degree_sum == 2 * g.edge_count());
}

TEST_CASE("csr neighbour runs are sorted") {
  // Path 0-1-2: the middle node lists both ends in order.
  const Graph g = build_graph({3, {{0, 1}, {1, 2}}});
  const auto nb = g.neighbors(1);
  REQUIRE(nb.size() == 2);
  CHECK(nb[0] == 0);
  CHECK(nb[1] == 2);
  CHECK(g.neighbors(0).size() == 1);
  CHECK(g.neighbors(0)[0] == 1);
}

TEST_CASE("csr adjacency matches a dense membership oracle") {
  const auto pairs = testsupport::preferential_attachment_pairs(57, 3, 23);
  const Graph g = build_graph(testsupport::make_edge_list(57, pairs));

  std::vector<std::vector<bool>> dense(57, std::vector<bool>(57, false));
  for (const auto& [u, v] : pairs) {
    dense[u][v] = true;
    dense[v][u] = true;
  }
  std::size_t degree_sum = 0;
  for (NodeId u = 0; u < 57; ++u) {
    degree_sum += g.degree(u);
    for (NodeId v = 0; v < 57; ++v)
      CHECK(g.has_edge(u, v) == dense[u][v]);
  }
  CHECK(degree_sum == 2 * g.edge_count());
  CHECK(g.edge_pairs() == testsupport::make_edge_list(57, pairs).pairs);
}

TEST_CASE("isolated nodes are kept with empty neighbourhoods") {
  // Node count can exceed what the edges mention.
  const Graph g = build_graph({5, {{0, 1}}});
  CHECK(g.num_nodes() == 5);
  CHECK(g.degree(4) == 0);
  CHECK(g.neighbors(4).empty());
}

TEST_CASE("node access is range-checked") {
  const Graph g = build_graph({3, {{0, 1}, {1, 2}}});
  CHECK_THROWS_WITH_AS(g.neighbors(3), "node 3 out of range [0, 3)",
                       std::out_of_range);
  CHECK_THROWS_AS(g.degree(99), std::out_of_range);
}

TEST_CASE("feature rows must match the node count") {
  const EdgeList e{3, {{0, 1}, {1, 2}}};
  CHECK_THROWS_WITH_AS(build_graph(e, Matrix(2, 4)),
                       "feature rows 2 do not match num_nodes 3",
                       std::invalid_argument);
  const Graph g = build_graph(e, Matrix(3, 4));
  CHECK(g.features().rows() == 3);
  CHECK(g.features().cols() == 4);

  // No features given: placeholder with zero columns, correct row count.
  const Graph bare = build_graph(e);
  CHECK(bare.features().rows() == 3);
  CHECK(bare.features().cols() == 0);

  CHECK_THROWS_AS(bare.with_features(Matrix(2, 1)), std::invalid_argument);
  CHECK(bare.with_features(Matrix(3, 1)).features().cols() == 1);
}

TEST_CASE("edge pairs come back canonical and ascending") {
  const Graph g = build_graph({4, {{0, 3}, {0, 1}, {2, 3}}});
  const auto pairs = g.edge_pairs();
  REQUIRE(pairs.size() == 3);
  CHECK(pairs == std::vector<NodePair>{{0, 1}, {0, 3}, {2, 3}});
  for (const auto& [u, v] : pairs) CHECK(u < v);
}
