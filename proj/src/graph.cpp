#include "sagelink/graph.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>

namespace sagelink {

namespace {

bool parse_node_id(std::string_view token, std::uint64_t& value) {
  const char* first = token.data();
  const char* last = first + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

EdgeList parse_edge_list(std::istream& in) {
  EdgeList out;
  std::unordered_map<std::uint64_t, NodeId> remap;
  std::string line;
  std::size_t line_no = 0;
  std::size_t data_lines = 0;

  auto dense_id = [&](std::uint64_t raw) {
    auto [it, inserted] =
        remap.emplace(raw, static_cast<NodeId>(remap.size()));
    (void)inserted;
    return it->second;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '#') continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::uint64_t raw[2];
    std::size_t tokens = 0;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t'))
        ++pos;
      if (pos >= line.size()) break;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
      const std::string_view token(line.data() + pos, end - pos);
      if (tokens < 2 && !parse_node_id(token, raw[tokens])) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": invalid integer token '" + std::string(token) +
                         "'");
      }
      ++tokens;
      pos = end;
      if (tokens > 2) break;
    }
    if (tokens != 2)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 2 integer tokens, got " +
                       std::to_string(tokens));

    ++data_lines;
    const NodeId a = dense_id(raw[0]);
    const NodeId b = dense_id(raw[1]);
    if (a == b) continue;
    out.pairs.emplace_back(std::min(a, b), std::max(a, b));
  }

  if (data_lines == 0) throw ParseError("edge list is empty");

  out.num_nodes = remap.size();
  std::sort(out.pairs.begin(), out.pairs.end());
  out.pairs.erase(std::unique(out.pairs.begin(), out.pairs.end()),
                  out.pairs.end());

  // Stabilize the labels so re-parsing the canonical export reproduces this
  // exact list. Re-applying the appearance order to the sorted list strictly
  // lowers it lexicographically until appearance order and label order agree
  // (at most a handful of passes), at which point write-then-parse is the
  // identity.
  constexpr NodeId kNoLabel = static_cast<NodeId>(-1);
  std::vector<NodeId> relabel(out.num_nodes);
  for (;;) {
    std::fill(relabel.begin(), relabel.end(), kNoLabel);
    NodeId next = 0;
    for (const auto& [u, v] : out.pairs) {
      if (relabel[u] == kNoLabel) relabel[u] = next++;
      if (relabel[v] == kNoLabel) relabel[v] = next++;
    }
    // Nodes left over from dropped self-loops sit after the connected ones.
    for (NodeId v = 0; v < out.num_nodes; ++v)
      if (relabel[v] == kNoLabel) relabel[v] = next++;
    bool identity = true;
    for (NodeId v = 0; identity && v < out.num_nodes; ++v)
      identity = relabel[v] == v;
    if (identity) break;
    for (auto& [u, v] : out.pairs) {
      u = relabel[u];
      v = relabel[v];
      if (u > v) std::swap(u, v);
    }
    std::sort(out.pairs.begin(), out.pairs.end());
  }
  return out;
}

void write_edge_list(std::ostream& out, const EdgeList& edges) {
  for (const auto& [u, v] : edges.pairs)
    out << u << ' ' << v << '\n';
}

Graph build_graph(const EdgeList& edges, Matrix features) {
  const std::size_t n = edges.num_nodes;
  if (features.rows() == 0 && features.cols() == 0) features = Matrix(n, 0);
  if (features.rows() != n)
    throw std::invalid_argument(
        "feature rows " + std::to_string(features.rows()) +
        " do not match num_nodes " + std::to_string(n));

  Graph g;
  g.num_nodes_ = n;
  g.features_ = std::move(features);
  g.offsets_.assign(n + 1, 0);
  for (const auto& [u, v] : edges.pairs) {
    if (u >= n || v >= n)
      throw std::invalid_argument("edge (" + std::to_string(u) + ", " +
                                  std::to_string(v) + ") outside [0, " +
                                  std::to_string(n) + ")");
    ++g.offsets_[u + 1];
    ++g.offsets_[v + 1];
  }
  for (std::size_t i = 1; i <= n; ++i) g.offsets_[i] += g.offsets_[i - 1];

  g.targets_.resize(g.offsets_[n]);
  std::vector<std::uint32_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const auto& [u, v] : edges.pairs) {
    g.targets_[cursor[u]++] = v;
    g.targets_[cursor[v]++] = u;
  }
  for (std::size_t v = 0; v < n; ++v)
    std::sort(g.targets_.begin() + g.offsets_[v],
              g.targets_.begin() + g.offsets_[v + 1]);
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  const auto run = neighbors(u);
  return std::binary_search(run.begin(), run.end(), v);
}

Graph Graph::with_features(Matrix features) const {
  if (features.rows() != num_nodes_)
    throw std::invalid_argument(
        "feature rows " + std::to_string(features.rows()) +
        " do not match num_nodes " + std::to_string(num_nodes_));
  Graph g(*this);
  g.features_ = std::move(features);
  return g;
}

std::vector<NodePair> Graph::edge_pairs() const {
  std::vector<NodePair> pairs;
  pairs.reserve(edge_count());
  for (std::size_t v = 0; v < num_nodes_; ++v)
    for (std::uint32_t idx = offsets_[v]; idx < offsets_[v + 1]; ++idx) {
      const NodeId u = targets_[idx];
      if (u > v) pairs.emplace_back(static_cast<NodeId>(v), u);
    }
  return pairs;
}

void write_edge_list(std::ostream& out, const Graph& g) {
  for (const auto& [u, v] : g.edge_pairs())
    out << u << ' ' << v << '\n';
}

}  // namespace sagelink
