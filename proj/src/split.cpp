#include "sagelink/split.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "sagelink/format.hpp"
#include "sagelink/rng.hpp"

namespace sagelink {

namespace {

std::uint64_t pair_key(const NodePair& p) {
  return (static_cast<std::uint64_t>(p.first) << 32) | p.second;
}

}  // namespace

EdgeSplit split_edges(const Graph& g, double train_fraction,
                      std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie in (0, 1), got " +
                                format_double(train_fraction));
  std::vector<NodePair> pairs = g.edge_pairs();
  if (pairs.size() < 2)
    throw std::invalid_argument("graph has " + std::to_string(pairs.size()) +
                                " edges; need at least 2 to split");

  Rng rng(seed);
  rng.shuffle(pairs);
  const std::size_t train_count = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(pairs.size())));

  EdgeSplit split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  split.train_pos.assign(pairs.begin(), pairs.begin() + train_count);
  split.test_pos.assign(pairs.begin() + train_count, pairs.end());
  return split;
}

NegativeSample sample_negatives(const Graph& g, std::size_t count,
                                std::uint64_t seed,
                                std::span<const NodePair> exclude) {
  const std::size_t n = g.num_nodes();
  const std::size_t total = n < 2 ? 0 : n * (n - 1) / 2;

  std::unordered_set<std::uint64_t> excluded;
  excluded.reserve(exclude.size());
  std::size_t excluded_non_edges = 0;
  for (const auto& p : exclude) {
    if (excluded.insert(pair_key(p)).second && !g.has_edge(p.first, p.second))
      ++excluded_non_edges;
  }

  const std::size_t available = total - g.edge_count() - excluded_non_edges;
  if (count > available)
    throw std::invalid_argument(
        "cannot sample " + std::to_string(count) + " negative pairs; only " +
        std::to_string(available) + " non-edges are available");

  NegativeSample sample;
  sample.seed = seed;
  sample.pairs.reserve(count);
  std::unordered_set<std::uint64_t> taken;
  taken.reserve(count);

  Rng rng(seed);
  while (sample.pairs.size() < count) {
    const NodeId a = static_cast<NodeId>(rng.below(n));
    const NodeId b = static_cast<NodeId>(rng.below(n));
    if (a == b) continue;
    const NodePair p{std::min(a, b), std::max(a, b)};
    const std::uint64_t key = pair_key(p);
    if (g.has_edge(p.first, p.second)) continue;
    if (excluded.contains(key)) continue;
    if (!taken.insert(key).second) continue;
    sample.pairs.push_back(p);
  }
  return sample;
}

void write_split(std::ostream& out, const EdgeSplit& split) {
  out << "# split seed=" << split.seed
      << " fraction=" << format_double(split.train_fraction)
      << " train=" << split.train_pos.size()
      << " test=" << split.test_pos.size() << '\n';
  for (const auto& [u, v] : split.train_pos) out << u << ' ' << v << '\n';
  for (const auto& [u, v] : split.test_pos) out << u << ' ' << v << '\n';
}

namespace {

bool consume_field(std::string_view& rest, std::string_view key,
                   std::string_view& value) {
  if (rest.substr(0, key.size()) != key) return false;
  rest.remove_prefix(key.size());
  const std::size_t end = rest.find(' ');
  value = rest.substr(0, end);
  rest.remove_prefix(end == std::string_view::npos ? rest.size() : end + 1);
  return true;
}

}  // namespace

EdgeSplit read_split(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("split file is empty");
  if (!header.empty() && header.back() == '\r') header.pop_back();

  std::string_view rest(header);
  const std::string_view prefix = "# split ";
  if (rest.substr(0, prefix.size()) != prefix)
    throw ParseError("line 1: expected '# split' header");
  rest.remove_prefix(prefix.size());

  std::string_view seed_s, fraction_s, train_s, test_s;
  if (!consume_field(rest, "seed=", seed_s) ||
      !consume_field(rest, "fraction=", fraction_s) ||
      !consume_field(rest, "train=", train_s) ||
      !consume_field(rest, "test=", test_s))
    throw ParseError("line 1: malformed split header '" + header + "'");

  EdgeSplit split;
  std::size_t train_count = 0, test_count = 0;
  auto parse_or_throw = [&](std::string_view text, auto& value) {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                     value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ParseError("line 1: malformed split header '" + header + "'");
  };
  parse_or_throw(seed_s, split.seed);
  parse_or_throw(fraction_s, split.train_fraction);
  parse_or_throw(train_s, train_count);
  parse_or_throw(test_s, test_count);

  std::string line;
  std::size_t line_no = 1;
  auto read_pair = [&](NodePair& p) {
    if (!std::getline(in, line))
      throw ParseError("split file truncated after line " +
                       std::to_string(line_no));
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::uint32_t u = 0, v = 0;
    const char* first = line.data();
    const char* last = first + line.size();
    auto [p1, e1] = std::from_chars(first, last, u);
    if (e1 != std::errc() || p1 == last || *p1 != ' ')
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'u v' pair");
    auto [p2, e2] = std::from_chars(p1 + 1, last, v);
    if (e2 != std::errc() || p2 != last)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'u v' pair");
    p = {u, v};
  };

  split.train_pos.resize(train_count);
  for (auto& p : split.train_pos) read_pair(p);
  split.test_pos.resize(test_count);
  for (auto& p : split.test_pos) read_pair(p);
  return split;
}

}  // namespace sagelink
