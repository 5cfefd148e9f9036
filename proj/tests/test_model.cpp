#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sagelink/model.hpp"
#include "sagelink/rng.hpp"
#include "sagelink/trainer.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using sagelink::build_graph;
using sagelink::Graph;
using sagelink::load_checkpoint;
using sagelink::Matrix;
using sagelink::ModelParams;
using sagelink::NodeId;
using sagelink::NodePair;
using sagelink::SageLayer;
using sagelink::Scorer;
using sagelink::ScorerKind;

namespace {

Graph pa_graph_with_features(std::size_t n, std::size_t m,
                             std::uint64_t seed, std::size_t d) {
  auto g = build_graph(testsupport::make_edge_list(
      n, testsupport::preferential_attachment_pairs(n, m, seed)));
  return g.with_features(
      testsupport::random_features(n, d, seed + 1, -1.0, 1.0));
}

ModelParams random_params(std::size_t in_dim, std::size_t hidden,
                          std::size_t layers, ScorerKind kind,
                          std::uint64_t seed) {
  sagelink::TrainConfig cfg;
  cfg.hidden_dim = hidden;
  cfg.num_layers = layers;
  cfg.scorer = kind;
  cfg.seed = seed;
  return init_params(cfg, in_dim);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

double grad_norm(const ModelParams& grads) {
  std::vector<double> flat(param_count(grads));
  flatten_params(grads, flat);
  double s = 0.0;
  for (double v : flat) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("layer with identity self weight and zero mix passes input through") {
  const Graph g = build_graph({3, {{0, 1}, {1, 2}}})
                      .with_features(Matrix(3, 1, {0.5, 2.0, 3.25}));
  SageLayer layer{Matrix(1, 1, {1.0}), Matrix(1, 1, {0.0})};
  const Matrix out = sage_layer_forward(layer, g.features(), g);
  CHECK(out == g.features());
}

TEST_CASE("triangle with pure mixing averages the whole neighbourhood") {
  // Every node's self-inclusive neighbourhood is the full triangle, so each
  // row becomes (1+2+3)/3 exactly.
  const Graph g = build_graph({3, {{0, 1}, {0, 2}, {1, 2}}})
                      .with_features(Matrix(3, 1, {1.0, 2.0, 3.0}));
  SageLayer layer{Matrix(1, 1, {0.0}), Matrix(1, 1, {1.0})};
  const Matrix out = sage_layer_forward(layer, g.features(), g);
  for (std::size_t v = 0; v < 3; ++v) CHECK(out(v, 0) == 2.0);
}

TEST_CASE("layer forward matches the dense adjacency reference") {
  std::uint64_t seed = 500;
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 10 + trial * 5;
    const Graph g = pa_graph_with_features(n, 2 + trial % 3, seed, 3);
    SageLayer layer{testsupport::random_features(4, 3, seed + 2, -1.0, 1.0),
                    testsupport::random_features(4, 3, seed + 3, -1.0, 1.0)};
    const Matrix got = sage_layer_forward(layer, g.features(), g);

    Matrix agg = testsupport::dense_self_mean(g, g.features());
    Matrix want =
        testsupport::naive_matmul(g.features(), transpose(layer.w_self));
    const Matrix mixed =
        testsupport::naive_matmul(agg, transpose(layer.w_neigh));
    for (std::size_t i = 0; i < want.size(); ++i)
      want.data()[i] += mixed.data()[i];

    CHECK(max_abs_diff(got, want) <= 1e-12);
    seed += 10;
  }
}

TEST_CASE("layer forward validates shapes") {
  const Graph g = build_graph({3, {{0, 1}, {1, 2}}})
                      .with_features(Matrix(3, 2));
  SageLayer mismatched{Matrix(2, 2), Matrix(2, 3)};
  CHECK_THROWS_AS(sage_layer_forward(mismatched, g.features(), g),
                  std::invalid_argument);
  SageLayer wrong_input{Matrix(2, 3, std::vector<double>(6, 1.0)),
                        Matrix(2, 3, std::vector<double>(6, 1.0))};
  CHECK_THROWS_AS(sage_layer_forward(wrong_input, g.features(), g),
                  std::invalid_argument);
}

TEST_CASE("single layer embed equals the layer forward") {
  const Graph g = pa_graph_with_features(15, 2, 31, 2);
  ModelParams params;
  params.layers.push_back(
      {testsupport::random_features(3, 2, 33, -1.0, 1.0),
       testsupport::random_features(3, 2, 34, -1.0, 1.0)});
  const Matrix via_embed = embed(params, g);
  const Matrix direct = sage_layer_forward(params.layers[0], g.features(), g);
  CHECK(via_embed == direct);
}

TEST_CASE("identity second layer reproduces relu of the first") {
  const Graph g = pa_graph_with_features(12, 2, 41, 1);
  ModelParams two;
  two.layers.push_back({Matrix(1, 1, {2.0}), Matrix(1, 1, {-1.5})});
  two.layers.push_back({Matrix(1, 1, {1.0}), Matrix(1, 1, {0.0})});

  ModelParams one;
  one.layers.push_back(two.layers[0]);

  const Matrix full = embed(two, g);
  const Matrix first = embed(one, g);
  CHECK(full == relu(first));
}

TEST_CASE("two layer embed matches manual composition and the dense oracle") {
  const Graph g = pa_graph_with_features(20, 2, 55, 3);
  const ModelParams params =
      random_params(3, 5, 2, ScorerKind::dot_product, 7);

  // Step-by-step with the same primitives: must agree to the bit.
  const Matrix h1 = sage_layer_forward(params.layers[0], g.features(), g);
  const Matrix h2 = sage_layer_forward(params.layers[1], relu(h1), g);
  const Matrix z = embed(params, g);
  CHECK(z == h2);

  // Independent dense-matrix formulation: agree to rounding.
  CHECK(max_abs_diff(z, testsupport::dense_embed(params, g)) <= 1e-12);
}

TEST_CASE("embedding cache holds the per-layer intermediates") {
  const Graph g = pa_graph_with_features(10, 2, 77, 2);
  const ModelParams params =
      random_params(2, 4, 2, ScorerKind::dot_product, 9);
  sagelink::EmbedCache cache;
  const Matrix z = embed(params, g, cache);
  REQUIRE(cache.inputs.size() == 2);
  REQUIRE(cache.aggregates.size() == 2);
  REQUIRE(cache.outputs.size() == 2);
  CHECK(cache.inputs[0] == g.features());
  CHECK(cache.inputs[1] == relu(cache.outputs[0]));
  CHECK(cache.outputs[1] == z);  // no activation after the last layer
}

TEST_CASE("isolated nodes produce finite embeddings") {
  // Self-inclusive mean divides by deg+1, never by zero.
  auto g = build_graph({5, {{0, 1}, {1, 2}}});
  g = g.with_features(init_features(g, sagelink::FeatureMode::constant_one));
  const ModelParams params =
      random_params(1, 4, 2, ScorerKind::dot_product, 3);
  const Matrix z = embed(params, g);
  CHECK(sagelink::is_finite(z));
}

TEST_CASE("permuting labels permutes embeddings") {
  const std::size_t n = 18;
  const auto base_pairs = testsupport::preferential_attachment_pairs(n, 2, 91);
  const Matrix feats = testsupport::random_features(n, 2, 92, -1.0, 1.0);
  const ModelParams params =
      random_params(2, 4, 2, ScorerKind::dot_product, 11);

  const Graph g = build_graph(testsupport::make_edge_list(n, base_pairs))
                      .with_features(feats);
  const Matrix z = embed(params, g);

  // General permutation: neighbour summation order changes, so equality is
  // up to reassociation rounding.
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  sagelink::Rng rng(123);
  rng.shuffle(perm);

  std::vector<NodePair> permuted;
  for (const auto& [u, v] : base_pairs)
    permuted.push_back({std::min(perm[u], perm[v]),
                        std::max(perm[u], perm[v])});
  Matrix pfeats(n, 2);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t c = 0; c < 2; ++c) pfeats(perm[v], c) = feats(v, c);

  const Graph pg = build_graph(testsupport::make_edge_list(n, permuted))
                       .with_features(pfeats);
  const Matrix pz = embed(params, pg);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t c = 0; c < pz.cols(); ++c)
      CHECK(pz(perm[v], c) == doctest::Approx(z(v, c)).epsilon(1e-12));
}

TEST_CASE("order-preserving relabeling keeps embeddings bitwise") {
  // Shifting a whole component block keeps every neighbourhood's relative
  // order, so the summation order per row is unchanged.
  const std::vector<NodePair> two_comps = {{0, 1}, {0, 2}, {1, 2}, {3, 4}};
  const Matrix feats = testsupport::random_features(5, 2, 17, -1.0, 1.0);
  const ModelParams params =
      random_params(2, 3, 2, ScorerKind::dot_product, 5);

  const Graph g = build_graph({5, two_comps}).with_features(feats);
  const Matrix z = embed(params, g);

  // Swap the blocks: triangle {0,1,2} -> {2,3,4}, edge {3,4} -> {0,1}.
  const auto shift = [](NodeId v) -> NodeId {
    return v <= 2 ? v + 2 : v - 3;
  };
  std::vector<NodePair> swapped;
  for (const auto& [u, v] : two_comps)
    swapped.push_back(
        {std::min(shift(u), shift(v)), std::max(shift(u), shift(v))});
  Matrix sfeats(5, 2);
  for (NodeId v = 0; v < 5; ++v)
    for (std::size_t c = 0; c < 2; ++c) sfeats(shift(v), c) = feats(v, c);

  const Graph sg = build_graph({5, swapped}).with_features(sfeats);
  const Matrix sz = embed(params, sg);
  for (NodeId v = 0; v < 5; ++v)
    for (std::size_t c = 0; c < 2; ++c)
      CHECK(sz(shift(v), c) == z(v, c));
}

TEST_CASE("dot scorer hits closed-form anchor points") {
  Matrix z(3, 2, {1.0, 0.0,    // unit x
                  0.0, 1.0,    // unit y, orthogonal to row 0
                  1.0, 0.0});  // copy of row 0
  Scorer dot{ScorerKind::dot_product, Matrix(), 0.0};

  const auto s = score_pairs(z, std::vector<NodePair>{{0, 1}}, dot);
  CHECK(s[0] == 0.5);  // orthogonal embeddings carry no evidence

  const double r = std::sqrt(std::log(3.0));
  Matrix zl(2, 1, {r, r});
  const auto s2 = score_pairs(zl, std::vector<NodePair>{{0, 1}}, dot);
  CHECK(s2[0] == doctest::Approx(0.75).epsilon(1e-12));  // sigmoid(ln 3)
}

TEST_CASE("scorers match a scalar reference loop") {
  const Matrix z = testsupport::random_features(9, 4, 71, -2.0, 2.0);
  std::vector<NodePair> pairs = {{0, 1}, {2, 7}, {3, 3}, {8, 0}, {5, 6}};

  Scorer dot{ScorerKind::dot_product, Matrix(), 0.0};
  const auto sd = score_pairs(z, pairs, dot);
  Scorer had{ScorerKind::hadamard_mlp,
             testsupport::random_features(1, 4, 72, -1.0, 1.0), 0.3};
  const auto sh = score_pairs(z, pairs, had);

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [u, v] = pairs[i];
    double dlogit = 0.0;
    double hlogit = had.bias;
    for (std::size_t c = 0; c < 4; ++c) {
      dlogit += z(u, c) * z(v, c);
      hlogit += had.weight(0, c) * (z(u, c) * z(v, c));
    }
    CHECK(sd[i] == sagelink::sigmoid(dlogit));
    CHECK(sh[i] == sagelink::sigmoid(hlogit));
    CHECK(sd[i] > 0.0);
    CHECK(sd[i] < 1.0);
  }
}

TEST_CASE("scorers are symmetric in pair order") {
  const Matrix z = testsupport::random_features(12, 5, 81, -2.0, 2.0);
  Scorer dot{ScorerKind::dot_product, Matrix(), 0.0};
  Scorer had{ScorerKind::hadamard_mlp,
             testsupport::random_features(1, 5, 82, -1.0, 1.0), -0.2};

  for (NodeId u = 0; u < 12; ++u)
    for (NodeId v = 0; v < u; ++v) {
      for (const auto* sc : {&dot, &had}) {
        const auto fwd = score_pairs(z, std::vector<NodePair>{{v, u}}, *sc);
        const auto rev = score_pairs(z, std::vector<NodePair>{{u, v}}, *sc);
        CHECK(fwd[0] == rev[0]);
      }
    }
}

TEST_CASE("scoring checks pair endpoints and scorer width") {
  const Matrix z(4, 3);
  Scorer dot{ScorerKind::dot_product, Matrix(), 0.0};
  CHECK_THROWS_AS(score_pairs(z, std::vector<NodePair>{{0, 4}}, dot),
                  std::out_of_range);
  Scorer bad{ScorerKind::hadamard_mlp, Matrix(1, 2), 0.0};
  CHECK_THROWS_AS(score_pairs(z, std::vector<NodePair>{{0, 1}}, bad),
                  std::invalid_argument);
}

TEST_CASE("loss matches hand-computed anchors") {
  using sagelink::bce_loss;
  const sagelink::LossConfig cfg{};

  // Perfect predictions: epsilon inside the logs leaves a residual of about
  // -2 epsilon, not exactly zero, and rounding 1+epsilon to the nearest
  // double inflates each term to at most 2 epsilon.
  const double perfect = bce_loss(std::vector<double>{1.0},
                                  std::vector<double>{0.0}, cfg);
  CHECK(std::abs(perfect) <= 4.0 * cfg.epsilon);

  // Maximal uncertainty on both sides: -2 log(1/2) = 2 ln 2.
  const double coin = bce_loss(std::vector<double>{0.5},
                               std::vector<double>{0.5}, cfg);
  CHECK(coin == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("loss equals the direct summation formula") {
  sagelink::Rng rng(1234);
  std::vector<double> pos(7), neg(5);
  for (auto& p : pos) p = rng.uniform();
  for (auto& q : neg) q = rng.uniform();

  const sagelink::LossConfig cfg{};
  double pos_term = 0.0, neg_term = 0.0;
  for (double p : pos) pos_term += std::log(p + cfg.epsilon);
  for (double q : neg) neg_term += std::log(1.0 - q + cfg.epsilon);
  pos_term /= static_cast<double>(pos.size());
  neg_term /= static_cast<double>(neg.size());

  CHECK(sagelink::bce_loss(pos, neg, cfg) == -pos_term - neg_term);

  sagelink::LossConfig flipped{};
  flipped.flip_negative_term = true;
  CHECK(sagelink::bce_loss(pos, neg, flipped) == -pos_term + neg_term);
}

TEST_CASE("loss is bounded and rejects empty inputs") {
  const sagelink::LossConfig cfg{};
  sagelink::Rng rng(4321);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pos(3), neg(4);
    for (auto& p : pos) p = rng.uniform();
    for (auto& q : neg) q = rng.uniform();
    const double loss = sagelink::bce_loss(pos, neg, cfg);
    CHECK(loss >= -4.0 * cfg.epsilon);
    CHECK(loss <= -2.0 * std::log(cfg.epsilon));
  }
  CHECK_THROWS_AS(sagelink::bce_loss({}, std::vector<double>{0.5}, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(sagelink::bce_loss(std::vector<double>{0.5}, {}, cfg),
                  std::invalid_argument);
}

TEST_CASE("saturated predictions give a vanishing gradient") {
  // Large feature magnitudes drive the pair logits far into the sigmoid
  // tails, where p(1-p) underflows to zero.
  const Graph g = build_graph({3, {{0, 1}}})
                      .with_features(Matrix(3, 1, {30.0, 30.0, -30.0}));
  ModelParams params;
  params.layers.push_back({Matrix(1, 1, {1.0}), Matrix(1, 1, {0.0})});

  const std::vector<NodePair> pos = {{0, 1}};
  const std::vector<NodePair> neg = {{0, 2}};
  const auto result = backward(params, g, pos, neg);
  CHECK(grad_norm(result.grads) == 0.0);
  CHECK(result.loss >= -4.0 * sagelink::LossConfig{}.epsilon);
}

TEST_CASE("duplicating every pair leaves the mean gradient unchanged") {
  const Graph g = pa_graph_with_features(14, 2, 61, 2);
  const ModelParams params =
      random_params(2, 4, 2, ScorerKind::dot_product, 13);
  const std::vector<NodePair> pos = {{0, 1}, {2, 5}};
  const std::vector<NodePair> neg = {{3, 9}, {4, 8}};
  std::vector<NodePair> pos2 = {{0, 1}, {0, 1}, {2, 5}, {2, 5}};
  std::vector<NodePair> neg2 = {{3, 9}, {3, 9}, {4, 8}, {4, 8}};

  const auto once = backward(params, g, pos, neg);
  const auto twice = backward(params, g, pos2, neg2);
  // Halved per-pair weight times two copies: exact in floating point since
  // the scale factor is a power of two.
  CHECK(once.loss == twice.loss);
  CHECK(once.grads == twice.grads);
}

TEST_CASE("backward is the composition of forward and backward_from_cache") {
  const Graph g = pa_graph_with_features(16, 2, 67, 2);
  const ModelParams params =
      random_params(2, 4, 2, ScorerKind::hadamard_mlp, 17);
  const std::vector<NodePair> pos = {{0, 2}, {1, 3}};
  const std::vector<NodePair> neg = {{5, 9}, {6, 11}};

  sagelink::EmbedCache cache;
  const Matrix z = embed(params, g, cache);
  const auto direct = backward(params, g, pos, neg);
  const auto cached = backward_from_cache(params, g, z, cache, pos, neg);
  CHECK(direct.loss == cached.loss);
  CHECK(direct.grads == cached.grads);
}

TEST_CASE("parameter flattening round-trips") {
  const ModelParams params =
      random_params(3, 5, 2, ScorerKind::hadamard_mlp, 23);
  const std::size_t n = param_count(params);
  CHECK(n == (5 * 3 + 5 * 3) + (5 * 5 + 5 * 5) + 5 + 1);

  std::vector<double> flat(n);
  flatten_params(params, flat);
  ModelParams rebuilt = params;
  for (auto& layer : rebuilt.layers) {
    layer.w_self = Matrix(layer.w_self.rows(), layer.w_self.cols());
    layer.w_neigh = Matrix(layer.w_neigh.rows(), layer.w_neigh.cols());
  }
  rebuilt.scorer.weight = Matrix(1, 5);
  rebuilt.scorer.bias = 0.0;
  unflatten_params(flat, rebuilt);
  CHECK(rebuilt == params);
}

TEST_CASE("checkpoints round-trip exactly") {
  const auto dir = testsupport::make_temp_dir("ckpt");
  for (const auto kind : {ScorerKind::dot_product, ScorerKind::hadamard_mlp}) {
    const ModelParams params = random_params(2, 6, 2, kind, 29);
    const auto path = dir / "model.sage";
    save_checkpoint(path, params);
    const ModelParams loaded = load_checkpoint(path);
    CHECK(loaded == params);  // bitwise, including the scorer
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  namespace fs = std::filesystem;
  const auto dir = testsupport::make_temp_dir("ckpt_bad");
  const ModelParams params =
      random_params(2, 4, 1, ScorerKind::dot_product, 31);
  const auto good = dir / "good.sage";
  save_checkpoint(good, params);

  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  in.close();

  auto write_bytes = [&](const fs::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  };

  const auto truncated = dir / "truncated.sage";
  write_bytes(truncated, bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_WITH_AS(load_checkpoint(truncated), "checkpoint truncated",
                       std::runtime_error);

  const auto magic = dir / "magic.sage";
  std::string wrong = bytes;
  wrong[0] = 'X';
  write_bytes(magic, wrong);
  CHECK_THROWS_AS(load_checkpoint(magic), std::runtime_error);

  const auto version = dir / "version.sage";
  std::string vbytes = bytes;
  vbytes[4] = 9;  // little-endian version field
  write_bytes(version, vbytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(version),
                       "unsupported checkpoint version 9", std::runtime_error);

  const auto trailing = dir / "trailing.sage";
  write_bytes(trailing, bytes + "zz");
  CHECK_THROWS_WITH_AS(load_checkpoint(trailing),
                       "trailing bytes in checkpoint", std::runtime_error);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.sage"), std::runtime_error);
  fs::remove_all(dir);
}
