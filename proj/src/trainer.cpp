#include "sagelink/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "sagelink/format.hpp"
#include "sagelink/kernels.hpp"
#include "sagelink/rng.hpp"

namespace sagelink {

namespace {

// Independent deterministic seed streams derived from cfg.seed.
constexpr std::uint64_t kParamStream = 1;
constexpr std::uint64_t kTestNegStream = 2;
constexpr std::uint64_t kEpochNegStream = 3;

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1)
    throw std::invalid_argument("epochs must be at least 1, got " +
                                std::to_string(cfg.epochs));
  if (!(cfg.learning_rate > 0.0))
    throw std::invalid_argument("learning_rate must be positive, got " +
                                format_double(cfg.learning_rate));
  if (cfg.hidden_dim < 1)
    throw std::invalid_argument("hidden_dim must be at least 1");
  if (cfg.num_layers < 1)
    throw std::invalid_argument("num_layers must be at least 1");
}

void check_same_shapes(const ModelParams& params, const ModelParams& grads) {
  bool ok = params.layers.size() == grads.layers.size() &&
            params.scorer.kind == grads.scorer.kind &&
            params.scorer.weight.rows() == grads.scorer.weight.rows() &&
            params.scorer.weight.cols() == grads.scorer.weight.cols();
  for (std::size_t i = 0; ok && i < params.layers.size(); ++i) {
    ok = params.layers[i].w_self.rows() == grads.layers[i].w_self.rows() &&
         params.layers[i].w_self.cols() == grads.layers[i].w_self.cols() &&
         params.layers[i].w_neigh.rows() == grads.layers[i].w_neigh.rows() &&
         params.layers[i].w_neigh.cols() == grads.layers[i].w_neigh.cols();
  }
  if (!ok)
    throw std::invalid_argument("gradient shapes do not match parameters");
}

}  // namespace

Matrix init_features(const Graph& g, FeatureMode mode) {
  const std::size_t n = g.num_nodes();
  Matrix features(n, 1);
  if (mode == FeatureMode::constant_one) {
    for (std::size_t v = 0; v < n; ++v) features(v, 0) = 1.0;
    return features;
  }
  std::size_t max_degree = 0;
  for (std::size_t v = 0; v < n; ++v)
    max_degree = std::max(max_degree, g.degree(static_cast<NodeId>(v)));
  const double denom = static_cast<double>(std::max<std::size_t>(1, max_degree));
  for (std::size_t v = 0; v < n; ++v)
    features(v, 0) =
        static_cast<double>(g.degree(static_cast<NodeId>(v))) / denom;
  return features;
}

ModelParams init_params(const TrainConfig& cfg, std::size_t in_dim) {
  validate_config(cfg);
  if (in_dim < 1) throw std::invalid_argument("in_dim must be at least 1");

  Rng rng(derive_seed(cfg.seed, kParamStream));
  auto glorot_fill = [&rng](Matrix& m, std::size_t fan_in,
                            std::size_t fan_out) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < m.size(); ++i)
      m.data()[i] = rng.uniform(-bound, bound);
  };

  ModelParams params;
  params.layers.resize(cfg.num_layers);
  std::size_t d_prev = in_dim;
  for (auto& layer : params.layers) {
    layer.w_self = Matrix(cfg.hidden_dim, d_prev);
    layer.w_neigh = Matrix(cfg.hidden_dim, d_prev);
    glorot_fill(layer.w_self, d_prev, cfg.hidden_dim);
    glorot_fill(layer.w_neigh, d_prev, cfg.hidden_dim);
    d_prev = cfg.hidden_dim;
  }

  params.scorer.kind = cfg.scorer;
  if (cfg.scorer == ScorerKind::hadamard_mlp) {
    params.scorer.weight = Matrix(1, cfg.hidden_dim);
    glorot_fill(params.scorer.weight, cfg.hidden_dim, 1);
    params.scorer.bias = 0.0;
  }
  return params;
}

AdamState make_adam_state(const ModelParams& params) {
  AdamState state;
  state.first_moment.assign(param_count(params), 0.0);
  state.second_moment.assign(param_count(params), 0.0);
  return state;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg) {
  check_same_shapes(params, grads);
  const std::size_t n = param_count(params);
  if (state.first_moment.size() != n || state.second_moment.size() != n)
    throw std::invalid_argument("optimizer state does not match parameters");

  std::vector<double> flat_p(n), flat_g(n);
  flatten_params(params, flat_p);
  flatten_params(grads, flat_g);

  state.step += 1;
  state.beta1_power *= cfg.beta1;
  state.beta2_power *= cfg.beta2;
  const double bias1 = 1.0 - state.beta1_power;
  const double bias2 = 1.0 - state.beta2_power;

  kernels::active().adam_update(flat_p.data(), flat_g.data(),
                                state.first_moment.data(),
                                state.second_moment.data(), n,
                                cfg.learning_rate, cfg.beta1, cfg.beta2,
                                cfg.adam_epsilon, bias1, bias2);
  unflatten_params(flat_p, params);
}

double rank_auc(std::span<const double> positive_scores,
                std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty())
    throw std::invalid_argument("rank_auc needs both score lists non-empty");

  struct Entry {
    double score;
    bool positive;
  };
  std::vector<Entry> entries;
  entries.reserve(positive_scores.size() + negative_scores.size());
  for (const double s : positive_scores) entries.push_back({s, true});
  for (const double s : negative_scores) entries.push_back({s, false});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Midranks keep every value a multiple of 0.5, so the sums below are exact
  // and equal the pairwise greater/tied-half count.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i;
    while (j < entries.size() && entries[j].score == entries[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (entries[t].positive) positive_rank_sum += midrank;
    i = j;
  }

  const double p = static_cast<double>(positive_scores.size());
  const double n = static_cast<double>(negative_scores.size());
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * n);
}

EvalResult evaluate(const ModelParams& params, const Graph& g,
                    std::span<const NodePair> test_pos,
                    std::span<const NodePair> test_neg) {
  return evaluate(embed(params, g), params.scorer, test_pos, test_neg);
}

EvalResult evaluate(const Matrix& embeddings, const Scorer& scorer,
                    std::span<const NodePair> test_pos,
                    std::span<const NodePair> test_neg) {
  if (test_pos.empty()) throw std::invalid_argument("test_pos is empty");
  if (test_neg.empty()) throw std::invalid_argument("test_neg is empty");

  const std::vector<double> pos = score_pairs(embeddings, test_pos, scorer);
  const std::vector<double> neg = score_pairs(embeddings, test_neg, scorer);

  std::size_t correct = 0;
  for (const double s : pos)
    if (s > 0.5) ++correct;
  for (const double s : neg)
    if (s <= 0.5) ++correct;

  EvalResult result;
  result.accuracy =
      static_cast<double>(correct) / static_cast<double>(pos.size() + neg.size());
  result.auc = rank_auc(pos, neg);
  return result;
}

Graph build_train_graph(const Graph& g, const EdgeSplit& split,
                        FeatureMode mode) {
  EdgeList train_edges;
  train_edges.num_nodes = g.num_nodes();
  train_edges.pairs = split.train_pos;
  std::sort(train_edges.pairs.begin(), train_edges.pairs.end());
  Graph g_train = build_graph(train_edges);
  return g_train.with_features(init_features(g_train, mode));
}

NegativeSample sample_test_negatives(const Graph& g, const EdgeSplit& split,
                                     const TrainConfig& cfg) {
  return sample_negatives(g, split.test_pos.size(),
                          derive_seed(cfg.seed, kTestNegStream));
}

NegativeSample sample_epoch_negatives(const Graph& g, const EdgeSplit& split,
                                      const TrainConfig& cfg,
                                      std::size_t epoch,
                                      std::span<const NodePair> test_neg) {
  const std::uint64_t seed =
      derive_seed(derive_seed(cfg.seed, kEpochNegStream), epoch);
  return sample_negatives(g, split.train_pos.size(), seed, test_neg);
}

TrainResult train(const Graph& g, const EdgeSplit& split,
                  const TrainConfig& cfg) {
  validate_config(cfg);
  if (split.train_pos.size() + split.test_pos.size() != g.edge_count())
    throw std::invalid_argument(
        "split does not partition the graph's edge list");
  if (split.train_pos.empty() || split.test_pos.empty())
    throw std::invalid_argument("split has an empty section");

  const Graph g_train = build_train_graph(g, split, cfg.feature_mode);
  ModelParams params = init_params(cfg, g_train.features().cols());
  AdamState state = make_adam_state(params);
  const NegativeSample test_neg = sample_test_negatives(g, split, cfg);

  TrainResult result;
  result.records.reserve(cfg.epochs);
  result.epoch_wall_ms.reserve(cfg.epochs);

  // An epoch's evaluation runs on the parameters after its update, which are
  // exactly the parameters the next epoch's forward pass embeds. Finishing
  // each record one epoch late therefore costs one extra embedding for the
  // whole run instead of one per epoch.
  MetricsRecord pending{};
  bool have_pending = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_begin = Clock::now();
    const NegativeSample train_neg =
        sample_epoch_negatives(g, split, cfg, epoch, test_neg.pairs);

    EmbedCache cache;
    const auto forward_begin = Clock::now();
    const Matrix z = embed(params, g_train, cache);
    const auto forward_end = Clock::now();

    if (have_pending) {
      const EvalResult eval =
          evaluate(z, params.scorer, split.test_pos, test_neg.pairs);
      pending.test_accuracy = eval.accuracy;
      pending.test_auc = eval.auc;
      result.records.push_back(pending);
    }

    const auto train_begin = Clock::now();
    const BackwardResult back = backward_from_cache(
        params, g_train, z, cache, split.train_pos, train_neg.pairs, cfg.loss);
    adam_step(params, back.grads, state, cfg);
    const auto train_end = Clock::now();

    pending = {epoch, back.loss, 0.0, 0.0,
               ms_between(forward_begin, forward_end),
               ms_between(train_begin, train_end)};
    have_pending = true;
    result.epoch_wall_ms.push_back(ms_between(epoch_begin, Clock::now()));
  }

  const EvalResult final_eval =
      evaluate(params, g_train, split.test_pos, test_neg.pairs);
  pending.test_accuracy = final_eval.accuracy;
  pending.test_auc = final_eval.auc;
  result.records.push_back(pending);

  result.params = std::move(params);
  return result;
}

void write_metrics_csv(std::ostream& out,
                       std::span<const MetricsRecord> recs) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : recs) {
    out << r.epoch << ',' << format_double(r.loss) << ','
        << format_double(r.test_accuracy) << ',' << format_double(r.test_auc)
        << ',' << format_double(r.inference_ms) << ','
        << format_double(r.training_ms) << '\n';
  }
}

void write_metrics_jsonl(std::ostream& out,
                         std::span<const MetricsRecord> recs) {
  for (const auto& r : recs) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["test_accuracy"] = r.test_accuracy;
    j["test_auc"] = r.test_auc;
    j["inference_ms"] = r.inference_ms;
    j["training_ms"] = r.training_ms;
    out << j.dump() << '\n';
  }
}

}  // namespace sagelink
