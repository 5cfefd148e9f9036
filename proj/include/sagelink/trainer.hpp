#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "sagelink/graph.hpp"
#include "sagelink/model.hpp"
#include "sagelink/split.hpp"

namespace sagelink {

enum class FeatureMode { constant_one, normalized_degree };

struct TrainConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.01;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::uint64_t seed = 1;
  ScorerKind scorer = ScorerKind::dot_product;
  /// constant_one makes every node indistinguishable to the mean aggregator,
  /// so the default carries degree information instead.
  FeatureMode feature_mode = FeatureMode::normalized_degree;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  LossConfig loss{};

  bool operator==(const TrainConfig&) const = default;
};

/// One-column node features: all ones, or degree scaled by the maximum
/// degree so the largest entry is exactly 1.
Matrix init_features(const Graph& g, FeatureMode mode);

/// Glorot-uniform weights, deterministic in cfg.seed. in_dim is the feature
/// width feeding the first layer.
ModelParams init_params(const TrainConfig& cfg, std::size_t in_dim = 1);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  /// Running beta^step products; cheaper and fully deterministic compared to
  /// recomputing pow each step.
  double beta1_power = 1.0;
  double beta2_power = 1.0;
};

AdamState make_adam_state(const ModelParams& params);

/// One bias-corrected update; grads must mirror the parameter shapes.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg);

struct EvalResult {
  double accuracy = 0.0;
  double auc = 0.0;
};

/// Accuracy at threshold 0.5 (ties count as negative predictions) and
/// rank-based AUC over the given positive and negative pairs. Message
/// passing runs on g, which should be the train-edge graph.
EvalResult evaluate(const ModelParams& params, const Graph& g,
                    std::span<const NodePair> test_pos,
                    std::span<const NodePair> test_neg);

/// Same metrics from precomputed final-layer embeddings; lets the training
/// loop reuse a forward pass instead of embedding twice per epoch.
EvalResult evaluate(const Matrix& embeddings, const Scorer& scorer,
                    std::span<const NodePair> test_pos,
                    std::span<const NodePair> test_neg);

/// Mann-Whitney AUC from midranks; ties contribute half. Equals the
/// pairwise-comparison count exactly.
double rank_auc(std::span<const double> positive_scores,
                std::span<const double> negative_scores);

struct MetricsRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double test_accuracy = 0.0;
  double test_auc = 0.0;
  double inference_ms = 0.0;
  double training_ms = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<MetricsRecord> records;
  /// Independently timed wall clock of each whole epoch body; not
  /// serialized, kept so tests can validate the per-phase timers against it.
  std::vector<double> epoch_wall_ms;
};

/// Message-passing graph for training and evaluation: only train edges,
/// features derived from that graph.
Graph build_train_graph(const Graph& g, const EdgeSplit& split,
                        FeatureMode mode);

/// Frozen balanced negatives for the test set; excludes every edge of g.
NegativeSample sample_test_negatives(const Graph& g, const EdgeSplit& split,
                                     const TrainConfig& cfg);

/// Fresh negatives for one epoch, disjoint from the test negatives.
NegativeSample sample_epoch_negatives(const Graph& g, const EdgeSplit& split,
                                      const TrainConfig& cfg,
                                      std::size_t epoch,
                                      std::span<const NodePair> test_neg);

/// Full training loop: per epoch, resample negatives, timed forward
/// (inference), timed backward+update (training), then evaluate on the
/// frozen test set. An epoch's evaluation needs embeddings of the updated
/// parameters, which are exactly what the next forward pass computes, so
/// records are finished one epoch late and only one embedding per epoch is
/// paid for. Deterministic given (g, split, cfg).
TrainResult train(const Graph& g, const EdgeSplit& split,
                  const TrainConfig& cfg);

inline constexpr std::string_view kMetricsCsvHeader =
    "epoch,loss,test_accuracy,test_auc,inference_ms,training_ms";

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> recs);
void write_metrics_jsonl(std::ostream& out,
                         std::span<const MetricsRecord> recs);

}  // namespace sagelink
