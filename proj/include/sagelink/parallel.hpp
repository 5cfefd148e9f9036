#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "sagelink/trainer.hpp"

namespace sagelink {

/// Contiguous shards whose sizes differ by at most one; the first
/// (size % workers) shards get the extra element. workers must be > 0.
std::vector<std::vector<NodePair>> partition_pairs(
    std::span<const NodePair> pairs, std::size_t workers);

/// One worker's slice of an epoch batch.
struct PairShard {
  std::vector<NodePair> positive;
  std::vector<NodePair> negative;
};

struct EpochOutcome {
  ModelParams grads;  // shard-size-weighted average
  /// Final-layer embeddings under the pre-update parameter snapshot; every
  /// worker computes the same matrix, the first worker's copy is returned.
  Matrix embeddings;
  double loss = 0.0;
  double inference_ms = 0.0;
  double training_ms = 0.0;
};

/// Data-parallel epoch: every worker recomputes the forward pass from the
/// same parameter snapshot, computes gradients on its shard, and the main
/// thread combines them as the shard-size-weighted average (equal to the
/// full-batch gradient up to floating-point reassociation) before applying
/// one optimizer step. Shared inputs are immutable and each worker writes
/// only its own slot, so the epoch is race-free by construction. Throws
/// std::invalid_argument when a shard is empty.
EpochOutcome parallel_train_epoch(const Graph& g_train, ModelParams& params,
                                  std::span<const PairShard> shards,
                                  AdamState& state, const TrainConfig& cfg);

/// train() with the per-epoch step distributed over the given worker count.
/// With workers == 1 the result is bitwise identical to train() apart from
/// measured timings.
TrainResult parallel_train(const Graph& g, const EdgeSplit& split,
                           const TrainConfig& cfg, std::size_t workers);

struct ScalingRow {
  std::size_t workers = 0;
  double mean_inference_ms = 0.0;
  double mean_training_ms = 0.0;
  double mean_epoch_ms = 0.0;
  double final_loss = 0.0;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
};

ScalingRow summarize_run(std::size_t workers, const TrainResult& result);

/// One full parallel_train per worker count, rows in input order.
ScalingReport run_scaling_benchmark(const Graph& g, const EdgeSplit& split,
                                    const TrainConfig& cfg,
                                    std::span<const std::size_t> worker_counts);

inline constexpr std::string_view kScalingCsvHeader =
    "workers,mean_inference_ms,mean_training_ms,mean_epoch_ms,final_loss";

void write_scaling_csv(std::ostream& out, const ScalingReport& report);
void write_scaling_json(std::ostream& out, const ScalingReport& report);

}  // namespace sagelink
