#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sagelink/graph.hpp"
#include "sagelink/matrix.hpp"

namespace sagelink {

/// One aggregation layer. Both weights map d_in -> d_out and are stored
/// [d_out x d_in]: w_self multiplies the node's own representation, w_neigh
/// the self-inclusive neighbourhood mean.
struct SageLayer {
  Matrix w_self;
  Matrix w_neigh;

  bool operator==(const SageLayer&) const = default;
};

enum class ScorerKind : std::uint32_t { dot_product = 0, hadamard_mlp = 1 };

/// Symmetric pair scorer on final embeddings. dot_product has no parameters;
/// hadamard_mlp applies a learned linear map to the elementwise product.
struct Scorer {
  ScorerKind kind = ScorerKind::dot_product;
  Matrix weight;  // [1 x d] for hadamard_mlp, empty otherwise
  double bias = 0.0;

  bool operator==(const Scorer&) const = default;
};

struct ModelParams {
  std::vector<SageLayer> layers;
  Scorer scorer;

  bool operator==(const ModelParams&) const = default;
};

struct LossConfig {
  double epsilon = 1e-15;
  /// When set, the non-edge term is added instead of subtracted. Kept for
  /// loss-variant experiments; the default is the standard binary
  /// cross-entropy.
  bool flip_negative_term = false;

  bool operator==(const LossConfig&) const = default;
};

/// out = h * w_self^T + mean_agg(h) * w_neigh^T over the graph's adjacency.
/// h must be [num_nodes x d_in].
Matrix sage_layer_forward(const SageLayer& layer, const Matrix& h,
                          const Graph& g);

/// Full encoder: layers applied in order with ReLU between them and none
/// after the last. Uses g.features() as the input representation.
Matrix embed(const ModelParams& params, const Graph& g);

/// Per-layer intermediates kept for the backward pass.
struct EmbedCache {
  std::vector<Matrix> inputs;      // input to each layer
  std::vector<Matrix> aggregates;  // neighbourhood mean of that input
  std::vector<Matrix> outputs;     // raw layer output, pre-activation
};

Matrix embed(const ModelParams& params, const Graph& g, EmbedCache& cache);

/// sigmoid(scorer logit) per pair; symmetric in pair order. Throws
/// std::out_of_range when an endpoint exceeds the embedding rows.
std::vector<double> score_pairs(const Matrix& embeddings,
                                std::span<const NodePair> pairs,
                                const Scorer& scorer);

/// Mean binary cross-entropy over edge scores (positive) and non-edge scores
/// (negative), with epsilon inside the logs. Either list empty throws
/// std::invalid_argument.
double bce_loss(std::span<const double> positive_scores,
                std::span<const double> negative_scores,
                const LossConfig& cfg = {});

struct BackwardResult {
  double loss = 0.0;
  ModelParams grads;  // same shapes as the parameters
};

/// Loss and analytic gradients for one full batch. Equivalent to embed +
/// score_pairs + bce_loss followed by reverse accumulation.
BackwardResult backward(const ModelParams& params, const Graph& g,
                        std::span<const NodePair> positive,
                        std::span<const NodePair> negative,
                        const LossConfig& cfg = {});

/// Backward from an existing forward pass; embeddings/cache must come from
/// embed(params, g, cache).
BackwardResult backward_from_cache(const ModelParams& params, const Graph& g,
                                   const Matrix& embeddings,
                                   const EmbedCache& cache,
                                   std::span<const NodePair> positive,
                                   std::span<const NodePair> negative,
                                   const LossConfig& cfg = {});

/// Flat parameter order: per layer w_self then w_neigh (row-major), then
/// scorer weight and bias when present.
std::size_t param_count(const ModelParams& params);
void flatten_params(const ModelParams& params, std::span<double> out);
void unflatten_params(std::span<const double> flat, ModelParams& params);

/// Binary checkpoint, little-endian, stable across platforms. Load validates
/// magic, version and shape consistency and rejects trailing bytes.
void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sagelink
