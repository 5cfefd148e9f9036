#include "sagelink/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "sagelink/kernels.hpp"

namespace sagelink {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_layer(const SageLayer& layer) {
  if (layer.w_self.rows() != layer.w_neigh.rows() ||
      layer.w_self.cols() != layer.w_neigh.cols())
    throw std::invalid_argument("layer weight shapes differ: " +
                                shape_of(layer.w_self) + " vs " +
                                shape_of(layer.w_neigh));
  if (layer.w_self.rows() == 0 || layer.w_self.cols() == 0)
    throw std::invalid_argument("layer weights must be non-empty");
}

double score_logit(const Matrix& z, const NodePair& pair,
                   const Scorer& scorer) {
  const std::size_t d = z.cols();
  const double* zu = z.data() + static_cast<std::size_t>(pair.first) * d;
  const double* zv = z.data() + static_cast<std::size_t>(pair.second) * d;
  if (scorer.kind == ScorerKind::dot_product) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += zu[c] * zv[c];
    return acc;
  }
  const double* w = scorer.weight.data();
  double acc = scorer.bias;
  for (std::size_t c = 0; c < d; ++c) acc += w[c] * (zu[c] * zv[c]);
  return acc;
}

void check_scorer(const Scorer& scorer, std::size_t d) {
  if (scorer.kind == ScorerKind::hadamard_mlp &&
      (scorer.weight.rows() != 1 || scorer.weight.cols() != d))
    throw std::invalid_argument("scorer weight " + shape_of(scorer.weight) +
                                " does not match embedding dim " +
                                std::to_string(d));
}

}  // namespace

Matrix sage_layer_forward(const SageLayer& layer, const Matrix& h,
                          const Graph& g) {
  check_layer(layer);
  if (h.rows() != g.num_nodes())
    throw std::invalid_argument("representation rows " +
                                std::to_string(h.rows()) +
                                " do not match num_nodes " +
                                std::to_string(g.num_nodes()));
  if (h.cols() != layer.w_self.cols())
    throw std::invalid_argument("layer expects input dim " +
                                std::to_string(layer.w_self.cols()) +
                                ", got " + shape_of(h));

  const auto& k = kernels::active();
  const std::size_t n = g.num_nodes();
  const std::size_t d_in = h.cols();
  const std::size_t d_out = layer.w_self.rows();

  Matrix agg(n, d_in);
  k.mean_aggregate(g.offsets().data(), g.targets().data(), h.data(),
                   agg.data(), n, d_in);

  const Matrix self_t = transpose(layer.w_self);
  const Matrix neigh_t = transpose(layer.w_neigh);
  Matrix out(n, d_out);
  k.matmul(h.data(), self_t.data(), out.data(), n, d_in, d_out);
  k.matmul_add(agg.data(), neigh_t.data(), out.data(), n, d_in, d_out);
  return out;
}

Matrix embed(const ModelParams& params, const Graph& g, EmbedCache& cache) {
  const auto& k = kernels::active();
  const std::size_t count = params.layers.size();
  cache.inputs.clear();
  cache.aggregates.clear();
  cache.outputs.clear();
  cache.inputs.reserve(count);
  cache.aggregates.reserve(count);
  cache.outputs.reserve(count);

  Matrix h = g.features();
  for (std::size_t i = 0; i < count; ++i) {
    const SageLayer& layer = params.layers[i];
    check_layer(layer);
    if (h.cols() != layer.w_self.cols())
      throw std::invalid_argument("layer " + std::to_string(i) +
                                  " expects input dim " +
                                  std::to_string(layer.w_self.cols()) +
                                  ", got " + shape_of(h));

    const std::size_t n = g.num_nodes();
    const std::size_t d_in = h.cols();
    const std::size_t d_out = layer.w_self.rows();

    Matrix agg(n, d_in);
    k.mean_aggregate(g.offsets().data(), g.targets().data(), h.data(),
                     agg.data(), n, d_in);
    const Matrix self_t = transpose(layer.w_self);
    const Matrix neigh_t = transpose(layer.w_neigh);
    Matrix out(n, d_out);
    k.matmul(h.data(), self_t.data(), out.data(), n, d_in, d_out);
    k.matmul_add(agg.data(), neigh_t.data(), out.data(), n, d_in, d_out);

    cache.inputs.push_back(std::move(h));
    cache.aggregates.push_back(std::move(agg));
    cache.outputs.push_back(out);

    if (i + 1 < count) {
      Matrix activated(out.rows(), out.cols());
      k.relu(out.data(), activated.data(), out.size());
      h = std::move(activated);
    } else {
      h = std::move(out);
    }
  }
  return h;
}

Matrix embed(const ModelParams& params, const Graph& g) {
  EmbedCache cache;
  return embed(params, g, cache);
}

std::vector<double> score_pairs(const Matrix& embeddings,
                                std::span<const NodePair> pairs,
                                const Scorer& scorer) {
  check_scorer(scorer, embeddings.cols());
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& pair : pairs) {
    if (pair.first >= embeddings.rows() || pair.second >= embeddings.rows())
      throw std::out_of_range("pair (" + std::to_string(pair.first) + ", " +
                              std::to_string(pair.second) +
                              ") exceeds embedding rows " +
                              std::to_string(embeddings.rows()));
    scores.push_back(sigmoid(score_logit(embeddings, pair, scorer)));
  }
  return scores;
}

double bce_loss(std::span<const double> positive_scores,
                std::span<const double> negative_scores,
                const LossConfig& cfg) {
  if (positive_scores.empty())
    throw std::invalid_argument("positive score list is empty");
  if (negative_scores.empty())
    throw std::invalid_argument("negative score list is empty");

  double pos_term = 0.0;
  for (const double p : positive_scores) pos_term += std::log(p + cfg.epsilon);
  pos_term /= static_cast<double>(positive_scores.size());

  double neg_term = 0.0;
  for (const double q : negative_scores)
    neg_term += std::log(1.0 - q + cfg.epsilon);
  neg_term /= static_cast<double>(negative_scores.size());

  const double neg_sign = cfg.flip_negative_term ? 1.0 : -1.0;
  return -pos_term + neg_sign * neg_term;
}

namespace {

/// Adds one scored pair's contribution to the embedding gradient and, for
/// hadamard_mlp, to the scorer gradient. dt is dLoss/dlogit.
void accumulate_pair_grad(const Matrix& z, const NodePair& pair, double dt,
                          const Scorer& scorer, Matrix& d_z,
                          Matrix& d_scorer_w, double& d_scorer_b) {
  const auto& k = kernels::active();
  const std::size_t d = z.cols();
  const double* zu = z.data() + static_cast<std::size_t>(pair.first) * d;
  const double* zv = z.data() + static_cast<std::size_t>(pair.second) * d;
  double* du = d_z.data() + static_cast<std::size_t>(pair.first) * d;
  double* dv = d_z.data() + static_cast<std::size_t>(pair.second) * d;

  if (scorer.kind == ScorerKind::dot_product) {
    k.axpy(dt, zv, du, d);
    k.axpy(dt, zu, dv, d);
    return;
  }
  const double* w = scorer.weight.data();
  double* gw = d_scorer_w.data();
  for (std::size_t c = 0; c < d; ++c) {
    du[c] += dt * (w[c] * zv[c]);
    dv[c] += dt * (w[c] * zu[c]);
    gw[c] += dt * (zu[c] * zv[c]);
  }
  d_scorer_b += dt;
}

}  // namespace

BackwardResult backward_from_cache(const ModelParams& params, const Graph& g,
                                   const Matrix& embeddings,
                                   const EmbedCache& cache,
                                   std::span<const NodePair> positive,
                                   std::span<const NodePair> negative,
                                   const LossConfig& cfg) {
  if (cache.inputs.size() != params.layers.size())
    throw std::invalid_argument("cache does not match layer count");

  const auto& k = kernels::active();
  const std::vector<double> pos_scores =
      score_pairs(embeddings, positive, params.scorer);
  const std::vector<double> neg_scores =
      score_pairs(embeddings, negative, params.scorer);

  BackwardResult result;
  result.loss = bce_loss(pos_scores, neg_scores, cfg);

  result.grads.scorer.kind = params.scorer.kind;
  if (params.scorer.kind == ScorerKind::hadamard_mlp)
    result.grads.scorer.weight =
        Matrix(1, params.scorer.weight.cols());
  result.grads.scorer.bias = 0.0;

  Matrix d_z(embeddings.rows(), embeddings.cols());
  const double p_count = static_cast<double>(positive.size());
  const double n_count = static_cast<double>(negative.size());
  const double neg_sign = cfg.flip_negative_term ? 1.0 : -1.0;

  for (std::size_t i = 0; i < positive.size(); ++i) {
    const double p = pos_scores[i];
    const double d_prob = -1.0 / (p_count * (p + cfg.epsilon));
    const double dt = d_prob * p * (1.0 - p);
    accumulate_pair_grad(embeddings, positive[i], dt, params.scorer, d_z,
                         result.grads.scorer.weight,
                         result.grads.scorer.bias);
  }
  for (std::size_t j = 0; j < negative.size(); ++j) {
    const double q = neg_scores[j];
    const double d_prob = -neg_sign / (n_count * (1.0 - q + cfg.epsilon));
    const double dt = d_prob * q * (1.0 - q);
    accumulate_pair_grad(embeddings, negative[j], dt, params.scorer, d_z,
                         result.grads.scorer.weight,
                         result.grads.scorer.bias);
  }

  result.grads.layers.resize(params.layers.size());
  Matrix g_out = std::move(d_z);
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    const SageLayer& layer = params.layers[i];
    const Matrix& input = cache.inputs[i];
    const Matrix& agg = cache.aggregates[i];
    const std::size_t n = g.num_nodes();
    const std::size_t d_in = layer.w_self.cols();
    const std::size_t d_out = layer.w_self.rows();

    SageLayer& grad = result.grads.layers[i];
    grad.w_self = Matrix(d_out, d_in);
    grad.w_neigh = Matrix(d_out, d_in);
    k.matmul_at(g_out.data(), input.data(), grad.w_self.data(), n, d_out,
                d_in);
    k.matmul_at(g_out.data(), agg.data(), grad.w_neigh.data(), n, d_out, d_in);

    if (i == 0) break;  // input features are fixed, no gradient needed

    Matrix d_input(n, d_in);
    k.matmul(g_out.data(), layer.w_self.data(), d_input.data(), n, d_out,
             d_in);
    Matrix d_agg(n, d_in);
    k.matmul(g_out.data(), layer.w_neigh.data(), d_agg.data(), n, d_out, d_in);
    Matrix d_agg_in(n, d_in);
    k.mean_aggregate_backward(g.offsets().data(), g.targets().data(),
                              d_agg.data(), d_agg_in.data(), n, d_in);
    k.vadd(d_input.data(), d_agg_in.data(), d_input.size());

    Matrix masked(n, d_in);
    k.relu_mask_backward(cache.outputs[i - 1].data(), d_input.data(),
                         masked.data(), masked.size());
    g_out = std::move(masked);
  }
  return result;
}

BackwardResult backward(const ModelParams& params, const Graph& g,
                        std::span<const NodePair> positive,
                        std::span<const NodePair> negative,
                        const LossConfig& cfg) {
  EmbedCache cache;
  const Matrix z = embed(params, g, cache);
  return backward_from_cache(params, g, z, cache, positive, negative, cfg);
}

std::size_t param_count(const ModelParams& params) {
  std::size_t count = 0;
  for (const auto& layer : params.layers)
    count += layer.w_self.size() + layer.w_neigh.size();
  if (params.scorer.kind == ScorerKind::hadamard_mlp)
    count += params.scorer.weight.size() + 1;
  return count;
}

void flatten_params(const ModelParams& params, std::span<double> out) {
  if (out.size() != param_count(params))
    throw std::invalid_argument("flat buffer size " +
                                std::to_string(out.size()) +
                                " does not match parameter count " +
                                std::to_string(param_count(params)));
  double* dst = out.data();
  for (const auto& layer : params.layers) {
    std::memcpy(dst, layer.w_self.data(), layer.w_self.size() * sizeof(double));
    dst += layer.w_self.size();
    std::memcpy(dst, layer.w_neigh.data(),
                layer.w_neigh.size() * sizeof(double));
    dst += layer.w_neigh.size();
  }
  if (params.scorer.kind == ScorerKind::hadamard_mlp) {
    std::memcpy(dst, params.scorer.weight.data(),
                params.scorer.weight.size() * sizeof(double));
    dst += params.scorer.weight.size();
    *dst = params.scorer.bias;
  }
}

void unflatten_params(std::span<const double> flat, ModelParams& params) {
  if (flat.size() != param_count(params))
    throw std::invalid_argument("flat buffer size " +
                                std::to_string(flat.size()) +
                                " does not match parameter count " +
                                std::to_string(param_count(params)));
  const double* src = flat.data();
  for (auto& layer : params.layers) {
    std::memcpy(layer.w_self.data(), src, layer.w_self.size() * sizeof(double));
    src += layer.w_self.size();
    std::memcpy(layer.w_neigh.data(), src,
                layer.w_neigh.size() * sizeof(double));
    src += layer.w_neigh.size();
  }
  if (params.scorer.kind == ScorerKind::hadamard_mlp) {
    std::memcpy(params.scorer.weight.data(), src,
                params.scorer.weight.size() * sizeof(double));
    src += params.scorer.weight.size();
    params.scorer.bias = *src;
  }
}

namespace {

constexpr char kMagic[4] = {'S', 'A', 'G', 'E'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

void put_f64(std::string& buf, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t byte() {
    if (pos_ >= bytes_.size())
      throw std::runtime_error("checkpoint truncated");
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }

  double f64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return std::bit_cast<double>(v);
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& layer : params.layers) {
    check_layer(layer);
    put_u32(buf, static_cast<std::uint32_t>(layer.w_self.rows()));
    put_u32(buf, static_cast<std::uint32_t>(layer.w_self.cols()));
    for (std::size_t i = 0; i < layer.w_self.size(); ++i)
      put_f64(buf, layer.w_self.data()[i]);
    for (std::size_t i = 0; i < layer.w_neigh.size(); ++i)
      put_f64(buf, layer.w_neigh.data()[i]);
  }
  put_u32(buf, static_cast<std::uint32_t>(params.scorer.kind));
  if (params.scorer.kind == ScorerKind::hadamard_mlp) {
    put_u32(buf, static_cast<std::uint32_t>(params.scorer.weight.cols()));
    for (std::size_t i = 0; i < params.scorer.weight.size(); ++i)
      put_f64(buf, params.scorer.weight.data()[i]);
    put_f64(buf, params.scorer.bias);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  ByteReader reader(std::move(bytes));

  for (const char expected : kMagic)
    if (reader.byte() != static_cast<std::uint8_t>(expected))
      throw std::runtime_error(path.string() + " is not a model checkpoint");
  const std::uint32_t version = reader.u32();
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));

  ModelParams params;
  const std::uint32_t layer_count = reader.u32();
  params.layers.resize(layer_count);
  std::size_t prev_out = 0;
  for (std::size_t i = 0; i < layer_count; ++i) {
    const std::uint32_t d_out = reader.u32();
    const std::uint32_t d_in = reader.u32();
    if (d_out == 0 || d_in == 0)
      throw std::runtime_error("checkpoint layer " + std::to_string(i) +
                               " has an empty shape");
    if (i > 0 && d_in != prev_out)
      throw std::runtime_error("checkpoint layer shapes do not compose");
    prev_out = d_out;
    SageLayer& layer = params.layers[i];
    layer.w_self = Matrix(d_out, d_in);
    layer.w_neigh = Matrix(d_out, d_in);
    for (std::size_t j = 0; j < layer.w_self.size(); ++j)
      layer.w_self.data()[j] = reader.f64();
    for (std::size_t j = 0; j < layer.w_neigh.size(); ++j)
      layer.w_neigh.data()[j] = reader.f64();
  }

  const std::uint32_t kind = reader.u32();
  if (kind > static_cast<std::uint32_t>(ScorerKind::hadamard_mlp))
    throw std::runtime_error("unknown scorer kind " + std::to_string(kind));
  params.scorer.kind = static_cast<ScorerKind>(kind);
  if (params.scorer.kind == ScorerKind::hadamard_mlp) {
    const std::uint32_t d = reader.u32();
    if (layer_count > 0 && d != prev_out)
      throw std::runtime_error("scorer dim does not match final layer");
    params.scorer.weight = Matrix(1, d);
    for (std::size_t j = 0; j < params.scorer.weight.size(); ++j)
      params.scorer.weight.data()[j] = reader.f64();
    params.scorer.bias = reader.f64();
  }

  if (!reader.exhausted())
    throw std::runtime_error("trailing bytes in checkpoint");
  return params;
}

}  // namespace sagelink
