#include "sagelink/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sagelink/format.hpp"
#include "sagelink/kernels.hpp"

namespace sagelink {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

std::vector<std::vector<NodePair>> partition_pairs(
    std::span<const NodePair> pairs, std::size_t workers) {
  if (workers == 0)
    throw std::invalid_argument("worker count must be positive");

  const std::size_t base = pairs.size() / workers;
  const std::size_t extra = pairs.size() % workers;
  std::vector<std::vector<NodePair>> shards(workers);
  std::size_t begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t size = base + (w < extra ? 1 : 0);
    shards[w].assign(pairs.begin() + begin, pairs.begin() + begin + size);
    begin += size;
  }
  return shards;
}

EpochOutcome parallel_train_epoch(const Graph& g_train, ModelParams& params,
                                  std::span<const PairShard> shards,
                                  AdamState& state, const TrainConfig& cfg) {
  if (shards.empty()) throw std::invalid_argument("no shards given");
  std::size_t total_pairs = 0;
  for (std::size_t w = 0; w < shards.size(); ++w) {
    if (shards[w].positive.empty() || shards[w].negative.empty())
      throw std::invalid_argument("shard " + std::to_string(w) +
                                  " is empty; use fewer workers");
    total_pairs += shards[w].positive.size() + shards[w].negative.size();
  }

  struct WorkerSlot {
    BackwardResult result;
    Matrix embeddings;
    double forward_ms = 0.0;
    double backward_ms = 0.0;
    std::exception_ptr error;
  };
  std::vector<WorkerSlot> slots(shards.size());

  {
    std::vector<std::thread> threads;
    threads.reserve(shards.size());
    for (std::size_t w = 0; w < shards.size(); ++w) {
      threads.emplace_back([&, w]() {
        WorkerSlot& slot = slots[w];
        try {
          const auto t0 = Clock::now();
          EmbedCache cache;
          Matrix z = embed(params, g_train, cache);
          const auto t1 = Clock::now();
          slot.result = backward_from_cache(params, g_train, z, cache,
                                            shards[w].positive,
                                            shards[w].negative, cfg.loss);
          const auto t2 = Clock::now();
          slot.embeddings = std::move(z);
          slot.forward_ms = ms_between(t0, t1);
          slot.backward_ms = ms_between(t1, t2);
        } catch (...) {
          slot.error = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  for (const auto& slot : slots)
    if (slot.error) std::rethrow_exception(slot.error);

  // Fixed reduction order (worker index) keeps the result independent of
  // thread scheduling. The first shard is scale-copied so a single worker
  // reproduces its gradient bit for bit.
  const auto reduce_begin = Clock::now();
  const auto& k = kernels::active();
  const std::size_t n = param_count(params);
  std::vector<double> flat_avg(n), flat_shard(n);

  EpochOutcome outcome;
  outcome.grads = slots[0].result.grads;
  outcome.embeddings = std::move(slots[0].embeddings);
  outcome.loss = 0.0;
  for (std::size_t w = 0; w < slots.size(); ++w) {
    const double weight =
        static_cast<double>(shards[w].positive.size() +
                            shards[w].negative.size()) /
        static_cast<double>(total_pairs);
    flatten_params(slots[w].result.grads, flat_shard);
    if (w == 0)
      k.scale_copy(weight, flat_shard.data(), flat_avg.data(), n);
    else
      k.axpy(weight, flat_shard.data(), flat_avg.data(), n);
    outcome.loss += weight * slots[w].result.loss;
  }
  unflatten_params(flat_avg, outcome.grads);

  adam_step(params, outcome.grads, state, cfg);
  const auto reduce_end = Clock::now();

  double max_forward = 0.0, max_backward = 0.0;
  for (const auto& slot : slots) {
    max_forward = std::max(max_forward, slot.forward_ms);
    max_backward = std::max(max_backward, slot.backward_ms);
  }
  outcome.inference_ms = max_forward;
  outcome.training_ms = max_backward + ms_between(reduce_begin, reduce_end);
  return outcome;
}

TrainResult parallel_train(const Graph& g, const EdgeSplit& split,
                           const TrainConfig& cfg, std::size_t workers) {
  if (workers == 0)
    throw std::invalid_argument("worker count must be positive");
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

  // Same deferred evaluation as train(): the workers' forward pass already
  // embeds the parameters the previous epoch's evaluation needs.
  MetricsRecord pending{};
  bool have_pending = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_begin = Clock::now();
    const NegativeSample train_neg =
        sample_epoch_negatives(g, split, cfg, epoch, test_neg.pairs);

    auto pos_shards = partition_pairs(split.train_pos, workers);
    auto neg_shards = partition_pairs(train_neg.pairs, workers);
    std::vector<PairShard> shards(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      shards[w].positive = std::move(pos_shards[w]);
      shards[w].negative = std::move(neg_shards[w]);
    }

    const EpochOutcome outcome =
        parallel_train_epoch(g_train, params, shards, state, cfg);

    if (have_pending) {
      const EvalResult eval = evaluate(outcome.embeddings, params.scorer,
                                       split.test_pos, test_neg.pairs);
      pending.test_accuracy = eval.accuracy;
      pending.test_auc = eval.auc;
      result.records.push_back(pending);
    }

    pending = {epoch, outcome.loss, 0.0, 0.0, outcome.inference_ms,
               outcome.training_ms};
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

ScalingRow summarize_run(std::size_t workers, const TrainResult& result) {
  ScalingRow row;
  row.workers = workers;
  const double count = static_cast<double>(result.records.size());
  for (const auto& r : result.records) {
    row.mean_inference_ms += r.inference_ms;
    row.mean_training_ms += r.training_ms;
  }
  for (const double wall : result.epoch_wall_ms) row.mean_epoch_ms += wall;
  row.mean_inference_ms /= count;
  row.mean_training_ms /= count;
  row.mean_epoch_ms /= count;
  row.final_loss = result.records.back().loss;
  return row;
}

ScalingReport run_scaling_benchmark(
    const Graph& g, const EdgeSplit& split, const TrainConfig& cfg,
    std::span<const std::size_t> worker_counts) {
  ScalingReport report;
  report.rows.reserve(worker_counts.size());
  for (const std::size_t workers : worker_counts)
    report.rows.push_back(
        summarize_run(workers, parallel_train(g, split, cfg, workers)));
  return report;
}

void write_scaling_csv(std::ostream& out, const ScalingReport& report) {
  out << kScalingCsvHeader << '\n';
  for (const auto& row : report.rows) {
    out << row.workers << ',' << format_double(row.mean_inference_ms) << ','
        << format_double(row.mean_training_ms) << ','
        << format_double(row.mean_epoch_ms) << ','
        << format_double(row.final_loss) << '\n';
  }
}

void write_scaling_json(std::ostream& out, const ScalingReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json j;
    j["workers"] = row.workers;
    j["mean_inference_ms"] = row.mean_inference_ms;
    j["mean_training_ms"] = row.mean_training_ms;
    j["mean_epoch_ms"] = row.mean_epoch_ms;
    j["final_loss"] = row.final_loss;
    rows.push_back(std::move(j));
  }
  out << rows.dump(2) << '\n';
}

}  // namespace sagelink
