#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "sagelink/trainer.hpp"

namespace sagelink {

std::string_view scorer_name(ScorerKind kind);
std::optional<ScorerKind> parse_scorer(std::string_view name);
std::string_view feature_mode_name(FeatureMode mode);
std::optional<FeatureMode> parse_feature_mode(std::string_view name);

/// Everything needed to rerun a command and find its outputs. created_at
/// and timing are the only fields that vary between identical reruns; the
/// other artifacts stay byte-reproducible because measurements live here.
struct RunManifest {
  std::string command;
  std::string input_path;
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
  TrainConfig config;
  std::map<std::string, std::string> artifacts;
  /// Measured wall-clock aggregates for the run, e.g. mean_inference_ms.
  std::map<std::string, double> timing;
  std::string tool_version;
  std::string created_at;

  bool operator==(const RunManifest&) const;
};

std::string to_json_string(const RunManifest& manifest);
/// Throws std::runtime_error on malformed or incomplete JSON.
RunManifest manifest_from_json(const std::string& text);

void write_manifest(const std::filesystem::path& path,
                    const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

/// ISO 8601 UTC, second resolution.
std::string current_timestamp_utc();

}  // namespace sagelink
