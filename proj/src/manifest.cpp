#include "sagelink/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sagelink {

std::string_view scorer_name(ScorerKind kind) {
  return kind == ScorerKind::dot_product ? "dot_product" : "hadamard_mlp";
}

std::optional<ScorerKind> parse_scorer(std::string_view name) {
  if (name == "dot_product") return ScorerKind::dot_product;
  if (name == "hadamard_mlp") return ScorerKind::hadamard_mlp;
  return std::nullopt;
}

std::string_view feature_mode_name(FeatureMode mode) {
  return mode == FeatureMode::constant_one ? "constant_one"
                                           : "normalized_degree";
}

std::optional<FeatureMode> parse_feature_mode(std::string_view name) {
  if (name == "constant_one") return FeatureMode::constant_one;
  if (name == "normalized_degree") return FeatureMode::normalized_degree;
  return std::nullopt;
}

bool RunManifest::operator==(const RunManifest& other) const {
  return command == other.command && input_path == other.input_path &&
         seed == other.seed && train_fraction == other.train_fraction &&
         config == other.config && artifacts == other.artifacts &&
         timing == other.timing && tool_version == other.tool_version &&
         created_at == other.created_at;
}

std::string to_json_string(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["input_path"] = m.input_path;
  j["seed"] = m.seed;
  j["train_fraction"] = m.train_fraction;
  nlohmann::ordered_json cfg;
  cfg["epochs"] = m.config.epochs;
  cfg["learning_rate"] = m.config.learning_rate;
  cfg["hidden_dim"] = m.config.hidden_dim;
  cfg["num_layers"] = m.config.num_layers;
  cfg["seed"] = m.config.seed;
  cfg["scorer"] = scorer_name(m.config.scorer);
  cfg["feature_mode"] = feature_mode_name(m.config.feature_mode);
  cfg["beta1"] = m.config.beta1;
  cfg["beta2"] = m.config.beta2;
  cfg["adam_epsilon"] = m.config.adam_epsilon;
  cfg["loss_epsilon"] = m.config.loss.epsilon;
  cfg["flip_negative_term"] = m.config.loss.flip_negative_term;
  j["config"] = std::move(cfg);
  j["artifacts"] = m.artifacts;
  j["timing"] = m.timing;
  j["tool_version"] = m.tool_version;
  j["created_at"] = m.created_at;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("manifest is not valid JSON: ") +
                             e.what());
  }
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.input_path = j.at("input_path").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train_fraction = j.at("train_fraction").get<double>();
    const auto& cfg = j.at("config");
    m.config.epochs = cfg.at("epochs").get<std::size_t>();
    m.config.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.hidden_dim = cfg.at("hidden_dim").get<std::size_t>();
    m.config.num_layers = cfg.at("num_layers").get<std::size_t>();
    m.config.seed = cfg.at("seed").get<std::uint64_t>();
    const auto scorer = parse_scorer(cfg.at("scorer").get<std::string>());
    const auto mode =
        parse_feature_mode(cfg.at("feature_mode").get<std::string>());
    if (!scorer || !mode)
      throw std::runtime_error("manifest names an unknown scorer or mode");
    m.config.scorer = *scorer;
    m.config.feature_mode = *mode;
    m.config.beta1 = cfg.at("beta1").get<double>();
    m.config.beta2 = cfg.at("beta2").get<double>();
    m.config.adam_epsilon = cfg.at("adam_epsilon").get<double>();
    m.config.loss.epsilon = cfg.at("loss_epsilon").get<double>();
    m.config.loss.flip_negative_term =
        cfg.at("flip_negative_term").get<bool>();
    m.artifacts =
        j.at("artifacts").get<std::map<std::string, std::string>>();
    m.timing = j.value("timing", std::map<std::string, double>{});
    m.tool_version = j.at("tool_version").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("manifest is missing fields: ") +
                             e.what());
  }
}

void write_manifest(const std::filesystem::path& path,
                    const RunManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << to_json_string(manifest);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return manifest_from_json(buffer.str());
}

std::string current_timestamp_utc() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace sagelink
