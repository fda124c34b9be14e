#pragma once

#include "tsfound/model.hpp"
#include "tsfound/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tsfound {

struct SynthConfig {
    long series = 0;          // total corpus size; 0 means nothing configured
    int length = 384;         // points per series
    double mixup_rate = 0.5;  // fraction of the corpus produced by mixup
    int max_sources = 3;      // series combined per mixup sample
    int max_kernel_depth = 3;
};

struct DataConfig {
    std::vector<std::string> corpus; // JSONL / CSV files
    SynthConfig synth;
};

struct EvalConfig {
    std::vector<std::string> datasets; // files or directories
    std::string protocol = "last_window";
    int horizon = 0;                   // last_window default when no sidecar; 0 = train horizon
    std::vector<int> horizons{96, 192, 336, 720};
    int stride = 0;
    double test_fraction = 0.2;
    std::map<std::string, int> seasons; // per-dataset overrides
};

struct RunConfig {
    std::string preset = "desk-tiny";
    std::uint64_t seed = 0;
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    EvalConfig eval;
};

/// Built-in presets: base-paper, large-paper, desk-tiny.
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Parses the TOML subset used by config files into a nested JSON object:
/// [section] / [section.sub] headers, key = value, strings, numbers, booleans,
/// one-line arrays, # comments.
nlohmann::json parse_toml(const std::string& text);

/// Applies a parsed document on top of the named preset (key `preset`,
/// default desk-tiny). Unknown keys are rejected. Relative paths are resolved
/// against base_dir.
RunConfig config_from_document(const nlohmann::json& doc, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

/// Cross-field checks; throws Validation naming the field.
void validate(const RunConfig& cfg);
/// Every referenced corpus / dataset path must exist.
void require_corpus_paths(const RunConfig& cfg);
void require_dataset_paths(const RunConfig& cfg);

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// First field that differs, or empty when the two are interchangeable.
std::string model_config_difference(const ModelConfig& a, const ModelConfig& b);

} // namespace tsfound
