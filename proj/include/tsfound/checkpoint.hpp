#pragma once

#include "tsfound/model.hpp"
#include "tsfound/training.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace tsfound {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig model_config;
    TrainConfig train_config;
    long step = 0;                 // optimisation steps already applied
    Model<float> model;
    std::optional<AdamState<float>> adam;

    explicit Checkpoint(const ModelConfig& cfg) : model_config(cfg), model(cfg) {}
};

/// Container layout: 8-byte magic, uint64 LE header length, JSON header
/// (version, configs, step, array manifest), then float32 LE payloads in
/// manifest order. Written through a temporary file and renamed into place.
void save_checkpoint(const std::string& path, const Model<float>& model, const TrainConfig& train, long step,
                     const AdamState<float>* adam = nullptr);

/// Throws Validation naming the offending field on a version, manifest or
/// shape mismatch; Runtime when the file cannot be read.
Checkpoint load_checkpoint(const std::string& path);

/// Throws Validation naming the first model field that differs.
void require_compatible(const Checkpoint& ckpt, const ModelConfig& expected);

} // namespace tsfound
