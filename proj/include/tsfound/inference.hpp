#pragma once

#include "tsfound/forecast_head.hpp"
#include "tsfound/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace tsfound {

struct ForecastRequest {
    std::vector<double> context;         // raw values, any length >= 1
    int horizon = 1;
    std::vector<double> quantile_levels; // subset of the trained levels; empty = all
};

struct ForecastResult {
    std::vector<double> point;                  // H, original scale
    std::vector<double> levels;                 // quantile levels reported
    std::vector<std::vector<double>> quantiles; // H x levels.size(), original scale
    int steps_used = 0;                         // ceil(H / P_o)
    int encoder_calls = 0;
    std::size_t quantile_crossings = 0;         // diagnostic over reported levels
};

/// Encoder memory for one scaled context, reused across decoder passes.
template <typename T>
class DecoderSession {
public:
    /// scaled_context and mask have length C.
    DecoderSession(const Model<T>& model, std::span<const double> scaled_context, std::span<const std::uint8_t> mask);

    /// Runs the decoder over [start, prefix patches...] and returns the
    /// prediction made at every token. prefix length must be a multiple of P_o.
    std::vector<PatchPrediction> run(std::span<const double> scaled_prefix);

    int encoder_calls() const { return encoder_calls_; }

private:
    const Model<T>* model_;
    Graph<T> graph_;
    ad::Var memory_;
    std::vector<std::uint8_t> memory_mask_;
    int memory_len_ = 0;
    int encoder_calls_ = 0;
};

/// Indices of the requested levels inside the trained set; throws Validation
/// listing the available levels when one is missing.
std::vector<std::size_t> resolve_levels(std::span<const double> trained, std::span<const double> requested);

/// Autoregressive patch-by-patch forecast; only point forecasts are fed back.
template <typename T>
ForecastResult forecast(const Model<T>& model, const ForecastRequest& request);

} // namespace tsfound
