#pragma once

#include "tsfound/model.hpp"

#include <span>
#include <vector>

namespace tsfound {

/// Head output for one decoder position. The raw row has P_o * (Q + 1)
/// entries grouped per time step: [point, q_1, ..., q_Q] for step 0, then
/// step 1, and so on.
struct PatchPrediction {
    std::vector<double> point;                  // P_o
    std::vector<std::vector<double>> quantiles; // P_o x Q

    std::vector<double> flatten() const;
};

/// [n, d] decoder outputs -> [n, P_o * (Q + 1)] raw head outputs.
template <typename T>
ad::Var predict_patches(Graph<T>& g, ad::Var decoder_out);

template <typename T>
PatchPrediction slice_prediction(std::span<const T> row, int output_patch, int num_quantiles);

/// Number of (step, adjacent level) pairs where the quantile forecast decreases.
std::size_t quantile_crossings(const PatchPrediction& p);

/// Single-vector convenience wrapper.
PatchPrediction predict_patch(const Model<double>& model, std::span<const double> decoder_output);

} // namespace tsfound
