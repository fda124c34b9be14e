#include "tsfound/forecast_head.hpp"

#include "tsfound/error.hpp"

namespace tsfound {

std::vector<double> PatchPrediction::flatten() const {
    std::vector<double> out;
    out.reserve(point.size() * (1 + (quantiles.empty() ? 0 : quantiles.front().size())));
    for (std::size_t i = 0; i < point.size(); ++i) {
        out.push_back(point[i]);
        out.insert(out.end(), quantiles[i].begin(), quantiles[i].end());
    }
    return out;
}

template <typename T>
ad::Var predict_patches(Graph<T>& g, ad::Var decoder_out) {
    return residual_mlp(g, decoder_out, g.layout->head);
}

template <typename T>
PatchPrediction slice_prediction(std::span<const T> row, int output_patch, int num_quantiles) {
    const std::size_t stride = static_cast<std::size_t>(num_quantiles) + 1;
    if (row.size() != static_cast<std::size_t>(output_patch) * stride) {
        fail_validation("slice_prediction: row width " + std::to_string(row.size()) + " does not match P_o*(Q+1)");
    }
    PatchPrediction p;
    p.point.resize(static_cast<std::size_t>(output_patch));
    p.quantiles.assign(static_cast<std::size_t>(output_patch), std::vector<double>(num_quantiles));
    for (std::size_t i = 0; i < p.point.size(); ++i) {
        p.point[i] = static_cast<double>(row[i * stride]);
        for (std::size_t c = 1; c < stride; ++c) {
            p.quantiles[i][c - 1] = static_cast<double>(row[i * stride + c]);
        }
    }
    return p;
}

std::size_t quantile_crossings(const PatchPrediction& p) {
    std::size_t n = 0;
    for (const auto& levels : p.quantiles) {
        for (std::size_t c = 1; c < levels.size(); ++c) {
            if (levels[c] < levels[c - 1]) {
                ++n;
            }
        }
    }
    return n;
}

PatchPrediction predict_patch(const Model<double>& model, std::span<const double> decoder_output) {
    const auto& cfg = model.config();
    if (static_cast<int>(decoder_output.size()) != cfg.d_model) {
        fail_validation("predict_patch: decoder output must have d_model entries");
    }
    Graph<double> g = bind(model, false);
    ad::Var o = g.tape.constant(1, cfg.d_model, {decoder_output.begin(), decoder_output.end()});
    ad::Var y = predict_patches(g, o);
    return slice_prediction(g.tape.value(y), cfg.output_patch, cfg.num_quantiles());
}

template ad::Var predict_patches(Graph<float>&, ad::Var);
template ad::Var predict_patches(Graph<double>&, ad::Var);
template PatchPrediction slice_prediction(std::span<const float>, int, int);
template PatchPrediction slice_prediction(std::span<const double>, int, int);

} // namespace tsfound
