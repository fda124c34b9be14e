#include "tsfound/inference.hpp"

#include "tsfound/backbone.hpp"
#include "tsfound/error.hpp"
#include "tsfound/patch_embed.hpp"
#include "tsfound/series.hpp"

#include <cmath>
#include <sstream>

namespace tsfound {

template <typename T>
DecoderSession<T>::DecoderSession(const Model<T>& model, std::span<const double> scaled_context,
                                  std::span<const std::uint8_t> mask)
    : model_(&model), graph_(bind(model, false)) {
    EncoderInput enc = embed_context(graph_, scaled_context, mask, 1);
    memory_ = encode(graph_, enc.fused, enc.patch_mask, 1, enc.patches);
    memory_mask_ = std::move(enc.patch_mask);
    memory_len_ = enc.patches;
    ++encoder_calls_;
}

template <typename T>
std::vector<PatchPrediction> DecoderSession<T>::run(std::span<const double> scaled_prefix) {
    const ModelConfig& cfg = model_->config();
    const int prefix_len = static_cast<int>(scaled_prefix.size());
    ad::Var tokens = embed_decoder_tokens(graph_, scaled_prefix, {}, 1, prefix_len);
    const int num_tokens = 1 + prefix_len / cfg.output_patch;
    ad::Var out = decode(graph_, tokens, 1, num_tokens, memory_, memory_mask_, memory_len_);
    ad::Var head = predict_patches(graph_, out);
    auto raw = graph_.tape.value(head);
    const std::size_t width = static_cast<std::size_t>(cfg.head_width());
    std::vector<PatchPrediction> preds;
    preds.reserve(static_cast<std::size_t>(num_tokens));
    for (int t = 0; t < num_tokens; ++t) {
        preds.push_back(slice_prediction(raw.subspan(static_cast<std::size_t>(t) * width, width), cfg.output_patch,
                                         cfg.num_quantiles()));
    }
    return preds;
}

std::vector<std::size_t> resolve_levels(std::span<const double> trained, std::span<const double> requested) {
    std::vector<std::size_t> idx;
    if (requested.empty()) {
        for (std::size_t i = 0; i < trained.size(); ++i) {
            idx.push_back(i);
        }
        return idx;
    }
    for (double q : requested) {
        std::size_t found = trained.size();
        for (std::size_t i = 0; i < trained.size(); ++i) {
            if (std::abs(trained[i] - q) < 1e-9) {
                found = i;
            }
        }
        if (found == trained.size()) {
            std::ostringstream msg;
            msg << "quantile " << q << " is not in the trained set; available levels:";
            for (double t : trained) {
                msg << ' ' << t;
            }
            fail_validation(msg.str());
        }
        idx.push_back(found);
    }
    return idx;
}

template <typename T>
ForecastResult forecast(const Model<T>& model, const ForecastRequest& request) {
    const ModelConfig& cfg = model.config();
    if (request.horizon < 1) {
        fail_validation("forecast: horizon must be at least 1");
    }
    if (request.context.empty()) {
        fail_validation("empty context");
    }
    for (double v : request.context) {
        if (!std::isfinite(v)) {
            fail_validation("forecast: context contains a non-finite value");
        }
    }
    const auto level_idx = resolve_levels(cfg.quantiles, request.quantile_levels);

    const Padded padded = fit_left(request.context, static_cast<std::size_t>(cfg.context_len));
    const Scaled scaled = standard_scale(padded.values, padded.mask);

    DecoderSession<T> session(model, scaled.values, padded.mask);
    const int Po = cfg.output_patch;
    const int steps = (request.horizon + Po - 1) / Po;
    std::vector<double> generated; // scaled point forecasts fed back to the decoder
    std::vector<PatchPrediction> chosen;
    for (int s = 0; s < steps; ++s) {
        auto preds = session.run(generated);
        PatchPrediction next = std::move(preds.back());
        for (double v : next.flatten()) {
            if (!std::isfinite(v)) {
                fail_runtime("forecast: non-finite output at generation step " + std::to_string(s));
            }
        }
        generated.insert(generated.end(), next.point.begin(), next.point.end());
        chosen.push_back(std::move(next));
    }

    ForecastResult r;
    r.steps_used = steps;
    r.encoder_calls = session.encoder_calls();
    for (std::size_t i : level_idx) {
        r.levels.push_back(cfg.quantiles[i]);
    }
    const std::size_t H = static_cast<std::size_t>(request.horizon);
    r.point = inverse_scale(std::span<const double>(generated).first(H), scaled.mean, scaled.std);
    r.quantiles.resize(H);
    for (std::size_t h = 0; h < H; ++h) {
        const auto& levels = chosen[h / Po].quantiles[h % Po];
        for (std::size_t i : level_idx) {
            r.quantiles[h].push_back(levels[i] * scaled.std + scaled.mean);
        }
        for (std::size_t c = 1; c < r.quantiles[h].size(); ++c) {
            if (r.quantiles[h][c] < r.quantiles[h][c - 1]) {
                ++r.quantile_crossings;
            }
        }
    }
    return r;
}

template class DecoderSession<float>;
template class DecoderSession<double>;
template ForecastResult forecast(const Model<float>&, const ForecastRequest&);
template ForecastResult forecast(const Model<double>&, const ForecastRequest&);

} // namespace tsfound
