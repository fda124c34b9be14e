#include "tsfound/training.hpp"

#include "tsfound/backbone.hpp"
#include "tsfound/error.hpp"
#include "tsfound/forecast_head.hpp"
#include "tsfound/patch_embed.hpp"
#include "tsfound/random.hpp"

#include <algorithm>
#include <cmath>

namespace tsfound {

void validate(const TrainConfig& train, const ModelConfig& model) {
    validate(model);
    if (train.horizon <= 0 || train.horizon % model.output_patch != 0) {
        fail_validation("train.horizon: must be a positive multiple of model.output_patch (" +
                        std::to_string(model.output_patch) + ")");
    }
    if (train.steps <= 0) {
        fail_validation("train.steps: must be positive");
    }
    if (train.batch_size <= 0) {
        fail_validation("train.batch_size: must be positive");
    }
    if (!(train.lr > 0.0)) {
        fail_validation("train.lr: must be positive");
    }
    if (!(train.beta1 >= 0.0 && train.beta1 < 1.0) || !(train.beta2 >= 0.0 && train.beta2 < 1.0)) {
        fail_validation("train.beta1/beta2: must lie in [0, 1)");
    }
    if (train.weight_decay < 0.0) {
        fail_validation("train.weight_decay: must be nonnegative");
    }
    if (train.warmup_steps < 0 || train.warmup_steps >= train.steps) {
        fail_validation("train.warmup_steps: must lie in [0, steps)");
    }
    if (train.log_every <= 0 || train.checkpoint_every <= 0) {
        fail_validation("train.log_every/checkpoint_every: must be positive");
    }
}

TeacherForcedBatch assemble_teacher_forcing(std::span<const ScaledWindow> windows, const ModelConfig& cfg,
                                            int horizon) {
    if (horizon <= 0 || horizon % cfg.output_patch != 0) {
        fail_validation("assemble_teacher_forcing: horizon must be a multiple of the output patch size");
    }
    TeacherForcedBatch b;
    b.batch = static_cast<int>(windows.size());
    b.context_len = cfg.context_len;
    b.horizon = horizon;
    b.prefix_len = horizon - cfg.output_patch;
    for (const auto& w : windows) {
        if (static_cast<int>(w.context.size()) != cfg.context_len || static_cast<int>(w.future.size()) != horizon) {
            fail_validation("assemble_teacher_forcing: window shape does not match (C, H)");
        }
        b.context.insert(b.context.end(), w.context.begin(), w.context.end());
        b.mask.insert(b.mask.end(), w.mask.begin(), w.mask.end());
        b.decoder_prefix.insert(b.decoder_prefix.end(), w.future.begin(), w.future.begin() + b.prefix_len);
        b.targets.insert(b.targets.end(), w.future.begin(), w.future.end());
        b.series_ids.push_back(w.series_id);
    }
    return b;
}

double mse_loss(std::span<const double> targets, std::span<const double> forecasts) {
    if (targets.size() != forecasts.size() || targets.empty()) {
        fail_validation("mse_loss: lengths differ or are zero");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double e = targets[i] - forecasts[i];
        s += e * e;
    }
    return s / static_cast<double>(targets.size());
}

double quantile_loss(std::span<const double> targets, std::span<const double> quantile_forecasts,
                     std::span<const double> levels) {
    const std::size_t H = targets.size();
    const std::size_t Q = levels.size();
    if (H == 0 || quantile_forecasts.size() != H * Q) {
        fail_validation("quantile_loss: expected H x Q forecasts");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t c = 0; c < Q; ++c) {
            const double diff = targets[i] - quantile_forecasts[i * Q + c];
            s += levels[c] * std::max(diff, 0.0) + (1.0 - levels[c]) * std::max(-diff, 0.0);
        }
    }
    return s / static_cast<double>(H);
}

template <typename T>
LossVars<T> loss_from_head(Graph<T>& g, ad::Var head_out, std::span<const double> targets, int batch,
                           int horizon) {
    const ModelConfig& cfg = *g.cfg;
    const int Po = cfg.output_patch;
    const int Q = cfg.num_quantiles();
    const int stride = Q + 1;
    const int tokens = horizon / Po;
    auto& tape = g.tape;
    if (tape.rows(head_out) != batch * tokens || tape.cols(head_out) != Po * stride) {
        fail_validation("loss_from_head: head output shape mismatch");
    }
    if (targets.size() != static_cast<std::size_t>(batch) * horizon) {
        fail_validation("loss_from_head: target size mismatch");
    }
    // Row (b, t) of the head output predicts targets[b*H + t*Po .. +Po).
    const double norm = 1.0 / (static_cast<double>(batch) * horizon);
    std::vector<T> tgt(targets.begin(), targets.end());
    std::vector<T> levels(cfg.quantiles.begin(), cfg.quantiles.end());
    auto y = tape.value(head_out);
    const std::size_t n_points = tgt.size();

    double mse = 0.0;
    double ql = 0.0;
    for (std::size_t p = 0; p < n_points; ++p) {
        const std::size_t row_base = p * stride; // (b*tokens + t)*Po*stride + i*stride
        const double x = static_cast<double>(tgt[p]);
        const double e = x - static_cast<double>(y[row_base]);
        mse += e * e;
        for (int c = 0; c < Q; ++c) {
            const double diff = x - static_cast<double>(y[row_base + 1 + c]);
            const double q = static_cast<double>(levels[c]);
            ql += q * std::max(diff, 0.0) + (1.0 - q) * std::max(-diff, 0.0);
        }
    }
    const bool rg = tape.requires_grad(head_out);
    ad::Var mse_var = tape.push(1, 1, {static_cast<T>(mse * norm)}, rg,
                                [head_out, tgt, stride, norm](ad::Tape<T>& tp, ad::Var self) {
                                    const T g0 = tp.grad_view(self)[0];
                                    auto y = tp.value(head_out);
                                    auto& gy = tp.grad(head_out);
                                    const T scale = static_cast<T>(2.0 * norm) * g0;
                                    for (std::size_t p = 0; p < tgt.size(); ++p) {
                                        const std::size_t r = p * stride;
                                        gy[r] += scale * (y[r] - tgt[p]);
                                    }
                                });
    ad::Var ql_var = tape.push(1, 1, {static_cast<T>(ql * norm)}, rg,
                               [head_out, tgt, levels, stride, Q, norm](ad::Tape<T>& tp, ad::Var self) {
                                   const T g0 = tp.grad_view(self)[0] * static_cast<T>(norm);
                                   auto y = tp.value(head_out);
                                   auto& gy = tp.grad(head_out);
                                   for (std::size_t p = 0; p < tgt.size(); ++p) {
                                       const std::size_t r = p * stride;
                                       for (int c = 0; c < Q; ++c) {
                                           const T diff = tgt[p] - y[r + 1 + c];
                                           if (diff > T(0)) {
                                               gy[r + 1 + c] -= g0 * levels[c];
                                           } else if (diff < T(0)) {
                                               gy[r + 1 + c] += g0 * (T(1) - levels[c]);
                                           }
                                       }
                                   }
                               });
    ad::Var total = ad::add(tape, mse_var, ql_var);
    return {mse_var, ql_var, total};
}

template <typename T>
LossVars<T> training_loss(Graph<T>& g, const TeacherForcedBatch& batch) {
    const ModelConfig& cfg = *g.cfg;
    EncoderInput enc = embed_context(g, batch.context, batch.mask, batch.batch);
    ad::Var memory = encode(g, enc.fused, enc.patch_mask, batch.batch, enc.patches);
    ad::Var tokens = embed_decoder_tokens(g, batch.decoder_prefix, {}, batch.batch, batch.prefix_len);
    const int num_tokens = batch.horizon / cfg.output_patch;
    ad::Var out = decode(g, tokens, batch.batch, num_tokens, memory, enc.patch_mask, enc.patches);
    ad::Var head = predict_patches(g, out);
    return loss_from_head(g, head, batch.targets, batch.batch, batch.horizon);
}

template <typename T>
LossAndGrad<T> loss_and_grad(const Model<T>& model, const TeacherForcedBatch& batch, double dropout_rate,
                             std::uint64_t dropout_seed) {
    Graph<T> g = bind(model, true);
    g.dropout = dropout_rate;
    g.dropout_seed = dropout_seed;
    LossVars<T> lv = training_loss(g, batch);
    LossAndGrad<T> out;
    out.loss.mse = static_cast<double>(g.tape.scalar(lv.mse));
    out.loss.ql = static_cast<double>(g.tape.scalar(lv.ql));
    out.loss.total = static_cast<double>(g.tape.scalar(lv.total));
    g.tape.backward(lv.total);
    out.grads = collect_grads(g);
    return out;
}

double lr_schedule(long step, long total, double lr0, long warmup) {
    if (warmup > 0 && step < warmup) {
        return lr0 * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total));
}

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const Model<T>& model) {
    AdamState s;
    for (const auto& p : model.values()) {
        s.m.emplace_back(p.size(), T(0));
        s.v.emplace_back(p.size(), T(0));
    }
    return s;
}

template <typename T>
double clip_grad_norm(std::vector<std::vector<T>>& grads, double max_norm) {
    double ss = 0.0;
    for (const auto& g : grads) {
        for (T x : g) {
            ss += static_cast<double>(x) * static_cast<double>(x);
        }
    }
    const double norm = std::sqrt(ss);
    if (max_norm > 0.0 && norm > max_norm) {
        const T scale = static_cast<T>(max_norm / norm);
        for (auto& g : grads) {
            for (T& x : g) {
                x *= scale;
            }
        }
    }
    return norm;
}

template <typename T>
void adamw_update(Model<T>& model, AdamState<T>& state, const std::vector<std::vector<T>>& grads, double lr,
                  const TrainConfig& cfg) {
    state.updates += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.updates));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.updates));
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const T step_size = static_cast<T>(lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(cfg.adam_eps);
    const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
    auto& params = model.values();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            p[j] *= decay;
            p[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
        }
    }
}

LossBreakdown train_step(Model<float>& model, const TeacherForcedBatch& batch, AdamState<float>& state, long step,
                         const TrainConfig& cfg) {
    auto lg = loss_and_grad(model, batch, model.config().dropout, stream_seed(cfg.seed, "dropout", static_cast<std::uint64_t>(step)));
    auto report = [&](const std::string& what) {
        std::string ids;
        for (std::size_t i = 0; i < batch.series_ids.size() && i < 8; ++i) {
            ids += (i ? "," : "") + batch.series_ids[i];
        }
        if (batch.series_ids.size() > 8) {
            ids += ",...";
        }
        fail_runtime("non-finite " + what + " at step " + std::to_string(step) + " (batch " + std::to_string(step) +
                     ", series " + ids + ")");
    };
    if (!std::isfinite(lg.loss.total)) {
        report("loss");
    }
    const double norm = clip_grad_norm(lg.grads, cfg.grad_clip);
    if (!std::isfinite(norm)) {
        report("gradient");
    }
    adamw_update(model, state, lg.grads, lr_schedule(step, cfg.steps, cfg.lr, cfg.warmup_steps), cfg);
    return lg.loss;
}

BatchSampler::BatchSampler(const std::vector<TimeSeries>& corpus, const ModelConfig& model, const TrainConfig& train,
                           std::uint64_t seed)
    : corpus_(&corpus), model_(model), train_(train), seed_(seed) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (corpus[i].size() >= static_cast<std::size_t>(train.horizon) + 1) {
            eligible_.push_back(i);
        }
    }
    if (eligible_.empty()) {
        fail_validation("corpus has no series longer than the horizon (" + std::to_string(train.horizon) + ")");
    }
}

TeacherForcedBatch BatchSampler::batch_for_step(long step) const {
    Rng rng = make_rng(seed_, "batch", static_cast<std::uint64_t>(step));
    std::uniform_int_distribution<std::size_t> pick(0, eligible_.size() - 1);
    std::vector<ScaledWindow> windows;
    windows.reserve(static_cast<std::size_t>(train_.batch_size));
    for (int i = 0; i < train_.batch_size; ++i) {
        const TimeSeries& s = (*corpus_)[eligible_[pick(rng)]];
        WindowSample ws = sample_window(s, static_cast<std::size_t>(model_.context_len),
                                        static_cast<std::size_t>(train_.horizon), rng,
                                        static_cast<std::size_t>(model_.coarsest_patch()));
        windows.push_back(std::move(*ws.window));
    }
    return assemble_teacher_forcing(windows, model_, train_.horizon);
}

template LossVars<float> loss_from_head(Graph<float>&, ad::Var, std::span<const double>, int, int);
template LossVars<double> loss_from_head(Graph<double>&, ad::Var, std::span<const double>, int, int);
template LossVars<float> training_loss(Graph<float>&, const TeacherForcedBatch&);
template LossVars<double> training_loss(Graph<double>&, const TeacherForcedBatch&);
template LossAndGrad<float> loss_and_grad(const Model<float>&, const TeacherForcedBatch&, double, std::uint64_t);
template LossAndGrad<double> loss_and_grad(const Model<double>&, const TeacherForcedBatch&, double, std::uint64_t);
template struct AdamState<float>;
template struct AdamState<double>;
template double clip_grad_norm(std::vector<std::vector<float>>&, double);
template double clip_grad_norm(std::vector<std::vector<double>>&, double);
template void adamw_update(Model<float>&, AdamState<float>&, const std::vector<std::vector<float>>&, double,
                           const TrainConfig&);
template void adamw_update(Model<double>&, AdamState<double>&, const std::vector<std::vector<double>>&, double,
                           const TrainConfig&);

} // namespace tsfound
