#pragma once

#include "tsfound/model.hpp"
#include "tsfound/series.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tsfound {

struct TrainConfig {
    long steps = 5000;
    int batch_size = 64;
    int horizon = 64; // H, a multiple of the output patch size
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    long warmup_steps = 0;
    double grad_clip = 1.0; // global norm; <= 0 disables
    long log_every = 50;
    long checkpoint_every = 1000;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& train, const ModelConfig& model);

struct LossBreakdown {
    double mse = 0.0;
    double ql = 0.0;
    double total = 0.0;
};

/// Encoder context, shifted-right decoder prefix and targets for a batch of
/// windows. Decoder input for token t >= 1 is future patch t-1; the target of
/// token t is future patch t.
struct TeacherForcedBatch {
    int batch = 0;
    int context_len = 0;
    int horizon = 0;
    int prefix_len = 0; // horizon - P_o
    std::vector<double> context;        // batch x C
    std::vector<std::uint8_t> mask;     // batch x C
    std::vector<double> decoder_prefix; // batch x prefix_len
    std::vector<double> targets;        // batch x H
    std::vector<std::string> series_ids;
};

TeacherForcedBatch assemble_teacher_forcing(std::span<const ScaledWindow> windows, const ModelConfig& cfg,
                                            int horizon);

/// Mean over steps of squared error.
double mse_loss(std::span<const double> targets, std::span<const double> forecasts);

/// (1/H) sum_i sum_q pinball_q(x_i, xhat_i^q); quantile_forecasts is H x Q row-major.
double quantile_loss(std::span<const double> targets, std::span<const double> quantile_forecasts,
                     std::span<const double> levels);

template <typename T>
struct LossVars {
    ad::Var mse;
    ad::Var ql;
    ad::Var total;
};

/// Loss nodes over raw head outputs [batch*tokens, P_o*(Q+1)].
template <typename T>
LossVars<T> loss_from_head(Graph<T>& g, ad::Var head_out, std::span<const double> targets, int batch,
                           int horizon);

/// Full teacher-forced forward pass to the three loss nodes.
template <typename T>
LossVars<T> training_loss(Graph<T>& g, const TeacherForcedBatch& batch);

template <typename T>
struct LossAndGrad {
    LossBreakdown loss;
    std::vector<std::vector<T>> grads;
};

template <typename T>
LossAndGrad<T> loss_and_grad(const Model<T>& model, const TeacherForcedBatch& batch, double dropout_rate = 0.0,
                             std::uint64_t dropout_seed = 0);

/// Linear decay lr0 * (1 - step/total), with optional linear warmup.
double lr_schedule(long step, long total, double lr0, long warmup = 0);

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    long updates = 0;

    static AdamState zeros_like(const Model<T>& model);
};

/// Scales grads in place so their global L2 norm is at most max_norm; returns
/// the norm before clipping.
template <typename T>
double clip_grad_norm(std::vector<std::vector<T>>& grads, double max_norm);

/// AdamW with decoupled weight decay and bias-corrected moments.
template <typename T>
void adamw_update(Model<T>& model, AdamState<T>& state, const std::vector<std::vector<T>>& grads, double lr,
                  const TrainConfig& cfg);

/// One optimisation step. Throws Runtime naming the batch when the loss or
/// gradient is not finite; parameters are untouched in that case.
LossBreakdown train_step(Model<float>& model, const TeacherForcedBatch& batch, AdamState<float>& state, long step,
                         const TrainConfig& cfg);

/// Deterministic batch source: the batch for a step depends only on
/// (seed, step), so runs can be resumed from any checkpoint.
class BatchSampler {
public:
    BatchSampler(const std::vector<TimeSeries>& corpus, const ModelConfig& model, const TrainConfig& train,
                 std::uint64_t seed);

    TeacherForcedBatch batch_for_step(long step) const;
    std::size_t eligible_series() const { return eligible_.size(); }

private:
    const std::vector<TimeSeries>* corpus_;
    std::vector<std::size_t> eligible_;
    ModelConfig model_;
    TrainConfig train_;
    std::uint64_t seed_;
};

} // namespace tsfound
