#pragma once

#include "tsfound/autodiff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tsfound {

struct ModelConfig {
    std::vector<int> patch_sizes{16, 32}; // P_1 < ... < P_K, powers of two
    int output_patch = 32;                // P_o
    int context_len = 512;                // C
    int d_model = 128;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int heads = 4;
    int d_ff = 512;
    int rel_buckets = 32;
    int rel_max_distance = 128;
    double dropout = 0.0;
    std::vector<double> quantiles{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    int finest_patch() const { return patch_sizes.front(); }
    int coarsest_patch() const { return patch_sizes.back(); }
    int num_quantiles() const { return static_cast<int>(quantiles.size()); }
    int head_width() const { return output_patch * (num_quantiles() + 1); }
};

/// Throws Validation naming the first offending field.
void validate(const ModelConfig& cfg);

enum class InitKind { Normal, Zeros, Ones };

struct ParamSpec {
    std::string name;
    int rows = 0;
    int cols = 0;
    InitKind init = InitKind::Zeros;
    double init_std = 0.0;

    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Indices into ParamLayout::specs.
struct ResidualIds {
    int w1, b1, w2, b2;
};
struct ProjectorIds {
    int in_w, in_b;
    ResidualIds hidden[2];
};
struct AttentionIds {
    int q, k, v, o;
};
struct EncoderLayerIds {
    int attn_norm;
    AttentionIds attn;
    int ffn_norm, ffn_in, ffn_out;
};
struct DecoderLayerIds {
    int self_norm;
    AttentionIds self_attn;
    int cross_norm;
    AttentionIds cross_attn;
    int ffn_norm, ffn_in, ffn_out;
};
struct HeadIds {
    int w1, b1, w2, b2, wr, br;
};

struct ParamLayout {
    std::vector<ParamSpec> specs;
    std::vector<ProjectorIds> projectors; // one per patch size
    int start_token = -1;
    int encoder_bias = -1;
    std::vector<EncoderLayerIds> encoder;
    int encoder_norm = -1;
    int decoder_bias = -1;
    std::vector<DecoderLayerIds> decoder;
    int decoder_norm = -1;
    HeadIds head{};

    std::size_t parameter_count() const;
    int find(const std::string& name) const; // -1 if absent
};

ParamLayout make_layout(const ModelConfig& cfg);

/// Analytic parameter count implied by the configuration.
std::size_t param_count(const ModelConfig& cfg);

template <typename T>
class Model {
public:
    explicit Model(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    const ParamLayout& layout() const { return layout_; }

    std::vector<std::vector<T>>& values() { return values_; }
    const std::vector<std::vector<T>>& values() const { return values_; }
    std::vector<T>& param(int id) { return values_.at(static_cast<std::size_t>(id)); }
    const std::vector<T>& param(int id) const { return values_.at(static_cast<std::size_t>(id)); }

    void initialize(std::uint64_t seed);
    void set_all(T v);

    template <typename U>
    Model<U> cast() const {
        Model<U> out(cfg_);
        for (std::size_t i = 0; i < values_.size(); ++i) {
            out.values()[i].assign(values_[i].begin(), values_[i].end());
        }
        return out;
    }

private:
    ModelConfig cfg_;
    ParamLayout layout_;
    std::vector<std::vector<T>> values_;
};

/// A forward graph with every parameter bound as a tape leaf.
template <typename T>
struct Graph {
    ad::Tape<T> tape;
    std::vector<ad::Var> p;
    const ModelConfig* cfg = nullptr;
    const ParamLayout* layout = nullptr;
    // Dropout masks are drawn from dropout_seed; rate 0 disables them.
    double dropout = 0.0;
    std::uint64_t dropout_seed = 0;
    std::uint64_t dropout_calls = 0;

    ad::Var operator[](int id) const { return p.at(static_cast<std::size_t>(id)); }
};

template <typename T>
Graph<T> bind(const Model<T>& model, bool requires_grad);

/// Gradients of every parameter after tape.backward(); zeros where unused.
template <typename T>
std::vector<std::vector<T>> collect_grads(Graph<T>& g);

/// Linear layer x W (+ b).
template <typename T>
ad::Var linear(Graph<T>& g, ad::Var x, int w, int b = -1);

/// Inverted dropout; identity unless g.dropout > 0.
template <typename T>
ad::Var dropout(Graph<T>& g, ad::Var x);

/// Two-layer residual MLP: x W2 + b2 of gelu(x W1 + b1), plus x Wr + br.
template <typename T>
ad::Var residual_mlp(Graph<T>& g, ad::Var x, const HeadIds& ids);

} // namespace tsfound
