#include "tsfound/model.hpp"

#include "tsfound/error.hpp"
#include "tsfound/random.hpp"

#include <cmath>

namespace tsfound {

namespace {

bool is_pow2(int v) {
    return v > 0 && (v & (v - 1)) == 0;
}

} // namespace

void validate(const ModelConfig& cfg) {
    if (cfg.patch_sizes.empty()) {
        fail_validation("model.patch_sizes: at least one patch size is required");
    }
    for (std::size_t i = 0; i < cfg.patch_sizes.size(); ++i) {
        if (!is_pow2(cfg.patch_sizes[i])) {
            fail_validation("model.patch_sizes: " + std::to_string(cfg.patch_sizes[i]) + " is not a power of 2");
        }
        if (i > 0 && cfg.patch_sizes[i] <= cfg.patch_sizes[i - 1]) {
            fail_validation("model.patch_sizes: must be strictly increasing");
        }
    }
    if (!is_pow2(cfg.output_patch) || cfg.output_patch < cfg.coarsest_patch()) {
        fail_validation("model.output_patch: must be a power of 2 no smaller than the largest patch size");
    }
    if (cfg.context_len <= 0 || cfg.context_len % cfg.coarsest_patch() != 0) {
        fail_validation("model.context_len: must be a positive multiple of the largest patch size (" +
                        std::to_string(cfg.coarsest_patch()) + ")");
    }
    if (cfg.d_model <= 0 || cfg.heads <= 0 || cfg.d_model % cfg.heads != 0) {
        fail_validation("model.d_model: must be a positive multiple of model.heads");
    }
    if (cfg.encoder_layers < 1 || cfg.decoder_layers < 1) {
        fail_validation("model.encoder_layers/decoder_layers: need at least one layer each");
    }
    if (cfg.d_ff < 1) {
        fail_validation("model.d_ff: must be positive");
    }
    if (cfg.rel_buckets < 2 || 2 * cfg.rel_max_distance <= cfg.rel_buckets) {
        fail_validation("model.rel_buckets/rel_max_distance: need buckets >= 2 and max distance > buckets/2");
    }
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) {
        fail_validation("model.dropout: must lie in [0, 1)");
    }
    if (cfg.quantiles.empty()) {
        fail_validation("model.quantiles: at least one level is required");
    }
    for (std::size_t i = 0; i < cfg.quantiles.size(); ++i) {
        const double q = cfg.quantiles[i];
        if (!(q > 0.0 && q < 1.0) || (i > 0 && q <= cfg.quantiles[i - 1])) {
            fail_validation("model.quantiles: levels must be strictly increasing inside (0, 1)");
        }
    }
}

std::size_t ParamLayout::parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : specs) {
        n += s.size();
    }
    return n;
}

int ParamLayout::find(const std::string& name) const {
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

ParamLayout make_layout(const ModelConfig& cfg) {
    validate(cfg);
    ParamLayout L;
    const int d = cfg.d_model;
    auto add = [&L](std::string name, int rows, int cols, InitKind init, double std = 0.0) {
        L.specs.push_back(ParamSpec{std::move(name), rows, cols, init, std});
        return static_cast<int>(L.specs.size() - 1);
    };
    auto weight = [&](std::string name, int rows, int cols, double extra = 1.0) {
        return add(std::move(name), rows, cols, InitKind::Normal, extra / std::sqrt(static_cast<double>(rows)));
    };
    auto attn = [&](const std::string& prefix, double out_scale) {
        AttentionIds a{};
        a.q = weight(prefix + ".q", d, d);
        a.k = weight(prefix + ".k", d, d);
        a.v = weight(prefix + ".v", d, d);
        a.o = weight(prefix + ".o", d, d, out_scale);
        return a;
    };

    for (std::size_t k = 0; k < cfg.patch_sizes.size(); ++k) {
        const std::string pre = "proj" + std::to_string(k);
        ProjectorIds p{};
        p.in_w = weight(pre + ".in.w", 2 * cfg.patch_sizes[k], d);
        p.in_b = add(pre + ".in.b", 1, d, InitKind::Zeros);
        for (int l = 0; l < 2; ++l) {
            const std::string h = pre + ".hidden" + std::to_string(l);
            p.hidden[l].w1 = weight(h + ".w1", d, d);
            p.hidden[l].b1 = add(h + ".b1", 1, d, InitKind::Zeros);
            p.hidden[l].w2 = weight(h + ".w2", d, d, 0.5);
            p.hidden[l].b2 = add(h + ".b2", 1, d, InitKind::Zeros);
        }
        L.projectors.push_back(p);
    }
    L.start_token = add("decoder.start", 1, d, InitKind::Normal, 1.0);

    const double enc_scale = 1.0 / std::sqrt(2.0 * cfg.encoder_layers);
    L.encoder_bias = add("encoder.rel_bias", cfg.rel_buckets, cfg.heads, InitKind::Zeros);
    for (int i = 0; i < cfg.encoder_layers; ++i) {
        const std::string pre = "encoder.layer" + std::to_string(i);
        EncoderLayerIds e{};
        e.attn_norm = add(pre + ".attn_norm", 1, d, InitKind::Ones);
        e.attn = attn(pre + ".attn", enc_scale);
        e.ffn_norm = add(pre + ".ffn_norm", 1, d, InitKind::Ones);
        e.ffn_in = weight(pre + ".ffn.in", d, cfg.d_ff);
        e.ffn_out = weight(pre + ".ffn.out", cfg.d_ff, d, enc_scale);
        L.encoder.push_back(e);
    }
    L.encoder_norm = add("encoder.final_norm", 1, d, InitKind::Ones);

    const double dec_scale = 1.0 / std::sqrt(3.0 * cfg.decoder_layers);
    L.decoder_bias = add("decoder.rel_bias", cfg.rel_buckets, cfg.heads, InitKind::Zeros);
    for (int i = 0; i < cfg.decoder_layers; ++i) {
        const std::string pre = "decoder.layer" + std::to_string(i);
        DecoderLayerIds e{};
        e.self_norm = add(pre + ".self_norm", 1, d, InitKind::Ones);
        e.self_attn = attn(pre + ".self_attn", dec_scale);
        e.cross_norm = add(pre + ".cross_norm", 1, d, InitKind::Ones);
        e.cross_attn = attn(pre + ".cross_attn", dec_scale);
        e.ffn_norm = add(pre + ".ffn_norm", 1, d, InitKind::Ones);
        e.ffn_in = weight(pre + ".ffn.in", d, cfg.d_ff);
        e.ffn_out = weight(pre + ".ffn.out", cfg.d_ff, d, dec_scale);
        L.decoder.push_back(e);
    }
    L.decoder_norm = add("decoder.final_norm", 1, d, InitKind::Ones);

    const int w = cfg.head_width();
    L.head.w1 = weight("head.w1", d, d);
    L.head.b1 = add("head.b1", 1, d, InitKind::Zeros);
    L.head.w2 = weight("head.w2", d, w, 0.5);
    L.head.b2 = add("head.b2", 1, w, InitKind::Zeros);
    L.head.wr = weight("head.wr", d, w, 0.5);
    L.head.br = add("head.br", 1, w, InitKind::Zeros);
    return L;
}

std::size_t param_count(const ModelConfig& cfg) {
    return make_layout(cfg).parameter_count();
}

template <typename T>
Model<T>::Model(ModelConfig cfg) : cfg_(std::move(cfg)), layout_(make_layout(cfg_)) {
    values_.reserve(layout_.specs.size());
    for (const auto& s : layout_.specs) {
        values_.emplace_back(s.size(), T(0));
    }
}

template <typename T>
void Model<T>::initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = 0; i < layout_.specs.size(); ++i) {
        const auto& s = layout_.specs[i];
        auto& v = values_[i];
        switch (s.init) {
        case InitKind::Zeros:
            std::fill(v.begin(), v.end(), T(0));
            break;
        case InitKind::Ones:
            std::fill(v.begin(), v.end(), T(1));
            break;
        case InitKind::Normal: {
            std::normal_distribution<double> normal(0.0, s.init_std);
            for (auto& x : v) {
                x = static_cast<T>(normal(rng));
            }
            break;
        }
        }
    }
}

template <typename T>
void Model<T>::set_all(T v) {
    for (auto& p : values_) {
        std::fill(p.begin(), p.end(), v);
    }
}

template <typename T>
Graph<T> bind(const Model<T>& model, bool requires_grad) {
    Graph<T> g;
    g.cfg = &model.config();
    g.layout = &model.layout();
    g.p.reserve(model.values().size());
    for (std::size_t i = 0; i < model.values().size(); ++i) {
        const auto& s = model.layout().specs[i];
        g.p.push_back(g.tape.leaf(s.rows, s.cols, model.values()[i], requires_grad));
    }
    return g;
}

template <typename T>
std::vector<std::vector<T>> collect_grads(Graph<T>& g) {
    std::vector<std::vector<T>> out;
    out.reserve(g.p.size());
    for (ad::Var v : g.p) {
        auto view = g.tape.grad_view(v);
        if (view.empty()) {
            out.emplace_back(g.tape.value(v).size(), T(0));
        } else {
            out.emplace_back(view.begin(), view.end());
        }
    }
    return out;
}

template <typename T>
ad::Var linear(Graph<T>& g, ad::Var x, int w, int b) {
    ad::Var y = ad::matmul(g.tape, x, g[w]);
    if (b >= 0) {
        y = ad::add_row(g.tape, y, g[b]);
    }
    return y;
}

template <typename T>
ad::Var dropout(Graph<T>& g, ad::Var x) {
    if (g.dropout <= 0.0) {
        return x;
    }
    Rng rng(stream_seed(g.dropout_seed, "dropout", g.dropout_calls++));
    std::bernoulli_distribution keep(1.0 - g.dropout);
    const T scale = static_cast<T>(1.0 / (1.0 - g.dropout));
    std::vector<T> mask(g.tape.value(x).size());
    for (auto& m : mask) {
        m = keep(rng) ? scale : T(0);
    }
    return ad::mul_const(g.tape, x, std::move(mask));
}

template <typename T>
ad::Var residual_mlp(Graph<T>& g, ad::Var x, const HeadIds& ids) {
    ad::Var hidden = ad::gelu(g.tape, linear(g, x, ids.w1, ids.b1));
    ad::Var main = linear(g, hidden, ids.w2, ids.b2);
    ad::Var skip = linear(g, x, ids.wr, ids.br);
    return ad::add(g.tape, main, skip);
}

template class Model<float>;
template class Model<double>;
template Graph<float> bind(const Model<float>&, bool);
template Graph<double> bind(const Model<double>&, bool);
template std::vector<std::vector<float>> collect_grads(Graph<float>&);
template std::vector<std::vector<double>> collect_grads(Graph<double>&);
template ad::Var linear(Graph<float>&, ad::Var, int, int);
template ad::Var linear(Graph<double>&, ad::Var, int, int);
template ad::Var dropout(Graph<float>&, ad::Var);
template ad::Var dropout(Graph<double>&, ad::Var);
template ad::Var residual_mlp(Graph<float>&, ad::Var, const HeadIds&);
template ad::Var residual_mlp(Graph<double>&, ad::Var, const HeadIds&);

} // namespace tsfound
