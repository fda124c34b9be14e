#include "tsfound/backbone.hpp"

#include "tsfound/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace tsfound {

int relative_bucket(int relative_position, bool bidirectional, int num_buckets, int max_distance) {
    int bucket = 0;
    int n = -relative_position;
    if (bidirectional) {
        num_buckets /= 2;
        if (n < 0) {
            bucket += num_buckets;
        }
        n = std::abs(n);
    } else {
        n = std::max(n, 0);
    }
    const int max_exact = num_buckets / 2;
    if (n < max_exact) {
        return bucket + n;
    }
    // Log-spaced buckets, evaluated in single precision like the reference.
    const float ratio = std::log(static_cast<float>(n) / static_cast<float>(max_exact)) /
                        static_cast<float>(std::log(static_cast<double>(max_distance) / max_exact));
    int large = max_exact + static_cast<int>(ratio * static_cast<float>(num_buckets - max_exact));
    large = std::min(large, num_buckets - 1);
    return bucket + large;
}

std::vector<int> bucket_table(int queries, int keys, bool bidirectional, int num_buckets, int max_distance) {
    std::vector<int> out(static_cast<std::size_t>(queries) * keys);
    for (int i = 0; i < queries; ++i) {
        for (int j = 0; j < keys; ++j) {
            out[static_cast<std::size_t>(i) * keys + j] = relative_bucket(j - i, bidirectional, num_buckets, max_distance);
        }
    }
    return out;
}

template <typename T>
ad::Var attention_block(Graph<T>& g, ad::Var x_q, ad::Var x_kv, const AttentionIds& ids, ad::Var bias,
                        const ad::AttentionShape& shape, std::vector<std::uint8_t> key_mask, bool causal) {
    ad::Var q = linear(g, x_q, ids.q);
    ad::Var k = linear(g, x_kv, ids.k);
    ad::Var v = linear(g, x_kv, ids.v);
    ad::Var a = ad::attention(g.tape, q, k, v, bias, shape, std::move(key_mask), causal);
    return linear(g, a, ids.o);
}

namespace {

template <typename T>
ad::Var feed_forward(Graph<T>& g, ad::Var x, int w_in, int w_out) {
    return linear(g, dropout(g, ad::gelu(g.tape, linear(g, x, w_in))), w_out);
}

template <typename T>
ad::Var residual(Graph<T>& g, ad::Var x, ad::Var branch) {
    return ad::add(g.tape, x, dropout(g, branch));
}

} // namespace

template <typename T>
ad::Var encode(Graph<T>& g, ad::Var fused, const std::vector<std::uint8_t>& patch_mask, int batch, int n) {
    const ModelConfig& cfg = *g.cfg;
    const ParamLayout& L = *g.layout;
    if (static_cast<int>(patch_mask.size()) != batch * n) {
        fail_validation("encode: patch mask size mismatch");
    }
    for (int b = 0; b < batch; ++b) {
        const auto first = patch_mask.begin() + static_cast<std::ptrdiff_t>(b) * n;
        if (std::none_of(first, first + n, [](std::uint8_t m) { return m != 0; })) {
            fail_validation("empty context");
        }
    }
    // One bias per stack, shared by its layers.
    ad::Var bias = ad::gather_bias(g.tape, g[L.encoder_bias],
                                   bucket_table(n, n, true, cfg.rel_buckets, cfg.rel_max_distance));
    const ad::AttentionShape shape{batch, n, n, cfg.heads};
    ad::Var h = fused;
    for (const auto& layer : L.encoder) {
        ad::Var x = ad::rms_norm(g.tape, h, g[layer.attn_norm]);
        h = residual(g, h, attention_block(g, x, x, layer.attn, bias, shape, patch_mask, false));
        x = ad::rms_norm(g.tape, h, g[layer.ffn_norm]);
        h = residual(g, h, feed_forward(g, x, layer.ffn_in, layer.ffn_out));
    }
    return ad::rms_norm(g.tape, h, g[L.encoder_norm]);
}

template <typename T>
ad::Var decode(Graph<T>& g, ad::Var tokens, int batch, int num_tokens, ad::Var memory,
               const std::vector<std::uint8_t>& memory_mask, int memory_len) {
    const ModelConfig& cfg = *g.cfg;
    const ParamLayout& L = *g.layout;
    if (static_cast<int>(memory_mask.size()) != batch * memory_len) {
        fail_validation("decode: memory mask size mismatch");
    }
    ad::Var bias = ad::gather_bias(g.tape, g[L.decoder_bias],
                                   bucket_table(num_tokens, num_tokens, false, cfg.rel_buckets, cfg.rel_max_distance));
    const ad::AttentionShape self_shape{batch, num_tokens, num_tokens, cfg.heads};
    const ad::AttentionShape cross_shape{batch, num_tokens, memory_len, cfg.heads};
    const std::vector<std::uint8_t> all_valid(static_cast<std::size_t>(batch) * num_tokens, 1);
    ad::Var h = tokens;
    for (const auto& layer : L.decoder) {
        ad::Var x = ad::rms_norm(g.tape, h, g[layer.self_norm]);
        h = residual(g, h, attention_block(g, x, x, layer.self_attn, bias, self_shape, all_valid, true));
        x = ad::rms_norm(g.tape, h, g[layer.cross_norm]);
        h = residual(g, h,
                     attention_block(g, x, memory, layer.cross_attn, ad::Var{}, cross_shape, memory_mask, false));
        x = ad::rms_norm(g.tape, h, g[layer.ffn_norm]);
        h = residual(g, h, feed_forward(g, x, layer.ffn_in, layer.ffn_out));
    }
    return ad::rms_norm(g.tape, h, g[L.decoder_norm]);
}

template ad::Var attention_block(Graph<float>&, ad::Var, ad::Var, const AttentionIds&, ad::Var,
                                 const ad::AttentionShape&, std::vector<std::uint8_t>, bool);
template ad::Var attention_block(Graph<double>&, ad::Var, ad::Var, const AttentionIds&, ad::Var,
                                 const ad::AttentionShape&, std::vector<std::uint8_t>, bool);
template ad::Var encode(Graph<float>&, ad::Var, const std::vector<std::uint8_t>&, int, int);
template ad::Var encode(Graph<double>&, ad::Var, const std::vector<std::uint8_t>&, int, int);
template ad::Var decode(Graph<float>&, ad::Var, int, int, ad::Var, const std::vector<std::uint8_t>&, int);
template ad::Var decode(Graph<double>&, ad::Var, int, int, ad::Var, const std::vector<std::uint8_t>&, int);

} // namespace tsfound
