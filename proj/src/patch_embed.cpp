#include "tsfound/patch_embed.hpp"

#include "tsfound/error.hpp"

namespace tsfound {

PatchGroup patch_divide(std::span<const double> seq, std::span<const std::uint8_t> mask, int patch_size) {
    if (patch_size <= 0 || seq.size() % static_cast<std::size_t>(patch_size) != 0) {
        fail_validation("patch_divide: length " + std::to_string(seq.size()) + " is not divisible by patch size " +
                        std::to_string(patch_size));
    }
    if (mask.size() != seq.size()) {
        fail_validation("patch_divide: mask length differs from sequence length");
    }
    PatchGroup g;
    g.patch_size = patch_size;
    const std::size_t P = static_cast<std::size_t>(patch_size);
    for (std::size_t start = 0; start < seq.size(); start += P) {
        g.patches.emplace_back(seq.begin() + start, seq.begin() + start + P);
        g.masks.emplace_back(mask.begin() + start, mask.begin() + start + P);
    }
    return g;
}

std::vector<int> upsample_indices(int n_group, int n_finest) {
    if (n_group <= 0 || n_finest % n_group != 0) {
        fail_validation("upsample: group size must divide the finest patch count");
    }
    std::vector<int> idx(static_cast<std::size_t>(n_finest));
    for (int j = 1; j <= n_finest; ++j) {
        // ceil(j * n_group / n_finest), converted to 0-based
        idx[j - 1] = (j * n_group + n_finest - 1) / n_finest - 1;
    }
    return idx;
}

std::vector<std::vector<double>> upsample_group(const std::vector<std::vector<double>>& group, int n_finest) {
    const auto idx = upsample_indices(static_cast<int>(group.size()), n_finest);
    std::vector<std::vector<double>> out;
    out.reserve(idx.size());
    for (int i : idx) {
        out.push_back(group[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::vector<std::uint8_t> patch_level_mask(std::span<const std::uint8_t> point_mask, int finest_patch) {
    if (finest_patch <= 0 || point_mask.size() % static_cast<std::size_t>(finest_patch) != 0) {
        fail_validation("patch_level_mask: mask length not divisible by patch size");
    }
    std::vector<std::uint8_t> out(point_mask.size() / static_cast<std::size_t>(finest_patch), 0);
    for (std::size_t i = 0; i < point_mask.size(); ++i) {
        if (point_mask[i]) {
            out[i / static_cast<std::size_t>(finest_patch)] = 1;
        }
    }
    return out;
}

FusedEmbedding fuse_groups(const std::vector<std::vector<std::vector<double>>>& upsampled,
                           std::span<const std::uint8_t> point_mask, int finest_patch) {
    if (upsampled.empty()) {
        fail_validation("fuse_groups: no groups");
    }
    FusedEmbedding out;
    out.patch_mask = patch_level_mask(point_mask, finest_patch);
    const std::size_t n = out.patch_mask.size();
    out.embeddings = upsampled.front();
    for (const auto& group : upsampled) {
        if (group.size() != n) {
            fail_validation("fuse_groups: group length " + std::to_string(group.size()) + " differs from " +
                            std::to_string(n));
        }
    }
    for (std::size_t k = 1; k < upsampled.size(); ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            if (upsampled[k][j].size() != out.embeddings[j].size()) {
                fail_validation("fuse_groups: embedding width mismatch");
            }
            for (std::size_t c = 0; c < out.embeddings[j].size(); ++c) {
                out.embeddings[j][c] += upsampled[k][j][c];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

template <typename T>
ad::Var project_patches(Graph<T>& g, int resolution, ad::Var input) {
    const ProjectorIds& ids = g.layout->projectors.at(static_cast<std::size_t>(resolution));
    ad::Var h = linear(g, input, ids.in_w, ids.in_b);
    for (const auto& layer : ids.hidden) {
        ad::Var inner = ad::gelu(g.tape, linear(g, h, layer.w1, layer.b1));
        h = ad::add(g.tape, h, linear(g, inner, layer.w2, layer.b2));
    }
    return h;
}

namespace {

// Rows of [patch values, patch mask] for consecutive patches of size P over
// `rows` sequences of length len.
template <typename T>
std::vector<T> projector_rows(std::span<const double> values, std::span<const std::uint8_t> mask, int rows,
                              int len, int P) {
    const int per_row = len / P;
    std::vector<T> out(static_cast<std::size_t>(rows) * per_row * 2 * P);
    std::size_t o = 0;
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < per_row; ++j) {
            const std::size_t base = static_cast<std::size_t>(r) * len + static_cast<std::size_t>(j) * P;
            for (int i = 0; i < P; ++i) {
                out[o++] = static_cast<T>(values[base + i]);
            }
            for (int i = 0; i < P; ++i) {
                out[o++] = mask.empty() ? T(1) : static_cast<T>(mask[base + i]);
            }
        }
    }
    return out;
}

} // namespace

template <typename T>
EncoderInput embed_context(Graph<T>& g, std::span<const double> values, std::span<const std::uint8_t> mask,
                           int batch) {
    const ModelConfig& cfg = *g.cfg;
    const int C = cfg.context_len;
    if (values.size() != static_cast<std::size_t>(batch) * C || mask.size() != values.size()) {
        fail_validation("embed_context: expected " + std::to_string(batch) + " rows of length " + std::to_string(C));
    }
    EncoderInput out;
    out.batch = batch;
    out.patches = C / cfg.finest_patch();
    const int n1 = out.patches;
    for (std::size_t k = 0; k < cfg.patch_sizes.size(); ++k) {
        const int P = cfg.patch_sizes[k];
        const int nk = C / P;
        ad::Var input = g.tape.constant(batch * nk, 2 * P, projector_rows<T>(values, mask, batch, C, P));
        ad::Var z = project_patches(g, static_cast<int>(k), input);
        if (nk != n1) {
            const auto idx = upsample_indices(nk, n1);
            ad::RowMap map;
            for (int b = 0; b < batch; ++b) {
                for (int j = 0; j < n1; ++j) {
                    const int src = b * nk + idx[static_cast<std::size_t>(j)];
                    map.add_row(std::span<const int>(&src, 1), 1.0);
                }
            }
            z = ad::row_combine(g.tape, z, map);
        }
        out.fused = k == 0 ? z : ad::add(g.tape, out.fused, z);
    }
    out.patch_mask.reserve(static_cast<std::size_t>(batch) * n1);
    for (int b = 0; b < batch; ++b) {
        auto pm = patch_level_mask(mask.subspan(static_cast<std::size_t>(b) * C, C), cfg.finest_patch());
        out.patch_mask.insert(out.patch_mask.end(), pm.begin(), pm.end());
    }
    return out;
}

template <typename T>
ad::Var embed_decoder_tokens(Graph<T>& g, std::span<const double> prefix, std::span<const std::uint8_t> mask,
                             int batch, int prefix_len) {
    const ModelConfig& cfg = *g.cfg;
    const int Po = cfg.output_patch;
    if (prefix_len < 0 || prefix_len % Po != 0) {
        fail_validation("embed_decoder_tokens: prefix length " + std::to_string(prefix_len) +
                        " is not a multiple of the output patch size " + std::to_string(Po));
    }
    if (prefix.size() != static_cast<std::size_t>(batch) * prefix_len ||
        (!mask.empty() && mask.size() != prefix.size())) {
        fail_validation("embed_decoder_tokens: prefix shape mismatch");
    }
    const int body = prefix_len / Po; // tokens after the start token
    const int T_len = body + 1;
    ad::Var start = g[g.layout->start_token];
    ad::RowMap place;
    if (body == 0) {
        for (int b = 0; b < batch; ++b) {
            const int src = 0;
            place.add_row(std::span<const int>(&src, 1), 1.0);
        }
        return ad::row_combine(g.tape, start, place);
    }
    ad::Var tokens;
    for (std::size_t k = 0; k < cfg.patch_sizes.size(); ++k) {
        const int P = cfg.patch_sizes[k];
        const int per_token = Po / P;
        ad::Var input =
            g.tape.constant(batch * body * per_token, 2 * P, projector_rows<T>(prefix, mask, batch, prefix_len, P));
        ad::Var z = project_patches(g, static_cast<int>(k), input);
        if (per_token > 1) {
            ad::RowMap avg;
            std::vector<int> src(static_cast<std::size_t>(per_token));
            for (int r = 0; r < batch * body; ++r) {
                for (int i = 0; i < per_token; ++i) {
                    src[static_cast<std::size_t>(i)] = r * per_token + i;
                }
                avg.add_row(src, 1.0 / per_token);
            }
            z = ad::row_combine(g.tape, z, avg);
        }
        tokens = k == 0 ? z : ad::add(g.tape, tokens, z);
    }
    ad::Var all = ad::concat_rows(g.tape, start, tokens);
    for (int b = 0; b < batch; ++b) {
        for (int t = 0; t < T_len; ++t) {
            const int src = t == 0 ? 0 : 1 + b * body + (t - 1);
            place.add_row(std::span<const int>(&src, 1), 1.0);
        }
    }
    return ad::row_combine(g.tape, all, place);
}

std::vector<double> project_patch(const Model<double>& model, std::span<const double> patch,
                                  std::span<const std::uint8_t> mask_segment, int resolution) {
    const auto& cfg = model.config();
    if (resolution < 0 || resolution >= static_cast<int>(cfg.patch_sizes.size())) {
        fail_validation("project_patch: no projector for resolution " + std::to_string(resolution));
    }
    const int P = cfg.patch_sizes[static_cast<std::size_t>(resolution)];
    if (static_cast<int>(patch.size()) != P || mask_segment.size() != patch.size()) {
        fail_validation("project_patch: patch length must equal the resolution's patch size");
    }
    Graph<double> g = bind(model, false);
    ad::Var input = g.tape.constant(1, 2 * P, projector_rows<double>(patch, mask_segment, 1, P, P));
    ad::Var z = project_patches(g, resolution, input);
    auto v = g.tape.value(z);
    return {v.begin(), v.end()};
}

template ad::Var project_patches(Graph<float>&, int, ad::Var);
template ad::Var project_patches(Graph<double>&, int, ad::Var);
template EncoderInput embed_context(Graph<float>&, std::span<const double>, std::span<const std::uint8_t>, int);
template EncoderInput embed_context(Graph<double>&, std::span<const double>, std::span<const std::uint8_t>, int);
template ad::Var embed_decoder_tokens(Graph<float>&, std::span<const double>, std::span<const std::uint8_t>, int,
                                      int);
template ad::Var embed_decoder_tokens(Graph<double>&, std::span<const double>, std::span<const std::uint8_t>, int,
                                      int);

} // namespace tsfound
