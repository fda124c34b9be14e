#pragma once

// Multi-resolution patch tokenisation.
//
// A context of length C is split at every configured patch size P_k into
// N_k = C / P_k contiguous patches. Each patch is concatenated with its
// point-mask segment and projected to d by the resolution's own residual
// MLP. Coarse groups are replicated up to the finest count N_1 and the
// groups are summed. Decoder tokens use the output patch size P_o as their
// stride so that a token never sees points past its own span.

#include "tsfound/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace tsfound {

struct PatchGroup {
    int patch_size = 0;
    std::vector<std::vector<double>> patches;
    std::vector<std::vector<std::uint8_t>> masks;
};

PatchGroup patch_divide(std::span<const double> seq, std::span<const std::uint8_t> mask, int patch_size);

/// 0-based source index for each of the n_finest outputs: ceil(j*N_k/N_1).
std::vector<int> upsample_indices(int n_group, int n_finest);

std::vector<std::vector<double>> upsample_group(const std::vector<std::vector<double>>& group, int n_finest);

/// A patch is padding (0) iff every point-mask bit inside it is 0.
std::vector<std::uint8_t> patch_level_mask(std::span<const std::uint8_t> point_mask, int finest_patch);

struct FusedEmbedding {
    std::vector<std::vector<double>> embeddings; // N_1 x d
    std::vector<std::uint8_t> patch_mask;        // N_1
};

/// Elementwise sum of already-upsampled groups plus the patch-level mask.
FusedEmbedding fuse_groups(const std::vector<std::vector<std::vector<double>>>& upsampled,
                           std::span<const std::uint8_t> point_mask, int finest_patch);

// ---------------------------------------------------------------------------
// Graph versions used by the model.

/// input is [n, 2*P_k] (values then mask bits); returns [n, d].
template <typename T>
ad::Var project_patches(Graph<T>& g, int resolution, ad::Var input);

struct EncoderInput {
    ad::Var fused;                         // [batch*N_1, d]
    std::vector<std::uint8_t> patch_mask;  // batch*N_1
    int batch = 0;
    int patches = 0;                       // N_1
};

/// values and mask hold `batch` rows of length C each.
template <typename T>
EncoderInput embed_context(Graph<T>& g, std::span<const double> values, std::span<const std::uint8_t> mask,
                           int batch);

/// prefix holds `batch` rows of length prefix_len (a multiple of P_o); mask
/// may be empty (all valid). Returns [batch*(1 + prefix_len/P_o), d] with
/// the learned start token first in each sample.
template <typename T>
ad::Var embed_decoder_tokens(Graph<T>& g, std::span<const double> prefix, std::span<const std::uint8_t> mask,
                             int batch, int prefix_len);

/// Single-patch projection, for inspection and tests.
std::vector<double> project_patch(const Model<double>& model, std::span<const double> patch,
                                  std::span<const std::uint8_t> mask_segment, int resolution);

} // namespace tsfound
