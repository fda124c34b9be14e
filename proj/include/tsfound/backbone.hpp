#pragma once

#include "tsfound/model.hpp"

#include <cstdint>
#include <vector>

namespace tsfound {

/// T5 relative-position bucket for relative_position = key - query.
int relative_bucket(int relative_position, bool bidirectional, int num_buckets, int max_distance);

/// Row-major [queries x keys] table of bucket ids.
std::vector<int> bucket_table(int queries, int keys, bool bidirectional, int num_buckets, int max_distance);

/// Projects x_q / x_kv through one attention block's q, k, v, o weights.
template <typename T>
ad::Var attention_block(Graph<T>& g, ad::Var x_q, ad::Var x_kv, const AttentionIds& ids, ad::Var bias,
                        const ad::AttentionShape& shape, std::vector<std::uint8_t> key_mask, bool causal);

/// Bidirectional encoder over [batch*n, d]; padded patches are masked as keys.
template <typename T>
ad::Var encode(Graph<T>& g, ad::Var fused, const std::vector<std::uint8_t>& patch_mask, int batch, int n);

/// Causal decoder over [batch*tokens, d] with cross-attention to memory.
template <typename T>
ad::Var decode(Graph<T>& g, ad::Var tokens, int batch, int num_tokens, ad::Var memory,
               const std::vector<std::uint8_t>& memory_mask, int memory_len);

} // namespace tsfound
