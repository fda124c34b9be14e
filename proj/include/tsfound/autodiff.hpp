#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// Every node stores its forward value and (lazily) its gradient. Ops append a
// node together with a closure that pushes the node's gradient into its
// inputs; Tape::backward runs those closures in reverse creation order, which
// is a valid topological order because inputs always precede outputs.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace tsfound::ad {

struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

template <typename T>
class Tape {
public:
    using Backward = std::function<void(Tape&, Var self)>;

    Var leaf(int rows, int cols, std::span<const T> values, bool requires_grad = true);
    Var constant(int rows, int cols, std::vector<T> values);
    Var push(int rows, int cols, std::vector<T> value, bool requires_grad, Backward backward);

    int rows(Var v) const { return nodes_[v.id].rows; }
    int cols(Var v) const { return nodes_[v.id].cols; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    std::span<const T> value(Var v) const { return nodes_[v.id].value; }
    T scalar(Var v) const { return nodes_[v.id].value.at(0); }

    // Gradient buffer of a node; zero-filled on first access.
    std::vector<T>& grad(Var v);
    // Empty span if the node never received a gradient.
    std::span<const T> grad_view(Var v) const { return nodes_[v.id].grad; }

    // Seeds d(out)/d(out) = 1 for a 1x1 node and back-propagates.
    void backward(Var out);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        int rows = 0;
        int cols = 0;
        bool requires_grad = false;
        std::vector<T> value;
        std::vector<T> grad;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Ops. Shapes are checked; mismatches throw std::invalid_argument.

template <typename T> Var matmul(Tape<T>& t, Var a, Var b);
template <typename T> Var add(Tape<T>& t, Var a, Var b);
// a[n,m] + row[1,m] broadcast over rows.
template <typename T> Var add_row(Tape<T>& t, Var a, Var row);
template <typename T> Var gelu(Tape<T>& t, Var a);
// Row-wise RMS normalisation with a learned per-column gain, no bias.
template <typename T> Var rms_norm(Tape<T>& t, Var a, Var gain, T eps = T(1e-6));
template <typename T> Var concat_rows(Tape<T>& t, Var a, Var b);

// out[r] = sum_e weight_e * in[src_e] over the entries of output row r.
struct RowMap {
    int out_rows = 0;
    std::vector<int> offsets;  // size out_rows + 1
    std::vector<int> src;
    std::vector<double> weight;

    void add_row(std::span<const int> sources, double each_weight);
};
template <typename T> Var row_combine(Tape<T>& t, Var a, const RowMap& map);

// Gathers a [buckets, heads] table into a [heads, n] bias using bucket ids.
template <typename T> Var gather_bias(Tape<T>& t, Var table, std::vector<int> bucket_ids);

struct AttentionShape {
    int batch = 1;
    int queries = 1;
    int keys = 1;
    int heads = 1;
};

// Multi-head scaled dot-product attention with additive position bias and a
// key mask. q is [batch*queries, d], k and v are [batch*keys, d]. bias, if
// valid, is [heads, queries*keys] shared across the batch. key_mask holds
// batch*keys flags; causal admits key j for query i only when j <= i.
// Returns the concatenated heads [batch*queries, d] (output projection is a
// separate matmul).
template <typename T>
Var attention(Tape<T>& t, Var q, Var k, Var v, Var bias, const AttentionShape& shape,
              std::vector<std::uint8_t> key_mask, bool causal,
              std::vector<T>* probs_out = nullptr);

// Elementwise product with a constant array (dropout masks).
template <typename T> Var mul_const(Tape<T>& t, Var a, std::vector<T> m);

// Scalar sum(a .* w) with constant weights, for gradient checks.
template <typename T> Var dot_const(Tape<T>& t, Var a, std::vector<T> w);

// Additive mask penalty applied to inadmissible attention logits.
inline constexpr double kMaskPenalty = -1e9;

} // namespace tsfound::ad
