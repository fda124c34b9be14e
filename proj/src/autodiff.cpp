#include "tsfound/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tsfound::ad {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;
template <typename T>
using StridedC = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using Strided = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;

void require(bool ok, const char* what) {
    if (!ok) {
        throw std::invalid_argument(std::string("autodiff: ") + what);
    }
}

} // namespace

void RowMap::add_row(std::span<const int> sources, double each_weight) {
    if (offsets.empty()) {
        offsets.push_back(0);
    }
    for (int s : sources) {
        src.push_back(s);
        weight.push_back(each_weight);
    }
    offsets.push_back(static_cast<int>(src.size()));
    ++out_rows;
}

template <typename T>
Var Tape<T>::push(int rows, int cols, std::vector<T> value, bool requires_grad, Backward backward) {
    require(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) == value.size(),
            "value size does not match shape");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.requires_grad = requires_grad;
    n.value = std::move(value);
    if (requires_grad) {
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::leaf(int rows, int cols, std::span<const T> values, bool requires_grad) {
    return push(rows, cols, std::vector<T>(values.begin(), values.end()), requires_grad, nullptr);
}

template <typename T>
Var Tape<T>::constant(int rows, int cols, std::vector<T> values) {
    return push(rows, cols, std::move(values), false, nullptr);
}

template <typename T>
std::vector<T>& Tape<T>::grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) {
        n.grad.assign(n.value.size(), T(0));
    }
    return n.grad;
}

template <typename T>
void Tape<T>::backward(Var out) {
    require(nodes_[out.id].value.size() == 1, "backward needs a scalar output");
    require(nodes_[out.id].requires_grad, "output does not depend on any parameter");
    grad(out)[0] = T(1);
    for (std::int32_t i = out.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backward && !n.grad.empty()) {
            n.backward(*this, Var{i});
        }
    }
}

// ---------------------------------------------------------------------------

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
    const int n = t.rows(a), k = t.cols(a), m = t.cols(b);
    require(t.rows(b) == k, "matmul inner dimension mismatch");
    std::vector<T> out(static_cast<std::size_t>(n) * m);
    MapM<T>(out.data(), n, m).noalias() =
        CMapM<T>(t.value(a).data(), n, k) * CMapM<T>(t.value(b).data(), k, m);
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(n, m, std::move(out), rg, [a, b, n, k, m](Tape<T>& tp, Var self) {
        CMapM<T> g(tp.grad_view(self).data(), n, m);
        if (tp.requires_grad(a)) {
            MapM<T>(tp.grad(a).data(), n, k).noalias() +=
                g * CMapM<T>(tp.value(b).data(), k, m).transpose();
        }
        if (tp.requires_grad(b)) {
            MapM<T>(tp.grad(b).data(), k, m).noalias() +=
                CMapM<T>(tp.value(a).data(), n, k).transpose() * g;
        }
    });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
    require(t.rows(a) == t.rows(b) && t.cols(a) == t.cols(b), "add shape mismatch");
    auto va = t.value(a);
    auto vb = t.value(b);
    std::vector<T> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = va[i] + vb[i];
    }
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(t.rows(a), t.cols(a), std::move(out), rg, [a, b](Tape<T>& tp, Var self) {
        auto g = tp.grad_view(self);
        for (Var in : {a, b}) {
            if (tp.requires_grad(in)) {
                auto& gi = tp.grad(in);
                for (std::size_t i = 0; i < gi.size(); ++i) {
                    gi[i] += g[i];
                }
            }
        }
    });
}

template <typename T>
Var add_row(Tape<T>& t, Var a, Var row) {
    const int n = t.rows(a), m = t.cols(a);
    require(t.rows(row) == 1 && t.cols(row) == m, "add_row shape mismatch");
    auto va = t.value(a);
    auto vr = t.value(row);
    std::vector<T> out(va.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            out[static_cast<std::size_t>(i) * m + j] = va[static_cast<std::size_t>(i) * m + j] + vr[j];
        }
    }
    const bool rg = t.requires_grad(a) || t.requires_grad(row);
    return t.push(n, m, std::move(out), rg, [a, row, n, m](Tape<T>& tp, Var self) {
        auto g = tp.grad_view(self);
        if (tp.requires_grad(a)) {
            auto& ga = tp.grad(a);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += g[i];
            }
        }
        if (tp.requires_grad(row)) {
            auto& gr = tp.grad(row);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < m; ++j) {
                    gr[j] += g[static_cast<std::size_t>(i) * m + j];
                }
            }
        }
    });
}

template <typename T>
Var gelu(Tape<T>& t, Var a) {
    constexpr T c = T(0.7978845608028654); // sqrt(2/pi)
    constexpr T k = T(0.044715);
    auto va = t.value(a);
    std::vector<T> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T x = va[i];
        out[i] = T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x)));
    }
    return t.push(t.rows(a), t.cols(a), std::move(out), t.requires_grad(a),
                  [a, c, k](Tape<T>& tp, Var self) {
                      auto g = tp.grad_view(self);
                      auto x = tp.value(a);
                      auto& ga = tp.grad(a);
                      for (std::size_t i = 0; i < ga.size(); ++i) {
                          const T xi = x[i];
                          const T u = c * (xi + k * xi * xi * xi);
                          const T th = std::tanh(u);
                          const T du = c * (T(1) + T(3) * k * xi * xi);
                          const T d = T(0.5) * (T(1) + th) + T(0.5) * xi * (T(1) - th * th) * du;
                          ga[i] += g[i] * d;
                      }
                  });
}

template <typename T>
Var rms_norm(Tape<T>& t, Var a, Var gain, T eps) {
    const int n = t.rows(a), m = t.cols(a);
    require(t.rows(gain) == 1 && t.cols(gain) == m, "rms_norm gain shape mismatch");
    auto x = t.value(a);
    auto gv = t.value(gain);
    std::vector<T> out(x.size());
    std::vector<T> inv(n);
    for (int i = 0; i < n; ++i) {
        const T* row = x.data() + static_cast<std::size_t>(i) * m;
        T ss = 0;
        for (int j = 0; j < m; ++j) {
            ss += row[j] * row[j];
        }
        inv[i] = T(1) / std::sqrt(ss / T(m) + eps);
        for (int j = 0; j < m; ++j) {
            out[static_cast<std::size_t>(i) * m + j] = row[j] * inv[i] * gv[j];
        }
    }
    const bool rg = t.requires_grad(a) || t.requires_grad(gain);
    return t.push(n, m, std::move(out), rg,
                  [a, gain, n, m, inv = std::move(inv)](Tape<T>& tp, Var self) {
                      auto g = tp.grad_view(self);
                      auto x = tp.value(a);
                      auto gv = tp.value(gain);
                      if (tp.requires_grad(gain)) {
                          auto& gg = tp.grad(gain);
                          for (int i = 0; i < n; ++i) {
                              for (int j = 0; j < m; ++j) {
                                  const std::size_t p = static_cast<std::size_t>(i) * m + j;
                                  gg[j] += g[p] * x[p] * inv[i];
                              }
                          }
                      }
                      if (tp.requires_grad(a)) {
                          auto& ga = tp.grad(a);
                          for (int i = 0; i < n; ++i) {
                              const std::size_t base = static_cast<std::size_t>(i) * m;
                              // dy_j/dx_l = gain_j*inv*(delta_jl - x_j x_l inv^2 / m)
                              T dot = 0;
                              for (int j = 0; j < m; ++j) {
                                  dot += g[base + j] * gv[j] * x[base + j];
                              }
                              const T r = inv[i];
                              const T coeff = dot * r * r * r / T(m);
                              for (int l = 0; l < m; ++l) {
                                  ga[base + l] += g[base + l] * gv[l] * r - x[base + l] * coeff;
                              }
                          }
                      }
                  });
}

template <typename T>
Var concat_rows(Tape<T>& t, Var a, Var b) {
    require(t.cols(a) == t.cols(b), "concat_rows column mismatch");
    auto va = t.value(a);
    auto vb = t.value(b);
    std::vector<T> out;
    out.reserve(va.size() + vb.size());
    out.insert(out.end(), va.begin(), va.end());
    out.insert(out.end(), vb.begin(), vb.end());
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    const std::size_t split = va.size();
    return t.push(t.rows(a) + t.rows(b), t.cols(a), std::move(out), rg,
                  [a, b, split](Tape<T>& tp, Var self) {
                      auto g = tp.grad_view(self);
                      if (tp.requires_grad(a)) {
                          auto& ga = tp.grad(a);
                          for (std::size_t i = 0; i < ga.size(); ++i) {
                              ga[i] += g[i];
                          }
                      }
                      if (tp.requires_grad(b)) {
                          auto& gb = tp.grad(b);
                          for (std::size_t i = 0; i < gb.size(); ++i) {
                              gb[i] += g[split + i];
                          }
                      }
                  });
}

template <typename T>
Var row_combine(Tape<T>& t, Var a, const RowMap& map) {
    const int m = t.cols(a);
    const int in_rows = t.rows(a);
    require(static_cast<int>(map.offsets.size()) == map.out_rows + 1, "row map offsets malformed");
    for (int s : map.src) {
        require(s >= 0 && s < in_rows, "row map source out of range");
    }
    auto x = t.value(a);
    std::vector<T> out(static_cast<std::size_t>(map.out_rows) * m, T(0));
    for (int r = 0; r < map.out_rows; ++r) {
        T* dst = out.data() + static_cast<std::size_t>(r) * m;
        for (int e = map.offsets[r]; e < map.offsets[r + 1]; ++e) {
            const T w = static_cast<T>(map.weight[e]);
            const T* srow = x.data() + static_cast<std::size_t>(map.src[e]) * m;
            for (int j = 0; j < m; ++j) {
                dst[j] += w * srow[j];
            }
        }
    }
    return t.push(map.out_rows, m, std::move(out), t.requires_grad(a),
                  [a, map, m](Tape<T>& tp, Var self) {
                      auto g = tp.grad_view(self);
                      auto& ga = tp.grad(a);
                      for (int r = 0; r < map.out_rows; ++r) {
                          const T* grow = g.data() + static_cast<std::size_t>(r) * m;
                          for (int e = map.offsets[r]; e < map.offsets[r + 1]; ++e) {
                              const T w = static_cast<T>(map.weight[e]);
                              T* dst = ga.data() + static_cast<std::size_t>(map.src[e]) * m;
                              for (int j = 0; j < m; ++j) {
                                  dst[j] += w * grow[j];
                              }
                          }
                      }
                  });
}

template <typename T>
Var gather_bias(Tape<T>& t, Var table, std::vector<int> bucket_ids) {
    const int buckets = t.rows(table), heads = t.cols(table);
    const int n = static_cast<int>(bucket_ids.size());
    for (int b : bucket_ids) {
        require(b >= 0 && b < buckets, "bucket id out of range");
    }
    auto tv = t.value(table);
    std::vector<T> out(static_cast<std::size_t>(heads) * n);
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < n; ++i) {
            out[static_cast<std::size_t>(h) * n + i] = tv[static_cast<std::size_t>(bucket_ids[i]) * heads + h];
        }
    }
    return t.push(heads, n, std::move(out), t.requires_grad(table),
                  [table, heads, n, ids = std::move(bucket_ids)](Tape<T>& tp, Var self) {
                      auto g = tp.grad_view(self);
                      auto& gt = tp.grad(table);
                      for (int h = 0; h < heads; ++h) {
                          for (int i = 0; i < n; ++i) {
                              gt[static_cast<std::size_t>(ids[i]) * heads + h] +=
                                  g[static_cast<std::size_t>(h) * n + i];
                          }
                      }
                  });
}

template <typename T>
Var attention(Tape<T>& t, Var q, Var k, Var v, Var bias, const AttentionShape& s,
              std::vector<std::uint8_t> key_mask, bool causal, std::vector<T>* probs_out) {
    const int d = t.cols(q);
    require(t.cols(k) == d && t.cols(v) == d, "attention width mismatch");
    require(t.rows(q) == s.batch * s.queries, "attention query rows mismatch");
    require(t.rows(k) == s.batch * s.keys && t.rows(v) == s.batch * s.keys, "attention key rows mismatch");
    require(s.heads > 0 && d % s.heads == 0, "attention width not divisible by heads");
    require(static_cast<int>(key_mask.size()) == s.batch * s.keys, "attention key mask size mismatch");
    if (bias.valid()) {
        require(t.rows(bias) == s.heads && t.cols(bias) == s.queries * s.keys, "attention bias shape mismatch");
    }
    const int dh = d / s.heads;
    const T scale = T(1) / std::sqrt(T(dh));
    const T penalty = static_cast<T>(kMaskPenalty);
    const std::size_t plane = static_cast<std::size_t>(s.queries) * s.keys;

    std::vector<T> probs(static_cast<std::size_t>(s.batch) * s.heads * plane);
    std::vector<T> out(static_cast<std::size_t>(s.batch) * s.queries * d);
    const T* qv = t.value(q).data();
    const T* kv = t.value(k).data();
    const T* vv = t.value(v).data();
    const T* bv = bias.valid() ? t.value(bias).data() : nullptr;

    for (int b = 0; b < s.batch; ++b) {
        const std::uint8_t* km = key_mask.data() + static_cast<std::size_t>(b) * s.keys;
        for (int h = 0; h < s.heads; ++h) {
            StridedC<T> Q(qv + static_cast<std::size_t>(b) * s.queries * d + h * dh, s.queries, dh,
                          Eigen::OuterStride<>(d));
            StridedC<T> K(kv + static_cast<std::size_t>(b) * s.keys * d + h * dh, s.keys, dh,
                          Eigen::OuterStride<>(d));
            StridedC<T> V(vv + static_cast<std::size_t>(b) * s.keys * d + h * dh, s.keys, dh,
                          Eigen::OuterStride<>(d));
            T* P = probs.data() + (static_cast<std::size_t>(b) * s.heads + h) * plane;
            MapM<T> S(P, s.queries, s.keys);
            S.noalias() = (Q * K.transpose()) * scale;
            for (int i = 0; i < s.queries; ++i) {
                T* row = P + static_cast<std::size_t>(i) * s.keys;
                T mx = -std::numeric_limits<T>::infinity();
                for (int j = 0; j < s.keys; ++j) {
                    if (bv) {
                        row[j] += bv[static_cast<std::size_t>(h) * plane + static_cast<std::size_t>(i) * s.keys + j];
                    }
                    if (!km[j] || (causal && j > i)) {
                        row[j] += penalty;
                    }
                    mx = std::max(mx, row[j]);
                }
                T z = 0;
                for (int j = 0; j < s.keys; ++j) {
                    row[j] = std::exp(row[j] - mx);
                    z += row[j];
                }
                const T invz = T(1) / z;
                for (int j = 0; j < s.keys; ++j) {
                    row[j] *= invz;
                }
            }
            Strided<T> O(out.data() + static_cast<std::size_t>(b) * s.queries * d + h * dh, s.queries, dh,
                         Eigen::OuterStride<>(d));
            O.noalias() = CMapM<T>(P, s.queries, s.keys) * V;
        }
    }
    if (probs_out) {
        *probs_out = probs;
    }
    const bool rg = t.requires_grad(q) || t.requires_grad(k) || t.requires_grad(v) ||
                    (bias.valid() && t.requires_grad(bias));
    if (!rg) {
        probs.clear();
    }
    return t.push(
        s.batch * s.queries, d, std::move(out), rg,
        [q, k, v, bias, s, d, dh, scale, plane, probs = std::move(probs)](Tape<T>& tp, Var self) {
            const T* g = tp.grad_view(self).data();
            const T* qv = tp.value(q).data();
            const T* kv = tp.value(k).data();
            const T* vv = tp.value(v).data();
            T* gq = tp.requires_grad(q) ? tp.grad(q).data() : nullptr;
            T* gk = tp.requires_grad(k) ? tp.grad(k).data() : nullptr;
            T* gvp = tp.requires_grad(v) ? tp.grad(v).data() : nullptr;
            T* gb = (bias.valid() && tp.requires_grad(bias)) ? tp.grad(bias).data() : nullptr;
            Mat<T> dP(s.queries, s.keys);
            for (int b = 0; b < s.batch; ++b) {
                for (int h = 0; h < s.heads; ++h) {
                    const std::size_t qoff = static_cast<std::size_t>(b) * s.queries * d + h * dh;
                    const std::size_t koff = static_cast<std::size_t>(b) * s.keys * d + h * dh;
                    StridedC<T> G(g + qoff, s.queries, dh, Eigen::OuterStride<>(d));
                    StridedC<T> Q(qv + qoff, s.queries, dh, Eigen::OuterStride<>(d));
                    StridedC<T> K(kv + koff, s.keys, dh, Eigen::OuterStride<>(d));
                    StridedC<T> V(vv + koff, s.keys, dh, Eigen::OuterStride<>(d));
                    CMapM<T> P(probs.data() + (static_cast<std::size_t>(b) * s.heads + h) * plane, s.queries,
                               s.keys);
                    if (gvp) {
                        Strided<T>(gvp + koff, s.keys, dh, Eigen::OuterStride<>(d)).noalias() +=
                            P.transpose() * G;
                    }
                    dP.noalias() = G * V.transpose();
                    // softmax backward: dS = P .* (dP - rowsum(dP .* P))
                    for (int i = 0; i < s.queries; ++i) {
                        T dot = 0;
                        for (int j = 0; j < s.keys; ++j) {
                            dot += dP(i, j) * P(i, j);
                        }
                        for (int j = 0; j < s.keys; ++j) {
                            dP(i, j) = P(i, j) * (dP(i, j) - dot);
                        }
                    }
                    if (gb) {
                        T* row = gb + static_cast<std::size_t>(h) * plane;
                        for (int i = 0; i < s.queries; ++i) {
                            for (int j = 0; j < s.keys; ++j) {
                                row[static_cast<std::size_t>(i) * s.keys + j] += dP(i, j);
                            }
                        }
                    }
                    if (gq) {
                        Strided<T>(gq + qoff, s.queries, dh, Eigen::OuterStride<>(d)).noalias() +=
                            (dP * K) * scale;
                    }
                    if (gk) {
                        Strided<T>(gk + koff, s.keys, dh, Eigen::OuterStride<>(d)).noalias() +=
                            (dP.transpose() * Q) * scale;
                    }
                }
            }
        });
}

template <typename T>
Var mul_const(Tape<T>& t, Var a, std::vector<T> m) {
    auto x = t.value(a);
    require(m.size() == x.size(), "mul_const size mismatch");
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * m[i];
    }
    return t.push(t.rows(a), t.cols(a), std::move(out), t.requires_grad(a),
                  [a, m = std::move(m)](Tape<T>& tp, Var self) {
                      auto g = tp.grad_view(self);
                      auto& ga = tp.grad(a);
                      for (std::size_t i = 0; i < ga.size(); ++i) {
                          ga[i] += g[i] * m[i];
                      }
                  });
}

template <typename T>
Var dot_const(Tape<T>& t, Var a, std::vector<T> w) {
    auto x = t.value(a);
    require(w.size() == x.size(), "dot_const weight size mismatch");
    T s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * w[i];
    }
    return t.push(1, 1, {s}, t.requires_grad(a), [a, w = std::move(w)](Tape<T>& tp, Var self) {
        const T g = tp.grad_view(self)[0];
        auto& ga = tp.grad(a);
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] += g * w[i];
        }
    });
}

#define TSFOUND_INSTANTIATE(T)                                                                  \
    template class Tape<T>;                                                                     \
    template Var matmul<T>(Tape<T>&, Var, Var);                                                 \
    template Var add<T>(Tape<T>&, Var, Var);                                                    \
    template Var add_row<T>(Tape<T>&, Var, Var);                                                \
    template Var gelu<T>(Tape<T>&, Var);                                                        \
    template Var rms_norm<T>(Tape<T>&, Var, Var, T);                                            \
    template Var concat_rows<T>(Tape<T>&, Var, Var);                                            \
    template Var row_combine<T>(Tape<T>&, Var, const RowMap&);                                  \
    template Var gather_bias<T>(Tape<T>&, Var, std::vector<int>);                               \
    template Var attention<T>(Tape<T>&, Var, Var, Var, Var, const AttentionShape&,              \
                              std::vector<std::uint8_t>, bool, std::vector<T>*);                \
    template Var mul_const<T>(Tape<T>&, Var, std::vector<T>);                                   \
    template Var dot_const<T>(Tape<T>&, Var, std::vector<T>);

TSFOUND_INSTANTIATE(float)
TSFOUND_INSTANTIATE(double)

#undef TSFOUND_INSTANTIATE

} // namespace tsfound::ad
