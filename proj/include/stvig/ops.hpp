#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "stvig/tensor.hpp"

namespace stvig {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapMat = Eigen::Map<MatRM<S>>;
template <typename S>
using MapConstMat = Eigen::Map<const MatRM<S>>;

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename S>
TensorPtr<S> add(const TensorPtr<S>& a, const TensorPtr<S>& b) {
    if (a->shape() != b->shape()) throw_shape_error("add: shape mismatch", a->shape(), b->shape());
    std::vector<S> out(a->data().begin(), a->data().end());
    for (std::int64_t i = 0; i < a->size(); ++i) out[i] += b->at(i);
    return Tensor<S>::make_op(a->shape(), std::move(out), {a, b}, [a, b](Tensor<S>& y) {
        auto g = y.grad();
        if (a->requires_grad()) a->accumulate_grad(g);
        if (b->requires_grad()) b->accumulate_grad(g);
    });
}

template <typename S>
TensorPtr<S> relu(const TensorPtr<S>& x) {
    std::vector<S> out(static_cast<std::size_t>(x->size()));
    for (std::int64_t i = 0; i < x->size(); ++i) out[i] = x->at(i) > S(0) ? x->at(i) : S(0);
    return Tensor<S>::make_op(x->shape(), std::move(out), {x}, [x](Tensor<S>& y) {
        if (!x->requires_grad()) return;
        auto g = y.grad();
        auto xg = x->grad();
        for (std::int64_t i = 0; i < x->size(); ++i)
            if (x->at(i) > S(0)) xg[i] += g[i];
    });
}

template <typename S>
TensorPtr<S> sigmoid(const TensorPtr<S>& x) {
    std::vector<S> out(static_cast<std::size_t>(x->size()));
    for (std::int64_t i = 0; i < x->size(); ++i)
        out[i] = S(1) / (S(1) + std::exp(-x->at(i)));
    return Tensor<S>::make_op(x->shape(), std::move(out), {x}, [x](Tensor<S>& y) {
        if (!x->requires_grad()) return;
        auto g = y.grad();
        auto yd = y.data();
        auto xg = x->grad();
        for (std::int64_t i = 0; i < x->size(); ++i) xg[i] += g[i] * yd[i] * (S(1) - yd[i]);
    });
}

// ---------------------------------------------------------------------------
// linear: y[..., j] = sum_i x[..., i] * w[i, j] + b[j]
// ---------------------------------------------------------------------------

template <typename S>
TensorPtr<S> linear(const TensorPtr<S>& x, const TensorPtr<S>& w, const TensorPtr<S>& b = nullptr) {
    if (x->rank() < 1 || w->rank() != 2 || x->shape().back() != w->dim(0))
        throw_shape_error("linear: input/weight mismatch", x->shape(), w->shape());
    const std::int64_t cin = w->dim(0);
    const std::int64_t cout = w->dim(1);
    if (b && (b->rank() != 1 || b->dim(0) != cout))
        throw_shape_error("linear: bias mismatch", b->shape(), w->shape());
    const std::int64_t m = x->size() / cin;

    Shape out_shape(x->shape().begin(), x->shape().end() - 1);
    out_shape.push_back(cout);
    std::vector<S> out(static_cast<std::size_t>(m * cout));

    MapConstMat<S> xm(x->data().data(), m, cin);
    MapConstMat<S> wm(w->data().data(), cin, cout);
    MapMat<S> ym(out.data(), m, cout);
    ym.noalias() = xm * wm;
    if (b) {
        Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> bv(b->data().data(), cout);
        ym.rowwise() += bv;
    }

    std::vector<TensorPtr<S>> parents = {x, w};
    if (b) parents.push_back(b);
    return Tensor<S>::make_op(std::move(out_shape), std::move(out), std::move(parents),
                              [x, w, b, m, cin, cout](Tensor<S>& y) {
        MapConstMat<S> gy(y.grad().data(), m, cout);
        MapConstMat<S> xm(x->data().data(), m, cin);
        MapConstMat<S> wm(w->data().data(), cin, cout);
        if (x->requires_grad()) {
            MapMat<S> gx(x->grad().data(), m, cin);
            gx.noalias() += gy * wm.transpose();
        }
        if (w->requires_grad()) {
            MapMat<S> gw(w->grad().data(), cin, cout);
            gw.noalias() += xm.transpose() * gy;
        }
        if (b && b->requires_grad()) {
            Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>> gb(b->grad().data(), cout);
            gb += gy.colwise().sum();
        }
    });
}

// ---------------------------------------------------------------------------
// conv3d over a channel-first volume
//   x: (Cin, D1, D2, D3), kernel: (Cout, Cin, k1, k2, k3)
//   out: (Cout, D1', D2', D3'), Di' = (Di + 2*pi - ki) / si + 1
// Zero padding; implemented as im2col + GEMM.
// ---------------------------------------------------------------------------

namespace detail {

struct ConvDims {
    std::int64_t cin, cout;
    std::array<std::int64_t, 3> in, k, s, p, out;
    std::int64_t positions, patch;
};

template <typename S>
inline ConvDims conv3d_dims(const Tensor<S>& x, const Tensor<S>& kernel,
                            const std::array<std::int64_t, 3>& stride,
                            const std::array<std::int64_t, 3>& padding) {
    if (x.rank() != 4 || kernel.rank() != 5 || x.dim(0) != kernel.dim(1))
        throw_shape_error("conv3d: input/kernel mismatch", x.shape(), kernel.shape());
    ConvDims d;
    d.cin = x.dim(0);
    d.cout = kernel.dim(0);
    for (int i = 0; i < 3; ++i) {
        d.in[i] = x.dim(1 + i);
        d.k[i] = kernel.dim(2 + i);
        d.s[i] = stride[i];
        d.p[i] = padding[i];
        if (d.s[i] < 1 || d.p[i] < 0)
            throw std::invalid_argument("conv3d: stride must be >= 1 and padding >= 0");
        if (d.k[i] > d.in[i] + 2 * d.p[i])
            throw_shape_error("conv3d: kernel exceeds padded input", x.shape(), kernel.shape());
        d.out[i] = (d.in[i] + 2 * d.p[i] - d.k[i]) / d.s[i] + 1;
    }
    d.positions = d.out[0] * d.out[1] * d.out[2];
    d.patch = d.cin * d.k[0] * d.k[1] * d.k[2];
    return d;
}

// Column matrix, one row per output position, laid out (ci, i1, i2, i3).
template <typename S>
void im2col(const ConvDims& d, const S* x, std::vector<S>& col) {
    col.assign(static_cast<std::size_t>(d.positions * d.patch), S(0));
    const std::int64_t in12 = d.in[1] * d.in[2];
    std::int64_t row = 0;
    for (std::int64_t o0 = 0; o0 < d.out[0]; ++o0)
    for (std::int64_t o1 = 0; o1 < d.out[1]; ++o1)
    for (std::int64_t o2 = 0; o2 < d.out[2]; ++o2, ++row) {
        S* dst = col.data() + row * d.patch;
        for (std::int64_t ci = 0; ci < d.cin; ++ci) {
            const S* src = x + ci * d.in[0] * in12;
            for (std::int64_t a = 0; a < d.k[0]; ++a) {
                const std::int64_t i0 = o0 * d.s[0] - d.p[0] + a;
                for (std::int64_t bb = 0; bb < d.k[1]; ++bb) {
                    const std::int64_t i1 = o1 * d.s[1] - d.p[1] + bb;
                    for (std::int64_t c = 0; c < d.k[2]; ++c, ++dst) {
                        const std::int64_t i2 = o2 * d.s[2] - d.p[2] + c;
                        if (i0 >= 0 && i0 < d.in[0] && i1 >= 0 && i1 < d.in[1] &&
                            i2 >= 0 && i2 < d.in[2])
                            *dst = src[i0 * in12 + i1 * d.in[2] + i2];
                    }
                }
            }
        }
    }
}

// Scatter-add of the column-gradient back onto the input volume.
template <typename S>
void col2im_add(const ConvDims& d, const S* col, S* gx) {
    const std::int64_t in12 = d.in[1] * d.in[2];
    std::int64_t row = 0;
    for (std::int64_t o0 = 0; o0 < d.out[0]; ++o0)
    for (std::int64_t o1 = 0; o1 < d.out[1]; ++o1)
    for (std::int64_t o2 = 0; o2 < d.out[2]; ++o2, ++row) {
        const S* src = col + row * d.patch;
        for (std::int64_t ci = 0; ci < d.cin; ++ci) {
            S* dst = gx + ci * d.in[0] * in12;
            for (std::int64_t a = 0; a < d.k[0]; ++a) {
                const std::int64_t i0 = o0 * d.s[0] - d.p[0] + a;
                for (std::int64_t bb = 0; bb < d.k[1]; ++bb) {
                    const std::int64_t i1 = o1 * d.s[1] - d.p[1] + bb;
                    for (std::int64_t c = 0; c < d.k[2]; ++c, ++src) {
                        const std::int64_t i2 = o2 * d.s[2] - d.p[2] + c;
                        if (i0 >= 0 && i0 < d.in[0] && i1 >= 0 && i1 < d.in[1] &&
                            i2 >= 0 && i2 < d.in[2])
                            dst[i0 * in12 + i1 * d.in[2] + i2] += *src;
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <typename S>
TensorPtr<S> conv3d(const TensorPtr<S>& x, const TensorPtr<S>& kernel,
                    std::array<std::int64_t, 3> stride = {1, 1, 1},
                    std::array<std::int64_t, 3> padding = {0, 0, 0},
                    const TensorPtr<S>& bias = nullptr) {
    const auto d = detail::conv3d_dims(*x, *kernel, stride, padding);
    if (bias && (bias->rank() != 1 || bias->dim(0) != d.cout))
        throw_shape_error("conv3d: bias mismatch", bias->shape(), kernel->shape());

    std::vector<S> col;
    detail::im2col(d, x->data().data(), col);

    std::vector<S> out(static_cast<std::size_t>(d.cout * d.positions));
    {
        MapConstMat<S> km(kernel->data().data(), d.cout, d.patch);
        MapConstMat<S> cm(col.data(), d.positions, d.patch);
        MapMat<S> om(out.data(), d.cout, d.positions);
        om.noalias() = km * cm.transpose();
        if (bias) {
            for (std::int64_t co = 0; co < d.cout; ++co)
                om.row(co).array() += bias->at(co);
        }
    }

    Shape out_shape{d.cout, d.out[0], d.out[1], d.out[2]};
    std::vector<TensorPtr<S>> parents = {x, kernel};
    if (bias) parents.push_back(bias);
    return Tensor<S>::make_op(std::move(out_shape), std::move(out), std::move(parents),
                              [x, kernel, bias, d](Tensor<S>& y) {
        MapConstMat<S> gy(y.grad().data(), d.cout, d.positions);
        if (kernel->requires_grad() || x->requires_grad()) {
            std::vector<S> col;
            detail::im2col(d, x->data().data(), col);
            MapConstMat<S> cm(col.data(), d.positions, d.patch);
            if (kernel->requires_grad()) {
                MapMat<S> gk(kernel->grad().data(), d.cout, d.patch);
                gk.noalias() += gy * cm;
            }
            if (x->requires_grad()) {
                std::vector<S> gcol(static_cast<std::size_t>(d.positions * d.patch));
                MapMat<S> gc(gcol.data(), d.positions, d.patch);
                MapConstMat<S> km(kernel->data().data(), d.cout, d.patch);
                gc.noalias() = gy.transpose() * km;
                detail::col2im_add<S>(d, gcol.data(), x->grad().data());
            }
        }
        if (bias && bias->requires_grad()) {
            auto gb = bias->grad();
            for (std::int64_t co = 0; co < d.cout; ++co) gb[co] += gy.row(co).sum();
        }
    });
}

// ---------------------------------------------------------------------------
// graph aggregation
// ---------------------------------------------------------------------------

/// Per-channel maximum over the rows of a (K, C) tensor. Gradient goes to
/// the argmax row only; ties resolve to the lowest row index.
template <typename S>
TensorPtr<S> max_over_neighbors(const TensorPtr<S>& x) {
    if (x->rank() != 2) throw std::invalid_argument("max_over_neighbors: expected (K, C), got " + shape_str(x->shape()));
    const std::int64_t k = x->dim(0);
    const std::int64_t c = x->dim(1);
    if (k < 1) throw std::invalid_argument("max_over_neighbors: empty neighborhood");
    std::vector<S> out(static_cast<std::size_t>(c));
    auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(c), 0);
    for (std::int64_t j = 0; j < c; ++j) {
        S best = x->at(j);
        std::int32_t bi = 0;
        for (std::int64_t i = 1; i < k; ++i) {
            const S v = x->at(i * c + j);
            if (v > best) {
                best = v;
                bi = static_cast<std::int32_t>(i);
            }
        }
        out[j] = best;
        (*argmax)[j] = bi;
    }
    return Tensor<S>::make_op(Shape{c}, std::move(out), {x}, [x, c, argmax](Tensor<S>& y) {
        if (!x->requires_grad()) return;
        auto g = y.grad();
        auto xg = x->grad();
        for (std::int64_t j = 0; j < c; ++j) xg[(*argmax)[j] * c + j] += g[j];
    });
}

/// Max-relative aggregation over a fixed neighbor structure, all frames at
/// once: out[i,t,c] = max_{j in nbrs[i]} x[j,t,c] - x[i,t,c].
/// Gradient routes +g to the argmax neighbor (lowest index on ties) and -g
/// to the center node.
template <typename S>
TensorPtr<S> max_relative(const TensorPtr<S>& x, const std::vector<std::vector<int>>& nbrs) {
    if (x->rank() != 3) throw std::invalid_argument("max_relative: expected (N, T, C), got " + shape_str(x->shape()));
    const std::int64_t n = x->dim(0), t = x->dim(1), c = x->dim(2);
    if (static_cast<std::int64_t>(nbrs.size()) != n)
        throw std::invalid_argument("max_relative: neighbor table size mismatch");
    for (const auto& list : nbrs)
        if (list.empty()) throw std::invalid_argument("max_relative: empty neighborhood");

    std::vector<S> out(static_cast<std::size_t>(x->size()));
    auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(x->size()));
    const std::int64_t tc = t * c;
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& list = nbrs[i];
        for (std::int64_t tt = 0; tt < t; ++tt) {
            const std::int64_t base = i * tc + tt * c;
            for (std::int64_t cc = 0; cc < c; ++cc) {
                S best = x->at(list[0] * tc + tt * c + cc);
                std::int32_t bj = static_cast<std::int32_t>(list[0]);
                for (std::size_t li = 1; li < list.size(); ++li) {
                    const S v = x->at(list[li] * tc + tt * c + cc);
                    if (v > best || (v == best && list[li] < bj)) {
                        best = v;
                        bj = static_cast<std::int32_t>(list[li]);
                    }
                }
                out[base + cc] = best - x->at(base + cc);
                (*argmax)[base + cc] = bj;
            }
        }
    }
    return Tensor<S>::make_op(x->shape(), std::move(out), {x}, [x, n, t, c, tc, argmax](Tensor<S>& y) {
        if (!x->requires_grad()) return;
        auto g = y.grad();
        auto xg = x->grad();
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t tt = 0; tt < t; ++tt) {
                const std::int64_t base = i * tc + tt * c;
                for (std::int64_t cc = 0; cc < c; ++cc) {
                    const S gv = g[base + cc];
                    xg[(*argmax)[base + cc] * tc + tt * c + cc] += gv;
                    xg[base + cc] -= gv;
                }
            }
    });
}

// ---------------------------------------------------------------------------
// shape plumbing
// ---------------------------------------------------------------------------

template <typename S>
TensorPtr<S> concat_last(const TensorPtr<S>& a, const TensorPtr<S>& b) {
    if (a->rank() != b->rank() || a->rank() < 1)
        throw_shape_error("concat_last: rank mismatch", a->shape(), b->shape());
    for (std::size_t i = 0; i + 1 < a->rank(); ++i)
        if (a->dim(i) != b->dim(i)) throw_shape_error("concat_last: leading dims differ", a->shape(), b->shape());
    const std::int64_t c1 = a->shape().back();
    const std::int64_t c2 = b->shape().back();
    const std::int64_t rows = a->size() / c1;
    Shape out_shape = a->shape();
    out_shape.back() = c1 + c2;
    std::vector<S> out(static_cast<std::size_t>(rows * (c1 + c2)));
    for (std::int64_t r = 0; r < rows; ++r) {
        std::copy_n(a->data().data() + r * c1, c1, out.data() + r * (c1 + c2));
        std::copy_n(b->data().data() + r * c2, c2, out.data() + r * (c1 + c2) + c1);
    }
    return Tensor<S>::make_op(std::move(out_shape), std::move(out), {a, b},
                              [a, b, rows, c1, c2](Tensor<S>& y) {
        auto g = y.grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            if (a->requires_grad()) {
                auto ga = a->grad();
                for (std::int64_t i = 0; i < c1; ++i) ga[r * c1 + i] += g[r * (c1 + c2) + i];
            }
            if (b->requires_grad()) {
                auto gb = b->grad();
                for (std::int64_t i = 0; i < c2; ++i) gb[r * c2 + i] += g[r * (c1 + c2) + c1 + i];
            }
        }
    });
}

/// Mean over all leading dims; returns a (C,) tensor where C is the last dim.
template <typename S>
TensorPtr<S> global_avg_pool(const TensorPtr<S>& x) {
    if (x->rank() < 1) throw std::invalid_argument("global_avg_pool: rank-0 input");
    const std::int64_t c = x->shape().back();
    const std::int64_t rows = x->size() / c;
    std::vector<S> out(static_cast<std::size_t>(c), S(0));
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t i = 0; i < c; ++i) out[i] += x->at(r * c + i);
    for (std::int64_t i = 0; i < c; ++i) out[i] /= static_cast<S>(rows);
    return Tensor<S>::make_op(Shape{c}, std::move(out), {x}, [x, rows, c](Tensor<S>& y) {
        if (!x->requires_grad()) return;
        auto g = y.grad();
        auto xg = x->grad();
        const S inv = S(1) / static_cast<S>(rows);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t i = 0; i < c; ++i) xg[r * c + i] += g[i] * inv;
    });
}

template <typename S>
TensorPtr<S> mse(const TensorPtr<S>& pred, const TensorPtr<S>& target) {
    if (pred->shape() != target->shape())
        throw_shape_error("mse: shape mismatch", pred->shape(), target->shape());
    const std::int64_t n = pred->size();
    S acc = S(0);
    for (std::int64_t i = 0; i < n; ++i) {
        const S d = pred->at(i) - target->at(i);
        acc += d * d;
    }
    acc /= static_cast<S>(n);
    return Tensor<S>::make_op(Shape{1}, std::vector<S>{acc}, {pred, target},
                              [pred, target, n](Tensor<S>& y) {
        const S g = y.grad()[0];
        const S k = S(2) / static_cast<S>(n);
        if (pred->requires_grad()) {
            auto gp = pred->grad();
            for (std::int64_t i = 0; i < n; ++i) gp[i] += k * (pred->at(i) - target->at(i)) * g;
        }
        if (target->requires_grad()) {
            auto gt = target->grad();
            for (std::int64_t i = 0; i < n; ++i) gt[i] -= k * (pred->at(i) - target->at(i)) * g;
        }
    });
}

template <typename S>
TensorPtr<S> reshape(const TensorPtr<S>& x, Shape shape) {
    if (numel(shape) != x->size()) throw_shape_error("reshape: element count mismatch", x->shape(), shape);
    std::vector<S> out(x->data().begin(), x->data().end());
    return Tensor<S>::make_op(std::move(shape), std::move(out), {x}, [x](Tensor<S>& y) {
        if (x->requires_grad()) x->accumulate_grad(y.grad());
    });
}

/// out[i0,...,ik] = x[j0,...,jk] with j[perm[d]] = i[d]: axis d of the output
/// is axis perm[d] of the input.
template <typename S>
TensorPtr<S> permute_axes(const TensorPtr<S>& x, const std::vector<int>& perm) {
    const std::size_t r = x->rank();
    if (perm.size() != r) throw std::invalid_argument("permute_axes: permutation rank mismatch");
    std::vector<bool> used(r, false);
    for (int p : perm) {
        if (p < 0 || p >= static_cast<int>(r) || used[p])
            throw std::invalid_argument("permute_axes: not a permutation");
        used[p] = true;
    }
    Shape out_shape(r);
    for (std::size_t d = 0; d < r; ++d) out_shape[d] = x->dim(perm[d]);

    std::vector<std::int64_t> in_strides(r, 1), out_strides(r, 1);
    for (std::size_t d = r - 1; d > 0; --d) in_strides[d - 1] = in_strides[d] * x->dim(d);
    for (std::size_t d = r - 1; d > 0; --d) out_strides[d - 1] = out_strides[d] * out_shape[d];

    auto mapping = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(x->size()));
    std::vector<S> out(static_cast<std::size_t>(x->size()));
    std::vector<std::int64_t> idx(r, 0);
    for (std::int64_t o = 0; o < x->size(); ++o) {
        std::int64_t src = 0;
        for (std::size_t d = 0; d < r; ++d) src += idx[d] * in_strides[perm[d]];
        out[o] = x->at(src);
        (*mapping)[o] = src;
        for (std::size_t d = r; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    return Tensor<S>::make_op(std::move(out_shape), std::move(out), {x}, [x, mapping](Tensor<S>& y) {
        if (!x->requires_grad()) return;
        auto g = y.grad();
        auto xg = x->grad();
        for (std::int64_t o = 0; o < y.size(); ++o) xg[(*mapping)[o]] += g[o];
    });
}

/// Gather rows along axis 0: out[i] = x[perm[i]]. perm must be a permutation.
template <typename S>
TensorPtr<S> permute_rows(const TensorPtr<S>& x, const std::vector<int>& perm) {
    if (x->rank() < 1 || static_cast<std::int64_t>(perm.size()) != x->dim(0))
        throw std::invalid_argument("permute_rows: permutation length must match leading dim");
    std::vector<bool> used(perm.size(), false);
    for (int p : perm) {
        if (p < 0 || p >= static_cast<int>(perm.size()) || used[p])
            throw std::invalid_argument("permute_rows: not a permutation");
        used[p] = true;
    }
    const std::int64_t n = x->dim(0);
    const std::int64_t row = x->size() / n;
    std::vector<S> out(static_cast<std::size_t>(x->size()));
    for (std::int64_t i = 0; i < n; ++i)
        std::copy_n(x->data().data() + perm[i] * row, row, out.data() + i * row);
    auto kept = std::make_shared<std::vector<int>>(perm);
    return Tensor<S>::make_op(x->shape(), std::move(out), {x}, [x, kept, n, row](Tensor<S>& y) {
        if (!x->requires_grad()) return;
        auto g = y.grad();
        auto xg = x->grad();
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < row; ++j) xg[(*kept)[i] * row + j] += g[i * row + j];
    });
}

}  // namespace stvig
