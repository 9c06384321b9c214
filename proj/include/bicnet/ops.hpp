#pragma once

// Differentiable tensor operations. Forward values are computed by the
// kernels in kernels.hpp (parallel path); each op records a backward closure
// that accumulates into its parents' grad buffers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <vector>

#include "bicnet/errors.hpp"
#include "bicnet/kernels.hpp"
#include "bicnet/tensor.hpp"

namespace bicnet {

namespace opdetail {

template <typename S>
Tensor<S> finish(const char* opname, Shape shape, std::vector<S> value,
                 std::initializer_list<Tensor<S>> parents,
                 std::function<void(detail::Node<S>&)> bwd) {
    auto out = Tensor<S>::from_values(std::move(shape), std::move(value));
    check_finite(out, opname);
    if (grad_enabled()) {
        bool any = false;
        for (const auto& p : parents)
            if (p.requires_grad()) any = true;
        if (any) {
            auto& nd = out.node();
            nd.requires_grad = true;
            for (const auto& p : parents) nd.parents.push_back(p.node_ptr());
            nd.backward_fn = std::move(bwd);
        }
    }
    return out;
}

template <typename S>
void require_rank(const Tensor<S>& t, std::size_t r, const char* who) {
    if (t.rank() != r)
        throw DimensionError(std::string(who) + ": expected rank " + std::to_string(r) +
                             ", got shape " + shape_str(t.shape()));
}

template <typename S>
void require_finite_input(const Tensor<S>& t, const char* who) {
    check_finite(t, who);
}

} // namespace opdetail

// ---------------------------------------------------------------------------
// matmul family

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    opdetail::require_rank(a, 2, "matmul lhs");
    opdetail::require_rank(b, 2, "matmul rhs");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul inner extents differ: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    std::vector<S> v(m * n);
    kernels::par::matmul_nn(a.values().data(), b.values().data(), v.data(), m, k, n);
    auto* an = a.node_ptr().get();
    auto* bn = b.node_ptr().get();
    return opdetail::finish<S>(
        "matmul", {m, n}, std::move(v), {a, b}, [an, bn, m, k, n](detail::Node<S>& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                kernels::par::matmul_nt_acc(self.grad.data(), bn->value.data(), an->grad.data(), m,
                                            n, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kernels::par::matmul_tn_acc(an->value.data(), self.grad.data(), bn->grad.data(), k,
                                            m, n);
            }
        });
}

// a[m x k] * b[n x k]^T -> [m x n]
template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
    opdetail::require_rank(a, 2, "matmul_nt lhs");
    opdetail::require_rank(b, 2, "matmul_nt rhs");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k)
        throw DimensionError("matmul_nt inner extents differ: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()) + "^T");
    std::vector<S> v(m * n);
    kernels::par::matmul_nt(a.values().data(), b.values().data(), v.data(), m, k, n);
    auto* an = a.node_ptr().get();
    auto* bn = b.node_ptr().get();
    return opdetail::finish<S>(
        "matmul_nt", {m, n}, std::move(v), {a, b}, [an, bn, m, k, n](detail::Node<S>& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                kernels::par::matmul_nn_acc(self.grad.data(), bn->value.data(), an->grad.data(), m,
                                            n, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kernels::par::matmul_tn_acc(self.grad.data(), an->value.data(), bn->grad.data(), n,
                                            m, k);
            }
        });
}

// a[k x m]^T * b[k x n] -> [m x n]
template <typename S>
Tensor<S> matmul_tn(const Tensor<S>& a, const Tensor<S>& b) {
    opdetail::require_rank(a, 2, "matmul_tn lhs");
    opdetail::require_rank(b, 2, "matmul_tn rhs");
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul_tn inner extents differ: " + shape_str(a.shape()) + "^T x " +
                             shape_str(b.shape()));
    std::vector<S> v(m * n);
    kernels::par::matmul_tn(a.values().data(), b.values().data(), v.data(), m, k, n);
    auto* an = a.node_ptr().get();
    auto* bn = b.node_ptr().get();
    return opdetail::finish<S>(
        "matmul_tn", {m, n}, std::move(v), {a, b}, [an, bn, m, k, n](detail::Node<S>& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                kernels::par::matmul_nt_acc(bn->value.data(), self.grad.data(), an->grad.data(), k,
                                            n, m);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kernels::par::matmul_nn_acc(an->value.data(), self.grad.data(), bn->grad.data(), k,
                                            m, n);
            }
        });
}

// ---------------------------------------------------------------------------
// elementwise and broadcast

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add shape mismatch: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const std::size_t n = a.numel();
    std::vector<S> v(n);
    const S* av = a.values().data();
    const S* bv = b.values().data();
    for (std::size_t i = 0; i < n; ++i) v[i] = av[i] + bv[i];
    auto* an = a.node_ptr().get();
    auto* bn = b.node_ptr().get();
    return opdetail::finish<S>("add", a.shape(), std::move(v), {a, b},
                               [an, bn, n](detail::Node<S>& self) {
                                   for (auto* p : {an, bn}) {
                                       if (!p->requires_grad) continue;
                                       p->ensure_grad();
                                       for (std::size_t i = 0; i < n; ++i)
                                           p->grad[i] += self.grad[i];
                                   }
                               });
}

// X[n x d] plus a rank-1 bias broadcast across rows.
template <typename S>
Tensor<S> add_bias(const Tensor<S>& x, const Tensor<S>& bias) {
    opdetail::require_rank(x, 2, "add_bias input");
    opdetail::require_rank(bias, 1, "add_bias bias");
    const std::size_t n = x.rows(), d = x.cols();
    if (bias.numel() != d)
        throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " vs input " +
                             shape_str(x.shape()));
    std::vector<S> v(n * d);
    const S* xv = x.values().data();
    const S* bv = bias.values().data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) v[i * d + j] = xv[i * d + j] + bv[j];
    auto* xn = x.node_ptr().get();
    auto* bn = bias.node_ptr().get();
    return opdetail::finish<S>("add_bias", {n, d}, std::move(v), {x, bias},
                               [xn, bn, n, d](detail::Node<S>& self) {
                                   if (xn->requires_grad) {
                                       xn->ensure_grad();
                                       for (std::size_t i = 0; i < n * d; ++i)
                                           xn->grad[i] += self.grad[i];
                                   }
                                   if (bn->requires_grad) {
                                       bn->ensure_grad();
                                       for (std::size_t i = 0; i < n; ++i)
                                           for (std::size_t j = 0; j < d; ++j)
                                               bn->grad[j] += self.grad[i * d + j];
                                   }
                               });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S c) {
    if (!std::isfinite(c)) throw NumericError("scale by non-finite constant");
    const std::size_t n = x.numel();
    std::vector<S> v(n);
    const S* xv = x.values().data();
    for (std::size_t i = 0; i < n; ++i) v[i] = c * xv[i];
    auto* xn = x.node_ptr().get();
    return opdetail::finish<S>("scale", x.shape(), std::move(v), {x},
                               [xn, c, n](detail::Node<S>& self) {
                                   if (!xn->requires_grad) return;
                                   xn->ensure_grad();
                                   for (std::size_t i = 0; i < n; ++i)
                                       xn->grad[i] += c * self.grad[i];
                               });
}

template <typename S>
Tensor<S> hadamard(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("hadamard shape mismatch: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const std::size_t n = a.numel();
    std::vector<S> v(n);
    const S* av = a.values().data();
    const S* bv = b.values().data();
    for (std::size_t i = 0; i < n; ++i) v[i] = av[i] * bv[i];
    auto* an = a.node_ptr().get();
    auto* bn = b.node_ptr().get();
    return opdetail::finish<S>("hadamard", a.shape(), std::move(v), {a, b},
                               [an, bn, n](detail::Node<S>& self) {
                                   if (an->requires_grad) {
                                       an->ensure_grad();
                                       for (std::size_t i = 0; i < n; ++i)
                                           an->grad[i] += self.grad[i] * bn->value[i];
                                   }
                                   if (bn->requires_grad) {
                                       bn->ensure_grad();
                                       for (std::size_t i = 0; i < n; ++i)
                                           bn->grad[i] += self.grad[i] * an->value[i];
                                   }
                               });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
    const std::size_t n = x.numel();
    S acc = 0;
    for (S v : x.values()) acc += v;
    auto* xn = x.node_ptr().get();
    return opdetail::finish<S>("sum", {1}, {acc}, {x}, [xn, n](detail::Node<S>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) xn->grad[i] += self.grad[0];
    });
}

// ---------------------------------------------------------------------------
// nonlinearities

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
    opdetail::require_finite_input(x, "gelu input");
    const std::size_t n = x.numel();
    std::vector<S> v(n);
    kernels::par::gelu(x.values().data(), v.data(), n);
    auto* xn = x.node_ptr().get();
    return opdetail::finish<S>("gelu", x.shape(), std::move(v), {x},
                               [xn, n](detail::Node<S>& self) {
                                   if (!xn->requires_grad) return;
                                   xn->ensure_grad();
                                   kernels::par::gelu_backward(xn->value.data(), self.grad.data(),
                                                               xn->grad.data(), n);
                               });
}

// Softmax along `axis` of a rank-1 or rank-2 tensor, max-subtracted.
template <typename S>
Tensor<S> softmax(const Tensor<S>& x, std::size_t axis) {
    opdetail::require_finite_input(x, "softmax input");
    if (axis >= x.rank())
        throw DimensionError("softmax axis " + std::to_string(axis) + " out of range for " +
                             shape_str(x.shape()));
    const bool row_path = (x.rank() == 1) || (x.rank() == 2 && axis == 1);
    std::vector<S> v(x.numel());
    std::size_t slices, len, stride, slice_step;
    if (row_path) {
        slices = x.rank() == 1 ? 1 : x.rows();
        len = x.rank() == 1 ? x.numel() : x.cols();
        kernels::par::softmax_rows(x.values().data(), v.data(), slices, len);
        stride = 1;
        slice_step = len;
    } else {
        // rank-2, axis 0: one slice per column
        slices = x.cols();
        len = x.rows();
        stride = x.cols();
        slice_step = 1;
        const S* xv = x.values().data();
        for (std::size_t s = 0; s < slices; ++s) {
            const S* xs = xv + s;
            S* ys = v.data() + s;
            S mx = xs[0];
            for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xs[j * stride]);
            S sumv = 0;
            for (std::size_t j = 0; j < len; ++j) {
                ys[j * stride] = std::exp(xs[j * stride] - mx);
                sumv += ys[j * stride];
            }
            for (std::size_t j = 0; j < len; ++j) ys[j * stride] /= sumv;
        }
    }
    auto* xn = x.node_ptr().get();
    return opdetail::finish<S>(
        "softmax", x.shape(), std::move(v), {x},
        [xn, slices, len, stride, slice_step](detail::Node<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t s = 0; s < slices; ++s) {
                const S* y = self.value.data() + s * slice_step;
                const S* dy = self.grad.data() + s * slice_step;
                S* dx = xn->grad.data() + s * slice_step;
                S inner = 0;
                for (std::size_t j = 0; j < len; ++j) inner += dy[j * stride] * y[j * stride];
                for (std::size_t j = 0; j < len; ++j)
                    dx[j * stride] += (dy[j * stride] - inner) * y[j * stride];
            }
        });
}

// Layer norm over the last axis of a rank-1 or rank-2 tensor.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     S eps = S(1e-5)) {
    const std::size_t d = x.shape().back();
    const std::size_t rows = x.numel() / d;
    if (x.rank() > 2) throw DimensionError("layer_norm input must be rank 1 or 2");
    if (gamma.numel() != d || beta.numel() != d)
        throw DimensionError("layer_norm: gamma/beta " + shape_str(gamma.shape()) + "/" +
                             shape_str(beta.shape()) + " vs feature dim " + std::to_string(d));
    std::vector<S> v(x.numel());
    auto mu = std::make_shared<std::vector<S>>(rows);
    auto inv_eta = std::make_shared<std::vector<S>>(rows);
    kernels::par::layer_norm_rows(x.values().data(), gamma.values().data(), beta.values().data(),
                                  v.data(), mu->data(), inv_eta->data(), rows, d, eps);
    auto* xn = x.node_ptr().get();
    auto* gn = gamma.node_ptr().get();
    auto* bn = beta.node_ptr().get();
    return opdetail::finish<S>(
        "layer_norm", x.shape(), std::move(v), {x, gamma, beta},
        [xn, gn, bn, mu, inv_eta, rows, d](detail::Node<S>& self) {
            std::vector<S> xhat(d), g(d);
            for (std::size_t r = 0; r < rows; ++r) {
                const S* xr = xn->value.data() + r * d;
                const S* dyr = self.grad.data() + r * d;
                const S ie = (*inv_eta)[r];
                const S m = (*mu)[r];
                S mean_g = 0, mean_gx = 0;
                for (std::size_t j = 0; j < d; ++j) {
                    xhat[j] = (xr[j] - m) * ie;
                    g[j] = dyr[j] * gn->value[j];
                    mean_g += g[j];
                    mean_gx += g[j] * xhat[j];
                }
                mean_g /= S(d);
                mean_gx /= S(d);
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    S* dxr = xn->grad.data() + r * d;
                    for (std::size_t j = 0; j < d; ++j)
                        dxr[j] += ie * (g[j] - mean_g - xhat[j] * mean_gx);
                }
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (std::size_t j = 0; j < d; ++j) gn->grad[j] += dyr[j] * xhat[j];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (std::size_t j = 0; j < d; ++j) bn->grad[j] += dyr[j];
                }
            }
        });
}

// ---------------------------------------------------------------------------
// shape surgery

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows of zero tensors");
    const std::size_t d = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        opdetail::require_rank(p, 2, "concat_rows part");
        if (p.cols() != d) throw DimensionError("concat_rows column mismatch");
        total += p.rows();
    }
    std::vector<S> v;
    v.reserve(total * d);
    for (const auto& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
    auto out = Tensor<S>::from_values({total, d}, std::move(v));
    check_finite(out, "concat_rows");
    if (grad_enabled()) {
        bool any = false;
        for (const auto& p : parts)
            if (p.requires_grad()) any = true;
        if (any) {
            auto& nd = out.node();
            nd.requires_grad = true;
            std::vector<detail::Node<S>*> raw;
            std::vector<std::size_t> offsets;
            std::size_t off = 0;
            for (const auto& p : parts) {
                nd.parents.push_back(p.node_ptr());
                raw.push_back(p.node_ptr().get());
                offsets.push_back(off);
                off += p.numel();
            }
            nd.backward_fn = [raw, offsets](detail::Node<S>& self) {
                for (std::size_t i = 0; i < raw.size(); ++i) {
                    auto* p = raw[i];
                    if (!p->requires_grad) continue;
                    p->ensure_grad();
                    const std::size_t n = p->value.size();
                    for (std::size_t j = 0; j < n; ++j) p->grad[j] += self.grad[offsets[i] + j];
                }
            };
        }
    }
    return out;
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols of zero tensors");
    const std::size_t n = parts[0].rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        opdetail::require_rank(p, 2, "concat_cols part");
        if (p.rows() != n) throw DimensionError("concat_cols row mismatch");
        total += p.cols();
    }
    std::vector<S> v(n * total);
    std::size_t coff = 0;
    for (const auto& p : parts) {
        const std::size_t d = p.cols();
        const S* pv = p.values().data();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) v[i * total + coff + j] = pv[i * d + j];
        coff += d;
    }
    auto out = Tensor<S>::from_values({n, total}, std::move(v));
    check_finite(out, "concat_cols");
    if (grad_enabled()) {
        bool any = false;
        for (const auto& p : parts)
            if (p.requires_grad()) any = true;
        if (any) {
            auto& nd = out.node();
            nd.requires_grad = true;
            std::vector<detail::Node<S>*> raw;
            std::vector<std::size_t> widths;
            for (const auto& p : parts) {
                nd.parents.push_back(p.node_ptr());
                raw.push_back(p.node_ptr().get());
                widths.push_back(p.cols());
            }
            nd.backward_fn = [raw, widths, n, total](detail::Node<S>& self) {
                std::size_t off = 0;
                for (std::size_t i = 0; i < raw.size(); ++i) {
                    auto* p = raw[i];
                    const std::size_t d = widths[i];
                    if (p->requires_grad) {
                        p->ensure_grad();
                        for (std::size_t r = 0; r < n; ++r)
                            for (std::size_t j = 0; j < d; ++j)
                                p->grad[r * d + j] += self.grad[r * total + off + j];
                    }
                    off += d;
                }
            };
        }
    }
    return out;
}

// Copy of rows [r0, r1) of a rank-2 tensor; gradient scatters back.
template <typename S>
Tensor<S> slice_rows(const Tensor<S>& x, std::size_t r0, std::size_t r1) {
    opdetail::require_rank(x, 2, "slice_rows input");
    if (r0 >= r1 || r1 > x.rows())
        throw DimensionError("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                             ") out of range for " + shape_str(x.shape()));
    const std::size_t d = x.cols(), n = r1 - r0;
    std::vector<S> v(x.values().begin() + r0 * d, x.values().begin() + r1 * d);
    auto* xn = x.node_ptr().get();
    return opdetail::finish<S>("slice_rows", {n, d}, std::move(v), {x},
                               [xn, r0, n, d](detail::Node<S>& self) {
                                   if (!xn->requires_grad) return;
                                   xn->ensure_grad();
                                   for (std::size_t i = 0; i < n * d; ++i)
                                       xn->grad[r0 * d + i] += self.grad[i];
                               });
}

// Arithmetic mean over the rows of X, optionally restricted to the rows whose
// mask bit is set. With an empty selection the result is a zero row and no
// gradient flows (the all-padding case).
template <typename S>
Tensor<S> mean_rows(const Tensor<S>& x, const std::vector<bool>* mask = nullptr) {
    opdetail::require_rank(x, 2, "mean_rows input");
    const std::size_t n = x.rows(), d = x.cols();
    if (mask && mask->size() != n)
        throw DimensionError("mean_rows mask length " + std::to_string(mask->size()) +
                             " vs rows " + std::to_string(n));
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (!mask || (*mask)[i]) ++cnt;
    std::vector<S> v(d, S(0));
    if (cnt > 0) {
        const S* xv = x.values().data();
        for (std::size_t i = 0; i < n; ++i) {
            if (mask && !(*mask)[i]) continue;
            for (std::size_t j = 0; j < d; ++j) v[j] += xv[i * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) v[j] /= S(cnt);
    }
    auto sel = std::make_shared<std::vector<bool>>(mask ? *mask : std::vector<bool>(n, true));
    auto* xn = x.node_ptr().get();
    return opdetail::finish<S>("mean_rows", {std::size_t(1), d}, std::move(v), {x},
                               [xn, sel, n, d, cnt](detail::Node<S>& self) {
                                   if (!xn->requires_grad || cnt == 0) return;
                                   xn->ensure_grad();
                                   const S inv = S(1) / S(cnt);
                                   for (std::size_t i = 0; i < n; ++i) {
                                       if (!(*sel)[i]) continue;
                                       for (std::size_t j = 0; j < d; ++j)
                                           xn->grad[i * d + j] += self.grad[j] * inv;
                                   }
                               });
}

// ---------------------------------------------------------------------------
// similarity and ranking loss

namespace opdetail {

template <typename S>
S clamp_unit(S c) {
    return std::min(S(1), std::max(S(-1), c));
}

} // namespace opdetail

// cosine(a, b) = a.b / (|a||b|); defined as 0 when either vector is zero.
template <typename S>
Tensor<S> cosine(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.numel() != b.numel())
        throw DimensionError("cosine dimension mismatch: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const std::size_t d = a.numel();
    const S* av = a.values().data();
    const S* bv = b.values().data();
    S dot = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < d; ++i) {
        dot += av[i] * bv[i];
        aa += av[i] * av[i];
        bb += bv[i] * bv[i];
    }
    const S na = std::sqrt(aa), nb = std::sqrt(bb);
    const bool degenerate = (na == S(0)) || (nb == S(0));
    const S c = degenerate ? S(0) : opdetail::clamp_unit(dot / (na * nb));
    auto* an = a.node_ptr().get();
    auto* bn = b.node_ptr().get();
    return opdetail::finish<S>(
        "cosine", {1}, {c}, {a, b}, [an, bn, d, na, nb, c, degenerate](detail::Node<S>& self) {
            if (degenerate) return;
            const S g = self.grad[0];
            const S inv = S(1) / (na * nb);
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < d; ++i)
                    an->grad[i] += g * (bn->value[i] * inv - c * an->value[i] / (na * na));
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < d; ++i)
                    bn->grad[i] += g * (an->value[i] * inv - c * bn->value[i] / (nb * nb));
            }
        });
}

// C[i][j] = cosine(row i of A, row j of B). Rows of zero norm yield 0.
template <typename S>
Tensor<S> cosine_matrix(const Tensor<S>& a, const Tensor<S>& b) {
    opdetail::require_rank(a, 2, "cosine_matrix lhs");
    opdetail::require_rank(b, 2, "cosine_matrix rhs");
    if (a.cols() != b.cols())
        throw DimensionError("cosine_matrix dimension mismatch: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    const std::size_t p = a.rows(), q = b.rows(), d = a.cols();
    auto na = std::make_shared<std::vector<S>>(p);
    auto nb = std::make_shared<std::vector<S>>(q);
    const S* av = a.values().data();
    const S* bv = b.values().data();
    for (std::size_t i = 0; i < p; ++i) {
        S s = 0;
        for (std::size_t t = 0; t < d; ++t) s += av[i * d + t] * av[i * d + t];
        (*na)[i] = std::sqrt(s);
    }
    for (std::size_t j = 0; j < q; ++j) {
        S s = 0;
        for (std::size_t t = 0; t < d; ++t) s += bv[j * d + t] * bv[j * d + t];
        (*nb)[j] = std::sqrt(s);
    }
    std::vector<S> v(p * q);
#pragma omp parallel for schedule(static) if (p * q * d >= kernels::kParGrain)
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            if ((*na)[i] == S(0) || (*nb)[j] == S(0)) {
                v[i * q + j] = S(0);
                continue;
            }
            S dot = 0;
            for (std::size_t t = 0; t < d; ++t) dot += av[i * d + t] * bv[j * d + t];
            v[i * q + j] = opdetail::clamp_unit(dot / ((*na)[i] * (*nb)[j]));
        }
    }
    auto* an = a.node_ptr().get();
    auto* bn = b.node_ptr().get();
    return opdetail::finish<S>(
        "cosine_matrix", {p, q}, std::move(v), {a, b},
        [an, bn, na, nb, p, q, d](detail::Node<S>& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < p; ++i) {
                    if ((*na)[i] == S(0)) continue;
                    for (std::size_t j = 0; j < q; ++j) {
                        if ((*nb)[j] == S(0)) continue;
                        const S g = self.grad[i * q + j];
                        if (g == S(0)) continue;
                        const S c = self.value[i * q + j];
                        const S inv = S(1) / ((*na)[i] * (*nb)[j]);
                        for (std::size_t t = 0; t < d; ++t)
                            an->grad[i * d + t] +=
                                g * (bn->value[j * d + t] * inv -
                                     c * an->value[i * d + t] / ((*na)[i] * (*na)[i]));
                    }
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t j = 0; j < q; ++j) {
                    if ((*nb)[j] == S(0)) continue;
                    for (std::size_t i = 0; i < p; ++i) {
                        if ((*na)[i] == S(0)) continue;
                        const S g = self.grad[i * q + j];
                        if (g == S(0)) continue;
                        const S c = self.value[i * q + j];
                        const S inv = S(1) / ((*na)[i] * (*nb)[j]);
                        for (std::size_t t = 0; t < d; ++t)
                            bn->grad[j * d + t] +=
                                g * (an->value[i * d + t] * inv -
                                     c * bn->value[j * d + t] / ((*nb)[j] * (*nb)[j]));
                    }
                }
            }
        });
}

// Bidirectional hinge ranking loss over a square in-batch score matrix whose
// diagonal holds the positive pairs. Mean over ordered pairs i != j of
//   [margin - S_ii + S_ij]_+  +  [margin - S_ii + S_ji]_+ .
// With `hardest` set, only the strongest negative per query contributes
// (mean over queries, ties to the smaller index).
template <typename S>
Tensor<S> triplet_hinge_loss(const Tensor<S>& scores, S margin, bool hardest = false) {
    opdetail::require_rank(scores, 2, "triplet loss scores");
    const std::size_t b = scores.rows();
    if (scores.cols() != b)
        throw UsageError("triplet loss batch must be square, got " + shape_str(scores.shape()));
    if (b < 2) throw UsageError("triplet loss needs at least 2 batch items");
    const S* sv = scores.values().data();
    auto pos = [&](std::size_t i) { return sv[i * b + i]; };
    S total = 0;
    std::vector<std::size_t> hard_row(b, 0), hard_col(b, 0);
    if (!hardest) {
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < b; ++j) {
                if (i == j) continue;
                total += std::max(S(0), margin - pos(i) + sv[i * b + j]);
                total += std::max(S(0), margin - pos(i) + sv[j * b + i]);
            }
        total /= S(b * (b - 1));
    } else {
        for (std::size_t i = 0; i < b; ++i) {
            std::size_t jr = i == 0 ? 1 : 0, jc = jr;
            for (std::size_t j = 0; j < b; ++j) {
                if (j == i) continue;
                if (sv[i * b + j] > sv[i * b + jr]) jr = j;
                if (sv[j * b + i] > sv[jc * b + i]) jc = j;
            }
            hard_row[i] = jr;
            hard_col[i] = jc;
            total += std::max(S(0), margin - pos(i) + sv[i * b + jr]);
            total += std::max(S(0), margin - pos(i) + sv[jc * b + i]);
        }
        total /= S(b);
    }
    auto* sn = scores.node_ptr().get();
    return opdetail::finish<S>(
        "triplet_hinge_loss", {1}, {total}, {scores},
        [sn, b, margin, hardest, hard_row, hard_col](detail::Node<S>& self) {
            if (!sn->requires_grad) return;
            sn->ensure_grad();
            const S* sv = sn->value.data();
            S* ds = sn->grad.data();
            const S g = self.grad[0];
            auto pos = [&](std::size_t i) { return sv[i * b + i]; };
            if (!hardest) {
                const S w = g / S(b * (b - 1));
                for (std::size_t i = 0; i < b; ++i)
                    for (std::size_t j = 0; j < b; ++j) {
                        if (i == j) continue;
                        if (margin - pos(i) + sv[i * b + j] > S(0)) {
                            ds[i * b + j] += w;
                            ds[i * b + i] -= w;
                        }
                        if (margin - pos(i) + sv[j * b + i] > S(0)) {
                            ds[j * b + i] += w;
                            ds[i * b + i] -= w;
                        }
                    }
            } else {
                const S w = g / S(b);
                for (std::size_t i = 0; i < b; ++i) {
                    const std::size_t jr = hard_row[i], jc = hard_col[i];
                    if (margin - pos(i) + sv[i * b + jr] > S(0)) {
                        ds[i * b + jr] += w;
                        ds[i * b + i] -= w;
                    }
                    if (margin - pos(i) + sv[jc * b + i] > S(0)) {
                        ds[jc * b + i] += w;
                        ds[i * b + i] -= w;
                    }
                }
            }
        });
}

} // namespace bicnet
