#include "wdce/ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace wdce {

namespace {

bool any_tracked(std::initializer_list<TensorPtr> inputs) {
    if (Graph::active() == nullptr) return false;
    for (const auto& t : inputs) {
        if (t && t->requires_grad) return true;
    }
    return false;
}

TensorPtr make_output(Shape shape, bool track) {
    auto out = Tensor::zeros(std::move(shape), false);
    if (track) {
        out->requires_grad = true;
        out->ensure_grad();
    }
    return out;
}

void record(std::function<void()> fn) { Graph::active()->record(std::move(fn)); }

void check_not_null(const TensorPtr& t, const char* op) {
    if (!t) throw std::invalid_argument(std::string(op) + ": null tensor operand");
}

// Row-major strides; 0 on axes an operand broadcasts over, so a flat
// offset can be carried through an odometer walk of the output shape.
std::vector<std::size_t> aligned_strides(const Shape& op_shape, const Shape& out_shape) {
    const std::size_t r = out_shape.size();
    const std::size_t ro = op_shape.size();
    std::vector<std::size_t> strides(r, 0);
    std::size_t s = 1;
    for (std::size_t i = 0; i < ro; ++i) {
        const std::size_t axis = ro - 1 - i;          // operand axis, from the back
        const std::size_t out_axis = r - 1 - i;       // trailing alignment
        if (op_shape[axis] == out_shape[out_axis]) {
            strides[out_axis] = (op_shape[axis] == 1) ? 0 : s;
        } else if (op_shape[axis] == 1) {
            strides[out_axis] = 0;
        } else {
            throw std::invalid_argument("broadcast mismatch between " + shape_str(op_shape) +
                                        " and " + shape_str(out_shape));
        }
        s *= op_shape[axis];
    }
    return strides;
}

// Walks every output element once, handing out the flat offsets of both
// operands. f(out_i, a_i, b_i).
template <typename F>
void for_each_broadcast(const Shape& out_shape, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
    const std::size_t total = shape_size(out_shape);
    const std::size_t r = out_shape.size();
    std::vector<std::size_t> idx(r, 0);
    std::size_t ai = 0, bi = 0;
    for (std::size_t i = 0; i < total; ++i) {
        f(i, ai, bi);
        for (std::size_t a = r; a-- > 0;) {
            ++idx[a];
            ai += sa[a];
            bi += sb[a];
            if (idx[a] < out_shape[a]) break;
            ai -= sa[a] * out_shape[a];
            bi -= sb[a] * out_shape[a];
            idx[a] = 0;
        }
    }
}

using BinaryFwd = double (*)(double, double);
using BinaryBwd = void (*)(double a, double b, double g, double& ga, double& gb);

TensorPtr binary_elementwise(const TensorPtr& a, const TensorPtr& b, const char* name,
                             BinaryFwd fwd, BinaryBwd bwd) {
    check_not_null(a, name);
    check_not_null(b, name);
    const Shape out_shape = broadcast_shape(a->shape, b->shape);
    const bool track = any_tracked({a, b});
    auto out = make_output(out_shape, track);

    if (a->shape == b->shape) {
        for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = fwd(a->data[i], b->data[i]);
    } else {
        const auto sa = aligned_strides(a->shape, out_shape);
        const auto sb = aligned_strides(b->shape, out_shape);
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ai, std::size_t bi) {
            out->data[i] = fwd(a->data[ai], b->data[bi]);
        });
    }

    if (track) {
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        record([a, b, out, bwd]() {
            const bool ga_on = a->requires_grad;
            const bool gb_on = b->requires_grad;
            double ga = 0.0, gb = 0.0;
            if (a->shape == b->shape) {
                for (std::size_t i = 0; i < out->size(); ++i) {
                    bwd(a->data[i], b->data[i], out->grad[i], ga, gb);
                    if (ga_on) a->grad[i] += ga;
                    if (gb_on) b->grad[i] += gb;
                }
            } else {
                const auto sa = aligned_strides(a->shape, out->shape);
                const auto sb = aligned_strides(b->shape, out->shape);
                for_each_broadcast(out->shape, sa, sb,
                                   [&](std::size_t i, std::size_t ai, std::size_t bi) {
                    bwd(a->data[ai], b->data[bi], out->grad[i], ga, gb);
                    if (ga_on) a->grad[ai] += ga;
                    if (gb_on) b->grad[bi] += gb;
                });
            }
        });
    }
    return out;
}

// [outer, axis extent, inner] view of a tensor around one axis.
struct AxisView {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
    if (axis >= shape.size()) {
        throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                    " out of range for shape " + shape_str(shape));
    }
    AxisView v;
    for (std::size_t a = 0; a < axis; ++a) v.outer *= shape[a];
    v.n = shape[axis];
    for (std::size_t a = axis + 1; a < shape.size(); ++a) v.inner *= shape[a];
    return v;
}

using UnaryFwd = double (*)(double);
using UnaryBwd = double (*)(double x, double y, double g);  // returns dx

TensorPtr unary_elementwise(const TensorPtr& x, const char* name, UnaryFwd fwd, UnaryBwd bwd) {
    check_not_null(x, name);
    const bool track = any_tracked({x});
    auto out = make_output(x->shape, track);
    for (std::size_t i = 0; i < x->size(); ++i) out->data[i] = fwd(x->data[i]);
    if (track) {
        x->ensure_grad();
        record([x, out, bwd]() {
            for (std::size_t i = 0; i < x->size(); ++i) {
                x->grad[i] += bwd(x->data[i], out->data[i], out->grad[i]);
            }
        });
    }
    return out;
}

void normalize_axes(std::vector<std::size_t>& axes, std::size_t rank, const char* op) {
    if (axes.empty()) {
        axes.resize(rank);
        for (std::size_t a = 0; a < rank; ++a) axes[a] = a;
        return;
    }
    std::sort(axes.begin(), axes.end());
    axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
    if (axes.back() >= rank) {
        throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axes.back()) +
                                    " out of range for rank " + std::to_string(rank));
    }
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
        const std::size_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
        if (ea != eb && ea != 1 && eb != 1) {
            throw std::invalid_argument("shapes " + shape_str(a) + " and " + shape_str(b) +
                                        " do not broadcast");
        }
        out[r - 1 - i] = std::max(ea, eb);
    }
    return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    return binary_elementwise(a, b, "add",
        [](double x, double y) { return x + y; },
        [](double, double, double g, double& ga, double& gb) { ga = g; gb = g; });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    return binary_elementwise(a, b, "sub",
        [](double x, double y) { return x - y; },
        [](double, double, double g, double& ga, double& gb) { ga = g; gb = -g; });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    return binary_elementwise(a, b, "mul",
        [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& ga, double& gb) { ga = g * y; gb = g * x; });
}

TensorPtr div(const TensorPtr& a, const TensorPtr& b) {
    check_not_null(b, "div");
    for (double v : b->data) {
        if (v == 0.0) throw std::domain_error("div: zero divisor");
    }
    return binary_elementwise(a, b, "div",
        [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& ga, double& gb) {
            ga = g / y;
            gb = -g * x / (y * y);
        });
}

TensorPtr add_scalar(const TensorPtr& a, double c) { return add(a, Tensor::scalar(c)); }

TensorPtr mul_scalar(const TensorPtr& a, double c) { return mul(a, Tensor::scalar(c)); }

TensorPtr neg(const TensorPtr& a) { return mul_scalar(a, -1.0); }

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    check_not_null(a, "matmul");
    check_not_null(b, "matmul");
    if (a->rank() != 2 || b->rank() != 2 || a->shape[1] != b->shape[0]) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->shape) +
                                    " x " + shape_str(b->shape));
    }
    const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    const bool track = any_tracked({a, b});
    auto out = make_output({m, n}, track);

    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a->data[i * k + p];
            if (av == 0.0) continue;
            const double* brow = &b->data[p * n];
            double* orow = &out->data[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }

    if (track) {
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        record([a, b, out, m, k, n]() {
            if (a->requires_grad) {
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        const double* grow = &out->grad[i * n];
                        const double* brow = &b->data[p * n];
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        a->grad[i * k + p] += acc;
                    }
                }
            }
            if (b->requires_grad) {
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = &out->grad[i * n];
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = a->data[i * k + p];
                        if (av == 0.0) continue;
                        double* bg = &b->grad[p * n];
                        for (std::size_t j = 0; j < n; ++j) bg[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr bmm(const TensorPtr& a, const TensorPtr& b) {
    check_not_null(a, "bmm");
    check_not_null(b, "bmm");
    if (a->rank() != 3 || b->rank() != 3 || a->shape[0] != b->shape[0] || a->shape[2] != b->shape[1]) {
        throw std::invalid_argument("bmm: incompatible shapes " + shape_str(a->shape) +
                                    " x " + shape_str(b->shape));
    }
    const std::size_t batches = a->shape[0], m = a->shape[1], k = a->shape[2], n = b->shape[2];
    const bool track = any_tracked({a, b});
    auto out = make_output({batches, m, n}, track);

    for (std::size_t q = 0; q < batches; ++q) {
        const double* A = &a->data[q * m * k];
        const double* B = &b->data[q * k * n];
        double* O = &out->data[q * m * n];
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double av = A[i * k + p];
                if (av == 0.0) continue;
                const double* brow = &B[p * n];
                double* orow = &O[i * n];
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    }

    if (track) {
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        record([a, b, out, batches, m, k, n]() {
            for (std::size_t q = 0; q < batches; ++q) {
                const double* A = &a->data[q * m * k];
                const double* B = &b->data[q * k * n];
                const double* G = &out->grad[q * m * n];
                if (a->requires_grad) {
                    double* GA = &a->grad[q * m * k];
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t p = 0; p < k; ++p) {
                            const double* grow = &G[i * n];
                            const double* brow = &B[p * n];
                            double acc = 0.0;
                            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                            GA[i * k + p] += acc;
                        }
                    }
                }
                if (b->requires_grad) {
                    double* GB = &b->grad[q * k * n];
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* grow = &G[i * n];
                        for (std::size_t p = 0; p < k; ++p) {
                            const double av = A[i * k + p];
                            if (av == 0.0) continue;
                            double* bg = &GB[p * n];
                            for (std::size_t j = 0; j < n; ++j) bg[j] += av * grow[j];
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr conv1d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias, std::size_t pad) {
    check_not_null(x, "conv1d");
    check_not_null(w, "conv1d");
    if (x->rank() != 3 || w->rank() != 3 || x->shape[1] != w->shape[1]) {
        throw std::invalid_argument("conv1d: incompatible shapes x=" + shape_str(x->shape) +
                                    " w=" + shape_str(w->shape));
    }
    const std::size_t batch = x->shape[0], cin = x->shape[1], len = x->shape[2];
    const std::size_t cout = w->shape[0], k = w->shape[2];
    if (len + 2 * pad < k) throw std::invalid_argument("conv1d: kernel longer than padded input");
    const std::size_t lout = len + 2 * pad - k + 1;
    if (bias && (bias->rank() != 1 || bias->shape[0] != cout)) {
        throw std::invalid_argument("conv1d: bias shape " + shape_str(bias->shape) +
                                    " does not match " + std::to_string(cout) + " output channels");
    }

    const bool track = any_tracked({x, w, bias});
    auto out = make_output({batch, cout, lout}, track);

    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t co = 0; co < cout; ++co) {
            double* orow = &out->data[(n * cout + co) * lout];
            if (bias) {
                const double bv = bias->data[co];
                for (std::size_t lo = 0; lo < lout; ++lo) orow[lo] = bv;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* xrow = &x->data[(n * cin + ci) * len];
                const double* wrow = &w->data[(co * cin + ci) * k];
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double wv = wrow[kk];
                    if (wv == 0.0) continue;
                    // valid lo range keeps li = lo + kk - pad inside [0, len)
                    const std::size_t lo_begin = pad > kk ? pad - kk : 0;
                    const std::size_t lo_end = std::min(lout, len + pad - kk);
                    for (std::size_t lo = lo_begin; lo < lo_end; ++lo) {
                        orow[lo] += wv * xrow[lo + kk - pad];
                    }
                }
            }
        }
    }

    if (track) {
        if (x->requires_grad) x->ensure_grad();
        if (w->requires_grad) w->ensure_grad();
        if (bias && bias->requires_grad) bias->ensure_grad();
        record([x, w, bias, out, batch, cin, cout, len, lout, k, pad]() {
            for (std::size_t n = 0; n < batch; ++n) {
                for (std::size_t co = 0; co < cout; ++co) {
                    const double* grow = &out->grad[(n * cout + co) * lout];
                    if (bias && bias->requires_grad) {
                        double acc = 0.0;
                        for (std::size_t lo = 0; lo < lout; ++lo) acc += grow[lo];
                        bias->grad[co] += acc;
                    }
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const double* xrow = &x->data[(n * cin + ci) * len];
                        double* xgrow = x->requires_grad ? &x->grad[(n * cin + ci) * len] : nullptr;
                        const double* wrow = &w->data[(co * cin + ci) * k];
                        double* wgrow = w->requires_grad ? &w->grad[(co * cin + ci) * k] : nullptr;
                        for (std::size_t kk = 0; kk < k; ++kk) {
                            const std::size_t lo_begin = pad > kk ? pad - kk : 0;
                            const std::size_t lo_end = std::min(lout, len + pad - kk);
                            if (wgrow) {
                                double acc = 0.0;
                                for (std::size_t lo = lo_begin; lo < lo_end; ++lo) {
                                    acc += grow[lo] * xrow[lo + kk - pad];
                                }
                                wgrow[kk] += acc;
                            }
                            if (xgrow) {
                                const double wv = wrow[kk];
                                if (wv == 0.0) continue;
                                for (std::size_t lo = lo_begin; lo < lo_end; ++lo) {
                                    xgrow[lo + kk - pad] += wv * grow[lo];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 std::size_t pad_h, std::size_t pad_w) {
    check_not_null(x, "conv2d");
    check_not_null(w, "conv2d");
    if (x->rank() != 4 || w->rank() != 4 || x->shape[1] != w->shape[1]) {
        throw std::invalid_argument("conv2d: incompatible shapes x=" + shape_str(x->shape) +
                                    " w=" + shape_str(w->shape));
    }
    const std::size_t batch = x->shape[0], cin = x->shape[1], h = x->shape[2], wd = x->shape[3];
    const std::size_t cout = w->shape[0], kh = w->shape[2], kw = w->shape[3];
    if (h + 2 * pad_h < kh || wd + 2 * pad_w < kw) {
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    }
    const std::size_t ho = h + 2 * pad_h - kh + 1;
    const std::size_t wo = wd + 2 * pad_w - kw + 1;
    if (bias && (bias->rank() != 1 || bias->shape[0] != cout)) {
        throw std::invalid_argument("conv2d: bias shape " + shape_str(bias->shape) +
                                    " does not match " + std::to_string(cout) + " output channels");
    }

    const bool track = any_tracked({x, w, bias});
    auto out = make_output({batch, cout, ho, wo}, track);

    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t co = 0; co < cout; ++co) {
            double* oimg = &out->data[(n * cout + co) * ho * wo];
            if (bias) {
                const double bv = bias->data[co];
                for (std::size_t i = 0; i < ho * wo; ++i) oimg[i] = bv;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* ximg = &x->data[(n * cin + ci) * h * wd];
                const double* wmat = &w->data[(co * cin + ci) * kh * kw];
                for (std::size_t r = 0; r < kh; ++r) {
                    const std::size_t oh_begin = pad_h > r ? pad_h - r : 0;
                    const std::size_t oh_end = std::min(ho, h + pad_h - r);
                    for (std::size_t c = 0; c < kw; ++c) {
                        const double wv = wmat[r * kw + c];
                        if (wv == 0.0) continue;
                        const std::size_t ow_begin = pad_w > c ? pad_w - c : 0;
                        const std::size_t ow_end = std::min(wo, wd + pad_w - c);
                        for (std::size_t oh = oh_begin; oh < oh_end; ++oh) {
                            const double* xrow = &ximg[(oh + r - pad_h) * wd];
                            double* orow = &oimg[oh * wo];
                            for (std::size_t ow = ow_begin; ow < ow_end; ++ow) {
                                orow[ow] += wv * xrow[ow + c - pad_w];
                            }
                        }
                    }
                }
            }
        }
    }

    if (track) {
        if (x->requires_grad) x->ensure_grad();
        if (w->requires_grad) w->ensure_grad();
        if (bias && bias->requires_grad) bias->ensure_grad();
        record([x, w, bias, out, batch, cin, cout, h, wd, ho, wo, kh, kw, pad_h, pad_w]() {
            for (std::size_t n = 0; n < batch; ++n) {
                for (std::size_t co = 0; co < cout; ++co) {
                    const double* gimg = &out->grad[(n * cout + co) * ho * wo];
                    if (bias && bias->requires_grad) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < ho * wo; ++i) acc += gimg[i];
                        bias->grad[co] += acc;
                    }
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const double* ximg = &x->data[(n * cin + ci) * h * wd];
                        double* xgimg = x->requires_grad ? &x->grad[(n * cin + ci) * h * wd] : nullptr;
                        const double* wmat = &w->data[(co * cin + ci) * kh * kw];
                        double* wgmat = w->requires_grad ? &w->grad[(co * cin + ci) * kh * kw] : nullptr;
                        for (std::size_t r = 0; r < kh; ++r) {
                            const std::size_t oh_begin = pad_h > r ? pad_h - r : 0;
                            const std::size_t oh_end = std::min(ho, h + pad_h - r);
                            for (std::size_t c = 0; c < kw; ++c) {
                                const std::size_t ow_begin = pad_w > c ? pad_w - c : 0;
                                const std::size_t ow_end = std::min(wo, wd + pad_w - c);
                                if (wgmat) {
                                    double acc = 0.0;
                                    for (std::size_t oh = oh_begin; oh < oh_end; ++oh) {
                                        const double* xrow = &ximg[(oh + r - pad_h) * wd];
                                        const double* grow = &gimg[oh * wo];
                                        for (std::size_t ow = ow_begin; ow < ow_end; ++ow) {
                                            acc += grow[ow] * xrow[ow + c - pad_w];
                                        }
                                    }
                                    wgmat[r * kw + c] += acc;
                                }
                                if (xgimg) {
                                    const double wv = wmat[r * kw + c];
                                    if (wv == 0.0) continue;
                                    for (std::size_t oh = oh_begin; oh < oh_end; ++oh) {
                                        double* xgrow = &xgimg[(oh + r - pad_h) * wd];
                                        const double* grow = &gimg[oh * wo];
                                        for (std::size_t ow = ow_begin; ow < ow_end; ++ow) {
                                            xgrow[ow + c - pad_w] += wv * grow[ow];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr reshape(const TensorPtr& x, Shape new_shape) {
    check_not_null(x, "reshape");
    if (shape_size(new_shape) != x->size()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(x->shape) + " as " +
                                    shape_str(new_shape));
    }
    const bool track = any_tracked({x});
    auto out = make_output(std::move(new_shape), track);
    out->data = x->data;
    if (track) {
        x->ensure_grad();
        record([x, out]() {
            for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

TensorPtr permute(const TensorPtr& x, const std::vector<std::size_t>& order) {
    check_not_null(x, "permute");
    const std::size_t r = x->rank();
    if (order.size() != r) {
        throw std::invalid_argument("permute: order has " + std::to_string(order.size()) +
                                    " entries for rank " + std::to_string(r));
    }
    std::vector<bool> seen(r, false);
    Shape out_shape(r);
    for (std::size_t j = 0; j < r; ++j) {
        if (order[j] >= r || seen[order[j]]) {
            throw std::invalid_argument("permute: invalid axis order");
        }
        seen[order[j]] = true;
        out_shape[j] = x->shape[order[j]];
    }

    // out strides seen from input axis order, so one odometer walk of the
    // input emits the matching output offsets.
    std::vector<std::size_t> strides_of_out(r, 1);
    for (std::size_t j = r - 1; j > 0; --j) strides_of_out[j - 1] = strides_of_out[j] * out_shape[j];
    std::vector<std::size_t> contrib(r, 0);
    for (std::size_t j = 0; j < r; ++j) contrib[order[j]] = strides_of_out[j];

    const bool track = any_tracked({x});
    auto out = make_output(out_shape, track);

    const std::size_t total = x->size();
    std::vector<std::size_t> idx(r, 0);
    std::size_t oi = 0;
    for (std::size_t i = 0; i < total; ++i) {
        out->data[oi] = x->data[i];
        for (std::size_t a = r; a-- > 0;) {
            ++idx[a];
            oi += contrib[a];
            if (idx[a] < x->shape[a]) break;
            oi -= contrib[a] * x->shape[a];
            idx[a] = 0;
        }
    }

    if (track) {
        x->ensure_grad();
        record([x, out, contrib, r]() {
            const std::size_t total = x->size();
            std::vector<std::size_t> idx(r, 0);
            std::size_t oi = 0;
            for (std::size_t i = 0; i < total; ++i) {
                x->grad[i] += out->grad[oi];
                for (std::size_t a = r; a-- > 0;) {
                    ++idx[a];
                    oi += contrib[a];
                    if (idx[a] < x->shape[a]) break;
                    oi -= contrib[a] * x->shape[a];
                    idx[a] = 0;
                }
            }
        });
    }
    return out;
}

TensorPtr transpose2d(const TensorPtr& x) {
    check_not_null(x, "transpose2d");
    if (x->rank() != 2) {
        throw std::invalid_argument("transpose2d expects rank 2, got " + shape_str(x->shape));
    }
    return permute(x, {1, 0});
}

TensorPtr broadcast_to(const TensorPtr& x, const Shape& target) {
    check_not_null(x, "broadcast_to");
    if (broadcast_shape(x->shape, target) != target) {
        throw std::invalid_argument("broadcast_to: " + shape_str(x->shape) +
                                    " does not broadcast to " + shape_str(target));
    }
    const bool track = any_tracked({x});
    auto out = make_output(target, track);
    const auto sx = aligned_strides(x->shape, target);
    const auto so = aligned_strides(target, target);
    for_each_broadcast(target, sx, so, [&](std::size_t i, std::size_t xi, std::size_t) {
        out->data[i] = x->data[xi];
    });
    if (track) {
        x->ensure_grad();
        record([x, out]() {
            const auto sx = aligned_strides(x->shape, out->shape);
            const auto so = aligned_strides(out->shape, out->shape);
            for_each_broadcast(out->shape, sx, so, [&](std::size_t i, std::size_t xi, std::size_t) {
                x->grad[xi] += out->grad[i];
            });
        });
    }
    return out;
}

namespace {

// Shared skeleton for sum/mean over a sorted unique axis list.
TensorPtr reduce_impl(const TensorPtr& x, std::vector<std::size_t> axes, bool keep_dims,
                      bool take_mean, const char* name) {
    check_not_null(x, name);
    normalize_axes(axes, x->rank(), name);

    const std::size_t r = x->rank();
    std::vector<bool> reduced(r, false);
    std::size_t count = 1;
    for (std::size_t a : axes) {
        reduced[a] = true;
        count *= x->shape[a];
    }

    Shape out_shape;
    for (std::size_t a = 0; a < r; ++a) {
        if (!reduced[a]) out_shape.push_back(x->shape[a]);
        else if (keep_dims) out_shape.push_back(1);
    }
    if (out_shape.empty()) out_shape = {1};

    // contribution of each input axis to the output flat offset
    std::vector<std::size_t> contrib(r, 0);
    std::size_t s = 1;
    for (std::size_t a = r; a-- > 0;) {
        if (!reduced[a]) {
            contrib[a] = s;
            s *= x->shape[a];
        }
    }

    const bool track = any_tracked({x});
    auto out = make_output(out_shape, track);
    const double scale = take_mean ? 1.0 / static_cast<double>(count) : 1.0;

    {
        std::vector<std::size_t> idx(r, 0);
        std::size_t oi = 0;
        for (std::size_t i = 0; i < x->size(); ++i) {
            out->data[oi] += x->data[i];
            for (std::size_t a = r; a-- > 0;) {
                ++idx[a];
                oi += contrib[a];
                if (idx[a] < x->shape[a]) break;
                oi -= contrib[a] * x->shape[a];
                idx[a] = 0;
            }
        }
        if (take_mean) {
            for (double& v : out->data) v *= scale;
        }
    }

    if (track) {
        x->ensure_grad();
        record([x, out, contrib, r, scale]() {
            std::vector<std::size_t> idx(r, 0);
            std::size_t oi = 0;
            for (std::size_t i = 0; i < x->size(); ++i) {
                x->grad[i] += out->grad[oi] * scale;
                for (std::size_t a = r; a-- > 0;) {
                    ++idx[a];
                    oi += contrib[a];
                    if (idx[a] < x->shape[a]) break;
                    oi -= contrib[a] * x->shape[a];
                    idx[a] = 0;
                }
            }
        });
    }
    return out;
}

}  // namespace

TensorPtr sum(const TensorPtr& x, std::vector<std::size_t> axes, bool keep_dims) {
    return reduce_impl(x, std::move(axes), keep_dims, false, "sum");
}

TensorPtr mean(const TensorPtr& x, std::vector<std::size_t> axes, bool keep_dims) {
    return reduce_impl(x, std::move(axes), keep_dims, true, "mean");
}

TensorPtr l2_norm(const TensorPtr& x, std::size_t axis, bool keep_dims) {
    check_not_null(x, "l2_norm");
    const AxisView v = axis_view(x->shape, axis, "l2_norm");

    Shape out_shape;
    for (std::size_t a = 0; a < x->rank(); ++a) {
        if (a == axis) {
            if (keep_dims) out_shape.push_back(1);
        } else {
            out_shape.push_back(x->shape[a]);
        }
    }
    if (out_shape.empty()) out_shape = {1};

    const bool track = any_tracked({x});
    auto out = make_output(out_shape, track);

    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            double acc = 0.0;
            for (std::size_t j = 0; j < v.n; ++j) {
                const double val = x->data[(o * v.n + j) * v.inner + in];
                acc += val * val;
            }
            out->data[o * v.inner + in] = std::sqrt(acc);
        }
    }

    if (track) {
        x->ensure_grad();
        record([x, out, v]() {
            for (std::size_t o = 0; o < v.outer; ++o) {
                for (std::size_t in = 0; in < v.inner; ++in) {
                    const double norm = out->data[o * v.inner + in];
                    if (norm == 0.0) continue;  // subgradient 0 at the origin
                    const double g = out->grad[o * v.inner + in] / norm;
                    for (std::size_t j = 0; j < v.n; ++j) {
                        const std::size_t xi = (o * v.n + j) * v.inner + in;
                        x->grad[xi] += g * x->data[xi];
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr relu(const TensorPtr& x) {
    return unary_elementwise(x, "relu",
        [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double, double g) { return v > 0.0 ? g : 0.0; });
}

TensorPtr sigmoid(const TensorPtr& x) {
    return unary_elementwise(x, "sigmoid",
        [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y, double g) { return g * y * (1.0 - y); });
}

TensorPtr log(const TensorPtr& x) {
    check_not_null(x, "log");
    for (double v : x->data) {
        if (v <= 0.0) throw std::domain_error("log: non-positive input " + std::to_string(v));
    }
    return unary_elementwise(x, "log",
        [](double v) { return std::log(v); },
        [](double v, double, double g) { return g / v; });
}

TensorPtr exp(const TensorPtr& x) {
    return unary_elementwise(x, "exp",
        [](double v) { return std::exp(v); },
        [](double, double y, double g) { return g * y; });
}

TensorPtr softmax(const TensorPtr& x, std::size_t axis) {
    check_not_null(x, "softmax");
    const AxisView v = axis_view(x->shape, axis, "softmax");
    if (v.n == 0) throw std::invalid_argument("softmax: empty axis");

    const bool track = any_tracked({x});
    auto out = make_output(x->shape, track);

    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t base = o * v.n * v.inner + in;
            double m = x->data[base];
            for (std::size_t j = 1; j < v.n; ++j) m = std::max(m, x->data[base + j * v.inner]);
            double s = 0.0;
            for (std::size_t j = 0; j < v.n; ++j) {
                const double e = std::exp(x->data[base + j * v.inner] - m);
                out->data[base + j * v.inner] = e;
                s += e;
            }
            const double inv = 1.0 / s;
            for (std::size_t j = 0; j < v.n; ++j) out->data[base + j * v.inner] *= inv;
        }
    }

    if (track) {
        x->ensure_grad();
        record([x, out, v]() {
            for (std::size_t o = 0; o < v.outer; ++o) {
                for (std::size_t in = 0; in < v.inner; ++in) {
                    const std::size_t base = o * v.n * v.inner + in;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < v.n; ++j) {
                        const std::size_t i = base + j * v.inner;
                        dot += out->grad[i] * out->data[i];
                    }
                    for (std::size_t j = 0; j < v.n; ++j) {
                        const std::size_t i = base + j * v.inner;
                        x->grad[i] += out->data[i] * (out->grad[i] - dot);
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr log_softmax(const TensorPtr& x, std::size_t axis) {
    check_not_null(x, "log_softmax");
    const AxisView v = axis_view(x->shape, axis, "log_softmax");
    if (v.n == 0) throw std::invalid_argument("log_softmax: empty axis");

    const bool track = any_tracked({x});
    auto out = make_output(x->shape, track);

    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t base = o * v.n * v.inner + in;
            double m = x->data[base];
            for (std::size_t j = 1; j < v.n; ++j) m = std::max(m, x->data[base + j * v.inner]);
            double s = 0.0;
            for (std::size_t j = 0; j < v.n; ++j) s += std::exp(x->data[base + j * v.inner] - m);
            const double lse = m + std::log(s);
            for (std::size_t j = 0; j < v.n; ++j) {
                const std::size_t i = base + j * v.inner;
                out->data[i] = x->data[i] - lse;
            }
        }
    }

    if (track) {
        x->ensure_grad();
        record([x, out, v]() {
            for (std::size_t o = 0; o < v.outer; ++o) {
                for (std::size_t in = 0; in < v.inner; ++in) {
                    const std::size_t base = o * v.n * v.inner + in;
                    double gsum = 0.0;
                    for (std::size_t j = 0; j < v.n; ++j) gsum += out->grad[base + j * v.inner];
                    for (std::size_t j = 0; j < v.n; ++j) {
                        const std::size_t i = base + j * v.inner;
                        x->grad[i] += out->grad[i] - std::exp(out->data[i]) * gsum;
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr concat(const std::vector<TensorPtr>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    for (const auto& p : parts) check_not_null(p, "concat");
    const std::size_t r = parts[0]->rank();
    if (axis >= r) throw std::invalid_argument("concat: axis out of range");

    Shape out_shape = parts[0]->shape;
    std::size_t total_axis = 0;
    for (const auto& p : parts) {
        if (p->rank() != r) throw std::invalid_argument("concat: rank mismatch");
        for (std::size_t a = 0; a < r; ++a) {
            if (a != axis && p->shape[a] != out_shape[a]) {
                throw std::invalid_argument("concat: shapes " + shape_str(out_shape) + " and " +
                                            shape_str(p->shape) + " disagree off the concat axis");
            }
        }
        total_axis += p->shape[axis];
    }
    out_shape[axis] = total_axis;

    bool track = false;
    if (Graph::active()) {
        for (const auto& p : parts) track = track || p->requires_grad;
    }
    auto out = make_output(out_shape, track);

    const AxisView ov = axis_view(out_shape, axis, "concat");
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t pn = p->shape[axis];
        for (std::size_t o = 0; o < ov.outer; ++o) {
            const double* src = &p->data[o * pn * ov.inner];
            double* dst = &out->data[(o * ov.n + offset) * ov.inner];
            std::copy(src, src + pn * ov.inner, dst);
        }
        offset += pn;
    }

    if (track) {
        for (const auto& p : parts) {
            if (p->requires_grad) p->ensure_grad();
        }
        record([parts, out, ov, axis]() {
            std::size_t offset = 0;
            for (const auto& p : parts) {
                const std::size_t pn = p->shape[axis];
                if (p->requires_grad) {
                    for (std::size_t o = 0; o < ov.outer; ++o) {
                        const double* g = &out->grad[(o * ov.n + offset) * ov.inner];
                        double* dst = &p->grad[o * pn * ov.inner];
                        for (std::size_t i = 0; i < pn * ov.inner; ++i) dst[i] += g[i];
                    }
                }
                offset += pn;
            }
        });
    }
    return out;
}

TensorPtr slice(const TensorPtr& x, std::size_t axis, std::size_t start, std::size_t stop) {
    check_not_null(x, "slice");
    const AxisView v = axis_view(x->shape, axis, "slice");
    if (start >= stop || stop > v.n) {
        throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                    std::to_string(stop) + ") invalid for extent " +
                                    std::to_string(v.n));
    }
    Shape out_shape = x->shape;
    out_shape[axis] = stop - start;

    const bool track = any_tracked({x});
    auto out = make_output(out_shape, track);
    const std::size_t sn = stop - start;

    for (std::size_t o = 0; o < v.outer; ++o) {
        const double* src = &x->data[(o * v.n + start) * v.inner];
        double* dst = &out->data[o * sn * v.inner];
        std::copy(src, src + sn * v.inner, dst);
    }

    if (track) {
        x->ensure_grad();
        record([x, out, v, start, sn]() {
            for (std::size_t o = 0; o < v.outer; ++o) {
                const double* g = &out->grad[o * sn * v.inner];
                double* dst = &x->grad[(o * v.n + start) * v.inner];
                for (std::size_t i = 0; i < sn * v.inner; ++i) dst[i] += g[i];
            }
        });
    }
    return out;
}

TensorPtr softmax_cross_entropy(const TensorPtr& logits, const std::vector<std::size_t>& labels) {
    check_not_null(logits, "softmax_cross_entropy");
    if (logits->rank() != 2) {
        throw std::invalid_argument("softmax_cross_entropy: logits must be N x K, got " +
                                    shape_str(logits->shape));
    }
    const std::size_t n = logits->shape[0], k = logits->shape[1];
    if (labels.size() != n) {
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(n) + " rows");
    }
    for (std::size_t label : labels) {
        if (label >= k) {
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                        " out of range for " + std::to_string(k) + " classes");
        }
    }

    const bool track = any_tracked({logits});
    auto out = make_output({1}, track);

    // keep per-row probabilities for the backward pass
    auto probs = std::make_shared<std::vector<double>>(n * k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &logits->data[i * k];
        double m = row[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double e = std::exp(row[j] - m);
            (*probs)[i * k + j] = e;
            s += e;
        }
        const double inv = 1.0 / s;
        for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] *= inv;
        total += -(row[labels[i]] - m - std::log(s));
    }
    out->data[0] = total / static_cast<double>(n);

    if (track) {
        logits->ensure_grad();
        record([logits, out, probs, labels, n, k]() {
            const double g = out->grad[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < k; ++j) {
                    const double onehot = (j == labels[i]) ? 1.0 : 0.0;
                    logits->grad[i * k + j] += g * ((*probs)[i * k + j] - onehot);
                }
            }
        });
    }
    return out;
}

std::vector<std::size_t> argmax_rows(const TensorPtr& logits) {
    check_not_null(logits, "argmax_rows");
    if (logits->rank() != 2) {
        throw std::invalid_argument("argmax_rows expects N x K, got " + shape_str(logits->shape));
    }
    const std::size_t n = logits->shape[0], k = logits->shape[1];
    std::vector<std::size_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &logits->data[i * k];
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (row[j] > row[best]) best = j;
        }
        out[i] = best;
    }
    return out;
}

}  // namespace wdce
