// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace phishdetect {

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> tensors) {
    for (const Tensor* t : tensors) {
        if (t->defined() && t->requires_grad()) {
            return true;
        }
    }
    return false;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

Tensor make_output(Tape& tape, Shape shape, std::vector<double> data, bool needs_grad) {
    Tensor out = Tensor::from_data(std::move(shape), std::move(data));
    out.set_requires_grad(tape.enabled() && needs_grad);
    return out;
}

// Unary elementwise helper: f maps x value to y value, dfydx maps (x, y) to
// the local derivative.
template <typename F, typename DF>
Tensor unary_op(Tape& tape, const char* name, const Tensor& a, F f, DF dfydx) {
    std::vector<double> out(a.data().begin(), a.data().end());
    for (auto& v : out) {
        v = f(v);
    }
    Tensor result = make_output(tape, a.shape(), std::move(out), a.requires_grad());
    if (result.requires_grad()) {
        tape.record(name, {a}, result, [a, result, dfydx]() mutable {
            auto gout = result.grad();
            auto x = a.data();
            auto y = result.data();
            std::vector<double> gin(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                gin[i] = gout[i] * dfydx(x[i], y[i]);
            }
            a.accumulate_grad(gin);
        });
    }
    return result;
}

}  // namespace

double sigmoid_value(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void softmax_inplace(std::span<double> logits) {
    if (logits.empty()) {
        return;
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - m);
        total += v;
    }
    for (auto& v : logits) {
        v /= total;
    }
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<double> out(static_cast<std::size_t>(a.size()));
    auto av = a.data();
    auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] + bv[i];
    }
    Tensor result = make_output(tape, a.shape(), std::move(out),
                                a.requires_grad() || b.requires_grad());
    if (result.requires_grad()) {
        tape.record("add", {a, b}, result, [a, b, result]() mutable {
            auto g = result.grad();
            if (a.requires_grad()) a.accumulate_grad(g);
            if (b.requires_grad()) b.accumulate_grad(g);
        });
    }
    return result;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<double> out(static_cast<std::size_t>(a.size()));
    auto av = a.data();
    auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] - bv[i];
    }
    Tensor result = make_output(tape, a.shape(), std::move(out),
                                a.requires_grad() || b.requires_grad());
    if (result.requires_grad()) {
        tape.record("sub", {a, b}, result, [a, b, result]() mutable {
            auto g = result.grad();
            if (a.requires_grad()) a.accumulate_grad(g);
            if (b.requires_grad()) {
                std::vector<double> neg(g.begin(), g.end());
                for (auto& v : neg) v = -v;
                b.accumulate_grad(neg);
            }
        });
    }
    return result;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<double> out(static_cast<std::size_t>(a.size()));
    auto av = a.data();
    auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] * bv[i];
    }
    Tensor result = make_output(tape, a.shape(), std::move(out),
                                a.requires_grad() || b.requires_grad());
    if (result.requires_grad()) {
        tape.record("mul", {a, b}, result, [a, b, result]() mutable {
            auto g = result.grad();
            auto av = a.data();
            auto bv = b.data();
            std::vector<double> tmp(g.size());
            if (a.requires_grad()) {
                for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * bv[i];
                a.accumulate_grad(tmp);
            }
            if (b.requires_grad()) {
                for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * av[i];
                b.accumulate_grad(tmp);
            }
        });
    }
    return result;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
    return unary_op(tape, "scale", a, [factor](double x) { return x * factor; },
                    [factor](double, double) { return factor; });
}

Tensor add_scalar(Tape& tape, const Tensor& a, double value) {
    return unary_op(tape, "add_scalar", a, [value](double x) { return x + value; },
                    [](double, double) { return 1.0; });
}

Tensor relu(Tape& tape, const Tensor& a) {
    return unary_op(tape, "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
    return unary_op(tape, "sigmoid", a, [](double x) { return sigmoid_value(x); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(Tape& tape, const Tensor& a) {
    return unary_op(tape, "tanh", a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor sum(Tape& tape, const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) {
        total += v;
    }
    Tensor result = make_output(tape, {1}, {total}, a.requires_grad());
    if (result.requires_grad()) {
        tape.record("sum", {a}, result, [a, result]() mutable {
            const double g = result.grad()[0];
            std::vector<double> gin(static_cast<std::size_t>(a.size()), g);
            a.accumulate_grad(gin);
        });
    }
    return result;
}

Tensor mean(Tape& tape, const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) {
        total += v;
    }
    const double n = static_cast<double>(a.size());
    Tensor result = make_output(tape, {1}, {total / n}, a.requires_grad());
    if (result.requires_grad()) {
        tape.record("mean", {a}, result, [a, result, n]() mutable {
            const double g = result.grad()[0] / n;
            std::vector<double> gin(static_cast<std::size_t>(a.size()), g);
            a.accumulate_grad(gin);
        });
    }
    return result;
}

Tensor reshape(Tape& tape, const Tensor& a, Shape new_shape) {
    if (shape_numel(new_shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(new_shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    Tensor result = make_output(tape, std::move(new_shape), std::move(out), a.requires_grad());
    if (result.requires_grad()) {
        tape.record("reshape", {a}, result, [a, result]() mutable {
            a.accumulate_grad(result.grad());
        });
    }
    return result;
}

Tensor slice(Tape& tape, const Tensor& a, long offset, long length) {
    if (a.rank() != 1) {
        throw ShapeError("slice: expected rank-1 tensor, got " + shape_str(a.shape()));
    }
    if (offset < 0 || length <= 0 || offset + length > a.size()) {
        throw ShapeError("slice: range [" + std::to_string(offset) + "," +
                         std::to_string(offset + length) + ") out of bounds for size " +
                         std::to_string(a.size()));
    }
    auto av = a.data();
    std::vector<double> out(av.begin() + offset, av.begin() + offset + length);
    Tensor result = make_output(tape, {static_cast<int>(length)}, std::move(out),
                                a.requires_grad());
    if (result.requires_grad()) {
        tape.record("slice", {a}, result, [a, result, offset, length]() mutable {
            auto g = result.grad();
            std::vector<double> gin(static_cast<std::size_t>(a.size()), 0.0);
            for (long i = 0; i < length; ++i) {
                gin[static_cast<std::size_t>(offset + i)] = g[static_cast<std::size_t>(i)];
            }
            a.accumulate_grad(gin);
        });
    }
    return result;
}

Tensor concat(Tape& tape, std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw ShapeError("concat: no inputs");
    }
    std::vector<double> out;
    bool needs_grad = false;
    for (const Tensor& p : parts) {
        if (p.rank() != 1) {
            throw ShapeError("concat: expected rank-1 tensors, got " + shape_str(p.shape()));
        }
        out.insert(out.end(), p.data().begin(), p.data().end());
        needs_grad = needs_grad || p.requires_grad();
    }
    const int total = static_cast<int>(out.size());
    Tensor result = make_output(tape, {total}, std::move(out), needs_grad);
    if (result.requires_grad()) {
        std::vector<Tensor> inputs(parts.begin(), parts.end());
        tape.record("concat", inputs, result, [inputs, result]() mutable {
            auto g = result.grad();
            std::size_t pos = 0;
            for (auto& p : inputs) {
                const auto n = static_cast<std::size_t>(p.size());
                if (p.requires_grad()) {
                    p.accumulate_grad(g.subspan(pos, n));
                }
                pos += n;
            }
        });
    }
    return result;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2) {
        throw ShapeError("matmul: left operand must be rank-2, got " + shape_str(a.shape()));
    }
    const bool vec = b.rank() == 1;
    if (!vec && b.rank() != 2) {
        throw ShapeError("matmul: right operand must be rank-1 or rank-2, got " +
                         shape_str(b.shape()));
    }
    const int m = a.dim(0);
    const int k = a.dim(1);
    const int bk = b.dim(0);
    const int n = vec ? 1 : b.dim(1);
    if (bk != k) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }

    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    auto av = a.data();
    auto bv = b.data();
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const double aik = av[static_cast<std::size_t>(i) * k + kk];
            const double* brow = &bv[static_cast<std::size_t>(kk) * n];
            double* crow = &out[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }

    Shape out_shape = vec ? Shape{m} : Shape{m, n};
    Tensor result = make_output(tape, std::move(out_shape), std::move(out),
                                a.requires_grad() || b.requires_grad());
    if (result.requires_grad()) {
        tape.record("matmul", {a, b}, result, [a, b, result, m, k, n]() mutable {
            auto g = result.grad();
            auto av = a.data();
            auto bv = b.data();
            if (a.requires_grad()) {
                // dA = dC . B^T
                std::vector<double> ga(static_cast<std::size_t>(m) * k, 0.0);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        const double gij = g[static_cast<std::size_t>(i) * n + j];
                        for (int kk = 0; kk < k; ++kk) {
                            ga[static_cast<std::size_t>(i) * k + kk] +=
                                gij * bv[static_cast<std::size_t>(kk) * n + j];
                        }
                    }
                }
                a.accumulate_grad(ga);
            }
            if (b.requires_grad()) {
                // dB = A^T . dC
                std::vector<double> gb(static_cast<std::size_t>(k) * n, 0.0);
                for (int i = 0; i < m; ++i) {
                    for (int kk = 0; kk < k; ++kk) {
                        const double aik = av[static_cast<std::size_t>(i) * k + kk];
                        for (int j = 0; j < n; ++j) {
                            gb[static_cast<std::size_t>(kk) * n + j] +=
                                aik * g[static_cast<std::size_t>(i) * n + j];
                        }
                    }
                }
                b.accumulate_grad(gb);
            }
        });
    }
    return result;
}

namespace {

struct ConvDims {
    int in_c, in_h, in_w;
    int out_c, kh, kw;
    int out_h, out_w;
    int pad_top, pad_left;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, int stride, Padding padding) {
    if (input.rank() != 3) {
        throw ShapeError("conv2d: input must be {C,H,W}, got " + shape_str(input.shape()));
    }
    if (kernel.rank() != 4) {
        throw ShapeError("conv2d: kernel must be {O,C,KH,KW}, got " + shape_str(kernel.shape()));
    }
    if (stride < 1) {
        throw ShapeError("conv2d: stride must be >= 1");
    }
    ConvDims d{};
    d.in_c = input.dim(0);
    d.in_h = input.dim(1);
    d.in_w = input.dim(2);
    d.out_c = kernel.dim(0);
    d.kh = kernel.dim(2);
    d.kw = kernel.dim(3);
    if (kernel.dim(1) != d.in_c) {
        throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                         " input channels, input has " + std::to_string(d.in_c));
    }
    if (padding == Padding::valid) {
        if (d.in_h < d.kh || d.in_w < d.kw) {
            throw ShapeError("conv2d: kernel larger than input under valid padding");
        }
        d.out_h = (d.in_h - d.kh) / stride + 1;
        d.out_w = (d.in_w - d.kw) / stride + 1;
        d.pad_top = 0;
        d.pad_left = 0;
    } else {
        d.out_h = (d.in_h + stride - 1) / stride;
        d.out_w = (d.in_w + stride - 1) / stride;
        const int pad_h = std::max(0, (d.out_h - 1) * stride + d.kh - d.in_h);
        const int pad_w = std::max(0, (d.out_w - 1) * stride + d.kw - d.in_w);
        d.pad_top = pad_h / 2;
        d.pad_left = pad_w / 2;
    }
    return d;
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, Padding padding) {
    const ConvDims d = conv_dims(input, kernel, stride, padding);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != d.out_c)) {
        throw ShapeError("conv2d: bias must be {out_channels}, got " + shape_str(bias.shape()));
    }

    // Kernel-offset loop order: for each (c,ky,kx) the inner ox loop walks
    // both buffers contiguously, which the optimizer vectorizes.
    std::vector<double> out(static_cast<std::size_t>(d.out_c) * d.out_h * d.out_w, 0.0);
    auto in = input.data();
    auto kw_ = kernel.data();
    for (int o = 0; o < d.out_c; ++o) {
        double* out_plane = &out[static_cast<std::size_t>(o) * d.out_h * d.out_w];
        if (bias.defined()) {
            std::fill(out_plane, out_plane + static_cast<std::size_t>(d.out_h) * d.out_w,
                      bias.data()[static_cast<std::size_t>(o)]);
        }
        for (int c = 0; c < d.in_c; ++c) {
            const double* in_plane = &in[static_cast<std::size_t>(c) * d.in_h * d.in_w];
            for (int ky = 0; ky < d.kh; ++ky) {
                for (int kx = 0; kx < d.kw; ++kx) {
                    const double w =
                        kw_[((static_cast<std::size_t>(o) * d.in_c + c) * d.kh + ky) * d.kw + kx];
                    if (w == 0.0) continue;
                    for (int oy = 0; oy < d.out_h; ++oy) {
                        const int y = oy * stride + ky - d.pad_top;
                        if (y < 0 || y >= d.in_h) continue;
                        const double* in_row = &in_plane[static_cast<std::size_t>(y) * d.in_w];
                        double* out_row = &out_plane[static_cast<std::size_t>(oy) * d.out_w];
                        // Valid ox range: 0 <= ox*stride + kx - pad_left < in_w.
                        int ox0 = 0;
                        while (ox0 < d.out_w && ox0 * stride + kx - d.pad_left < 0) ++ox0;
                        int ox1 = d.out_w;
                        while (ox1 > ox0 && (ox1 - 1) * stride + kx - d.pad_left >= d.in_w) --ox1;
                        const double* src = &in_row[ox0 * stride + kx - d.pad_left];
                        if (stride == 1) {
                            for (int ox = ox0; ox < ox1; ++ox) {
                                out_row[ox] += w * src[ox - ox0];
                            }
                        } else {
                            for (int ox = ox0; ox < ox1; ++ox) {
                                out_row[ox] += w * src[static_cast<std::size_t>(ox - ox0) * stride];
                            }
                        }
                    }
                }
            }
        }
    }

    const bool needs_grad = any_requires_grad({&input, &kernel, &bias});
    Tensor result = make_output(tape, {d.out_c, d.out_h, d.out_w}, std::move(out), needs_grad);
    if (result.requires_grad()) {
        std::vector<Tensor> inputs = {input, kernel};
        if (bias.defined()) inputs.push_back(bias);
        tape.record("conv2d", inputs, result, [input, kernel, bias, result, d, stride]() mutable {
            auto g = result.grad();
            auto in = input.data();
            auto kw_ = kernel.data();
            std::vector<double> gin(in.size(), 0.0);
            std::vector<double> gk(kw_.size(), 0.0);
            std::vector<double> gb(static_cast<std::size_t>(d.out_c), 0.0);
            for (int o = 0; o < d.out_c; ++o) {
                const double* g_plane = &g[static_cast<std::size_t>(o) * d.out_h * d.out_w];
                for (std::size_t i = 0; i < static_cast<std::size_t>(d.out_h) * d.out_w; ++i) {
                    gb[static_cast<std::size_t>(o)] += g_plane[i];
                }
                for (int c = 0; c < d.in_c; ++c) {
                    const double* in_plane = &in[static_cast<std::size_t>(c) * d.in_h * d.in_w];
                    double* gin_plane = &gin[static_cast<std::size_t>(c) * d.in_h * d.in_w];
                    for (int ky = 0; ky < d.kh; ++ky) {
                        for (int kx = 0; kx < d.kw; ++kx) {
                            const std::size_t ki =
                                ((static_cast<std::size_t>(o) * d.in_c + c) * d.kh + ky) * d.kw +
                                kx;
                            const double w = kw_[ki];
                            double gw = 0.0;
                            for (int oy = 0; oy < d.out_h; ++oy) {
                                const int y = oy * stride + ky - d.pad_top;
                                if (y < 0 || y >= d.in_h) continue;
                                int ox0 = 0;
                                while (ox0 < d.out_w && ox0 * stride + kx - d.pad_left < 0) ++ox0;
                                int ox1 = d.out_w;
                                while (ox1 > ox0 &&
                                       (ox1 - 1) * stride + kx - d.pad_left >= d.in_w)
                                    --ox1;
                                const double* g_row =
                                    &g_plane[static_cast<std::size_t>(oy) * d.out_w];
                                const std::size_t base =
                                    static_cast<std::size_t>(y) * d.in_w + ox0 * stride + kx -
                                    d.pad_left;
                                if (stride == 1) {
                                    const double* in_row = &in_plane[base];
                                    double* gin_row = &gin_plane[base];
                                    for (int ox = ox0; ox < ox1; ++ox) {
                                        gw += g_row[ox] * in_row[ox - ox0];
                                        gin_row[ox - ox0] += g_row[ox] * w;
                                    }
                                } else {
                                    for (int ox = ox0; ox < ox1; ++ox) {
                                        const std::size_t ii =
                                            base + static_cast<std::size_t>(ox - ox0) * stride;
                                        gw += g_row[ox] * in_plane[ii];
                                        gin_plane[ii] += g_row[ox] * w;
                                    }
                                }
                            }
                            gk[ki] += gw;
                        }
                    }
                }
            }
            if (input.requires_grad()) input.accumulate_grad(gin);
            if (kernel.requires_grad()) kernel.accumulate_grad(gk);
            if (bias.defined() && bias.requires_grad()) bias.accumulate_grad(gb);
        });
    }
    return result;
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, int stride,
              Padding padding) {
    return conv2d(tape, input, kernel, Tensor(), stride, padding);
}

Tensor max_pool2d(Tape& tape, const Tensor& input, int window) {
    if (input.rank() != 3) {
        throw ShapeError("max_pool2d: input must be {C,H,W}, got " + shape_str(input.shape()));
    }
    if (window < 1 || input.dim(1) < window || input.dim(2) < window) {
        throw ShapeError("max_pool2d: window " + std::to_string(window) +
                         " too large for input " + shape_str(input.shape()));
    }
    const int c_n = input.dim(0);
    const int h = input.dim(1);
    const int w = input.dim(2);
    const int oh = h / window;
    const int ow = w / window;

    std::vector<double> out(static_cast<std::size_t>(c_n) * oh * ow);
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    auto in = input.data();
    for (int c = 0; c < c_n; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double best = -1e300;
                std::size_t best_i = 0;
                for (int ky = 0; ky < window; ++ky) {
                    for (int kx = 0; kx < window; ++kx) {
                        const std::size_t ii =
                            (static_cast<std::size_t>(c) * h + oy * window + ky) * w +
                            ox * window + kx;
                        if (in[ii] > best) {
                            best = in[ii];
                            best_i = ii;
                        }
                    }
                }
                const std::size_t oi = (static_cast<std::size_t>(c) * oh + oy) * ow + ox;
                out[oi] = best;
                (*argmax)[oi] = best_i;
            }
        }
    }

    Tensor result = make_output(tape, {c_n, oh, ow}, std::move(out), input.requires_grad());
    if (result.requires_grad()) {
        tape.record("max_pool2d", {input}, result, [input, result, argmax]() mutable {
            auto g = result.grad();
            std::vector<double> gin(static_cast<std::size_t>(input.size()), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gin[(*argmax)[i]] += g[i];
            }
            input.accumulate_grad(gin);
        });
    }
    return result;
}

Tensor global_max_pool(Tape& tape, const Tensor& input) {
    if (input.rank() != 3) {
        throw ShapeError("global_max_pool: input must be {C,H,W}, got " +
                         shape_str(input.shape()));
    }
    const int c_n = input.dim(0);
    const std::size_t plane = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
    std::vector<double> out(static_cast<std::size_t>(c_n));
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    auto in = input.data();
    for (int c = 0; c < c_n; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * plane;
        std::size_t best_i = base;
        for (std::size_t i = base + 1; i < base + plane; ++i) {
            if (in[i] > in[best_i]) {
                best_i = i;
            }
        }
        out[static_cast<std::size_t>(c)] = in[best_i];
        (*argmax)[static_cast<std::size_t>(c)] = best_i;
    }

    Tensor result = make_output(tape, {c_n}, std::move(out), input.requires_grad());
    if (result.requires_grad()) {
        tape.record("global_max_pool", {input}, result, [input, result, argmax]() mutable {
            auto g = result.grad();
            std::vector<double> gin(static_cast<std::size_t>(input.size()), 0.0);
            for (std::size_t c = 0; c < g.size(); ++c) {
                gin[(*argmax)[c]] += g[c];
            }
            input.accumulate_grad(gin);
        });
    }
    return result;
}

Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const int> indices) {
    if (table.rank() != 2) {
        throw ShapeError("embedding_lookup: table must be {V,E}, got " + shape_str(table.shape()));
    }
    const int vocab = table.dim(0);
    const int dim = table.dim(1);
    for (int idx : indices) {
        if (idx < 0 || idx >= vocab) {
            throw ShapeError("embedding_lookup: index " + std::to_string(idx) +
                             " out of range for vocabulary size " + std::to_string(vocab));
        }
    }
    std::vector<double> out(indices.size() * static_cast<std::size_t>(dim));
    auto tv = table.data();
    for (std::size_t t = 0; t < indices.size(); ++t) {
        const std::size_t row = static_cast<std::size_t>(indices[t]) * dim;
        std::copy(tv.begin() + row, tv.begin() + row + dim, out.begin() + t * dim);
    }
    Tensor result = make_output(tape, {static_cast<int>(indices.size()), dim}, std::move(out),
                                table.requires_grad());
    if (result.requires_grad()) {
        auto idx = std::make_shared<std::vector<int>>(indices.begin(), indices.end());
        tape.record("embedding_lookup", {table}, result, [table, result, idx, dim]() mutable {
            auto g = result.grad();
            std::vector<double> gt(static_cast<std::size_t>(table.size()), 0.0);
            for (std::size_t t = 0; t < idx->size(); ++t) {
                const std::size_t row = static_cast<std::size_t>((*idx)[t]) * dim;
                for (int e = 0; e < dim; ++e) {
                    gt[row + e] += g[t * dim + e];
                }
            }
            table.accumulate_grad(gt);
        });
    }
    return result;
}

LstmState lstm_cell(Tape& tape, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                    const Tensor& wx, const Tensor& wh, const Tensor& bias) {
    if (x.rank() != 1 || h_prev.rank() != 1 || c_prev.rank() != 1) {
        throw ShapeError("lstm_cell: x, h_prev, c_prev must be vectors");
    }
    const int units = h_prev.dim(0);
    if (c_prev.dim(0) != units) {
        throw ShapeError("lstm_cell: h_prev and c_prev lengths disagree");
    }
    if (wx.rank() != 2 || wx.dim(0) != 4 * units || wx.dim(1) != x.dim(0)) {
        throw ShapeError("lstm_cell: wx must be {4*units, embed}, got " + shape_str(wx.shape()));
    }
    if (wh.rank() != 2 || wh.dim(0) != 4 * units || wh.dim(1) != units) {
        throw ShapeError("lstm_cell: wh must be {4*units, units}, got " + shape_str(wh.shape()));
    }
    if (bias.rank() != 1 || bias.dim(0) != 4 * units) {
        throw ShapeError("lstm_cell: bias must be {4*units}, got " + shape_str(bias.shape()));
    }

    Tensor z = add(tape, add(tape, matmul(tape, wx, x), matmul(tape, wh, h_prev)), bias);
    Tensor i_gate = sigmoid(tape, slice(tape, z, 0, units));
    Tensor f_gate = sigmoid(tape, slice(tape, z, units, units));
    Tensor g_gate = tanh_op(tape, slice(tape, z, 2L * units, units));
    Tensor o_gate = sigmoid(tape, slice(tape, z, 3L * units, units));
    Tensor c_next = add(tape, mul(tape, f_gate, c_prev), mul(tape, i_gate, g_gate));
    Tensor h_next = mul(tape, o_gate, tanh_op(tape, c_next));
    return {h_next, c_next};
}

Tensor lstm_sequence(Tape& tape, const Tensor& xs, const Tensor& wx, const Tensor& wh,
                     const Tensor& bias) {
    if (xs.rank() != 2) {
        throw ShapeError("lstm_sequence: xs must be {T,E}, got " + shape_str(xs.shape()));
    }
    const int steps = xs.dim(0);
    const int embed = xs.dim(1);
    if (wx.rank() != 2 || wx.dim(1) != embed || wx.dim(0) % 4 != 0) {
        throw ShapeError("lstm_sequence: wx must be {4*units, embed}, got " +
                         shape_str(wx.shape()));
    }
    const int units = wx.dim(0) / 4;
    if (wh.rank() != 2 || wh.dim(0) != 4 * units || wh.dim(1) != units) {
        throw ShapeError("lstm_sequence: wh must be {4*units, units}");
    }
    if (bias.rank() != 1 || bias.dim(0) != 4 * units) {
        throw ShapeError("lstm_sequence: bias must be {4*units}");
    }

    // Cache of per-step gate activations for the backward sweep.
    struct Cache {
        std::vector<double> i, f, g, o, c, tanh_c, h;  // each T x U
    };
    auto cache = std::make_shared<Cache>();
    const std::size_t tu = static_cast<std::size_t>(steps) * units;
    cache->i.resize(tu);
    cache->f.resize(tu);
    cache->g.resize(tu);
    cache->o.resize(tu);
    cache->c.resize(tu);
    cache->tanh_c.resize(tu);
    cache->h.resize(tu);

    auto xv = xs.data();
    auto wxv = wx.data();
    auto whv = wh.data();
    auto bv = bias.data();

    std::vector<double> h(static_cast<std::size_t>(units), 0.0);
    std::vector<double> c(static_cast<std::size_t>(units), 0.0);
    std::vector<double> z(static_cast<std::size_t>(4) * units);

    for (int t = 0; t < steps; ++t) {
        const double* xt = &xv[static_cast<std::size_t>(t) * embed];
        for (int r = 0; r < 4 * units; ++r) {
            double acc = bv[static_cast<std::size_t>(r)];
            const double* wxr = &wxv[static_cast<std::size_t>(r) * embed];
            for (int e = 0; e < embed; ++e) {
                acc += wxr[e] * xt[e];
            }
            const double* whr = &whv[static_cast<std::size_t>(r) * units];
            for (int u = 0; u < units; ++u) {
                acc += whr[u] * h[static_cast<std::size_t>(u)];
            }
            z[static_cast<std::size_t>(r)] = acc;
        }
        const std::size_t base = static_cast<std::size_t>(t) * units;
        for (int u = 0; u < units; ++u) {
            const double ig = sigmoid_value(z[static_cast<std::size_t>(u)]);
            const double fg = sigmoid_value(z[static_cast<std::size_t>(units + u)]);
            const double gg = std::tanh(z[static_cast<std::size_t>(2 * units + u)]);
            const double og = sigmoid_value(z[static_cast<std::size_t>(3 * units + u)]);
            const double cn = fg * c[static_cast<std::size_t>(u)] + ig * gg;
            const double tc = std::tanh(cn);
            cache->i[base + u] = ig;
            cache->f[base + u] = fg;
            cache->g[base + u] = gg;
            cache->o[base + u] = og;
            cache->c[base + u] = cn;
            cache->tanh_c[base + u] = tc;
            c[static_cast<std::size_t>(u)] = cn;
            h[static_cast<std::size_t>(u)] = og * tc;
            cache->h[base + u] = h[static_cast<std::size_t>(u)];
        }
    }

    const bool needs_grad = any_requires_grad({&xs, &wx, &wh, &bias});
    Tensor result = make_output(tape, {units}, std::move(h), needs_grad);
    if (result.requires_grad()) {
        tape.record(
            "lstm_sequence", {xs, wx, wh, bias}, result,
            [xs, wx, wh, bias, result, cache, steps, embed, units]() mutable {
                auto gout = result.grad();
                auto xv = xs.data();
                auto wxv = wx.data();
                auto whv = wh.data();

                std::vector<double> gxs(static_cast<std::size_t>(xs.size()), 0.0);
                std::vector<double> gwx(static_cast<std::size_t>(wx.size()), 0.0);
                std::vector<double> gwh(static_cast<std::size_t>(wh.size()), 0.0);
                std::vector<double> gb(static_cast<std::size_t>(bias.size()), 0.0);

                std::vector<double> dh(gout.begin(), gout.end());
                std::vector<double> dc(static_cast<std::size_t>(units), 0.0);
                std::vector<double> dz(static_cast<std::size_t>(4) * units);

                for (int t = steps - 1; t >= 0; --t) {
                    const std::size_t base = static_cast<std::size_t>(t) * units;
                    const double* h_prev =
                        t > 0 ? &cache->h[static_cast<std::size_t>(t - 1) * units] : nullptr;
                    const double* c_prev =
                        t > 0 ? &cache->c[static_cast<std::size_t>(t - 1) * units] : nullptr;
                    for (int u = 0; u < units; ++u) {
                        const double ig = cache->i[base + u];
                        const double fg = cache->f[base + u];
                        const double gg = cache->g[base + u];
                        const double og = cache->o[base + u];
                        const double tc = cache->tanh_c[base + u];
                        const double dhu = dh[static_cast<std::size_t>(u)];
                        const double d_o = dhu * tc;
                        const double dcu =
                            dc[static_cast<std::size_t>(u)] + dhu * og * (1.0 - tc * tc);
                        const double d_i = dcu * gg;
                        const double d_f = dcu * (t > 0 ? c_prev[u] : 0.0);
                        const double d_g = dcu * ig;
                        dz[static_cast<std::size_t>(u)] = d_i * ig * (1.0 - ig);
                        dz[static_cast<std::size_t>(units + u)] = d_f * fg * (1.0 - fg);
                        dz[static_cast<std::size_t>(2 * units + u)] = d_g * (1.0 - gg * gg);
                        dz[static_cast<std::size_t>(3 * units + u)] = d_o * og * (1.0 - og);
                        dc[static_cast<std::size_t>(u)] = dcu * fg;
                    }

                    const double* xt = &xv[static_cast<std::size_t>(t) * embed];
                    double* gxt = &gxs[static_cast<std::size_t>(t) * embed];
                    std::fill(dh.begin(), dh.end(), 0.0);
                    for (int r = 0; r < 4 * units; ++r) {
                        const double dzr = dz[static_cast<std::size_t>(r)];
                        gb[static_cast<std::size_t>(r)] += dzr;
                        if (dzr == 0.0) continue;
                        double* gwxr = &gwx[static_cast<std::size_t>(r) * embed];
                        const double* wxr = &wxv[static_cast<std::size_t>(r) * embed];
                        for (int e = 0; e < embed; ++e) {
                            gwxr[e] += dzr * xt[e];
                            gxt[e] += dzr * wxr[e];
                        }
                        double* gwhr = &gwh[static_cast<std::size_t>(r) * units];
                        const double* whr = &whv[static_cast<std::size_t>(r) * units];
                        for (int u = 0; u < units; ++u) {
                            if (t > 0) {
                                gwhr[u] += dzr * h_prev[u];
                            }
                            dh[static_cast<std::size_t>(u)] += dzr * whr[u];
                        }
                    }
                }

                if (xs.requires_grad()) xs.accumulate_grad(gxs);
                if (wx.requires_grad()) wx.accumulate_grad(gwx);
                if (wh.requires_grad()) wh.accumulate_grad(gwh);
                if (bias.requires_grad()) bias.accumulate_grad(gb);
            });
    }
    return result;
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, DropoutMode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw DataError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
    }
    if (mode == DropoutMode::infer || rate == 0.0) {
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.size()));
    auto xv = x.data();
    std::vector<double> out(static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double m = rng.uniform() >= rate ? keep_scale : 0.0;
        (*mask)[i] = m;
        out[i] = xv[i] * m;
    }
    Tensor result = make_output(tape, x.shape(), std::move(out), x.requires_grad());
    if (result.requires_grad()) {
        tape.record("dropout", {x}, result, [x, result, mask]() mutable {
            auto g = result.grad();
            std::vector<double> gin(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                gin[i] = g[i] * (*mask)[i];
            }
            x.accumulate_grad(gin);
        });
    }
    return result;
}

Tensor bce_with_logits(Tape& tape, const Tensor& logit, double target) {
    if (logit.size() != 1) {
        throw ShapeError("bce_with_logits: logit must be scalar");
    }
    const double z = logit.item();
    const double value = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
    Tensor result = make_output(tape, {1}, {value}, logit.requires_grad());
    if (result.requires_grad()) {
        tape.record("bce_with_logits", {logit}, result, [logit, result, z, target]() mutable {
            const double g = result.grad()[0];
            const double dz = sigmoid_value(z) - target;
            logit.accumulate_grad(std::vector<double>{g * dz});
        });
    }
    return result;
}

Tensor mean_of(Tape& tape, std::span<const Tensor> scalars) {
    if (scalars.empty()) {
        throw ShapeError("mean_of: empty input");
    }
    Tensor acc = scalars[0];
    for (std::size_t i = 1; i < scalars.size(); ++i) {
        acc = add(tape, acc, scalars[i]);
    }
    return scale(tape, acc, 1.0 / static_cast<double>(scalars.size()));
}

double OpAttrs::get_num(const std::string& key, double fallback) const {
    auto it = num.find(key);
    return it == num.end() ? fallback : it->second;
}

std::string OpAttrs::get_str(const std::string& key, const std::string& fallback) const {
    auto it = str.find(key);
    return it == str.end() ? fallback : it->second;
}

Tensor forward_op(Tape& tape, std::string_view kind, std::span<const Tensor> inputs,
                  const OpAttrs& attrs) {
    auto need = [&](std::size_t n) {
        if (inputs.size() != n) {
            throw ShapeError(std::string(kind) + ": expected " + std::to_string(n) +
                             " inputs, got " + std::to_string(inputs.size()));
        }
    };
    if (kind == "add") {
        need(2);
        return add(tape, inputs[0], inputs[1]);
    }
    if (kind == "sub") {
        need(2);
        return sub(tape, inputs[0], inputs[1]);
    }
    if (kind == "mul") {
        need(2);
        return mul(tape, inputs[0], inputs[1]);
    }
    if (kind == "scale") {
        need(1);
        return scale(tape, inputs[0], attrs.get_num("factor", 1.0));
    }
    if (kind == "matmul") {
        need(2);
        return matmul(tape, inputs[0], inputs[1]);
    }
    if (kind == "relu") {
        need(1);
        return relu(tape, inputs[0]);
    }
    if (kind == "sigmoid") {
        need(1);
        return sigmoid(tape, inputs[0]);
    }
    if (kind == "tanh") {
        need(1);
        return tanh_op(tape, inputs[0]);
    }
    if (kind == "sum") {
        need(1);
        return sum(tape, inputs[0]);
    }
    if (kind == "mean") {
        need(1);
        return mean(tape, inputs[0]);
    }
    if (kind == "conv2d") {
        const int stride = static_cast<int>(attrs.get_num("stride", 1.0));
        const Padding pad =
            attrs.get_str("padding", "valid") == "same" ? Padding::same : Padding::valid;
        if (inputs.size() == 3) {
            return conv2d(tape, inputs[0], inputs[1], inputs[2], stride, pad);
        }
        need(2);
        return conv2d(tape, inputs[0], inputs[1], stride, pad);
    }
    if (kind == "max_pool2d") {
        need(1);
        return max_pool2d(tape, inputs[0], static_cast<int>(attrs.get_num("window", 2.0)));
    }
    if (kind == "global_max_pool") {
        need(1);
        return global_max_pool(tape, inputs[0]);
    }
    if (kind == "embedding_lookup") {
        need(1);
        auto it = attrs.ints.find("indices");
        if (it == attrs.ints.end()) {
            throw ShapeError("embedding_lookup: missing 'indices' attribute");
        }
        return embedding_lookup(tape, inputs[0], it->second);
    }
    if (kind == "lstm_cell") {
        need(6);
        return lstm_cell(tape, inputs[0], inputs[1], inputs[2], inputs[3], inputs[4], inputs[5])
            .h;
    }
    if (kind == "lstm_sequence") {
        need(4);
        return lstm_sequence(tape, inputs[0], inputs[1], inputs[2], inputs[3]);
    }
    if (kind == "dropout") {
        need(1);
        Rng rng(static_cast<std::uint64_t>(attrs.get_num("seed", 0.0)));
        const DropoutMode mode =
            attrs.get_str("mode", "infer") == "train" ? DropoutMode::train : DropoutMode::infer;
        return dropout(tape, inputs[0], attrs.get_num("rate", 0.0), mode, rng);
    }
    if (kind == "concat") {
        return concat(tape, inputs);
    }
    if (kind == "reshape") {
        need(1);
        auto it = attrs.ints.find("shape");
        if (it == attrs.ints.end()) {
            throw ShapeError("reshape: missing 'shape' attribute");
        }
        return reshape(tape, inputs[0], it->second);
    }
    if (kind == "slice") {
        need(1);
        return slice(tape, inputs[0], static_cast<long>(attrs.get_num("offset", 0.0)),
                     static_cast<long>(attrs.get_num("length", 1.0)));
    }
    if (kind == "bce_with_logits") {
        need(1);
        return bce_with_logits(tape, inputs[0], attrs.get_num("target", 0.0));
    }
    throw UnsupportedOpError("unsupported op kind: " + std::string(kind));
}

}  // namespace phishdetect
