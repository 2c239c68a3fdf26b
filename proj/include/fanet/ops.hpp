#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fanet/tensor.hpp"

// Differentiable operation set. Every op takes an optional tape: when the
// tape is non-null and any input requires a gradient, the op records an
// adjoint closure that scatters d(out) into the inputs' grad buffers.
// Forward reductions accumulate in double regardless of T, with a fixed
// summation order.
namespace fanet::ops {

namespace detail {

template <typename T>
bool want_grad(GradTape<T>* tape, std::initializer_list<const BasicTensor<T>*> inputs) {
    if (!tape) return false;
    for (const auto* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

template <typename T>
T clamp_unit_interval(T y) {
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    return std::min(std::max(y, lo), hi);
}

// Valid output range [lo, hi) of one conv axis for a given kernel tap, so
// inner loops run branch-free.
inline void conv_axis_bounds(int in_size, int out_size, int stride, int padding, int tap_offset,
                             int& lo, int& hi) {
    // in coordinate = o*stride - padding + tap_offset, must be in [0, in_size)
    int base = tap_offset - padding;
    lo = base < 0 ? (-base + stride - 1) / stride : 0;
    int max_num = in_size - 1 - base;
    hi = max_num < 0 ? 0 : std::min(out_size, max_num / stride + 1);
    if (lo > hi) lo = hi;
}

inline int reflect_index(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: weight (C_out, C_in, k_h, k_w), zero padding, stride/dilation >= 1.
// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> conv2d(GradTape<T>* tape, const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, int stride = 1, int padding = 0,
                      int dilation = 1) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1, got " + std::to_string(stride));
    if (dilation < 1) throw ShapeError("conv2d: dilation must be >= 1, got " + std::to_string(dilation));
    if (padding < 0) throw ShapeError("conv2d: padding must be >= 0, got " + std::to_string(padding));
    if (xs.c != ws.c) {
        throw ShapeError("conv2d: input channels C=" + std::to_string(xs.c) +
                         " do not match weight C_in=" + std::to_string(ws.c));
    }
    if (bias.defined()) {
        if (bias.numel() != ws.b) {
            throw ShapeError("conv2d: bias has " + std::to_string(bias.numel()) +
                             " elements, expected C_out=" + std::to_string(ws.b));
        }
    }
    const int out_h = (xs.h + 2 * padding - dilation * (ws.h - 1) - 1) / stride + 1;
    const int out_w = (xs.w + 2 * padding - dilation * (ws.w - 1) - 1) / stride + 1;
    if (xs.h + 2 * padding < dilation * (ws.h - 1) + 1 || xs.w + 2 * padding < dilation * (ws.w - 1) + 1 ||
        out_h < 1 || out_w < 1) {
        throw ShapeError("conv2d: kernel " + std::to_string(ws.h) + "x" + std::to_string(ws.w) +
                         " with dilation " + std::to_string(dilation) +
                         " does not fit input of spatial size " + std::to_string(xs.h) + "x" +
                         std::to_string(xs.w) + " (padding " + std::to_string(padding) + ")");
    }

    BasicTensor<T> out(Shape{xs.b, ws.b, out_h, out_w});
    const T* xd = x.data().data();
    const T* wd = weight.data().data();
    const T* bd = bias.defined() ? bias.data().data() : nullptr;
    T* od = out.data().data();

    const std::int64_t plane_in = static_cast<std::int64_t>(xs.h) * xs.w;
    const std::int64_t plane_out = static_cast<std::int64_t>(out_h) * out_w;

    parallel_for(static_cast<std::int64_t>(xs.b) * ws.b, [&](std::int64_t job) {
        const int b = static_cast<int>(job / ws.b);
        const int oc = static_cast<int>(job % ws.b);
        std::vector<double> acc(static_cast<std::size_t>(plane_out), bd ? static_cast<double>(bd[oc]) : 0.0);
        for (int ic = 0; ic < xs.c; ++ic) {
            const T* xplane = xd + (static_cast<std::int64_t>(b) * xs.c + ic) * plane_in;
            const T* wk = wd + ((static_cast<std::int64_t>(oc) * ws.c + ic) * ws.h) * ws.w;
            for (int ky = 0; ky < ws.h; ++ky) {
                int oy_lo, oy_hi;
                detail::conv_axis_bounds(xs.h, out_h, stride, padding, ky * dilation, oy_lo, oy_hi);
                for (int kx = 0; kx < ws.w; ++kx) {
                    const double wv = static_cast<double>(wk[ky * ws.w + kx]);
                    if (wv == 0.0) continue;
                    int ox_lo, ox_hi;
                    detail::conv_axis_bounds(xs.w, out_w, stride, padding, kx * dilation, ox_lo, ox_hi);
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        const int iy = oy * stride - padding + ky * dilation;
                        const T* xrow = xplane + static_cast<std::int64_t>(iy) * xs.w;
                        double* arow = acc.data() + static_cast<std::int64_t>(oy) * out_w;
                        int ix = ox_lo * stride - padding + kx * dilation;
                        for (int ox = ox_lo; ox < ox_hi; ++ox, ix += stride) {
                            arow[ox] += wv * static_cast<double>(xrow[ix]);
                        }
                    }
                }
            }
        }
        T* oplane = od + (static_cast<std::int64_t>(b) * ws.b + oc) * plane_out;
        for (std::int64_t i = 0; i < plane_out; ++i) oplane[i] = static_cast<T>(acc[static_cast<std::size_t>(i)]);
    });

    if (detail::want_grad(tape, {&x, &weight, &bias})) {
        out.mark_tape_output();
        tape->record(out, [x, weight, bias, out, stride, padding, dilation]() {
            const Shape xs2 = x.shape();
            const Shape ws2 = weight.shape();
            const Shape os = out.shape();
            const T* xd2 = x.data().data();
            const T* wd2 = weight.data().data();
            const T* gd = out.grad().data();
            const std::int64_t plane_in = static_cast<std::int64_t>(xs2.h) * xs2.w;
            const std::int64_t plane_out = static_cast<std::int64_t>(os.h) * os.w;

            if (bias.defined() && bias.requires_grad()) {
                BasicTensor<T> bmut = bias;
                T* bg = bmut.grad().data();
                for (int oc = 0; oc < ws2.b; ++oc) {
                    double s = 0.0;
                    for (int b = 0; b < os.b; ++b) {
                        const T* gplane = gd + (static_cast<std::int64_t>(b) * os.c + oc) * plane_out;
                        for (std::int64_t i = 0; i < plane_out; ++i) s += static_cast<double>(gplane[i]);
                    }
                    bg[oc] += static_cast<T>(s);
                }
            }
            if (weight.requires_grad()) {
                BasicTensor<T> wmut = weight;
                T* wg = wmut.grad().data();
                for (int oc = 0; oc < ws2.b; ++oc) {
                    for (int ic = 0; ic < ws2.c; ++ic) {
                        for (int ky = 0; ky < ws2.h; ++ky) {
                            int oy_lo, oy_hi;
                            detail::conv_axis_bounds(xs2.h, os.h, stride, padding, ky * dilation, oy_lo, oy_hi);
                            for (int kx = 0; kx < ws2.w; ++kx) {
                                int ox_lo, ox_hi;
                                detail::conv_axis_bounds(xs2.w, os.w, stride, padding, kx * dilation, ox_lo, ox_hi);
                                double s = 0.0;
                                for (int b = 0; b < os.b; ++b) {
                                    const T* xplane = xd2 + (static_cast<std::int64_t>(b) * xs2.c + ic) * plane_in;
                                    const T* gplane = gd + (static_cast<std::int64_t>(b) * os.c + oc) * plane_out;
                                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                                        const int iy = oy * stride - padding + ky * dilation;
                                        const T* xrow = xplane + static_cast<std::int64_t>(iy) * xs2.w;
                                        const T* grow = gplane + static_cast<std::int64_t>(oy) * os.w;
                                        int ix = ox_lo * stride - padding + kx * dilation;
                                        for (int ox = ox_lo; ox < ox_hi; ++ox, ix += stride) {
                                            s += static_cast<double>(xrow[ix]) * static_cast<double>(grow[ox]);
                                        }
                                    }
                                }
                                wg[((static_cast<std::int64_t>(oc) * ws2.c + ic) * ws2.h + ky) * ws2.w + kx] +=
                                    static_cast<T>(s);
                            }
                        }
                    }
                }
            }
            if (x.requires_grad()) {
                BasicTensor<T> xmut = x;
                T* xg = xmut.grad().data();
                for (int b = 0; b < os.b; ++b) {
                    for (int oc = 0; oc < os.c; ++oc) {
                        const T* gplane = gd + (static_cast<std::int64_t>(b) * os.c + oc) * plane_out;
                        for (int ic = 0; ic < xs2.c; ++ic) {
                            T* xgplane = xg + (static_cast<std::int64_t>(b) * xs2.c + ic) * plane_in;
                            const T* wk = wd2 + ((static_cast<std::int64_t>(oc) * ws2.c + ic) * ws2.h) * ws2.w;
                            for (int ky = 0; ky < ws2.h; ++ky) {
                                int oy_lo, oy_hi;
                                detail::conv_axis_bounds(xs2.h, os.h, stride, padding, ky * dilation, oy_lo, oy_hi);
                                for (int kx = 0; kx < ws2.w; ++kx) {
                                    const T wv = wk[ky * ws2.w + kx];
                                    if (wv == T(0)) continue;
                                    int ox_lo, ox_hi;
                                    detail::conv_axis_bounds(xs2.w, os.w, stride, padding, kx * dilation, ox_lo, ox_hi);
                                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                                        const int iy = oy * stride - padding + ky * dilation;
                                        T* xgrow = xgplane + static_cast<std::int64_t>(iy) * xs2.w;
                                        const T* grow = gplane + static_cast<std::int64_t>(oy) * os.w;
                                        int ix = ox_lo * stride - padding + kx * dilation;
                                        for (int ox = ox_lo; ox < ox_hi; ++ox, ix += stride) {
                                            xgrow[ix] += wv * grow[ox];
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

// ---------------------------------------------------------------------------
// Pointwise activations
// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> relu(GradTape<T>* tape, const BasicTensor<T>& x) {
    BasicTensor<T> out(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] > T(0) ? xd[i] : T(0);
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out]() {
            BasicTensor<T> xmut = x;
            auto xd2 = xmut.data();
            auto xg = xmut.grad();
            auto g = out.grad();
            for (std::size_t i = 0; i < xg.size(); ++i) {
                if (xd2[i] > T(0)) xg[i] += g[i];
            }
        });
    }
    return out;
}

// Outputs are clamped into the open interval (0,1): at f32 the analytic
// value saturates to exactly 0/1 for |x| beyond ~17, which would break the
// strict gate-range contract downstream.
template <typename T>
BasicTensor<T> sigmoid(GradTape<T>* tape, const BasicTensor<T>& x) {
    BasicTensor<T> out(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t i = 0; i < xd.size(); ++i) {
        const double y = 1.0 / (1.0 + std::exp(-static_cast<double>(xd[i])));
        od[i] = detail::clamp_unit_interval(static_cast<T>(y));
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out]() {
            BasicTensor<T> xmut = x;
            auto xg = xmut.grad();
            auto od2 = out.data();
            auto g = out.grad();
            for (std::size_t i = 0; i < xg.size(); ++i) {
                xg[i] += od2[i] * (T(1) - od2[i]) * g[i];
            }
        });
    }
    return out;
}

// Softmax over the last (W) axis; every (b,c,h) row is one distribution.
// Max-subtraction keeps exp() finite for any finite input.
template <typename T>
BasicTensor<T> softmax_lastdim(GradTape<T>* tape, const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.w < 1) throw ShapeError("softmax_lastdim: empty rows in shape " + s.str());
    BasicTensor<T> out(s);
    const T* xd = x.data().data();
    T* od = out.data().data();
    const std::int64_t rows = static_cast<std::int64_t>(s.b) * s.c * s.h;
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = xd + r * s.w;
        T* orow = od + r * s.w;
        double m = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < s.w; ++k) m = std::max(m, static_cast<double>(xr[k]));
        double z = 0.0;
        for (int k = 0; k < s.w; ++k) z += std::exp(static_cast<double>(xr[k]) - m);
        for (int k = 0; k < s.w; ++k) {
            orow[k] = static_cast<T>(std::exp(static_cast<double>(xr[k]) - m) / z);
        }
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out]() {
            BasicTensor<T> xmut = x;
            const Shape s2 = out.shape();
            T* xg = xmut.grad().data();
            const T* od2 = out.data().data();
            const T* g = out.grad().data();
            const std::int64_t rows = static_cast<std::int64_t>(s2.b) * s2.c * s2.h;
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* yr = od2 + r * s2.w;
                const T* gr = g + r * s2.w;
                T* xr = xg + r * s2.w;
                double dot = 0.0;
                for (int k = 0; k < s2.w; ++k) dot += static_cast<double>(gr[k]) * yr[k];
                for (int k = 0; k < s2.w; ++k) {
                    xr[k] += static_cast<T>(yr[k] * (static_cast<double>(gr[k]) - dot));
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions over spatial / channel axes
// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> global_avg_pool(GradTape<T>* tape, const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.h * s.w < 1) throw ShapeError("global_avg_pool: empty spatial plane in shape " + s.str());
    BasicTensor<T> out(Shape{s.b, s.c, 1, 1});
    const T* xd = x.data().data();
    T* od = out.data().data();
    const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(s.b) * s.c; ++p) {
        double acc = 0.0;
        const T* xp = xd + p * plane;
        for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(xp[i]);
        od[p] = static_cast<T>(acc / static_cast<double>(plane));
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out]() {
            BasicTensor<T> xmut = x;
            const Shape s2 = x.shape();
            T* xg = xmut.grad().data();
            const T* g = out.grad().data();
            const std::int64_t plane = static_cast<std::int64_t>(s2.h) * s2.w;
            const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
            for (std::int64_t p = 0; p < static_cast<std::int64_t>(s2.b) * s2.c; ++p) {
                const T gp = g[p] * inv;
                T* xp = xg + p * plane;
                for (std::int64_t i = 0; i < plane; ++i) xp[i] += gp;
            }
        });
    }
    return out;
}

// Gradient routes to the first maximal element of each plane in row-major
// order.
template <typename T>
BasicTensor<T> global_max_pool(GradTape<T>* tape, const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.h * s.w < 1) throw ShapeError("global_max_pool: empty spatial plane in shape " + s.str());
    BasicTensor<T> out(Shape{s.b, s.c, 1, 1});
    const T* xd = x.data().data();
    T* od = out.data().data();
    const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
    const std::int64_t planes = static_cast<std::int64_t>(s.b) * s.c;
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(planes));
    for (std::int64_t p = 0; p < planes; ++p) {
        const T* xp = xd + p * plane;
        std::int64_t best = 0;
        for (std::int64_t i = 1; i < plane; ++i) {
            if (xp[i] > xp[best]) best = i;
        }
        argmax[static_cast<std::size_t>(p)] = best;
        od[p] = xp[best];
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out, argmax = std::move(argmax), plane]() {
            BasicTensor<T> xmut = x;
            T* xg = xmut.grad().data();
            const T* g = out.grad().data();
            for (std::size_t p = 0; p < argmax.size(); ++p) {
                xg[static_cast<std::int64_t>(p) * plane + argmax[p]] += g[p];
            }
        });
    }
    return out;
}

template <typename T>
BasicTensor<T> channel_mean(GradTape<T>* tape, const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.c < 1) throw ShapeError("channel_mean: zero channels in shape " + s.str());
    BasicTensor<T> out(Shape{s.b, 1, s.h, s.w});
    const T* xd = x.data().data();
    T* od = out.data().data();
    const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
    for (int b = 0; b < s.b; ++b) {
        for (std::int64_t i = 0; i < plane; ++i) {
            double acc = 0.0;
            for (int c = 0; c < s.c; ++c) {
                acc += static_cast<double>(xd[(static_cast<std::int64_t>(b) * s.c + c) * plane + i]);
            }
            od[b * plane + i] = static_cast<T>(acc / s.c);
        }
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out]() {
            BasicTensor<T> xmut = x;
            const Shape s2 = x.shape();
            T* xg = xmut.grad().data();
            const T* g = out.grad().data();
            const std::int64_t plane = static_cast<std::int64_t>(s2.h) * s2.w;
            const T inv = static_cast<T>(1.0 / s2.c);
            for (int b = 0; b < s2.b; ++b) {
                for (std::int64_t i = 0; i < plane; ++i) {
                    const T gi = g[b * plane + i] * inv;
                    for (int c = 0; c < s2.c; ++c) {
                        xg[(static_cast<std::int64_t>(b) * s2.c + c) * plane + i] += gi;
                    }
                }
            }
        });
    }
    return out;
}

// Ties route the gradient to the lowest channel index.
template <typename T>
BasicTensor<T> channel_max(GradTape<T>* tape, const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.c < 1) throw ShapeError("channel_max: zero channels in shape " + s.str());
    BasicTensor<T> out(Shape{s.b, 1, s.h, s.w});
    const T* xd = x.data().data();
    T* od = out.data().data();
    const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
    std::vector<int> argmax(static_cast<std::size_t>(s.b * plane));
    for (int b = 0; b < s.b; ++b) {
        for (std::int64_t i = 0; i < plane; ++i) {
            int best = 0;
            T bv = xd[static_cast<std::int64_t>(b) * s.c * plane + i];
            for (int c = 1; c < s.c; ++c) {
                const T v = xd[(static_cast<std::int64_t>(b) * s.c + c) * plane + i];
                if (v > bv) {
                    bv = v;
                    best = c;
                }
            }
            argmax[static_cast<std::size_t>(b * plane + i)] = best;
            od[b * plane + i] = bv;
        }
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out, argmax = std::move(argmax)]() {
            BasicTensor<T> xmut = x;
            const Shape s2 = x.shape();
            T* xg = xmut.grad().data();
            const T* g = out.grad().data();
            const std::int64_t plane = static_cast<std::int64_t>(s2.h) * s2.w;
            for (int b = 0; b < s2.b; ++b) {
                for (std::int64_t i = 0; i < plane; ++i) {
                    const int c = argmax[static_cast<std::size_t>(b * plane + i)];
                    xg[(static_cast<std::int64_t>(b) * s2.c + c) * plane + i] += g[b * plane + i];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bilinear resize, half-pixel centers (align_corners = false).
// ---------------------------------------------------------------------------

namespace detail {

struct LerpTap {
    int i0, i1;
    double f;  // weight of i1
};

inline std::vector<LerpTap> bilinear_taps(int in_size, int out_size) {
    std::vector<LerpTap> taps(static_cast<std::size_t>(out_size));
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        src = std::min(std::max(src, 0.0), static_cast<double>(in_size - 1));
        int i0 = static_cast<int>(src);
        int i1 = std::min(i0 + 1, in_size - 1);
        taps[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
    }
    return taps;
}

}  // namespace detail

template <typename T>
BasicTensor<T> bilinear_upsample(GradTape<T>* tape, const BasicTensor<T>& x, int out_h, int out_w) {
    const Shape s = x.shape();
    if (out_h < 1 || out_w < 1) {
        throw ShapeError("bilinear_upsample: target size must be positive, got " +
                         std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    BasicTensor<T> out(Shape{s.b, s.c, out_h, out_w});
    const auto ty = detail::bilinear_taps(s.h, out_h);
    const auto tx = detail::bilinear_taps(s.w, out_w);
    const T* xd = x.data().data();
    T* od = out.data().data();
    const std::int64_t plane_in = static_cast<std::int64_t>(s.h) * s.w;
    const std::int64_t plane_out = static_cast<std::int64_t>(out_h) * out_w;
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(s.b) * s.c; ++p) {
        const T* xp = xd + p * plane_in;
        T* op = od + p * plane_out;
        for (int oy = 0; oy < out_h; ++oy) {
            const auto& a = ty[static_cast<std::size_t>(oy)];
            for (int ox = 0; ox < out_w; ++ox) {
                const auto& b = tx[static_cast<std::size_t>(ox)];
                const double v00 = xp[static_cast<std::int64_t>(a.i0) * s.w + b.i0];
                const double v01 = xp[static_cast<std::int64_t>(a.i0) * s.w + b.i1];
                const double v10 = xp[static_cast<std::int64_t>(a.i1) * s.w + b.i0];
                const double v11 = xp[static_cast<std::int64_t>(a.i1) * s.w + b.i1];
                const double v = (1.0 - a.f) * ((1.0 - b.f) * v00 + b.f * v01) +
                                 a.f * ((1.0 - b.f) * v10 + b.f * v11);
                op[static_cast<std::int64_t>(oy) * out_w + ox] = static_cast<T>(v);
            }
        }
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out, ty, tx]() {
            BasicTensor<T> xmut = x;
            const Shape si = x.shape();
            const Shape so = out.shape();
            T* xg = xmut.grad().data();
            const T* g = out.grad().data();
            const std::int64_t plane_in = static_cast<std::int64_t>(si.h) * si.w;
            const std::int64_t plane_out = static_cast<std::int64_t>(so.h) * so.w;
            for (std::int64_t p = 0; p < static_cast<std::int64_t>(si.b) * si.c; ++p) {
                T* xp = xg + p * plane_in;
                const T* gp = g + p * plane_out;
                for (int oy = 0; oy < so.h; ++oy) {
                    const auto& a = ty[static_cast<std::size_t>(oy)];
                    for (int ox = 0; ox < so.w; ++ox) {
                        const auto& b = tx[static_cast<std::size_t>(ox)];
                        const double gv = static_cast<double>(gp[static_cast<std::int64_t>(oy) * so.w + ox]);
                        xp[static_cast<std::int64_t>(a.i0) * si.w + b.i0] += static_cast<T>((1.0 - a.f) * (1.0 - b.f) * gv);
                        xp[static_cast<std::int64_t>(a.i0) * si.w + b.i1] += static_cast<T>((1.0 - a.f) * b.f * gv);
                        xp[static_cast<std::int64_t>(a.i1) * si.w + b.i0] += static_cast<T>(a.f * (1.0 - b.f) * gv);
                        xp[static_cast<std::int64_t>(a.i1) * si.w + b.i1] += static_cast<T>(a.f * b.f * gv);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batched matrix product over the last two axes: (B,G,M,K) x (B,G,K,N).
// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> batched_matmul(GradTape<T>* tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
    const Shape as = a.shape();
    const Shape bs = b.shape();
    if (as.b != bs.b || as.c != bs.c || as.w != bs.h) {
        throw ShapeError("batched_matmul: incompatible shapes " + as.str() + " x " + bs.str());
    }
    const int M = as.h, K = as.w, N = bs.w;
    BasicTensor<T> out(Shape{as.b, as.c, M, N});
    const T* ad = a.data().data();
    const T* bd = b.data().data();
    T* od = out.data().data();
    const std::int64_t groups = static_cast<std::int64_t>(as.b) * as.c;
    for (std::int64_t gidx = 0; gidx < groups; ++gidx) {
        const T* am = ad + gidx * M * K;
        const T* bm = bd + gidx * static_cast<std::int64_t>(K) * N;
        T* om = od + gidx * static_cast<std::int64_t>(M) * N;
        for (int m = 0; m < M; ++m) {
            for (int n = 0; n < N; ++n) {
                double acc = 0.0;
                for (int k = 0; k < K; ++k) {
                    acc += static_cast<double>(am[m * K + k]) * static_cast<double>(bm[static_cast<std::int64_t>(k) * N + n]);
                }
                om[static_cast<std::int64_t>(m) * N + n] = static_cast<T>(acc);
            }
        }
    }
    if (detail::want_grad(tape, {&a, &b})) {
        out.mark_tape_output();
        tape->record(out, [a, b, out]() {
            const Shape as2 = a.shape();
            const Shape bs2 = b.shape();
            const int M = as2.h, K = as2.w, N = bs2.w;
            const std::int64_t groups = static_cast<std::int64_t>(as2.b) * as2.c;
            const T* g = out.grad().data();
            if (a.requires_grad()) {
                BasicTensor<T> amut = a;
                T* ag = amut.grad().data();
                const T* bd2 = b.data().data();
                for (std::int64_t gi = 0; gi < groups; ++gi) {
                    T* am = ag + gi * M * K;
                    const T* bm = bd2 + gi * static_cast<std::int64_t>(K) * N;
                    const T* gm = g + gi * static_cast<std::int64_t>(M) * N;
                    for (int m = 0; m < M; ++m) {
                        for (int k = 0; k < K; ++k) {
                            double acc = 0.0;
                            for (int n = 0; n < N; ++n) {
                                acc += static_cast<double>(gm[static_cast<std::int64_t>(m) * N + n]) *
                                       static_cast<double>(bm[static_cast<std::int64_t>(k) * N + n]);
                            }
                            am[m * K + k] += static_cast<T>(acc);
                        }
                    }
                }
            }
            if (b.requires_grad()) {
                BasicTensor<T> bmut = b;
                T* bg = bmut.grad().data();
                const T* ad2 = a.data().data();
                for (std::int64_t gi = 0; gi < groups; ++gi) {
                    const T* am = ad2 + gi * M * K;
                    T* bm = bg + gi * static_cast<std::int64_t>(K) * N;
                    const T* gm = g + gi * static_cast<std::int64_t>(M) * N;
                    for (int k = 0; k < K; ++k) {
                        for (int n = 0; n < N; ++n) {
                            double acc = 0.0;
                            for (int m = 0; m < M; ++m) {
                                acc += static_cast<double>(am[m * K + k]) *
                                       static_cast<double>(gm[static_cast<std::int64_t>(m) * N + n]);
                            }
                            bm[static_cast<std::int64_t>(k) * N + n] += static_cast<T>(acc);
                        }
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
BasicTensor<T> transpose_last2(GradTape<T>* tape, const BasicTensor<T>& x) {
    const Shape s = x.shape();
    BasicTensor<T> out(Shape{s.b, s.c, s.w, s.h});
    const T* xd = x.data().data();
    T* od = out.data().data();
    const std::int64_t groups = static_cast<std::int64_t>(s.b) * s.c;
    for (std::int64_t g = 0; g < groups; ++g) {
        const T* xm = xd + g * s.h * s.w;
        T* om = od + g * s.h * s.w;
        for (int i = 0; i < s.h; ++i) {
            for (int j = 0; j < s.w; ++j) {
                om[static_cast<std::int64_t>(j) * s.h + i] = xm[static_cast<std::int64_t>(i) * s.w + j];
            }
        }
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out]() {
            BasicTensor<T> xmut = x;
            const Shape s2 = x.shape();
            T* xg = xmut.grad().data();
            const T* g = out.grad().data();
            const std::int64_t groups = static_cast<std::int64_t>(s2.b) * s2.c;
            for (std::int64_t gi = 0; gi < groups; ++gi) {
                const T* gm = g + gi * s2.h * s2.w;
                T* xm = xg + gi * s2.h * s2.w;
                for (int i = 0; i < s2.h; ++i) {
                    for (int j = 0; j < s2.w; ++j) {
                        xm[static_cast<std::int64_t>(i) * s2.w + j] += gm[static_cast<std::int64_t>(j) * s2.h + i];
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
BasicTensor<T> reshape(GradTape<T>* tape, const BasicTensor<T>& x, Shape target) {
    if (target.numel() != x.numel()) {
        throw ShapeError("reshape: cannot view " + x.shape().str() + " as " + target.str());
    }
    BasicTensor<T> out(target);
    auto xd = x.data();
    auto od = out.data();
    std::copy(xd.begin(), xd.end(), od.begin());
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out]() {
            BasicTensor<T> xmut = x;
            auto xg = xmut.grad();
            auto g = out.grad();
            for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g[i];
        });
    }
    return out;
}

template <typename T>
BasicTensor<T> concat_channels(GradTape<T>* tape, const std::vector<BasicTensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    const Shape first = parts.front().shape();
    int total_c = 0;
    for (const auto& p : parts) {
        const Shape s = p.shape();
        if (s.b != first.b || s.h != first.h || s.w != first.w) {
            throw ShapeError("concat_channels: mismatched shape " + s.str() + " vs " + first.str());
        }
        total_c += s.c;
    }
    BasicTensor<T> out(Shape{first.b, total_c, first.h, first.w});
    T* od = out.data().data();
    const std::int64_t plane = static_cast<std::int64_t>(first.h) * first.w;
    for (int b = 0; b < first.b; ++b) {
        std::int64_t coff = 0;
        for (const auto& p : parts) {
            const Shape s = p.shape();
            const T* pd = p.data().data() + static_cast<std::int64_t>(b) * s.c * plane;
            std::copy(pd, pd + static_cast<std::int64_t>(s.c) * plane,
                      od + (static_cast<std::int64_t>(b) * total_c + coff) * plane);
            coff += s.c;
        }
    }
    bool any = false;
    if (tape) {
        for (const auto& p : parts) any = any || p.requires_grad();
    }
    if (any) {
        out.mark_tape_output();
        tape->record(out, [parts, out]() {
            const Shape os = out.shape();
            const T* g = out.grad().data();
            const std::int64_t plane = static_cast<std::int64_t>(os.h) * os.w;
            for (int b = 0; b < os.b; ++b) {
                std::int64_t coff = 0;
                for (const auto& p : parts) {
                    const Shape s = p.shape();
                    if (p.requires_grad()) {
                        BasicTensor<T> pmut = p;
                        T* pg = pmut.grad().data() + static_cast<std::int64_t>(b) * s.c * plane;
                        const T* gp = g + (static_cast<std::int64_t>(b) * os.c + coff) * plane;
                        for (std::int64_t i = 0; i < static_cast<std::int64_t>(s.c) * plane; ++i) pg[i] += gp[i];
                    }
                    coff += s.c;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise add / mul. Broadcasting is deliberately narrow: identical
// shapes, a scalar operand, a per-channel gate (B,C,1,1), or a per-pixel
// gate (B,1,H,W) against (B,C,H,W). Anything wider is a shape error.
// ---------------------------------------------------------------------------

namespace detail {

enum class Bcast { Same, Scalar, ChannelGate, SpatialGate };

template <typename T>
Bcast classify_broadcast(const Shape& big, const Shape& small) {
    if (big == small) return Bcast::Same;
    if (small.numel() == 1) return Bcast::Scalar;
    if (small.b == big.b && small.c == big.c && small.h == 1 && small.w == 1) return Bcast::ChannelGate;
    if (small.b == big.b && small.c == 1 && small.h == big.h && small.w == big.w) return Bcast::SpatialGate;
    throw ShapeError("unsupported broadcast " + small.str() + " against " + big.str());
}

// Flat index of the broadcast operand matching big-tensor element i.
struct BcastIndexer {
    Bcast mode;
    std::int64_t plane;  // H*W of the big shape
    int channels;        // C of the big shape

    std::int64_t operator()(std::int64_t i) const {
        switch (mode) {
            case Bcast::Same: return i;
            case Bcast::Scalar: return 0;
            case Bcast::ChannelGate: return i / plane;
            case Bcast::SpatialGate: {
                const std::int64_t b = i / (plane * channels);
                return b * plane + i % plane;
            }
        }
        return 0;
    }
};

template <typename T, typename FwdOp>
BasicTensor<T> broadcast_binary(const BasicTensor<T>& big, const BasicTensor<T>& small, FwdOp op) {
    const Shape bs = big.shape();
    const Bcast mode = classify_broadcast<T>(bs, small.shape());
    BasicTensor<T> out(bs);
    const BcastIndexer idx{mode, static_cast<std::int64_t>(bs.h) * bs.w, bs.c};
    const T* a = big.data().data();
    const T* b = small.data().data();
    T* o = out.data().data();
    const std::int64_t n = bs.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = op(a[i], b[idx(i)]);
    return out;
}

}  // namespace detail

template <typename T>
BasicTensor<T> add(GradTape<T>* tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
    const bool a_big = a.numel() >= b.numel();
    const BasicTensor<T>& big = a_big ? a : b;
    const BasicTensor<T>& small = a_big ? b : a;
    BasicTensor<T> out = detail::broadcast_binary(big, small, [](T x, T y) { return x + y; });
    if (detail::want_grad(tape, {&a, &b})) {
        out.mark_tape_output();
        tape->record(out, [big, small, out]() {
            const Shape bs = big.shape();
            const detail::BcastIndexer idx{detail::classify_broadcast<T>(bs, small.shape()),
                                           static_cast<std::int64_t>(bs.h) * bs.w, bs.c};
            const T* g = out.grad().data();
            const std::int64_t n = bs.numel();
            if (big.requires_grad()) {
                BasicTensor<T> m = big;
                T* mg = m.grad().data();
                for (std::int64_t i = 0; i < n; ++i) mg[i] += g[i];
            }
            if (small.requires_grad()) {
                BasicTensor<T> m = small;
                T* mg = m.grad().data();
                for (std::int64_t i = 0; i < n; ++i) mg[idx(i)] += g[i];
            }
        });
    }
    return out;
}

template <typename T>
BasicTensor<T> mul(GradTape<T>* tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
    const bool a_big = a.numel() >= b.numel();
    const BasicTensor<T>& big = a_big ? a : b;
    const BasicTensor<T>& small = a_big ? b : a;
    BasicTensor<T> out = detail::broadcast_binary(big, small, [](T x, T y) { return x * y; });
    if (detail::want_grad(tape, {&a, &b})) {
        out.mark_tape_output();
        tape->record(out, [big, small, out]() {
            const Shape bs = big.shape();
            const detail::BcastIndexer idx{detail::classify_broadcast<T>(bs, small.shape()),
                                           static_cast<std::int64_t>(bs.h) * bs.w, bs.c};
            const T* g = out.grad().data();
            const T* bigd = big.data().data();
            const T* smalld = small.data().data();
            const std::int64_t n = bs.numel();
            if (big.requires_grad()) {
                BasicTensor<T> m = big;
                T* mg = m.grad().data();
                for (std::int64_t i = 0; i < n; ++i) mg[i] += g[i] * smalld[idx(i)];
            }
            if (small.requires_grad()) {
                BasicTensor<T> m = small;
                T* mg = m.grad().data();
                for (std::int64_t i = 0; i < n; ++i) mg[idx(i)] += g[i] * bigd[i];
            }
        });
    }
    return out;
}

template <typename T>
BasicTensor<T> scale(GradTape<T>* tape, const BasicTensor<T>& x, T factor) {
    BasicTensor<T> out(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (std::size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] * factor;
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out, factor]() {
            BasicTensor<T> m = x;
            auto mg = m.grad();
            auto g = out.grad();
            for (std::size_t i = 0; i < mg.size(); ++i) mg[i] += g[i] * factor;
        });
    }
    return out;
}

// Mirror padding without edge repetition; needs H,W > pad.
template <typename T>
BasicTensor<T> reflect_pad(GradTape<T>* tape, const BasicTensor<T>& x, int pad) {
    const Shape s = x.shape();
    if (pad < 0) throw ShapeError("reflect_pad: negative pad");
    if (s.h <= pad || s.w <= pad) {
        throw ShapeError("reflect_pad: pad " + std::to_string(pad) + " too large for spatial size " +
                         std::to_string(s.h) + "x" + std::to_string(s.w));
    }
    BasicTensor<T> out(Shape{s.b, s.c, s.h + 2 * pad, s.w + 2 * pad});
    const T* xd = x.data().data();
    T* od = out.data().data();
    const Shape os = out.shape();
    const std::int64_t plane_in = static_cast<std::int64_t>(s.h) * s.w;
    const std::int64_t plane_out = static_cast<std::int64_t>(os.h) * os.w;
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(s.b) * s.c; ++p) {
        const T* xp = xd + p * plane_in;
        T* op = od + p * plane_out;
        for (int oy = 0; oy < os.h; ++oy) {
            const int iy = detail::reflect_index(oy - pad, s.h);
            for (int ox = 0; ox < os.w; ++ox) {
                const int ix = detail::reflect_index(ox - pad, s.w);
                op[static_cast<std::int64_t>(oy) * os.w + ox] = xp[static_cast<std::int64_t>(iy) * s.w + ix];
            }
        }
    }
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out, pad]() {
            BasicTensor<T> m = x;
            const Shape si = x.shape();
            const Shape so = out.shape();
            T* xg = m.grad().data();
            const T* g = out.grad().data();
            const std::int64_t plane_in = static_cast<std::int64_t>(si.h) * si.w;
            const std::int64_t plane_out = static_cast<std::int64_t>(so.h) * so.w;
            for (std::int64_t p = 0; p < static_cast<std::int64_t>(si.b) * si.c; ++p) {
                T* xp = xg + p * plane_in;
                const T* gp = g + p * plane_out;
                for (int oy = 0; oy < so.h; ++oy) {
                    const int iy = detail::reflect_index(oy - pad, si.h);
                    for (int ox = 0; ox < so.w; ++ox) {
                        const int ix = detail::reflect_index(ox - pad, si.w);
                        xp[static_cast<std::int64_t>(iy) * si.w + ix] += gp[static_cast<std::int64_t>(oy) * so.w + ox];
                    }
                }
            }
        });
    }
    return out;
}

// Normalization over the channel axis per spatial position, with per-channel
// affine parameters shaped (1,C,1,1).
template <typename T>
BasicTensor<T> layer_norm_channel(GradTape<T>* tape, const BasicTensor<T>& x,
                                  const BasicTensor<T>& gain, const BasicTensor<T>& bias,
                                  T eps = T(1e-5)) {
    const Shape s = x.shape();
    if (gain.shape() != Shape{1, s.c, 1, 1} || bias.shape() != Shape{1, s.c, 1, 1}) {
        throw ShapeError("layer_norm_channel: affine parameters must be (1," + std::to_string(s.c) +
                         ",1,1), got " + gain.shape().str() + " / " + bias.shape().str());
    }
    BasicTensor<T> out(s);
    const T* xd = x.data().data();
    const T* gd = gain.data().data();
    const T* bd = bias.data().data();
    T* od = out.data().data();
    const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
    for (int b = 0; b < s.b; ++b) {
        for (std::int64_t i = 0; i < plane; ++i) {
            double mu = 0.0;
            for (int c = 0; c < s.c; ++c) mu += static_cast<double>(xd[(static_cast<std::int64_t>(b) * s.c + c) * plane + i]);
            mu /= s.c;
            double var = 0.0;
            for (int c = 0; c < s.c; ++c) {
                const double d = static_cast<double>(xd[(static_cast<std::int64_t>(b) * s.c + c) * plane + i]) - mu;
                var += d * d;
            }
            var /= s.c;
            const double istd = 1.0 / std::sqrt(var + static_cast<double>(eps));
            for (int c = 0; c < s.c; ++c) {
                const std::int64_t k = (static_cast<std::int64_t>(b) * s.c + c) * plane + i;
                const double xhat = (static_cast<double>(xd[k]) - mu) * istd;
                od[k] = static_cast<T>(xhat * static_cast<double>(gd[c]) + static_cast<double>(bd[c]));
            }
        }
    }
    if (detail::want_grad(tape, {&x, &gain, &bias})) {
        out.mark_tape_output();
        tape->record(out, [x, gain, bias, out, eps]() {
            const Shape s2 = x.shape();
            const T* xd2 = x.data().data();
            const T* gaind = gain.data().data();
            const T* g = out.grad().data();
            const std::int64_t plane = static_cast<std::int64_t>(s2.h) * s2.w;
            BasicTensor<T> xm = x, gm = gain, bm = bias;
            T* xg = x.requires_grad() ? xm.grad().data() : nullptr;
            T* gg = gain.requires_grad() ? gm.grad().data() : nullptr;
            T* bg = bias.requires_grad() ? bm.grad().data() : nullptr;
            std::vector<double> xhat(static_cast<std::size_t>(s2.c));
            std::vector<double> dxhat(static_cast<std::size_t>(s2.c));
            for (int b = 0; b < s2.b; ++b) {
                for (std::int64_t i = 0; i < plane; ++i) {
                    double mu = 0.0;
                    for (int c = 0; c < s2.c; ++c) mu += static_cast<double>(xd2[(static_cast<std::int64_t>(b) * s2.c + c) * plane + i]);
                    mu /= s2.c;
                    double var = 0.0;
                    for (int c = 0; c < s2.c; ++c) {
                        const double d = static_cast<double>(xd2[(static_cast<std::int64_t>(b) * s2.c + c) * plane + i]) - mu;
                        var += d * d;
                    }
                    var /= s2.c;
                    const double istd = 1.0 / std::sqrt(var + static_cast<double>(eps));
                    double m1 = 0.0, m2 = 0.0;
                    for (int c = 0; c < s2.c; ++c) {
                        const std::int64_t k = (static_cast<std::int64_t>(b) * s2.c + c) * plane + i;
                        xhat[static_cast<std::size_t>(c)] = (static_cast<double>(xd2[k]) - mu) * istd;
                        dxhat[static_cast<std::size_t>(c)] = static_cast<double>(g[k]) * static_cast<double>(gaind[c]);
                        m1 += dxhat[static_cast<std::size_t>(c)];
                        m2 += dxhat[static_cast<std::size_t>(c)] * xhat[static_cast<std::size_t>(c)];
                    }
                    m1 /= s2.c;
                    m2 /= s2.c;
                    for (int c = 0; c < s2.c; ++c) {
                        const std::int64_t k = (static_cast<std::int64_t>(b) * s2.c + c) * plane + i;
                        if (xg) {
                            xg[k] += static_cast<T>(istd * (dxhat[static_cast<std::size_t>(c)] - m1 -
                                                            xhat[static_cast<std::size_t>(c)] * m2));
                        }
                        if (gg) gg[c] += static_cast<T>(static_cast<double>(g[k]) * xhat[static_cast<std::size_t>(c)]);
                        if (bg) bg[c] += g[k];
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
BasicTensor<T> sum_all(GradTape<T>* tape, const BasicTensor<T>& x) {
    double acc = 0.0;
    for (T v : x.data()) acc += static_cast<double>(v);
    BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(acc));
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out]() {
            BasicTensor<T> m = x;
            auto mg = m.grad();
            const T g = out.grad()[0];
            for (std::size_t i = 0; i < mg.size(); ++i) mg[i] += g;
        });
    }
    return out;
}

template <typename T>
BasicTensor<T> mean_all(GradTape<T>* tape, const BasicTensor<T>& x) {
    double acc = 0.0;
    for (T v : x.data()) acc += static_cast<double>(v);
    const std::int64_t n = x.numel();
    BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
    if (detail::want_grad(tape, {&x})) {
        out.mark_tape_output();
        tape->record(out, [x, out, n]() {
            BasicTensor<T> m = x;
            auto mg = m.grad();
            const T g = static_cast<T>(static_cast<double>(out.grad()[0]) / static_cast<double>(n));
            for (std::size_t i = 0; i < mg.size(); ++i) mg[i] += g;
        });
    }
    return out;
}

// Mean binary cross-entropy evaluated in logit space. Logits are clamped to
// |z| <= ln((1-eps)/eps), which is the logit image of clamping probabilities
// to [eps, 1-eps]. d(loss)/d(logit) = (sigmoid(z) - t) / count.
template <typename T>
BasicTensor<T> bce_with_logits(GradTape<T>* tape, const BasicTensor<T>& logits,
                               const BasicTensor<T>& target, double eps = 1e-7) {
    if (logits.shape() != target.shape()) {
        throw ShapeError("bce_with_logits: prediction shape " + logits.shape().str() +
                         " does not match target shape " + target.shape().str());
    }
    for (T v : target.data()) {
        if (v != T(0) && v != T(1)) {
            throw ValidationError("bce_with_logits: target contains non-binary value " +
                                  std::to_string(static_cast<double>(v)));
        }
    }
    const double zmax = std::log((1.0 - eps) / eps);
    const T* zd = logits.data().data();
    const T* td = target.data().data();
    const std::int64_t n = logits.numel();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double z = std::min(std::max(static_cast<double>(zd[i]), -zmax), zmax);
        const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
        acc += softplus - static_cast<double>(td[i]) * z;
    }
    BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
    if (detail::want_grad(tape, {&logits})) {
        out.mark_tape_output();
        tape->record(out, [logits, target, out, zmax, n]() {
            BasicTensor<T> m = logits;
            T* zg = m.grad().data();
            const T* zd2 = logits.data().data();
            const T* td2 = target.data().data();
            const double g = static_cast<double>(out.grad()[0]) / static_cast<double>(n);
            for (std::int64_t i = 0; i < n; ++i) {
                const double z = std::min(std::max(static_cast<double>(zd2[i]), -zmax), zmax);
                const double p = 1.0 / (1.0 + std::exp(-z));
                zg[i] += static_cast<T>((p - static_cast<double>(td2[i])) * g);
            }
        });
    }
    return out;
}

}  // namespace fanet::ops
