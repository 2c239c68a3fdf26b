#pragma once

#include <string>
#include <utility>

#include "fanet/nn.hpp"
#include "fanet/ops.hpp"

namespace fanet {

// Dual attention over the high-level map: position attention mixes spatial
// locations through an N x N map, channel attention mixes channels through a
// C x C map built directly from the input. Both residual weights start at
// zero, and fuse_conv starts as a halving identity, so the whole module is a
// bit-exact identity until training moves it.
template <typename T>
class DamModule {
public:
    DamModule() = default;

    DamModule(int channels, std::uint64_t seed, const std::string& path, int n_cap = 4096)
        : channels_(channels), n_cap_(n_cap) {
        const int reduced = std::max(1, channels / 8);
        auto rb = init_rng(seed, path + ".b_proj");
        auto rc = init_rng(seed, path + ".c_proj");
        auto rd = init_rng(seed, path + ".d_proj");
        auto rf = init_rng(seed, path + ".fuse_conv");
        // b_proj produces the key-side map: a bias there shifts whole softmax
        // rows and would never receive gradient.
        b_proj = Conv2dLayer<T>(channels, reduced, 1, rb, 1, 0, 1, /*with_bias=*/false);
        c_proj = Conv2dLayer<T>(channels, reduced, 1, rc);
        d_proj = Conv2dLayer<T>(channels, channels, 1, rd);
        fuse_conv = Conv2dLayer<T>(channels, channels, 1, rf);
        fuse_conv.set_identity(T(0.5));
        gamma = BasicTensor<T>::zeros(Shape{1, 1, 1, 1});
        beta = BasicTensor<T>::zeros(Shape{1, 1, 1, 1});
        gamma.set_requires_grad(true);
        beta.set_requires_grad(true);
    }

    // e = gamma * (S-weighted D) + a, with S[j,i] = softmax_i(B_i . C_j)
    std::pair<BasicTensor<T>, BasicTensor<T>> position_attention(GradTape<T>* tape,
                                                                 const BasicTensor<T>& a) const {
        const Shape s = check_input(a);
        const int n = s.h * s.w;
        const int reduced = b_proj.weight().shape().b;
        BasicTensor<T> keys = ops::reshape(tape, b_proj.forward(tape, a), Shape{s.b, 1, reduced, n});
        BasicTensor<T> queries = ops::reshape(tape, c_proj.forward(tape, a), Shape{s.b, 1, reduced, n});
        BasicTensor<T> logits = ops::batched_matmul(tape, ops::transpose_last2(tape, queries), keys);
        BasicTensor<T> smap = ops::softmax_lastdim(tape, logits);  // (B,1,N,N), rows are queries
        BasicTensor<T> values = ops::reshape(tape, d_proj.forward(tape, a), Shape{s.b, 1, s.c, n});
        BasicTensor<T> mixed = ops::batched_matmul(tape, values, ops::transpose_last2(tape, smap));
        BasicTensor<T> e = ops::add(tape, a, ops::mul(tape, ops::reshape(tape, mixed, s), gamma));
        return {e, smap};
    }

    // m = beta * (X-weighted A) + a, with X[j,i] = softmax_i(A_i . A_j)
    std::pair<BasicTensor<T>, BasicTensor<T>> channel_attention(GradTape<T>* tape,
                                                                const BasicTensor<T>& a) const {
        const Shape s = check_input(a);
        const int n = s.h * s.w;
        BasicTensor<T> flat = ops::reshape(tape, a, Shape{s.b, 1, s.c, n});
        BasicTensor<T> logits = ops::batched_matmul(tape, flat, ops::transpose_last2(tape, flat));
        BasicTensor<T> cmap = ops::softmax_lastdim(tape, logits);  // (B,1,C,C)
        BasicTensor<T> mixed = ops::batched_matmul(tape, cmap, flat);
        BasicTensor<T> m = ops::add(tape, a, ops::mul(tape, ops::reshape(tape, mixed, s), beta));
        return {m, cmap};
    }

    BasicTensor<T> forward(GradTape<T>* tape, const BasicTensor<T>& a) const {
        auto [e, smap] = position_attention(tape, a);
        auto [m, cmap] = channel_attention(tape, a);
        return fuse_conv.forward(tape, ops::add(tape, e, m));
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        b_proj.collect(prefix + ".b_proj", out);
        c_proj.collect(prefix + ".c_proj", out);
        d_proj.collect(prefix + ".d_proj", out);
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
        fuse_conv.collect(prefix + ".fuse_conv", out);
    }

    template <typename U>
    DamModule<U> cast() const {
        DamModule<U> other;
        other.channels_ = channels_;
        other.n_cap_ = n_cap_;
        other.b_proj = b_proj.template cast<U>();
        other.c_proj = c_proj.template cast<U>();
        other.d_proj = d_proj.template cast<U>();
        other.fuse_conv = fuse_conv.template cast<U>();
        other.gamma = gamma.template cast<U>();
        other.beta = beta.template cast<U>();
        other.gamma.set_requires_grad(true);
        other.beta.set_requires_grad(true);
        return other;
    }

    Conv2dLayer<T> b_proj, c_proj, d_proj, fuse_conv;
    BasicTensor<T> gamma, beta;

private:
    template <typename U>
    friend class DamModule;

    Shape check_input(const BasicTensor<T>& a) const {
        const Shape s = a.shape();
        if (s.c != channels_) {
            throw ShapeError("dam configured for " + std::to_string(channels_) + " channels, got " +
                             std::to_string(s.c));
        }
        const std::int64_t n = static_cast<std::int64_t>(s.h) * s.w;
        if (n < 1) throw ShapeError("dam needs at least one spatial position");
        if (n > n_cap_) {
            throw ValidationError("dam dense attention over N=" + std::to_string(n) +
                                  " positions exceeds the configured cap of " + std::to_string(n_cap_));
        }
        return s;
    }

    int channels_ = 0;
    int n_cap_ = 4096;
};

}  // namespace fanet
