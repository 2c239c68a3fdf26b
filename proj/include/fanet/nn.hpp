#pragma once

#include <cmath>
#include <random>
#include <string>

#include "fanet/ops.hpp"
#include "fanet/tensor.hpp"

namespace fanet {

// Every layer draws its init from a stream derived from the parameter path,
// so adding or removing one module never shifts another module's weights.
inline std::mt19937 init_rng(std::uint64_t seed, const std::string& path) {
    return std::mt19937(static_cast<std::uint32_t>(mix_seed(seed, fnv1a(path))));
}

enum class PadMode { Zero, Reflect };

template <typename T>
class Conv2dLayer {
public:
    Conv2dLayer() = default;

    Conv2dLayer(int in_ch, int out_ch, int kernel, std::mt19937& rng, int stride = 1,
                int padding = 0, int dilation = 1, bool with_bias = true,
                PadMode pad_mode = PadMode::Zero)
        : stride_(stride), padding_(padding), dilation_(dilation), pad_mode_(pad_mode) {
        weight_ = BasicTensor<T>(Shape{out_ch, in_ch, kernel, kernel});
        const double fan_in = static_cast<double>(in_ch) * kernel * kernel;
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& w : weight_.data()) w = static_cast<T>(dist(rng));
        weight_.set_requires_grad(true);
        if (with_bias) {
            bias_ = BasicTensor<T>::zeros(Shape{1, out_ch, 1, 1});
            bias_.set_requires_grad(true);
        }
    }

    BasicTensor<T> forward(GradTape<T>* tape, const BasicTensor<T>& x) const {
        if (pad_mode_ == PadMode::Reflect && padding_ > 0) {
            BasicTensor<T> padded = ops::reflect_pad(tape, x, padding_);
            return ops::conv2d(tape, padded, weight_, bias_, stride_, 0, dilation_);
        }
        return ops::conv2d(tape, x, weight_, bias_, stride_, padding_, dilation_);
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".weight", weight_});
        if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
    }

    BasicTensor<T>& weight() { return weight_; }
    BasicTensor<T>& bias() { return bias_; }
    const BasicTensor<T>& weight() const { return weight_; }
    const BasicTensor<T>& bias() const { return bias_; }
    int stride() const { return stride_; }
    int padding() const { return padding_; }

    // Overwrites weights with scale * (center-tap identity); requires square
    // in/out channels and an odd kernel.
    void set_identity(T factor) {
        const Shape ws = weight_.shape();
        std::fill(weight_.data().begin(), weight_.data().end(), T(0));
        for (int c = 0; c < std::min(ws.b, ws.c); ++c) {
            weight_.at(c, c, ws.h / 2, ws.w / 2) = factor;
        }
        if (bias_.defined()) std::fill(bias_.data().begin(), bias_.data().end(), T(0));
    }

    template <typename U>
    Conv2dLayer<U> cast() const {
        Conv2dLayer<U> other;
        other.stride_ = stride_;
        other.padding_ = padding_;
        other.dilation_ = dilation_;
        other.pad_mode_ = pad_mode_;
        other.weight_ = weight_.template cast<U>();
        other.weight_.set_requires_grad(true);
        if (bias_.defined()) {
            other.bias_ = bias_.template cast<U>();
            other.bias_.set_requires_grad(true);
        }
        return other;
    }

private:
    template <typename U>
    friend class Conv2dLayer;

    BasicTensor<T> weight_;
    BasicTensor<T> bias_;
    int stride_ = 1;
    int padding_ = 0;
    int dilation_ = 1;
    PadMode pad_mode_ = PadMode::Zero;
};

template <typename T>
class ChannelLayerNorm {
public:
    ChannelLayerNorm() = default;

    explicit ChannelLayerNorm(int channels) {
        gain_ = BasicTensor<T>::full(Shape{1, channels, 1, 1}, T(1));
        bias_ = BasicTensor<T>::zeros(Shape{1, channels, 1, 1});
        gain_.set_requires_grad(true);
        bias_.set_requires_grad(true);
    }

    BasicTensor<T> forward(GradTape<T>* tape, const BasicTensor<T>& x) const {
        return ops::layer_norm_channel(tape, x, gain_, bias_);
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".gain", gain_});
        out.push_back({prefix + ".bias", bias_});
    }

    template <typename U>
    ChannelLayerNorm<U> cast() const {
        ChannelLayerNorm<U> other;
        other.gain_ = gain_.template cast<U>();
        other.bias_ = bias_.template cast<U>();
        other.gain_.set_requires_grad(true);
        other.bias_.set_requires_grad(true);
        return other;
    }

private:
    template <typename U>
    friend class ChannelLayerNorm;

    BasicTensor<T> gain_;
    BasicTensor<T> bias_;
};

}  // namespace fanet
