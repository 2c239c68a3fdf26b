#pragma once

#include <string>

#include "fanet/nn.hpp"
#include "fanet/ops.hpp"

namespace fanet {

template <typename T>
struct SegMapT {
    BasicTensor<T> logits;
    BasicTensor<T> probabilities;
};

using SegMap = SegMapT<float>;

// Upsample the high-level stream to the finest fused map, concatenate, refine
// with two 3x3 convolutions, project to one channel and resize to the input.
template <typename T>
class FusionDecoder {
public:
    FusionDecoder() = default;

    FusionDecoder(int high_channels, int low_channels, int width, std::uint64_t seed,
                  const std::string& path) {
        auto r1 = init_rng(seed, path + ".refine1");
        auto r2 = init_rng(seed, path + ".refine2");
        auto rh = init_rng(seed, path + ".head");
        refine1 = Conv2dLayer<T>(high_channels + low_channels, width, 3, r1, 1, 1);
        refine2 = Conv2dLayer<T>(width, width, 3, r2, 1, 1);
        head = Conv2dLayer<T>(width, 1, 1, rh);
    }

    SegMapT<T> decode(GradTape<T>* tape, const BasicTensor<T>& high, const BasicTensor<T>& low,
                      int out_h, int out_w) const {
        const Shape hs = high.shape();
        const Shape ls = low.shape();
        if (hs.b != ls.b) {
            throw ShapeError("decoder streams disagree on batch: " + hs.str() + " vs " + ls.str());
        }
        if (hs.c + ls.c != refine1.weight().shape().c) {
            throw ShapeError("decoder configured for " + std::to_string(refine1.weight().shape().c) +
                             " concatenated channels, got " + std::to_string(hs.c + ls.c));
        }
        BasicTensor<T> up = ops::bilinear_upsample(tape, high, ls.h, ls.w);
        BasicTensor<T> cat = ops::concat_channels(tape, {up, low});
        BasicTensor<T> h = ops::relu(tape, refine1.forward(tape, cat));
        h = ops::relu(tape, refine2.forward(tape, h));
        BasicTensor<T> logits_small = head.forward(tape, h);
        SegMapT<T> out;
        out.logits = ops::bilinear_upsample(tape, logits_small, out_h, out_w);
        out.probabilities = ops::sigmoid(tape, out.logits);
        return out;
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        refine1.collect(prefix + ".refine1", out);
        refine2.collect(prefix + ".refine2", out);
        head.collect(prefix + ".head", out);
    }

    template <typename U>
    FusionDecoder<U> cast() const {
        FusionDecoder<U> other;
        other.refine1 = refine1.template cast<U>();
        other.refine2 = refine2.template cast<U>();
        other.head = head.template cast<U>();
        return other;
    }

    Conv2dLayer<T> refine1, refine2, head;
};

}  // namespace fanet
