#pragma once

#include <array>
#include <string>

#include "fanet/nn.hpp"
#include "fanet/ops.hpp"

namespace fanet {

template <typename T>
struct FusedFeaturesT {
    BasicTensor<T> d1, d2, d3;
};

// Coarse-to-fine multiplicative fusion: each finer level is gated by the
// convolved 2x upsampling of the already-fused coarser level.
template <typename T>
class DemModule {
public:
    DemModule() = default;

    DemModule(int width, std::uint64_t seed, const std::string& path) {
        auto r32 = init_rng(seed, path + ".up32");
        auto r21 = init_rng(seed, path + ".up21");
        up32 = Conv2dLayer<T>(width, width, 3, r32, 1, 1);
        up21 = Conv2dLayer<T>(width, width, 3, r21, 1, 1);
    }

    FusedFeaturesT<T> fuse(GradTape<T>* tape, const BasicTensor<T>& f1, const BasicTensor<T>& f2,
                           const BasicTensor<T>& f3) const {
        check_halving(f1.shape(), f2.shape());
        check_halving(f2.shape(), f3.shape());
        FusedFeaturesT<T> out;
        out.d3 = f3;
        out.d2 = ops::mul(tape, f2,
                          up32.forward(tape, ops::bilinear_upsample(tape, out.d3, f2.shape().h, f2.shape().w)));
        out.d1 = ops::mul(tape, f1,
                          up21.forward(tape, ops::bilinear_upsample(tape, out.d2, f1.shape().h, f1.shape().w)));
        return out;
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        up32.collect(prefix + ".up32", out);
        up21.collect(prefix + ".up21", out);
    }

    template <typename U>
    DemModule<U> cast() const {
        DemModule<U> other;
        other.up32 = up32.template cast<U>();
        other.up21 = up21.template cast<U>();
        return other;
    }

    Conv2dLayer<T> up32, up21;

private:
    static void check_halving(const Shape& fine, const Shape& coarse) {
        if (fine.c != coarse.c || coarse.h * 2 != fine.h || coarse.w * 2 != fine.w) {
            throw ShapeError("dem expects a halving pyramid with equal widths, got " + fine.str() +
                             " over " + coarse.str());
        }
    }
};

struct RfbConfig {
    int channels = 16;
    int inter = 4;  // per-branch reduced width

    static RfbConfig for_channels(int c) { return RfbConfig{c, std::max(1, c / 4)}; }
};

// Five branches: a 1x1 shortcut plus four reduced paths whose trailing 3x3
// convolutions dilate at 1/3/5/7. Branches 3..5 insert a plain 3x3 between
// the reduction and the dilated tap, so the widest path reaches radius 1+7.
template <typename T>
class RfbModule {
public:
    RfbModule() = default;

    RfbModule(RfbConfig cfg, std::uint64_t seed, const std::string& path) : cfg_(cfg) {
        auto r1 = init_rng(seed, path + ".branch1");
        branch1 = Conv2dLayer<T>(cfg.channels, cfg.channels, 1, r1);
        const std::array<int, 4> dil{1, 3, 5, 7};
        for (int b = 0; b < 4; ++b) {
            const std::string bp = path + ".branch" + std::to_string(b + 2);
            auto rr = init_rng(seed, bp + ".reduce");
            reduce[b] = Conv2dLayer<T>(cfg.channels, cfg.inter, 1, rr);
            if (b > 0) {
                auto rm = init_rng(seed, bp + ".mid");
                mid[b - 1] = Conv2dLayer<T>(cfg.inter, cfg.inter, 3, rm, 1, 1);
            }
            auto rd = init_rng(seed, bp + ".dilated");
            dilated[b] = Conv2dLayer<T>(cfg.inter, cfg.inter, 3, rd, 1, dil[b], dil[b]);
        }
        auto rm = init_rng(seed, path + ".merge");
        merge = Conv2dLayer<T>(cfg.inter * 4, cfg.channels, 1, rm);
    }

    BasicTensor<T> forward(GradTape<T>* tape, const BasicTensor<T>& x) const {
        if (x.shape().c != cfg_.channels) {
            throw ShapeError("rfb configured for " + std::to_string(cfg_.channels) +
                             " channels, got " + std::to_string(x.shape().c));
        }
        std::vector<BasicTensor<T>> outs;
        outs.reserve(4);
        for (int b = 0; b < 4; ++b) {
            BasicTensor<T> h = ops::relu(tape, reduce[b].forward(tape, x));
            if (b > 0) h = ops::relu(tape, mid[b - 1].forward(tape, h));
            outs.push_back(dilated[b].forward(tape, h));
        }
        BasicTensor<T> merged = merge.forward(tape, ops::concat_channels(tape, outs));
        return ops::relu(tape, ops::add(tape, merged, branch1.forward(tape, x)));
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        branch1.collect(prefix + ".branch1", out);
        for (int b = 0; b < 4; ++b) {
            const std::string bp = prefix + ".branch" + std::to_string(b + 2);
            reduce[b].collect(bp + ".reduce", out);
            if (b > 0) mid[b - 1].collect(bp + ".mid", out);
            dilated[b].collect(bp + ".dilated", out);
        }
        merge.collect(prefix + ".merge", out);
    }

    template <typename U>
    RfbModule<U> cast() const {
        RfbModule<U> other;
        other.cfg_ = cfg_;
        other.branch1 = branch1.template cast<U>();
        for (int b = 0; b < 4; ++b) {
            other.reduce[b] = reduce[b].template cast<U>();
            if (b > 0) other.mid[b - 1] = mid[b - 1].template cast<U>();
            other.dilated[b] = dilated[b].template cast<U>();
        }
        other.merge = merge.template cast<U>();
        return other;
    }

    const RfbConfig& config() const { return cfg_; }

    Conv2dLayer<T> branch1;
    std::array<Conv2dLayer<T>, 4> reduce;
    std::array<Conv2dLayer<T>, 3> mid;
    std::array<Conv2dLayer<T>, 4> dilated;
    Conv2dLayer<T> merge;

private:
    template <typename U>
    friend class RfbModule;

    RfbConfig cfg_;
};

}  // namespace fanet
