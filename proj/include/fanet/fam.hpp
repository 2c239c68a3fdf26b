#pragma once

#include <string>
#include <utility>

#include "fanet/nn.hpp"
#include "fanet/ops.hpp"

namespace fanet {

// Feature aggregation: a channel gate driven by pooled statistics, then a
// spatial gate driven by per-pixel channel statistics through a 7x7 conv.
template <typename T>
class FamModule {
public:
    FamModule() = default;

    FamModule(std::uint64_t seed, const std::string& path) {
        auto rng = init_rng(seed, path + ".spatial_conv");
        spatial_conv = Conv2dLayer<T>(2, 1, 7, rng, 1, 3);
    }

    // gate = sigmoid(avgpool + maxpool), broadcast over the spatial plane
    std::pair<BasicTensor<T>, BasicTensor<T>> channel_aggregate(GradTape<T>* tape,
                                                                const BasicTensor<T>& f) const {
        BasicTensor<T> pooled = ops::add(tape, ops::global_avg_pool(tape, f), ops::global_max_pool(tape, f));
        BasicTensor<T> gate = ops::sigmoid(tape, pooled);
        return {ops::mul(tape, f, gate), gate};
    }

    // gate = sigmoid(conv7x7(concat(channel-mean, channel-max))), broadcast
    // over channels
    std::pair<BasicTensor<T>, BasicTensor<T>> spatial_aggregate(GradTape<T>* tape,
                                                                const BasicTensor<T>& f_channel) const {
        BasicTensor<T> stats = ops::concat_channels(
            tape, {ops::channel_mean(tape, f_channel), ops::channel_max(tape, f_channel)});
        BasicTensor<T> gate = ops::sigmoid(tape, spatial_conv.forward(tape, stats));
        return {ops::mul(tape, f_channel, gate), gate};
    }

    BasicTensor<T> forward(GradTape<T>* tape, const BasicTensor<T>& x) const {
        auto [f_channel, cg] = channel_aggregate(tape, x);
        auto [f_spatial, sg] = spatial_aggregate(tape, f_channel);
        return f_spatial;
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        spatial_conv.collect(prefix + ".spatial_conv", out);
    }

    template <typename U>
    FamModule<U> cast() const {
        FamModule<U> other;
        other.spatial_conv = spatial_conv.template cast<U>();
        return other;
    }

    Conv2dLayer<T> spatial_conv;
};

}  // namespace fanet
