#pragma once

#include <array>
#include <string>

#include "fanet/dam.hpp"
#include "fanet/decoder.hpp"
#include "fanet/dem_rfb.hpp"
#include "fanet/encoder.hpp"
#include "fanet/fam.hpp"

namespace fanet {

struct ModelConfig {
    EncoderConfig encoder;
    int decoder_width = 16;
    bool enable_fam = true;
    bool enable_dem = true;
    bool enable_rfb = true;
    bool enable_dam = true;
    int dam_cap = 4096;

    void validate() const {
        encoder.validate();
        if (decoder_width < 1) throw ConfigError("decoder_width must be >= 1");
        if (dam_cap < 1) throw ConfigError("dam_cap must be >= 1");
    }
};

// Full network. Disabled modules are identity pass-throughs of matching
// shape; the per-level 1x1 laterals that unify pyramid widths are always
// present, as is the decoder.
template <typename T>
class FanetModel {
public:
    FanetModel() = default;

    FanetModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        encoder = PyramidEncoder<T>(cfg_.encoder, seed, "encoder");
        const int w = cfg_.decoder_width;
        for (int i = 0; i < 3; ++i) {
            const std::string name = "lateral" + std::to_string(i + 1);
            auto rl = init_rng(seed, name);
            lateral[i] = Conv2dLayer<T>(cfg_.encoder.channels[i], w, 1, rl);
            fam[i] = FamModule<T>(seed, "fam" + std::to_string(i + 1));
            rfb[i] = RfbModule<T>(RfbConfig::for_channels(w), seed, "rfb" + std::to_string(i + 1));
        }
        dem = DemModule<T>(w, seed, "dem");
        const int high_ch = cfg_.encoder.channels[3];
        rfb_high = RfbModule<T>(RfbConfig::for_channels(high_ch), seed, "rfb_high");
        dam = DamModule<T>(high_ch, seed, "dam", cfg_.dam_cap);
        decoder = FusionDecoder<T>(high_ch, w, w, seed, "decoder");
    }

    SegMapT<T> forward(GradTape<T>* tape, const BasicTensor<T>& image,
                       BasicTensor<T>* attn_capture = nullptr) const {
        const Shape s = image.shape();
        PyramidFeaturesT<T> feats = encoder.forward(tape, image, attn_capture);

        std::array<BasicTensor<T>, 3> f;
        for (int i = 0; i < 3; ++i) {
            f[static_cast<std::size_t>(i)] = lateral[i].forward(tape, feats.level(i + 1));
            if (cfg_.enable_fam) {
                f[static_cast<std::size_t>(i)] = fam[i].forward(tape, f[static_cast<std::size_t>(i)]);
            }
        }

        BasicTensor<T> d1;
        if (cfg_.enable_dem) {
            // The cascade runs on RFB-enriched maps: each fused level passes
            // through its RFB before gating the next finer one.
            BasicTensor<T> d3 = maybe_rfb(tape, 2, f[2]);
            BasicTensor<T> d2 = ops::mul(
                tape, f[1], dem.up32.forward(tape, ops::bilinear_upsample(tape, d3, f[1].shape().h, f[1].shape().w)));
            d2 = maybe_rfb(tape, 1, d2);
            d1 = ops::mul(
                tape, f[0], dem.up21.forward(tape, ops::bilinear_upsample(tape, d2, f[0].shape().h, f[0].shape().w)));
            d1 = maybe_rfb(tape, 0, d1);
        } else {
            d1 = maybe_rfb(tape, 0, f[0]);
        }

        BasicTensor<T> high = feats.x4;
        if (cfg_.enable_rfb) high = rfb_high.forward(tape, high);
        if (cfg_.enable_dam) high = dam.forward(tape, high);

        return decoder.decode(tape, high, d1, s.h, s.w);
    }

    ParamList<T> params() const {
        ParamList<T> out;
        encoder.collect("encoder", out);
        for (int i = 0; i < 3; ++i) {
            lateral[i].collect("lateral" + std::to_string(i + 1), out);
            if (cfg_.enable_fam) fam[i].collect("fam" + std::to_string(i + 1), out);
            if (cfg_.enable_rfb) rfb[i].collect("rfb" + std::to_string(i + 1), out);
        }
        if (cfg_.enable_dem) dem.collect("dem", out);
        if (cfg_.enable_rfb) rfb_high.collect("rfb_high", out);
        if (cfg_.enable_dam) dam.collect("dam", out);
        decoder.collect("decoder", out);
        return out;
    }

    template <typename U>
    FanetModel<U> cast() const {
        FanetModel<U> other;
        other.cfg_ = cfg_;
        other.encoder = encoder.template cast<U>();
        for (int i = 0; i < 3; ++i) {
            other.lateral[i] = lateral[i].template cast<U>();
            other.fam[i] = fam[i].template cast<U>();
            other.rfb[i] = rfb[i].template cast<U>();
        }
        other.dem = dem.template cast<U>();
        other.rfb_high = rfb_high.template cast<U>();
        other.dam = dam.template cast<U>();
        other.decoder = decoder.template cast<U>();
        return other;
    }

    const ModelConfig& config() const { return cfg_; }

    PyramidEncoder<T> encoder;
    std::array<Conv2dLayer<T>, 3> lateral;
    std::array<FamModule<T>, 3> fam;
    std::array<RfbModule<T>, 3> rfb;
    DemModule<T> dem;
    RfbModule<T> rfb_high;
    DamModule<T> dam;
    FusionDecoder<T> decoder;

private:
    template <typename U>
    friend class FanetModel;

    BasicTensor<T> maybe_rfb(GradTape<T>* tape, int idx, const BasicTensor<T>& x) const {
        return cfg_.enable_rfb ? rfb[idx].forward(tape, x) : x;
    }

    ModelConfig cfg_;
};

}  // namespace fanet
