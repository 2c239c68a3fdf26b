#pragma once

#include <array>
#include <cmath>
#include <string>

#include "fanet/nn.hpp"
#include "fanet/ops.hpp"

namespace fanet {

struct EncoderConfig {
    std::array<int, 4> channels{16, 32, 48, 64};
    int attention_level = 3;  // 1-based pyramid level carrying the transformer block
    int sr_ratio = 2;
    int num_heads = 2;

    void validate() const {
        for (int i = 1; i < 4; ++i) {
            if (channels[i] <= channels[i - 1]) {
                throw ConfigError("encoder channels must strictly increase, got " +
                                  std::to_string(channels[i - 1]) + " then " + std::to_string(channels[i]));
            }
        }
        if (attention_level < 1 || attention_level > 4) {
            throw ConfigError("encoder attention_level must be in [1,4], got " +
                              std::to_string(attention_level));
        }
        if (sr_ratio < 1) throw ConfigError("encoder sr_ratio must be >= 1");
        if (num_heads < 1) throw ConfigError("encoder num_heads must be >= 1");
        const int attn_ch = channels[static_cast<std::size_t>(attention_level - 1)];
        if (attn_ch % num_heads != 0) {
            throw ConfigError("encoder channels at the attention level (" + std::to_string(attn_ch) +
                              ") must be divisible by num_heads (" + std::to_string(num_heads) + ")");
        }
    }
};

template <typename T>
struct PyramidFeaturesT {
    BasicTensor<T> x1, x2, x3, x4;

    const BasicTensor<T>& level(int i) const {
        switch (i) {
            case 1: return x1;
            case 2: return x2;
            case 3: return x3;
            case 4: return x4;
        }
        throw UsageError("pyramid level out of range: " + std::to_string(i));
    }
};

using PyramidFeatures = PyramidFeaturesT<float>;

// Self-attention with strided key/value reduction. Queries come from full
// resolution; keys and values from an sr-strided map. The key projection
// carries no bias: a per-channel key offset shifts every logit in a softmax
// row equally, so its gradient would be identically zero.
template <typename T>
class SraAttention {
public:
    SraAttention() = default;

    SraAttention(int channels, int sr_ratio, int num_heads, std::uint64_t seed,
                 const std::string& path)
        : channels_(channels), sr_ratio_(sr_ratio), num_heads_(num_heads) {
        auto rq = init_rng(seed, path + ".q_proj");
        auto rk = init_rng(seed, path + ".k_proj");
        auto rv = init_rng(seed, path + ".v_proj");
        auto ro = init_rng(seed, path + ".out_proj");
        q_proj = Conv2dLayer<T>(channels, channels, 1, rq);
        k_proj = Conv2dLayer<T>(channels, channels, 1, rk, 1, 0, 1, /*with_bias=*/false);
        v_proj = Conv2dLayer<T>(channels, channels, 1, rv);
        out_proj = Conv2dLayer<T>(channels, channels, 1, ro);
        if (sr_ratio > 1) {
            auto rs = init_rng(seed, path + ".sr_conv");
            sr_conv = Conv2dLayer<T>(channels, channels, sr_ratio, rs, sr_ratio, 0);
            sr_norm = ChannelLayerNorm<T>(channels);
        }
    }

    // attn_capture, when non-null, receives the softmax map shaped
    // (B, heads, N_query, N_kv).
    BasicTensor<T> forward(GradTape<T>* tape, const BasicTensor<T>& x,
                           BasicTensor<T>* attn_capture = nullptr) const {
        const Shape s = x.shape();
        if (s.c != channels_) {
            throw ShapeError("attention expects " + std::to_string(channels_) + " channels, got " +
                             std::to_string(s.c));
        }
        if (s.h % sr_ratio_ != 0 || s.w % sr_ratio_ != 0) {
            throw ShapeError("attention input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                             " is not divisible by sr_ratio " + std::to_string(sr_ratio_));
        }
        const int dh = channels_ / num_heads_;
        const int n_q = s.h * s.w;

        BasicTensor<T> q = q_proj.forward(tape, x);
        BasicTensor<T> kv_src = x;
        if (sr_ratio_ > 1) {
            kv_src = sr_conv.forward(tape, kv_src);
            kv_src = sr_norm.forward(tape, kv_src);
        }
        const Shape rs = kv_src.shape();
        const int n_kv = rs.h * rs.w;
        BasicTensor<T> k = k_proj.forward(tape, kv_src);
        BasicTensor<T> v = v_proj.forward(tape, kv_src);

        // (B,C,H,W) -> (B, heads, dh, N) is a pure view; queries additionally
        // swap the last two axes.
        BasicTensor<T> qh = ops::transpose_last2(tape, ops::reshape(tape, q, Shape{s.b, num_heads_, dh, n_q}));
        BasicTensor<T> kh = ops::reshape(tape, k, Shape{s.b, num_heads_, dh, n_kv});
        BasicTensor<T> vh = ops::transpose_last2(tape, ops::reshape(tape, v, Shape{s.b, num_heads_, dh, n_kv}));

        BasicTensor<T> logits = ops::scale(tape, ops::batched_matmul(tape, qh, kh),
                                           static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
        BasicTensor<T> attn = ops::softmax_lastdim(tape, logits);
        if (attn_capture) *attn_capture = attn;

        BasicTensor<T> ctx = ops::batched_matmul(tape, attn, vh);          // (B,heads,N_q,dh)
        BasicTensor<T> merged = ops::reshape(tape, ops::transpose_last2(tape, ctx),
                                             Shape{s.b, channels_, s.h, s.w});
        return out_proj.forward(tape, merged);
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        q_proj.collect(prefix + ".q_proj", out);
        k_proj.collect(prefix + ".k_proj", out);
        v_proj.collect(prefix + ".v_proj", out);
        out_proj.collect(prefix + ".out_proj", out);
        if (sr_ratio_ > 1) {
            sr_conv.collect(prefix + ".sr_conv", out);
            sr_norm.collect(prefix + ".sr_norm", out);
        }
    }

    template <typename U>
    SraAttention<U> cast() const {
        SraAttention<U> other;
        other.channels_ = channels_;
        other.sr_ratio_ = sr_ratio_;
        other.num_heads_ = num_heads_;
        other.q_proj = q_proj.template cast<U>();
        other.k_proj = k_proj.template cast<U>();
        other.v_proj = v_proj.template cast<U>();
        other.out_proj = out_proj.template cast<U>();
        if (sr_ratio_ > 1) {
            other.sr_conv = sr_conv.template cast<U>();
            other.sr_norm = sr_norm.template cast<U>();
        }
        return other;
    }

    Conv2dLayer<T> q_proj, k_proj, v_proj, out_proj, sr_conv;
    ChannelLayerNorm<T> sr_norm;

private:
    template <typename U>
    friend class SraAttention;

    int channels_ = 0;
    int sr_ratio_ = 1;
    int num_heads_ = 1;
};

template <typename T>
class TransformerBlock {
public:
    TransformerBlock() = default;

    TransformerBlock(int channels, int sr_ratio, int num_heads, std::uint64_t seed,
                     const std::string& path)
        : ln1(channels),
          ln2(channels),
          attn(channels, sr_ratio, num_heads, seed, path + ".attn") {
        auto r1 = init_rng(seed, path + ".mlp1");
        auto r2 = init_rng(seed, path + ".mlp2");
        const int hidden = channels * 2;
        mlp1 = Conv2dLayer<T>(channels, hidden, 1, r1);
        mlp2 = Conv2dLayer<T>(hidden, channels, 1, r2);
    }

    BasicTensor<T> forward(GradTape<T>* tape, const BasicTensor<T>& x,
                           BasicTensor<T>* attn_capture = nullptr) const {
        BasicTensor<T> a = attn.forward(tape, ln1.forward(tape, x), attn_capture);
        BasicTensor<T> h = ops::add(tape, x, a);
        BasicTensor<T> m = mlp2.forward(tape, ops::relu(tape, mlp1.forward(tape, ln2.forward(tape, h))));
        return ops::add(tape, h, m);
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        ln1.collect(prefix + ".ln1", out);
        attn.collect(prefix + ".attn", out);
        ln2.collect(prefix + ".ln2", out);
        mlp1.collect(prefix + ".mlp1", out);
        mlp2.collect(prefix + ".mlp2", out);
    }

    template <typename U>
    TransformerBlock<U> cast() const {
        TransformerBlock<U> other;
        other.ln1 = ln1.template cast<U>();
        other.ln2 = ln2.template cast<U>();
        other.attn = attn.template cast<U>();
        other.mlp1 = mlp1.template cast<U>();
        other.mlp2 = mlp2.template cast<U>();
        return other;
    }

    ChannelLayerNorm<T> ln1, ln2;
    SraAttention<T> attn;
    Conv2dLayer<T> mlp1, mlp2;
};

// Four-level pyramid: each level halves the spatial size with an overlapping
// strided patch embedding; the configured level additionally runs one
// transformer block. The stem convolutions pad by reflection so a constant
// image stays constant all the way to the attention stage.
template <typename T>
class PyramidEncoder {
public:
    PyramidEncoder() = default;

    PyramidEncoder(EncoderConfig cfg, std::uint64_t seed, const std::string& path = "encoder")
        : cfg_(cfg) {
        cfg_.validate();
        auto rs = init_rng(seed, path + ".stem");
        stem_ = Conv2dLayer<T>(3, cfg_.channels[0], 3, rs, 2, 1, 1, true, PadMode::Reflect);
        int in_ch = cfg_.channels[0];
        for (int i = 0; i < 4; ++i) {
            const std::string lvl = path + ".level" + std::to_string(i + 1);
            auto re = init_rng(seed, lvl + ".embed");
            embed_[i] = Conv2dLayer<T>(in_ch, cfg_.channels[i], 3, re, 2, 1, 1, true, PadMode::Reflect);
            if (i < 3) {
                auto rr = init_rng(seed, lvl + ".refine");
                refine_[i] = Conv2dLayer<T>(cfg_.channels[i], cfg_.channels[i], 3, rr, 1, 1, 1, true,
                                            PadMode::Reflect);
            }
            in_ch = cfg_.channels[i];
        }
        block_ = TransformerBlock<T>(cfg_.channels[static_cast<std::size_t>(cfg_.attention_level - 1)],
                                     cfg_.sr_ratio, cfg_.num_heads, seed,
                                     path + ".level" + std::to_string(cfg_.attention_level) + ".block");
    }

    PyramidFeaturesT<T> forward(GradTape<T>* tape, const BasicTensor<T>& image,
                                BasicTensor<T>* attn_capture = nullptr) const {
        const Shape s = image.shape();
        if (s.c != 3) throw ConfigError("encoder expects 3-channel input, got " + std::to_string(s.c));
        if (s.h % 32 != 0 || s.w % 32 != 0) {
            throw ConfigError("encoder input size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                              " must be divisible by 32");
        }
        PyramidFeaturesT<T> feats;
        // The first level sits at stride 4, so a stride-2 stem precedes the
        // four stride-2 embeddings.
        BasicTensor<T> cur = ops::relu(tape, stem_.forward(tape, image));
        for (int i = 0; i < 4; ++i) {
            cur = ops::relu(tape, embed_[i].forward(tape, cur));
            if (i < 3) cur = ops::relu(tape, refine_[i].forward(tape, cur));
            if (i + 1 == cfg_.attention_level) {
                cur = block_.forward(tape, cur, attn_capture);
            }
            switch (i) {
                case 0: feats.x1 = cur; break;
                case 1: feats.x2 = cur; break;
                case 2: feats.x3 = cur; break;
                case 3: feats.x4 = cur; break;
            }
        }
        return feats;
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        stem_.collect(prefix + ".stem", out);
        for (int i = 0; i < 4; ++i) {
            const std::string lvl = prefix + ".level" + std::to_string(i + 1);
            embed_[i].collect(lvl + ".embed", out);
            if (i < 3) refine_[i].collect(lvl + ".refine", out);
        }
        block_.collect(prefix + ".level" + std::to_string(cfg_.attention_level) + ".block", out);
    }

    template <typename U>
    PyramidEncoder<U> cast() const {
        PyramidEncoder<U> other;
        other.cfg_ = cfg_;
        other.stem_ = stem_.template cast<U>();
        for (int i = 0; i < 4; ++i) {
            other.embed_[i] = embed_[i].template cast<U>();
            if (i < 3) other.refine_[i] = refine_[i].template cast<U>();
        }
        other.block_ = block_.template cast<U>();
        return other;
    }

    const EncoderConfig& config() const { return cfg_; }
    TransformerBlock<T>& block() { return block_; }

private:
    template <typename U>
    friend class PyramidEncoder;

    EncoderConfig cfg_;
    Conv2dLayer<T> stem_;
    std::array<Conv2dLayer<T>, 4> embed_;
    std::array<Conv2dLayer<T>, 3> refine_;
    TransformerBlock<T> block_;
};

}  // namespace fanet
