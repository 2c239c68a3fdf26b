// Acceptance suite: one line per criterion on stdout, progress on stderr,
// exit code = number of failed criteria. Every tolerance is pinned inline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fanet/gradcheck.hpp"
#include "fanet/ops.hpp"
#include "fanet/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fanet;
namespace ops = fanet::ops;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

Tensor from_grid(const oracle::Grid& g) {
    std::vector<float> v(g.v.begin(), g.v.end());
    return Tensor::from(Shape{g.b, g.c, g.h, g.w}, v);
}

oracle::Grid to_grid(const Tensor& t) {
    const Shape s = t.shape();
    oracle::Grid g(s.b, s.c, s.h, s.w);
    auto d = t.data();
    for (std::size_t i = 0; i < g.size(); ++i) g.v[i] = d[i];
    return g;
}

double max_abs_diff(const Tensor& t, const oracle::Grid& g) {
    double m = 0.0;
    auto d = t.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(d[i]) - g.v[i]));
    }
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) return 1e300;
    double m = 0.0;
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(da[i]) - static_cast<double>(db[i])));
    }
    return m;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) return false;
    return std::memcmp(a.data().data(), b.data().data(),
                       sizeof(float) * static_cast<std::size_t>(a.numel())) == 0;
}

Tensor random_tensor(Shape s, std::uint32_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(s);
    for (auto& v : t.data()) v = static_cast<float>(dist(rng));
    return t;
}

std::string read_file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

fs::path scratch_dir() {
    static const fs::path p = [] {
        fs::path d = fs::temp_directory_path() / "fanet-acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

// The shared benchmark: the default synthetic spec (64x64 canvas, 2-5
// rotated buildings of size 10-30, occluders, noise) at seed 42, 64 train +
// 8 held-out images. Generated once; training runs below all point here.
std::string bench_manifest() {
    static const std::string manifest = [] {
        Config cfg;
        cfg.set("synth.seed", "42");
        return generate_synthetic(SynthSpec::from_config(cfg), (scratch_dir() / "bench").string());
    }();
    return manifest;
}

// --- criterion 1: autodiff vs central finite differences -------------------

Outcome criterion1() {
    const double t0 = now_seconds();
    int leaves = 0;
    double worst = 0.0;
    std::string worst_leaf;
    for (std::uint64_t seed : {0, 1, 2}) {
        GradcheckReport r = run_gradcheck("all", seed, 1e-3, 1e-3);
        leaves += static_cast<int>(r.rows.size());
        for (const auto& row : r.rows) {
            if (row.max_rel > worst) {
                worst = row.max_rel;
                worst_leaf = row.module + "/" + row.leaf + fmt(" (seed %llu)",
                                                              (unsigned long long)seed);
            }
        }
        if (!r.pass) {
            return {false, fmt("seed %llu exceeded rel 1e-3, worst %s at %.3e",
                               (unsigned long long)seed, worst_leaf.c_str(), worst)};
        }
    }
    const double dt = now_seconds() - t0;
    if (dt >= 300.0) return {false, fmt("took %.1fs, budget 300s", dt)};
    return {true, fmt("%d leaves over 3 seeds within rel 1e-3, worst %.2e (%s), %.1fs",
                      leaves, worst, worst_leaf.c_str(), dt)};
}

// --- criterion 2: attention is an identity at initialization ---------------

Outcome criterion2() {
    for (std::uint32_t trial = 0; trial < 10; ++trial) {
        DamModule<float> dam(6, 100 + trial, "dam");
        Tensor a = random_tensor(Shape{2, 6, 4, 5}, 200 + trial);
        auto [e, smap] = dam.position_attention(nullptr, a);
        auto [m, cmap] = dam.channel_attention(nullptr, a);
        if (!bit_equal(e, a)) return {false, fmt("position branch not bit-exact, trial %u", trial)};
        if (!bit_equal(m, a)) return {false, fmt("channel branch not bit-exact, trial %u", trial)};
    }

    ModelConfig on, off;
    off.enable_dam = false;
    FanetModel<float> with_dam(on, 7);
    FanetModel<float> without_dam(off, 7);
    double worst = 0.0;
    for (std::uint32_t trial = 0; trial < 3; ++trial) {
        Tensor x = random_tensor(Shape{1, 3, 64, 64}, 300 + trial, 0.0, 1.0);
        worst = std::max(worst, max_abs_diff(with_dam.forward(nullptr, x).logits,
                                             without_dam.forward(nullptr, x).logits));
    }
    if (worst >= 1e-6) return {false, fmt("toggling attention moved output by %.2e >= 1e-6", worst)};
    return {true, fmt("both branches bit-exact on 10 inputs; toggle delta %.1e < 1e-6", worst)};
}

// --- criterion 3: module forwards vs independent nested-loop oracles -------

std::vector<double> bias_of(const Conv2dLayer<float>& layer) {
    auto b = layer.bias().data();
    return std::vector<double>(b.begin(), b.end());
}

oracle::Grid relu_grid(oracle::Grid g) {
    for (auto& v : g.v) v = std::max(v, 0.0);
    return g;
}

oracle::Grid concat_grids(const std::vector<oracle::Grid>& parts) {
    int c = 0;
    for (const auto& p : parts) c += p.c;
    oracle::Grid out(parts[0].b, c, parts[0].h, parts[0].w);
    for (int b = 0; b < out.b; ++b) {
        int co = 0;
        for (const auto& p : parts)
            for (int ci = 0; ci < p.c; ++ci, ++co)
                for (int y = 0; y < p.h; ++y)
                    for (int x = 0; x < p.w; ++x) out.at(b, co, y, x) = p.at(b, ci, y, x);
    }
    return out;
}

// Channel gate from pooled statistics, then spatial gate from channel
// statistics through the 7x7 conv, each passed through a sigmoid.
oracle::Grid fam_oracle(const oracle::Grid& x, const oracle::Grid& conv_w, double conv_b) {
    oracle::Grid fc(x.b, x.c, x.h, x.w);
    for (int b = 0; b < x.b; ++b)
        for (int c = 0; c < x.c; ++c) {
            double avg = 0.0, mx = x.at(b, c, 0, 0);
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    avg += x.at(b, c, y, xx);
                    mx = std::max(mx, x.at(b, c, y, xx));
                }
            avg /= static_cast<double>(x.h) * x.w;
            const double gate = oracle::sigmoid(avg + mx);
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) fc.at(b, c, y, xx) = gate * x.at(b, c, y, xx);
        }
    oracle::Grid stats(x.b, 2, x.h, x.w);
    for (int b = 0; b < x.b; ++b)
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx) {
                double mean = 0.0, mx = fc.at(b, 0, y, xx);
                for (int c = 0; c < x.c; ++c) {
                    mean += fc.at(b, c, y, xx);
                    mx = std::max(mx, fc.at(b, c, y, xx));
                }
                stats.at(b, 0, y, xx) = mean / x.c;
                stats.at(b, 1, y, xx) = mx;
            }
    oracle::Grid gate_logits = oracle::conv2d(stats, conv_w, {conv_b}, 1, 3, 1);
    oracle::Grid out(x.b, x.c, x.h, x.w);
    for (int b = 0; b < x.b; ++b)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx)
                    out.at(b, c, y, xx) =
                        fc.at(b, c, y, xx) * oracle::sigmoid(gate_logits.at(b, 0, y, xx));
    return out;
}

// Dense position attention: logits[j][i] = B_i . C_j over reduced channels,
// row softmax, e_j = gamma * sum_i S[j][i] D_i + a_j.
oracle::Grid dam_position_oracle(const oracle::Grid& a, const oracle::Grid& wb,
                                 const oracle::Grid& wc, const std::vector<double>& bc,
                                 const oracle::Grid& wd, const std::vector<double>& bd,
                                 double gamma) {
    const int n = a.h * a.w;
    oracle::Grid bmap = oracle::conv2d(a, wb, {}, 1, 0, 1);
    oracle::Grid cmap = oracle::conv2d(a, wc, bc, 1, 0, 1);
    oracle::Grid dmap = oracle::conv2d(a, wd, bd, 1, 0, 1);
    oracle::Grid out(a.b, a.c, a.h, a.w);
    const int red = wb.b;
    for (int batch = 0; batch < a.b; ++batch) {
        std::vector<std::vector<double>> s(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(n)));
        for (int j = 0; j < n; ++j) {
            double mx = -1e300;
            for (int i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int r = 0; r < red; ++r) {
                    dot += bmap.v[((static_cast<std::size_t>(batch) * red + r) * n) + i] *
                           cmap.v[((static_cast<std::size_t>(batch) * red + r) * n) + j];
                }
                s[(std::size_t)j][(std::size_t)i] = dot;
                mx = std::max(mx, dot);
            }
            double z = 0.0;
            for (int i = 0; i < n; ++i) z += std::exp(s[(std::size_t)j][(std::size_t)i] - mx);
            for (int i = 0; i < n; ++i)
                s[(std::size_t)j][(std::size_t)i] =
                    std::exp(s[(std::size_t)j][(std::size_t)i] - mx) / z;
        }
        for (int c = 0; c < a.c; ++c)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < n; ++i)
                    acc += s[(std::size_t)j][(std::size_t)i] *
                           dmap.v[((static_cast<std::size_t>(batch) * a.c + c) * n) + i];
                out.v[((static_cast<std::size_t>(batch) * a.c + c) * n) + j] =
                    gamma * acc + a.v[((static_cast<std::size_t>(batch) * a.c + c) * n) + j];
            }
    }
    return out;
}

// Dense channel attention: logits[j][i] = A_i . A_j over spatial vectors.
oracle::Grid dam_channel_oracle(const oracle::Grid& a, double beta) {
    const int n = a.h * a.w;
    oracle::Grid out(a.b, a.c, a.h, a.w);
    for (int batch = 0; batch < a.b; ++batch) {
        std::vector<std::vector<double>> x(static_cast<std::size_t>(a.c),
                                           std::vector<double>(static_cast<std::size_t>(a.c)));
        for (int j = 0; j < a.c; ++j) {
            double mx = -1e300;
            for (int i = 0; i < a.c; ++i) {
                double dot = 0.0;
                for (int p = 0; p < n; ++p)
                    dot += a.v[((static_cast<std::size_t>(batch) * a.c + i) * n) + p] *
                           a.v[((static_cast<std::size_t>(batch) * a.c + j) * n) + p];
                x[(std::size_t)j][(std::size_t)i] = dot;
                mx = std::max(mx, dot);
            }
            double z = 0.0;
            for (int i = 0; i < a.c; ++i) z += std::exp(x[(std::size_t)j][(std::size_t)i] - mx);
            for (int i = 0; i < a.c; ++i)
                x[(std::size_t)j][(std::size_t)i] =
                    std::exp(x[(std::size_t)j][(std::size_t)i] - mx) / z;
        }
        for (int j = 0; j < a.c; ++j)
            for (int p = 0; p < n; ++p) {
                double acc = 0.0;
                for (int i = 0; i < a.c; ++i)
                    acc += x[(std::size_t)j][(std::size_t)i] *
                           a.v[((static_cast<std::size_t>(batch) * a.c + i) * n) + p];
                out.v[((static_cast<std::size_t>(batch) * a.c + j) * n) + p] =
                    beta * acc + a.v[((static_cast<std::size_t>(batch) * a.c + j) * n) + p];
            }
    }
    return out;
}

oracle::Grid rfb_oracle(const RfbModule<float>& rfb, const oracle::Grid& x) {
    const std::array<int, 4> dil{1, 3, 5, 7};
    std::vector<oracle::Grid> branches;
    for (int b = 0; b < 4; ++b) {
        oracle::Grid h = relu_grid(oracle::conv2d(x, to_grid(rfb.reduce[(std::size_t)b].weight()),
                                                  bias_of(rfb.reduce[(std::size_t)b]), 1, 0, 1));
        if (b > 0) {
            h = relu_grid(oracle::conv2d(h, to_grid(rfb.mid[(std::size_t)(b - 1)].weight()),
                                         bias_of(rfb.mid[(std::size_t)(b - 1)]), 1, 1, 1));
        }
        branches.push_back(oracle::conv2d(h, to_grid(rfb.dilated[(std::size_t)b].weight()),
                                          bias_of(rfb.dilated[(std::size_t)b]), 1, dil[(std::size_t)b],
                                          dil[(std::size_t)b]));
    }
    oracle::Grid merged = oracle::conv2d(concat_grids(branches), to_grid(rfb.merge.weight()),
                                         bias_of(rfb.merge), 1, 0, 1);
    oracle::Grid shortcut =
        oracle::conv2d(x, to_grid(rfb.branch1.weight()), bias_of(rfb.branch1), 1, 0, 1);
    for (std::size_t i = 0; i < merged.size(); ++i)
        merged.v[i] = std::max(merged.v[i] + shortcut.v[i], 0.0);
    return merged;
}

Outcome criterion3() {
    const double tol = 1e-5;
    double worst_fam = 0.0, worst_dam = 0.0, worst_dem = 0.0, worst_rfb = 0.0;

    for (std::uint32_t trial = 0; trial < 25; ++trial) {
        std::mt19937 rng(9000 + trial);
        auto pick = [&rng](int lo, int hi) {
            return std::uniform_int_distribution<int>(lo, hi)(rng);
        };
        const int b = pick(1, 2);

        {  // gated aggregation
            FamModule<float> fam(40 + trial, "fam1");
            oracle::Grid x = oracle::random_grid(b, pick(3, 6), pick(4, 9), pick(4, 9),
                                                 1000 + trial);
            Tensor got = fam.forward(nullptr, from_grid(x));
            oracle::Grid want =
                fam_oracle(x, to_grid(fam.spatial_conv.weight()), fam.spatial_conv.bias().data()[0]);
            worst_fam = std::max(worst_fam, max_abs_diff(got, want));
        }
        {  // dual attention, gates opened so both terms are live
            const int c = pick(4, 8);
            DamModule<float> dam(c, 50 + trial, "dam");
            std::uniform_real_distribution<double> gate(0.3, 1.0);
            const double gamma = gate(rng), beta = gate(rng);
            dam.gamma.data()[0] = static_cast<float>(gamma);
            dam.beta.data()[0] = static_cast<float>(beta);
            oracle::Grid a = oracle::random_grid(b, c, pick(2, 4), pick(2, 4), 2000 + trial);
            auto [e, smap] = dam.position_attention(nullptr, from_grid(a));
            auto [m, cmap] = dam.channel_attention(nullptr, from_grid(a));
            worst_dam = std::max(
                {worst_dam,
                 max_abs_diff(e, dam_position_oracle(
                                     a, to_grid(dam.b_proj.weight()), to_grid(dam.c_proj.weight()),
                                     bias_of(dam.c_proj), to_grid(dam.d_proj.weight()),
                                     bias_of(dam.d_proj), gamma)),
                 max_abs_diff(m, dam_channel_oracle(a, beta))});
        }
        {  // coarse-to-fine cascade
            const int w = pick(3, 5), base = 2 * pick(2, 4);
            DemModule<float> dem(w, 60 + trial, "dem");
            oracle::Grid f1 = oracle::random_grid(b, w, 2 * base, 2 * base, 3000 + trial);
            oracle::Grid f2 = oracle::random_grid(b, w, base, base, 3100 + trial);
            oracle::Grid f3 = oracle::random_grid(b, w, base / 2, base / 2, 3200 + trial);
            oracle::Grid g2 = oracle::conv2d(oracle::bilinear(f3, base, base),
                                             to_grid(dem.up32.weight()), bias_of(dem.up32), 1, 1, 1);
            oracle::Grid d2(b, w, base, base);
            for (std::size_t i = 0; i < d2.size(); ++i) d2.v[i] = f2.v[i] * g2.v[i];
            oracle::Grid g1 =
                oracle::conv2d(oracle::bilinear(d2, 2 * base, 2 * base), to_grid(dem.up21.weight()),
                               bias_of(dem.up21), 1, 1, 1);
            oracle::Grid d1(b, w, 2 * base, 2 * base);
            for (std::size_t i = 0; i < d1.size(); ++i) d1.v[i] = f1.v[i] * g1.v[i];
            auto fused = dem.fuse(nullptr, from_grid(f1), from_grid(f2), from_grid(f3));
            worst_dem = std::max({worst_dem, max_abs_diff(fused.d1, d1), max_abs_diff(fused.d2, d2),
                                  max_abs_diff(fused.d3, f3)});
        }
        {  // multi-branch dilated block
            const int c = 4 * pick(1, 2);
            RfbModule<float> rfb(RfbConfig::for_channels(c), 70 + trial, "rfb1");
            oracle::Grid x = oracle::random_grid(b, c, pick(7, 10), pick(7, 10), 4000 + trial);
            worst_rfb = std::max(worst_rfb, max_abs_diff(rfb.forward(nullptr, from_grid(x)),
                                                         rfb_oracle(rfb, x)));
        }
    }

    const double worst = std::max({worst_fam, worst_dam, worst_dem, worst_rfb});
    const std::string detail =
        fmt("max |diff| over 25 inputs each: gates %.1e, attention %.1e, cascade %.1e, "
            "dilated block %.1e (tol 1e-5)",
            worst_fam, worst_dam, worst_dem, worst_rfb);
    return {worst < tol, detail};
}

// --- criterion 4: pyramid shape contract ------------------------------------

Outcome criterion4() {
    for (int size : {32, 64, 96}) {
        EncoderConfig cfg;
        PyramidEncoder<float> enc(cfg, 5, "encoder");
        PyramidFeatures f = enc.forward(nullptr, random_tensor(Shape{1, 3, size, size}, 77, 0, 1));
        for (int i = 1; i <= 4; ++i) {
            const Shape got = f.level(i).shape();
            const int want = size >> (i + 1);
            const Shape expect{1, cfg.channels[(std::size_t)(i - 1)], want, want};
            if (!(got == expect)) {
                return {false, fmt("size %d level %d produced %s, expected %s", size, i,
                                   got.str().c_str(), expect.str().c_str())};
            }
        }
    }
    EncoderConfig wide;
    wide.channels = {64, 128, 320, 512};
    wide.validate();
    PyramidEncoder<float> enc(wide, 5, "encoder");
    PyramidFeatures f = enc.forward(nullptr, random_tensor(Shape{1, 3, 64, 64}, 78, 0, 1));
    for (int i = 1; i <= 4; ++i) {
        const Shape got = f.level(i).shape();
        const Shape expect{1, wide.channels[(std::size_t)(i - 1)], 64 >> (i + 1), 64 >> (i + 1)};
        if (!(got == expect)) {
            return {false, fmt("wide channels level %d produced %s, expected %s", i,
                               got.str().c_str(), expect.str().c_str())};
        }
    }
    return {true, "halving pyramid exact at 32/64/96; 64-128-320-512 accepted and verified at 64"};
}

// --- criterion 5: metric identities -----------------------------------------

Outcome criterion5() {
    {
        ConfusionCounts c;
        std::vector<float> p{1, 0, 1, 0}, t{1, 1, 0, 0};
        accumulate(Tensor::from(Shape{1, 1, 1, 4}, p), Tensor::from(Shape{1, 1, 1, 4}, t), c);
        MetricsReport r = report(c);
        if (c.tp != 1 || c.fp != 1 || c.fn != 1 || c.tn != 1)
            return {false, "hand-counted confusion quartet mismatch"};
        if (r.precision != 0.5 || r.recall != 0.5 || r.f1 != 0.5 || r.iou != 1.0 / 3.0)
            return {false, "hand-counted metrics mismatch on the 1/1/1/1 table"};
    }
    {
        ConfusionCounts c{8, 0, 0, 0};
        MetricsReport r = report(c);
        if (r.precision != 1.0 || r.recall != 1.0 || r.f1 != 1.0 || r.iou != 1.0)
            return {false, "perfect-prediction metrics not exactly 1"};
    }

    std::mt19937_64 rng(515151);
    std::uniform_int_distribution<std::uint64_t> dist(0, 1000000);
    int checked = 0;
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        ConfusionCounts c{dist(rng), dist(rng), dist(rng), dist(rng)};
        MetricsReport r = report(c);
        if (r.degenerate) continue;
        const double want = r.f1 / (2.0 - r.f1);
        worst = std::max(worst, std::abs(r.iou - want) / std::max(want, 1e-12));
        ++checked;
    }
    if (checked < 9000 || worst > 1e-12)
        return {false, fmt("iou = f1/(2-f1) identity off by %.2e over %d counts", worst, checked)};

    for (const char* s : {"73.35", "84.63", "86.45", "82.87"}) {
        if (format_percent(parse_percent(s)) != s)
            return {false, fmt("formatter failed to round-trip %s", s)};
    }
    return {true, fmt("hand counts exact; iou identity within 1e-12 on %d random tables; "
                      "73.35/84.63/86.45/82.87 round-trip",
                      checked)};
}

// --- criteria 6 and 7: learning on the synthetic benchmark ------------------

FanetModel<float> model_from_checkpoint(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    TrainConfig tc = TrainConfig::from_config(ck.config);
    FanetModel<float> model(model_config_from(ck.config), tc.seed);
    Adam<float> opt(model.params());
    std::mt19937 rng;
    restore(ck, model, opt, rng);
    return model;
}

Config bench_train_config(std::uint64_t seed, int epochs) {
    Config cfg;
    cfg.set("train.seed", std::to_string(seed));
    cfg.set("train.epochs", std::to_string(epochs));
    cfg.set("train.decay_factor", "1.0");
    cfg.set("train.batch", "4");
    return cfg;
}

Outcome criterion6() {
    const double t0 = now_seconds();
    const std::string manifest = bench_manifest();
    std::ostringstream log;
    std::fprintf(stderr, "  [6] training the full network, 300 epochs at lr 1e-4...\n");
    TrainResult r = train_model(bench_train_config(42, 300), load_manifest(manifest),
                                (scratch_dir() / "bench_full").string(), log);
    FanetModel<float> model = model_from_checkpoint(r.last_checkpoint);
    const auto entries = load_manifest(manifest);
    MetricsReport train_rep = evaluate_model(model, load_split(entries, "train", 64), 0.5);
    MetricsReport test_rep = evaluate_model(model, load_split(entries, "test", 64), 0.5);
    const double dt = now_seconds() - t0;
    const std::string detail =
        fmt("train IoU %.4f (>= 0.90), held-out IoU %.4f (>= 0.80), seed 42, %d epochs, %.0fs",
            train_rep.iou, test_rep.iou, r.epochs_run, dt);
    const bool pass = train_rep.iou >= 0.90 && test_rep.iou >= 0.80 && dt <= 1800.0;
    return {pass, detail};
}

Outcome criterion7() {
    const std::string manifest = bench_manifest();
    const auto entries = load_manifest(manifest);
    const std::vector<std::uint64_t> seeds{42, 7, 1337};
    // Rungs: plain encoder-decoder, +gated aggregation, +dilated blocks, full.
    const std::vector<std::vector<std::pair<std::string, std::string>>> rungs{
        {{"model.enable_fam", "false"},
         {"model.enable_rfb", "false"},
         {"model.enable_dem", "false"},
         {"model.enable_dam", "false"}},
        {{"model.enable_fam", "true"},
         {"model.enable_rfb", "false"},
         {"model.enable_dem", "false"},
         {"model.enable_dam", "false"}},
        {{"model.enable_fam", "true"},
         {"model.enable_rfb", "true"},
         {"model.enable_dem", "false"},
         {"model.enable_dam", "false"}},
        {}};
    const char* names[] = {"baseline", "+fam", "+fam+rfb", "full"};

    std::vector<double> medians;
    for (std::size_t rung = 0; rung < rungs.size(); ++rung) {
        std::vector<double> ious;
        for (std::uint64_t seed : seeds) {
            Config cfg = bench_train_config(seed, 100);
            for (const auto& [k, v] : rungs[rung]) cfg.set(k, v);
            std::ostringstream log;
            std::fprintf(stderr, "  [7] %s seed %llu (100 epochs)...\n", names[rung],
                         (unsigned long long)seed);
            const std::string out =
                (scratch_dir() / fmt("ladder_%zu_%llu", rung, (unsigned long long)seed)).string();
            TrainResult r = train_model(cfg, entries, out, log);
            ious.push_back(r.best_val_iou);
        }
        std::sort(ious.begin(), ious.end());
        medians.push_back(ious[1]);
    }

    double worst_step = 0.0;
    for (std::size_t i = 1; i < medians.size(); ++i)
        worst_step = std::min(worst_step, medians[i] - medians[i - 1]);
    const bool pass = worst_step >= -0.01;
    return {pass, fmt("median held-out IoU over seeds 42/7/1337: baseline %.4f, +fam %.4f, "
                      "+fam+rfb %.4f, full %.4f; worst step %+.4f (band 0.01)",
                      medians[0], medians[1], medians[2], medians[3], worst_step)};
}

// --- criterion 8: determinism and bit-exact resume ---------------------------

Outcome criterion8() {
    Config synth;
    synth.set("synth.canvas", "32");
    synth.set("synth.train_images", "6");
    synth.set("synth.test_images", "2");
    synth.set("synth.size_min", "8");
    synth.set("synth.size_max", "16");
    synth.set("synth.seed", "11");
    const std::string manifest =
        generate_synthetic(SynthSpec::from_config(synth), (scratch_dir() / "tiny").string());
    const auto entries = load_manifest(manifest);

    auto tiny_cfg = [](int epochs) {
        Config cfg;
        cfg.set("model.channels", "4, 6, 8, 12");
        cfg.set("model.decoder_width", "4");
        cfg.set("train.tile", "32");
        cfg.set("train.batch", "3");
        cfg.set("train.seed", "2");
        cfg.set("train.epochs", std::to_string(epochs));
        return cfg;
    };
    auto run = [&](const Config& cfg, const char* dir, const std::string& resume = "") {
        std::ostringstream log;
        TrainResult r = train_model(cfg, entries, (scratch_dir() / dir).string(), log, resume);
        return std::make_pair(r, log.str());
    };

    auto [ra1, la1] = run(tiny_cfg(4), "det_a1");
    auto [ra2, la2] = run(tiny_cfg(4), "det_a2");
    if (la1 != la2) return {false, "identical seeds produced different logs"};
    if (read_file_bytes(ra1.last_checkpoint) != read_file_bytes(ra2.last_checkpoint))
        return {false, "identical seeds produced different checkpoints"};

    auto [rb, lb] = run(tiny_cfg(2), "det_b");
    Checkpoint mid = load_checkpoint(rb.last_checkpoint);
    mid.config.set("train.epochs", "4");
    const std::string mid_path = (scratch_dir() / "det_b" / "mid.fckp").string();
    save_checkpoint(mid_path, mid);
    auto [rc, lc] = run(Config(), "det_c", mid_path);

    const auto full_lines = lines_of(la1);
    const auto resumed_lines = lines_of(lc);
    if (resumed_lines.size() != 2 || full_lines.size() < 4)
        return {false, fmt("unexpected log shapes: %zu resumed lines, %zu full lines",
                           resumed_lines.size(), full_lines.size())};
    if (resumed_lines[0] != full_lines[2] || resumed_lines[1] != full_lines[3])
        return {false, "resumed loss trajectory diverged from the uninterrupted run"};
    if (read_file_bytes(rc.last_checkpoint) != read_file_bytes(ra1.last_checkpoint))
        return {false, "resumed final checkpoint differs from the uninterrupted run"};
    return {true, "re-runs byte-identical (logs and checkpoints); mid-run resume reproduced the "
                  "loss trajectory and final checkpoint bit-exactly"};
}

// --- criterion 9: loss gradient closed form ----------------------------------

Outcome criterion9() {
    std::mt19937 rng(321);
    std::uniform_real_distribution<double> logit_dist(-4.0, 4.0);
    std::bernoulli_distribution coin(0.4);

    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const Shape s{2, 1, 6, 7};
        DTensor logits(s);
        DTensor target(s);
        for (auto& v : logits.data()) v = logit_dist(rng);
        for (auto& v : target.data()) v = coin(rng) ? 1.0 : 0.0;
        logits.set_requires_grad(true);
        logits.zero_grad();
        GradTape<double> tape;
        DTensor loss = ops::bce_with_logits(&tape, logits, target);
        tape.backward(loss);
        const double n = static_cast<double>(logits.numel());
        for (std::int64_t i = 0; i < logits.numel(); ++i) {
            const double p = 1.0 / (1.0 + std::exp(-logits.data()[i]));
            const double closed = (p - target.data()[i]) / n;
            worst = std::max(worst, std::abs(logits.grad()[i] - closed));
        }
    }
    if (worst > 1e-6) return {false, fmt("gradient off closed form by %.2e > 1e-6", worst)};

    DTensor zero = DTensor::zeros(Shape{1, 1, 8, 8});
    DTensor target = DTensor::zeros(Shape{1, 1, 8, 8});
    for (std::int64_t i = 0; i < target.numel(); ++i) target.data()[i] = (i % 3 == 0) ? 1.0 : 0.0;
    DTensor loss = ops::bce_with_logits(static_cast<GradTape<double>*>(nullptr), zero, target);
    const double ln2_err = std::abs(loss.data()[0] - std::log(2.0));
    if (ln2_err > 1e-6) return {false, fmt("uniform-0.5 loss off ln 2 by %.2e", ln2_err)};
    return {true, fmt("grad matches (p-t)/count within %.1e (tol 1e-6); loss at p=0.5 within "
                      "%.1e of ln 2",
                      worst, ln2_err)};
}

}  // namespace

int main(int argc, char** argv) {
    struct Entry {
        int id;
        Outcome (*fn)();
    };
    const Entry entries[] = {{1, criterion1}, {2, criterion2}, {3, criterion3},
                             {4, criterion4}, {5, criterion5}, {6, criterion6},
                             {7, criterion7}, {8, criterion8}, {9, criterion9}};
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    int failures = 0;
    for (const Entry& e : entries) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), e.id) == wanted.end())
            continue;
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        std::printf("CRITERION %d: %s — %s\n", e.id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures;
}
