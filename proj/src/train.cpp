#include "fanet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>

#include "fanet/ops.hpp"
#include "fanet/png_io.hpp"
#include "fanet/tensor_io.hpp"

namespace fanet {

TrainConfig TrainConfig::from_config(const Config& cfg) {
    TrainConfig tc;
    tc.lr = cfg.get_double("train.lr", tc.lr);
    tc.epochs = cfg.get_int("train.epochs", tc.epochs);
    tc.decay_factor = cfg.get_double("train.decay_factor", tc.decay_factor);
    tc.decay_every = cfg.get_int("train.decay_every", tc.decay_every);
    tc.batch = cfg.get_int("train.batch", tc.batch);
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 0));
    tc.tile = cfg.get_int("train.tile", tc.tile);
    tc.threshold = cfg.get_double("train.threshold", tc.threshold);
    tc.early_stop_val_iou = cfg.get_double("train.early_stop_val_iou", tc.early_stop_val_iou);
    return tc;
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("train.lr must be > 0");
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (decay_factor <= 0.0) throw ConfigError("train.decay_factor must be > 0");
    if (decay_every < 1) throw ConfigError("train.decay_every must be >= 1");
    if (batch < 1) throw ConfigError("train.batch must be >= 1");
    if (tile < 1) throw ConfigError("train.tile must be >= 1");
    if (threshold <= 0.0 || threshold >= 1.0) throw ConfigError("train.threshold must be in (0,1)");
    if (early_stop_val_iou < 0.0 || early_stop_val_iou > 1.0) {
        throw ConfigError("train.early_stop_val_iou must be in [0,1]");
    }
}

ModelConfig model_config_from(const Config& cfg) {
    ModelConfig mc;
    std::vector<int> ch = cfg.get_int_list("model.channels", {16, 32, 48, 64});
    if (ch.size() != 4) throw ConfigError("model.channels must list exactly 4 values");
    for (int i = 0; i < 4; ++i) mc.encoder.channels[static_cast<std::size_t>(i)] = ch[static_cast<std::size_t>(i)];
    mc.encoder.attention_level = cfg.get_int("model.attention_level", mc.encoder.attention_level);
    mc.encoder.sr_ratio = cfg.get_int("model.sr_ratio", mc.encoder.sr_ratio);
    mc.encoder.num_heads = cfg.get_int("model.heads", mc.encoder.num_heads);
    mc.decoder_width = cfg.get_int("model.decoder_width", mc.decoder_width);
    mc.enable_fam = cfg.get_bool("model.enable_fam", mc.enable_fam);
    mc.enable_dem = cfg.get_bool("model.enable_dem", mc.enable_dem);
    mc.enable_rfb = cfg.get_bool("model.enable_rfb", mc.enable_rfb);
    mc.enable_dam = cfg.get_bool("model.enable_dam", mc.enable_dam);
    mc.dam_cap = cfg.get_int("model.dam_cap", mc.dam_cap);
    mc.validate();
    return mc;
}

std::vector<Sample> load_split(const std::vector<ManifestEntry>& entries, const std::string& split,
                               int tile_size) {
    std::vector<Sample> out;
    for (const ManifestEntry& e : entries) {
        if (e.split != split) continue;
        Tensor image = read_image_png(e.image);
        Tensor mask = read_mask_png(e.mask);
        std::vector<Sample> tiles = tile(image, mask, tile_size);
        out.insert(out.end(), tiles.begin(), tiles.end());
    }
    return out;
}

MetricsReport evaluate_model(FanetModel<float>& model, const std::vector<Sample>& samples,
                             double threshold) {
    ConfusionCounts counts;
    const int group = 8;
    std::vector<int> idx(static_cast<std::size_t>(group));
    for (std::size_t pos = 0; pos < samples.size(); pos += static_cast<std::size_t>(group)) {
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(group), samples.size() - pos);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), static_cast<int>(pos));
        auto [images, masks] = stack_samples(samples, idx);
        SegMap out = model.forward(nullptr, images);
        accumulate(binarize(out.probabilities, threshold), masks, counts);
    }
    return report(counts);
}

namespace {

Tensor pad_reflect_to(const Tensor& x, int target_h, int target_w) {
    const Shape s = x.shape();
    if (s.h == target_h && s.w == target_w) return x;
    Tensor out(Shape{s.b, s.c, target_h, target_w});
    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * n - 2 - i;
        }
        return i;
    };
    const float* src = x.data().data();
    float* dst = out.data().data();
    for (int b = 0; b < s.b; ++b) {
        for (int c = 0; c < s.c; ++c) {
            const float* plane = src + (static_cast<std::size_t>(b) * s.c + c) * s.h * s.w;
            for (int i = 0; i < target_h; ++i) {
                const int si = reflect(i, s.h);
                for (int j = 0; j < target_w; ++j) {
                    *dst++ = plane[static_cast<std::size_t>(si) * s.w + reflect(j, s.w)];
                }
            }
        }
    }
    return out;
}

int round_up(int v, int multiple) { return ((v + multiple - 1) / multiple) * multiple; }

Tensor crop_to(const Tensor& x, int h, int w) {
    const Shape s = x.shape();
    if (s.h == h && s.w == w) return x;
    Tensor out(Shape{s.b, s.c, h, w});
    const float* src = x.data().data();
    float* dst = out.data().data();
    for (int b = 0; b < s.b; ++b) {
        for (int c = 0; c < s.c; ++c) {
            const float* plane = src + (static_cast<std::size_t>(b) * s.c + c) * s.h * s.w;
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < w; ++j) *dst++ = plane[static_cast<std::size_t>(i) * s.w + j];
            }
        }
    }
    return out;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

}  // namespace

SegMap predict_padded(FanetModel<float>& model, const Tensor& image) {
    const Shape s = image.shape();
    if (s.c != 3) throw ValidationError("predict expects a (B,3,H,W) image");
    const int ph = round_up(s.h, 32);
    const int pw = round_up(s.w, 32);
    Tensor padded = pad_reflect_to(image, ph, pw);
    SegMap full = model.forward(nullptr, padded);
    SegMap out;
    out.logits = crop_to(full.logits, s.h, s.w);
    out.probabilities = crop_to(full.probabilities, s.h, s.w);
    return out;
}

TrainResult train_model(Config cfg, const std::vector<ManifestEntry>& manifest,
                        const std::string& out_dir, std::ostream& log,
                        const std::string& resume_path) {
    std::filesystem::create_directories(out_dir);

    int start_epoch = 0;
    Checkpoint resume_ck;
    if (!resume_path.empty()) {
        resume_ck = load_checkpoint(resume_path);
        cfg = resume_ck.config;  // the stored run is authoritative for a resume
        start_epoch = resume_ck.epoch;
    }

    TrainConfig tc = TrainConfig::from_config(cfg);
    tc.validate();
    ModelConfig mc = model_config_from(cfg);

    std::vector<Sample> train_samples = load_split(manifest, "train", tc.tile);
    if (train_samples.empty()) throw ValidationError("manifest yields no train samples at this tile size");
    std::vector<Sample> val_samples = load_split(manifest, "val", tc.tile);
    if (val_samples.empty()) val_samples = load_split(manifest, "test", tc.tile);

    FanetModel<float> model(mc, tc.seed);
    Adam<float> opt(model.params());
    std::mt19937 order_rng(static_cast<std::uint32_t>(splitmix64(tc.seed)));
    if (!resume_path.empty()) restore(resume_ck, model, opt, order_rng);

    TrainResult result;
    result.last_checkpoint = join_path(out_dir, "last.fckp");
    result.best_checkpoint = join_path(out_dir, "best.fckp");

    const std::size_t n = train_samples.size();
    std::vector<int> order(n);
    bool wrote_last = false;
    for (int epoch = start_epoch + 1; epoch <= tc.epochs; ++epoch) {
        const double lr = scheduled_lr(tc.lr, tc.decay_factor, tc.decay_every, epoch);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), order_rng);

        const std::uint64_t epoch_seed = mix_seed(tc.seed, static_cast<std::uint64_t>(epoch));
        double loss_sum = 0.0;
        int batches = 0;
        std::vector<Sample> batch;
        std::vector<int> idx;
        for (std::size_t pos = 0; pos < n; pos += static_cast<std::size_t>(tc.batch)) {
            const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(tc.batch), n - pos);
            batch.clear();
            for (std::size_t k = 0; k < take; ++k) {
                const int sample_index = order[pos + k];
                batch.push_back(augment(train_samples[static_cast<std::size_t>(sample_index)],
                                        mix_seed(epoch_seed, static_cast<std::uint64_t>(sample_index))));
            }
            idx.resize(take);
            std::iota(idx.begin(), idx.end(), 0);
            auto [images, masks] = stack_samples(batch, idx);

            GradTape<float> tape;
            SegMap out = model.forward(&tape, images);
            Tensor loss = ops::bce_with_logits(&tape, out.logits, masks);
            const float lval = loss.data()[0];
            if (!std::isfinite(lval)) {
                write_ftns(join_path(out_dir, "nan_batch_images.ftns"), images);
                write_ftns(join_path(out_dir, "nan_batch_masks.ftns"), masks);
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   "; offending batch dumped to " + out_dir);
            }
            opt.zero_grad();
            tape.backward(loss);
            opt.step(lr);
            loss_sum += static_cast<double>(lval);
            ++batches;
        }
        const double mean_loss = loss_sum / static_cast<double>(std::max(batches, 1));
        result.final_loss = mean_loss;
        result.epochs_run = epoch;

        char head[160];
        std::snprintf(head, sizeof(head), "epoch %4d  lr %.3e  loss %.6f", epoch, lr, mean_loss);
        log << head;

        MetricsReport val;
        if (!val_samples.empty()) {
            val = evaluate_model(model, val_samples, tc.threshold);
            char tail[96];
            std::snprintf(tail, sizeof(tail), "  val_iou %.4f  val_f1 %.4f", val.iou, val.f1);
            log << tail;
        }
        log << "\n" << std::flush;

        Checkpoint ck = snapshot(cfg, opt, epoch, order_rng);
        save_checkpoint(result.last_checkpoint, ck);
        wrote_last = true;
        if (!val_samples.empty() && val.iou > result.best_val_iou) {
            result.best_val_iou = val.iou;
            save_checkpoint(result.best_checkpoint, ck);
        }
        if (tc.early_stop_val_iou > 0.0 && !val_samples.empty() && val.iou >= tc.early_stop_val_iou) {
            log << "early stop: val_iou reached " << tc.early_stop_val_iou << "\n";
            break;
        }
    }
    if (!wrote_last) {
        // epochs may not exceed what has already run; still leave a checkpoint
        save_checkpoint(result.last_checkpoint, snapshot(cfg, opt, start_epoch, order_rng));
    }
    if (result.best_val_iou < 0.0) {
        // no validation split: the last checkpoint doubles as best
        std::filesystem::copy_file(result.last_checkpoint, result.best_checkpoint,
                                   std::filesystem::copy_options::overwrite_existing);
    }
    return result;
}

}  // namespace fanet
