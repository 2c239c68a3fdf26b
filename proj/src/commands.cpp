#include "fanet/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fanet/gradcheck.hpp"
#include "fanet/png_io.hpp"
#include "fanet/tensor_io.hpp"
#include "fanet/train.hpp"

namespace fanet {
namespace {

Config load_config(const CliOptions& opt) {
    Config cfg = opt.config_path.empty() ? Config() : Config::from_file(opt.config_path);
    if (opt.has_seed) cfg.set("train.seed", std::to_string(opt.seed));
    if (opt.threshold > 0.0) cfg.set("train.threshold", std::to_string(opt.threshold));
    return cfg;
}

struct LoadedModel {
    Config config;
    FanetModel<float> model;
};

LoadedModel model_from_checkpoint(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    TrainConfig tc = TrainConfig::from_config(ck.config);
    FanetModel<float> model(model_config_from(ck.config), tc.seed);
    Adam<float> opt(model.params());
    std::mt19937 rng;
    restore(ck, model, opt, rng);
    return {ck.config, std::move(model)};
}

std::string require(const std::string& value, const char* what) {
    if (value.empty()) throw UsageError(std::string("missing required ") + what);
    return value;
}

std::vector<ManifestEntry> eval_entries(const std::vector<ManifestEntry>& all) {
    for (const char* split : {"test", "val"}) {
        std::vector<ManifestEntry> picked;
        for (const ManifestEntry& e : all) {
            if (e.split == split) picked.push_back(e);
        }
        if (!picked.empty()) return picked;
    }
    return all;
}

}  // namespace

int cmd_train(const CliOptions& opt) {
    Config cfg = load_config(opt);
    const std::string manifest_path = require(opt.manifest_path, "--manifest");
    std::vector<ManifestEntry> entries = load_manifest(manifest_path);
    const std::string out_dir = opt.out_dir.empty() ? "runs" : opt.out_dir;

    TrainResult result = train_model(cfg, entries, out_dir, std::cout, opt.checkpoint_path);
    std::cout << "done: epochs=" << result.epochs_run << " final_loss=" << result.final_loss;
    if (result.best_val_iou >= 0.0) std::cout << " best_val_iou=" << result.best_val_iou;
    std::cout << "\nlast checkpoint: " << result.last_checkpoint
              << "\nbest checkpoint: " << result.best_checkpoint << "\n";
    return 0;
}

int cmd_eval(const CliOptions& opt) {
    LoadedModel lm = model_from_checkpoint(require(opt.checkpoint_path, "--checkpoint"));
    std::vector<ManifestEntry> entries =
        load_manifest(require(opt.manifest_path, "--manifest"));
    TrainConfig tc = TrainConfig::from_config(lm.config);
    const double threshold = opt.threshold > 0.0 ? opt.threshold : tc.threshold;

    std::vector<ManifestEntry> picked = eval_entries(entries);
    std::vector<Sample> data;
    for (const ManifestEntry& e : picked) {
        Tensor image = read_image_png(e.image);
        Tensor mask = read_mask_png(e.mask);
        std::vector<Sample> tiles = tile(image, mask, tc.tile);
        data.insert(data.end(), tiles.begin(), tiles.end());
    }
    if (data.empty()) throw ValidationError("no evaluable samples at tile size " + std::to_string(tc.tile));

    MetricsReport rep = evaluate_model(lm.model, data, threshold);
    std::cout << report_to_kv(rep);
    std::cout << report_to_json(rep) << "\n";
    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        std::ofstream js(std::filesystem::path(opt.out_dir) / "metrics.json");
        js << report_to_json(rep) << "\n";
    }
    return 0;
}

int cmd_predict(const CliOptions& opt) {
    LoadedModel lm = model_from_checkpoint(require(opt.checkpoint_path, "--checkpoint"));
    const std::string image_path = require(opt.image_path, "IMAGE argument");
    TrainConfig tc = TrainConfig::from_config(lm.config);
    const double threshold = opt.threshold > 0.0 ? opt.threshold : tc.threshold;

    Tensor image = read_image_png(image_path);
    SegMap seg = predict_padded(lm.model, image);
    Tensor mask = binarize(seg.probabilities, threshold);

    const std::string out_dir = opt.out_dir.empty() ? "." : opt.out_dir;
    std::filesystem::create_directories(out_dir);
    const std::string stem = std::filesystem::path(image_path).stem().string();
    const std::string prob_path = (std::filesystem::path(out_dir) / (stem + "_prob.ftns")).string();
    const std::string mask_path = (std::filesystem::path(out_dir) / (stem + "_mask.png")).string();
    write_ftns(prob_path, seg.probabilities);
    write_mask_png(mask_path, mask);

    double positive = 0.0;
    for (float v : mask.data()) positive += static_cast<double>(v);
    std::cout << "wrote " << prob_path << "\nwrote " << mask_path << "\npositive_fraction="
              << positive / static_cast<double>(mask.data().size()) << "\n";
    return 0;
}

int cmd_gradcheck(const CliOptions& opt) {
    const std::uint64_t seed = opt.has_seed ? opt.seed : 0;
    GradcheckReport report = run_gradcheck(opt.selector, seed);
    print_gradcheck(report, std::cout);
    if (!report.pass) throw NumericError("gradient check failed for selector '" + opt.selector + "'");
    return 0;
}

int cmd_synth(const CliOptions& opt) {
    Config cfg = opt.config_path.empty() ? Config() : Config::from_file(opt.config_path);
    SynthSpec spec = SynthSpec::from_config(cfg);
    if (opt.has_seed) spec.seed = opt.seed;
    spec.validate();
    const std::string out_dir = opt.out_dir.empty() ? "synth" : opt.out_dir;
    const std::string manifest = generate_synthetic(spec, out_dir);
    std::cout << "wrote " << manifest << "\n";
    return 0;
}

}  // namespace fanet
