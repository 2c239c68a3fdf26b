#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fanet/checkpoint.hpp"
#include "fanet/data.hpp"
#include "fanet/metrics.hpp"

namespace fanet {

struct TrainConfig {
    double lr = 1e-4;
    int epochs = 100;
    double decay_factor = 0.1;
    int decay_every = 50;
    int batch = 4;
    std::uint64_t seed = 0;
    int tile = 64;
    double threshold = 0.5;
    double early_stop_val_iou = 0.0;  // 0 disables

    static TrainConfig from_config(const Config& cfg);
    void validate() const;
};

ModelConfig model_config_from(const Config& cfg);

// Tiles every manifest entry of the given split into samples.
std::vector<Sample> load_split(const std::vector<ManifestEntry>& entries, const std::string& split,
                               int tile_size);

MetricsReport evaluate_model(FanetModel<float>& model, const std::vector<Sample>& samples,
                             double threshold);

// Reflect-pads to the next multiple of 32 on the right/bottom, runs the
// model, and crops the result back to the input size.
SegMap predict_padded(FanetModel<float>& model, const Tensor& image);

struct TrainResult {
    int epochs_run = 0;
    double final_loss = 0.0;
    double best_val_iou = -1.0;
    std::string last_checkpoint;
    std::string best_checkpoint;
};

// The full optimizer loop. `cfg` must carry the model.*/train.* keys; it is
// echoed into every checkpoint. When `resume_path` is non-empty, training
// state and the *effective* config come from that checkpoint instead.
TrainResult train_model(Config cfg, const std::vector<ManifestEntry>& manifest,
                        const std::string& out_dir, std::ostream& log,
                        const std::string& resume_path = "");

}  // namespace fanet
