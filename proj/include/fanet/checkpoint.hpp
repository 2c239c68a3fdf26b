#pragma once

#include <random>
#include <string>

#include "fanet/adam.hpp"
#include "fanet/config.hpp"
#include "fanet/model.hpp"

namespace fanet {

// Everything needed to continue training bit-exactly: the config the model
// was built from, epoch counter, data-order RNG, parameter tensors and Adam
// moment buffers.
struct Checkpoint {
    Config config;
    int epoch = 0;
    std::string rng_state;  // mt19937 text serialization
    std::int64_t adam_step = 0;
    // parallel arrays over the model's params() order
    std::vector<std::string> names;
    std::vector<Tensor> values;
    std::vector<std::vector<float>> m1;
    std::vector<std::vector<float>> m2;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint snapshot(const Config& config, Adam<float>& opt, int epoch, const std::mt19937& rng);

// Copies the stored tensors and optimizer state into an existing model/opt
// pair (which must have been built from the same config).
void restore(const Checkpoint& ck, FanetModel<float>& model, Adam<float>& opt, std::mt19937& rng);

}  // namespace fanet
