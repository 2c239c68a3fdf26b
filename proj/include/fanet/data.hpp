#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fanet/config.hpp"
#include "fanet/tensor.hpp"

namespace fanet {

struct ManifestEntry {
    std::string image;
    std::string mask;
    std::string split;
};

// "image<TAB>mask<TAB>split" per line; loading resolves relative paths
// against the manifest's own directory.
std::vector<ManifestEntry> load_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

struct Sample {
    Tensor image;  // (1,3,S,S) in [0,1]
    Tensor mask;   // (1,1,S,S) in {0,1}
};

// Non-overlapping grid crops; right/bottom remainders are discarded. An
// image smaller than one tile yields an empty list (with a warning).
std::vector<Sample> tile(const Tensor& image, const Tensor& mask, int tile_size);

Tensor hflip(const Tensor& t);
Tensor gaussian_blur(const Tensor& image, double sigma);

// Coin-flip horizontal flip of image+mask and coin-flip Gaussian blur
// (sigma uniform in [0.1, 2.0]) of the image only; pure function of seed.
Sample augment(const Sample& s, std::uint64_t seed);

// Stack single-sample tensors into one batch along B.
std::pair<Tensor, Tensor> stack_samples(const std::vector<Sample>& samples,
                                        const std::vector<int>& indices);

struct SynthSpec {
    int canvas = 64;
    int train_images = 64;
    int test_images = 8;
    int count_min = 2;
    int count_max = 5;
    int size_min = 10;
    int size_max = 30;
    bool rotate = true;
    int occluders = 2;
    double occluder_opacity = 0.45;
    double noise = 0.05;
    std::uint64_t seed = 0;

    static SynthSpec from_config(const Config& cfg);
    void validate() const;
};

struct SynthRect {
    double cx, cy, hw, hh, angle;
};

struct SynthImageInfo {
    std::vector<SynthRect> buildings;
};

// Renders bright (possibly rotated) rectangles over a textured background,
// stamps dark elliptical occluders into the image but never the mask, and
// writes PNG pairs plus manifest.tsv into out_dir. Returns the manifest path.
std::string generate_synthetic(const SynthSpec& spec, const std::string& out_dir,
                               std::vector<SynthImageInfo>* info_out = nullptr);

}  // namespace fanet
