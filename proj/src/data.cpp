#include "fanet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "fanet/png_io.hpp"

namespace fanet {

namespace fs = std::filesystem;

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    const fs::path base = fs::path(path).parent_path();
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        ManifestEntry e;
        if (!std::getline(ss, e.image, '\t') || !std::getline(ss, e.mask, '\t') ||
            !std::getline(ss, e.split, '\t') || e.image.empty() || e.mask.empty() ||
            e.split.empty()) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": manifest line is not image<TAB>mask<TAB>split");
        }
        std::string extra;
        if (std::getline(ss, extra, '\t')) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": manifest line has extra fields");
        }
        if (fs::path(e.image).is_relative()) e.image = (base / e.image).string();
        if (fs::path(e.mask).is_relative()) e.mask = (base / e.mask).string();
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    for (const auto& e : entries) out << e.image << '\t' << e.mask << '\t' << e.split << '\n';
    if (!out) throw IoError("short write: " + path);
}

std::vector<Sample> tile(const Tensor& image, const Tensor& mask, int tile_size) {
    const Shape is = image.shape();
    const Shape ms = mask.shape();
    if (is.h != ms.h || is.w != ms.w) {
        throw ValidationError("image and mask dimensions differ: " + is.str() + " vs " + ms.str());
    }
    if (tile_size < 1) throw ConfigError("tile size must be positive");
    const int rows = is.h / tile_size;
    const int cols = is.w / tile_size;
    if (rows == 0 || cols == 0) {
        std::cerr << "warning: image " << is.h << "x" << is.w << " smaller than tile "
                  << tile_size << ", skipped\n";
        return {};
    }
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(rows) * cols);
    for (int ty = 0; ty < rows; ++ty)
        for (int tx = 0; tx < cols; ++tx) {
            Sample s;
            s.image = Tensor(Shape{1, is.c, tile_size, tile_size});
            s.mask = Tensor(Shape{1, 1, tile_size, tile_size});
            for (int c = 0; c < is.c; ++c)
                for (int y = 0; y < tile_size; ++y)
                    for (int x = 0; x < tile_size; ++x) {
                        s.image.at(0, c, y, x) =
                            image.at(0, c, ty * tile_size + y, tx * tile_size + x);
                    }
            for (int y = 0; y < tile_size; ++y)
                for (int x = 0; x < tile_size; ++x) {
                    s.mask.at(0, 0, y, x) = mask.at(0, 0, ty * tile_size + y, tx * tile_size + x);
                }
            out.push_back(std::move(s));
        }
    return out;
}

Tensor hflip(const Tensor& t) {
    const Shape s = t.shape();
    Tensor out(s);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    out.at(b, c, y, x) = t.at(b, c, y, s.w - 1 - x);
                }
    return out;
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("blur sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        norm += kernel[static_cast<std::size_t>(i + radius)];
    }
    for (auto& k : kernel) k /= norm;

    const Shape s = image.shape();
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * n - 2 - i;
        }
        return i;
    };
    // horizontal pass in double, then vertical, cast to float at the end
    std::vector<double> mid(static_cast<std::size_t>(s.numel()));
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        acc += kernel[static_cast<std::size_t>(i + radius)] *
                               static_cast<double>(image.at(b, c, y, reflect(x + i, s.w)));
                    }
                    mid[static_cast<std::size_t>(((b * s.c + c) * s.h + y) * s.w + x)] = acc;
                }
    Tensor out(s);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        acc += kernel[static_cast<std::size_t>(i + radius)] *
                               mid[static_cast<std::size_t>(
                                   ((b * s.c + c) * s.h + reflect(y + i, s.h)) * s.w + x)];
                    }
                    out.at(b, c, y, x) = static_cast<float>(acc);
                }
    return out;
}

Sample augment(const Sample& s, std::uint64_t seed) {
    std::mt19937 rng(static_cast<std::uint32_t>(splitmix64(seed)));
    std::bernoulli_distribution coin(0.5);
    const bool do_flip = coin(rng);
    const bool do_blur = coin(rng);
    Sample out = s;
    if (do_flip) {
        out.image = hflip(out.image);
        out.mask = hflip(out.mask);
    }
    if (do_blur) {
        std::uniform_real_distribution<double> sig(0.1, 2.0);
        out.image = gaussian_blur(out.image, sig(rng));
    }
    return out;
}

std::pair<Tensor, Tensor> stack_samples(const std::vector<Sample>& samples,
                                        const std::vector<int>& indices) {
    if (indices.empty()) throw ValidationError("cannot stack an empty batch");
    const Shape is = samples[static_cast<std::size_t>(indices[0])].image.shape();
    const Shape ms = samples[static_cast<std::size_t>(indices[0])].mask.shape();
    Tensor images(Shape{static_cast<int>(indices.size()), is.c, is.h, is.w});
    Tensor masks(Shape{static_cast<int>(indices.size()), ms.c, ms.h, ms.w});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Sample& s = samples[static_cast<std::size_t>(indices[k])];
        if (!(s.image.shape() == is) || !(s.mask.shape() == ms)) {
            throw ValidationError("batch members disagree on shape");
        }
        std::copy(s.image.data().begin(), s.image.data().end(),
                  images.data().begin() + static_cast<std::int64_t>(k) * is.numel());
        std::copy(s.mask.data().begin(), s.mask.data().end(),
                  masks.data().begin() + static_cast<std::int64_t>(k) * ms.numel());
    }
    return {images, masks};
}

SynthSpec SynthSpec::from_config(const Config& cfg) {
    SynthSpec s;
    s.canvas = cfg.get_int("synth.canvas", s.canvas);
    s.train_images = cfg.get_int("synth.train_images", s.train_images);
    s.test_images = cfg.get_int("synth.test_images", s.test_images);
    s.count_min = cfg.get_int("synth.count_min", s.count_min);
    s.count_max = cfg.get_int("synth.count_max", s.count_max);
    s.size_min = cfg.get_int("synth.size_min", s.size_min);
    s.size_max = cfg.get_int("synth.size_max", s.size_max);
    s.rotate = cfg.get_bool("synth.rotate", s.rotate);
    s.occluders = cfg.get_int("synth.occluders", s.occluders);
    s.occluder_opacity = cfg.get_double("synth.occluder_opacity", s.occluder_opacity);
    s.noise = cfg.get_double("synth.noise", s.noise);
    s.seed = static_cast<std::uint64_t>(cfg.get_int("synth.seed", static_cast<int>(s.seed)));
    s.validate();
    return s;
}

void SynthSpec::validate() const {
    if (canvas < 8) throw ConfigError("synth.canvas too small");
    if (train_images < 0 || test_images < 0) throw ConfigError("synth image counts must be >= 0");
    if (count_min < 0 || count_max < count_min) throw ConfigError("synth.count range is empty");
    if (size_min < 1 || size_max < size_min) throw ConfigError("synth.size range is empty");
    if (size_max > canvas) throw ConfigError("synth.size_max exceeds the canvas");
    if (occluders < 0) throw ConfigError("synth.occluders must be >= 0");
    if (occluder_opacity < 0.0 || occluder_opacity > 1.0) {
        throw ConfigError("synth.occluder_opacity must lie in [0,1]");
    }
    if (noise < 0.0 || noise > 0.5) throw ConfigError("synth.noise must lie in [0,0.5]");
}

namespace {

struct Ellipse {
    double cx, cy, rx, ry, angle;
};

bool inside_rect(const SynthRect& r, double px, double py) {
    const double dx = px - r.cx;
    const double dy = py - r.cy;
    const double ca = std::cos(-r.angle);
    const double sa = std::sin(-r.angle);
    const double u = dx * ca - dy * sa;
    const double v = dx * sa + dy * ca;
    return std::abs(u) <= r.hw && std::abs(v) <= r.hh;
}

bool inside_ellipse(const Ellipse& e, double px, double py) {
    const double dx = px - e.cx;
    const double dy = py - e.cy;
    const double ca = std::cos(-e.angle);
    const double sa = std::sin(-e.angle);
    const double u = (dx * ca - dy * sa) / e.rx;
    const double v = (dx * sa + dy * ca) / e.ry;
    return u * u + v * v <= 1.0;
}

void render_one(const SynthSpec& spec, std::uint64_t image_seed, Tensor& image, Tensor& mask,
                SynthImageInfo& info) {
    std::mt19937 rng(static_cast<std::uint32_t>(splitmix64(image_seed)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = spec.canvas;

    // textured background: two low-frequency waves plus fine speckle
    const double fx = 1.0 + 3.0 * unit(rng);
    const double fy = 1.0 + 3.0 * unit(rng);
    const double ph1 = 2.0 * std::numbers::pi * unit(rng);
    const double ph2 = 2.0 * std::numbers::pi * unit(rng);
    const double tint[3] = {0.9 + 0.1 * unit(rng), 1.0, 0.8 + 0.1 * unit(rng)};
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double wave =
                std::sin(2.0 * std::numbers::pi * fx * x / n + ph1) *
                std::sin(2.0 * std::numbers::pi * fy * y / n + ph2);
            const double base = 0.22 + 0.06 * wave + 0.08 * unit(rng);
            for (int c = 0; c < 3; ++c) {
                image.at(0, c, y, x) = static_cast<float>(base * tint[c]);
            }
        }

    std::uniform_int_distribution<int> count_dist(spec.count_min, spec.count_max);
    const int count = count_dist(rng);
    std::uniform_real_distribution<double> size_dist(spec.size_min / 2.0, spec.size_max / 2.0);
    for (int k = 0; k < count; ++k) {
        SynthRect r;
        r.hw = size_dist(rng);
        r.hh = size_dist(rng);
        r.cx = r.hw + unit(rng) * (n - 2.0 * r.hw);
        r.cy = r.hh + unit(rng) * (n - 2.0 * r.hh);
        r.angle = spec.rotate ? unit(rng) * std::numbers::pi / 2.0 : 0.0;
        const double brightness = 0.72 + 0.2 * unit(rng);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                if (!inside_rect(r, x + 0.5, y + 0.5)) continue;
                mask.at(0, 0, y, x) = 1.0f;
                for (int c = 0; c < 3; ++c) {
                    image.at(0, c, y, x) = static_cast<float>(brightness * (0.96 + 0.04 * tint[c]));
                }
            }
        info.buildings.push_back(r);
    }

    // occluders darken the image over building edges but never touch the mask
    for (int k = 0; k < spec.occluders; ++k) {
        Ellipse e;
        e.rx = 3.0 + 6.0 * unit(rng);
        e.ry = 3.0 + 6.0 * unit(rng);
        e.angle = unit(rng) * std::numbers::pi;
        if (!info.buildings.empty()) {
            const SynthRect& host =
                info.buildings[static_cast<std::size_t>(rng() % info.buildings.size())];
            e.cx = host.cx + (unit(rng) - 0.5) * 2.0 * host.hw;
            e.cy = host.cy + (unit(rng) - 0.5) * 2.0 * host.hh;
        } else {
            e.cx = unit(rng) * n;
            e.cy = unit(rng) * n;
        }
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                if (!inside_ellipse(e, x + 0.5, y + 0.5)) continue;
                for (int c = 0; c < 3; ++c) {
                    image.at(0, c, y, x) =
                        static_cast<float>(image.at(0, c, y, x) * (1.0 - spec.occluder_opacity));
                }
            }
    }

    if (spec.noise > 0.0) {
        std::uniform_real_distribution<double> jitter(-spec.noise, spec.noise);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    image.at(0, c, y, x) = static_cast<float>(
                        std::clamp(image.at(0, c, y, x) + jitter(rng), 0.0, 1.0));
                }
    }
}

}  // namespace

std::string generate_synthetic(const SynthSpec& spec, const std::string& out_dir,
                               std::vector<SynthImageInfo>* info_out) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    std::vector<ManifestEntry> entries;
    if (info_out) info_out->clear();
    const int total = spec.train_images + spec.test_images;
    for (int i = 0; i < total; ++i) {
        Tensor image(Shape{1, 3, spec.canvas, spec.canvas});
        Tensor mask(Shape{1, 1, spec.canvas, spec.canvas});
        SynthImageInfo info;
        render_one(spec, mix_seed(spec.seed, static_cast<std::uint64_t>(i)), image, mask, info);

        char img_name[32], msk_name[32];
        std::snprintf(img_name, sizeof img_name, "img_%04d.png", i);
        std::snprintf(msk_name, sizeof msk_name, "msk_%04d.png", i);
        write_image_png((fs::path(out_dir) / img_name).string(), image);
        write_mask_png((fs::path(out_dir) / msk_name).string(), mask);
        entries.push_back({img_name, msk_name, i < spec.train_images ? "train" : "test"});
        if (info_out) info_out->push_back(std::move(info));
    }
    const std::string manifest_path = (fs::path(out_dir) / "manifest.tsv").string();
    write_manifest(manifest_path, entries);
    return manifest_path;
}

}  // namespace fanet
