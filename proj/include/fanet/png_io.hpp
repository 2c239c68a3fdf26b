#pragma once

#include <string>

#include "fanet/tensor.hpp"

namespace fanet {

// 8-bit PNG carriers. Images load as (1,3,H,W) in [0,1] (grayscale files are
// replicated across channels); masks load as (1,1,H,W) strictly {0,1} with
// the 128 threshold. Writers emit RGB for images and 0/255 grayscale for
// masks.
Tensor read_image_png(const std::string& path);
Tensor read_mask_png(const std::string& path);
void write_image_png(const std::string& path, const Tensor& image);
void write_mask_png(const std::string& path, const Tensor& mask);

}  // namespace fanet
