#pragma once

#include <string>

#include "fanet/tensor.hpp"

namespace fanet {

// Binary tensor container: magic "FTNS", u16 version (1), u16 rank, then
// rank u64 dims and a row-major f32 payload, everything little-endian.
void write_ftns(const std::string& path, const Tensor& t);
Tensor read_ftns(const std::string& path);

}  // namespace fanet
