#pragma once

#include <string>

#include "holo/tensor.hpp"

namespace holo {

/// Portable Float Map, little-endian. Color ("PF", 3 channels) or grayscale
/// ("Pf", 1 channel). Scanlines are stored bottom-to-top per convention; the
/// save/load pair round-trips bit-identically. Malformed headers raise
/// std::runtime_error naming the missing field and its byte offset.
void save_pfm(const std::string& path, const Tensor& img);
Tensor load_pfm(const std::string& path);

/// 8-bit PNG. Values are clamped to [0,1] and quantized round-half-up
/// (0.5 -> byte 128). Accepts (1,h,w) or (3,h,w); load returns the same
/// layout with values byte/255.
void save_png(const std::string& path, const Tensor& img);
Tensor load_png(const std::string& path);

/// 1-bit grayscale PNG for binary masks, shape (1,h,w), values exactly 0 or 1.
void save_png_mask(const std::string& path, const Tensor& mask);
Tensor load_png_mask(const std::string& path);

}  // namespace holo
