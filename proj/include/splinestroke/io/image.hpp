#pragma once

#include "splinestroke/grad/tensor.hpp"

#include <filesystem>

namespace splinestroke::io {

using grad::Tensor;

/// Reads an 8-bit PNG into an [H,W,3] tensor with values in [0,1]. Gray and
/// palette images are expanded to RGB; alpha is dropped.
Tensor read_png(const std::filesystem::path& path);

/// Writes an [H,W,3] (or [H,W] grayscale) tensor as an 8-bit RGB PNG.
/// Values are clamped to [0,1] and rounded to the nearest level.
void write_png(const std::filesystem::path& path, const Tensor& image);

/// Bilinear resample of an [H,W,C] image with pixel-center alignment.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

/// Round-trips values through 8-bit quantization as write_png would.
Tensor quantize8(const Tensor& image);

}  // namespace splinestroke::io
