#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "harmony/imgcore/image.hpp"

namespace harmony {

/// 8-bit quantization: round(clamp(v, 0, 1) * 255).
std::uint8_t quantize8(double v);
ImageRGB quantize(const ImageRGB& img);
std::vector<std::uint8_t> to_rgb8(const ImageRGB& img);
ImageRGB from_rgb8(int width, int height, const std::uint8_t* data);

/// PNG rasters are read as 8-bit RGB regardless of stored format.
ImageRGB read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageRGB& img);

/// Grayscale mask PNG, thresholded at >= 128 on read; written as 0/255.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

/// Binary PPM (P6, maxval 255).
ImageRGB read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageRGB& img);

/// Dispatches on extension (.png, .ppm).
ImageRGB read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageRGB& img);

/// Bilinear resampling with half-pixel centres (edge-clamped).
ImageRGB resize_bilinear(const ImageRGB& img, int width, int height);
Mask resize_nearest(const Mask& mask, int width, int height);

}  // namespace harmony
