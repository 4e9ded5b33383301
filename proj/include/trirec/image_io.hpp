#pragma once

#include <string>
#include <vector>

#include "trirec/vecmath.hpp"

namespace trirec::io {

// 8-bit RGB PNG; values clamped to [0,1].
void save_png_rgb(const std::string& path, const std::vector<Vec3>& rgb, int height, int width);
std::vector<Vec3> load_png_rgb(const std::string& path, int& height, int& width);

// 8-bit grayscale PNG from {0,1} flags.
void save_png_gray(const std::string& path, const std::vector<uint8_t>& gray, int height, int width);
std::vector<uint8_t> load_png_gray(const std::string& path, int& height, int& width);

// Flat little-endian float32, row-major. Non-finite doubles round-trip as
// +inf sentinels.
void save_f32(const std::string& path, const std::vector<double>& data);
std::vector<double> load_f32(const std::string& path);
void save_f32_vec3(const std::string& path, const std::vector<Vec3>& data);
std::vector<Vec3> load_f32_vec3(const std::string& path);

}  // namespace trirec::io
