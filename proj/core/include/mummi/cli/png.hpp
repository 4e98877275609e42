#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mummi::cli {

/// Minimal 8-bit RGB PNG writer (stored deflate blocks, no external
/// compression library). pixels is row-major, 3 bytes per pixel.
void write_rgb_png(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& pixels);

/// Scatter render onto a square canvas: points in [0,1]^2 (x right, y up),
/// one RGB color per point.
void write_scatter_png(const std::string& path, const std::vector<double>& xy,
                       const std::vector<std::uint8_t>& colors, int canvas = 256);

}  // namespace mummi::cli
