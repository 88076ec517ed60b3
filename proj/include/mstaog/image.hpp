#pragma once

#include <Eigen/Core>
#include <filesystem>

#include "mstaog/types.hpp"

namespace mstaog {

/// Grayscale image, rows = height. Intensities are on the 0..255 scale.
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Loads a binary PGM (P5) or a PNG file; color PNGs are converted to luma.
Image load_image(const std::filesystem::path& file);

/// Writes an 8-bit binary PGM; values are rounded and clamped to 0..255.
void save_pgm(const std::filesystem::path& file, const Image& img);

/// Bilinear resampling to an explicit size.
Image resize(const Image& img, int width, int height);

/// Bilinear resampling by a uniform factor (output size rounded).
Image rescale(const Image& img, double factor);

/// Bilinear sample with border clamping.
Scalar sample_bilinear(const Image& img, Scalar x, Scalar y);

}  // namespace mstaog
