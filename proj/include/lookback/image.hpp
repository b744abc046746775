#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lookback/backend.hpp"

namespace lookback::image {

/// Lossless 8-bit RGB PNG. `rgb` holds width*height*3 bytes, row-major.
std::vector<std::uint8_t> encode_png_rgb(std::span<const std::uint8_t> rgb, int width, int height);

/// Reads dimensions from a PNG IHDR or a JPEG SOF marker.
std::optional<Resolution> sniff_resolution(std::span<const std::uint8_t> bytes);

std::string sniff_mime(std::span<const std::uint8_t> bytes);

/// Loads an image file into a Real context.
VisualContext load_real(const std::string& path);

struct NoiseParams {
  double mean = 0.5;
  double stddev = 0.25;
};

/// Raw RGB noise pixels: i.i.d. Gaussian per channel on [0,1], clipped and
/// quantized to 8 bits. Pure function of (run_seed, resolution).
std::vector<std::uint8_t> noise_pixels(std::uint64_t run_seed, Resolution res, NoiseParams params = {});

/// Noise context matched to a Real context's resolution.
VisualContext make_noise_context(const VisualContext& real, std::uint64_t run_seed, NoiseParams params = {});

}  // namespace lookback::image
