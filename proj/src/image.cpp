#include "lookback/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include <zlib.h>

#include "lookback/error.hpp"

namespace lookback::image {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char (&type)[5], std::span<const std::uint8_t> data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = ::crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};

bool is_png(std::span<const std::uint8_t> b) {
  return b.size() >= 8 && std::equal(std::begin(kPngSig), std::end(kPngSig), b.begin());
}

bool is_jpeg(std::span<const std::uint8_t> b) { return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF; }

}  // namespace

std::vector<std::uint8_t> encode_png_rgb(std::span<const std::uint8_t> rgb, int width, int height) {
  require(width > 0 && height > 0, ErrorKind::Precondition, "png dimensions must be positive");
  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  require(rgb.size() == stride * static_cast<std::size_t>(height), ErrorKind::Precondition,
          "pixel buffer does not match png dimensions");

  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    auto row = rgb.subspan(static_cast<std::size_t>(y) * stride, stride);
    raw.insert(raw.end(), row.begin(), row.end());
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  int rc = compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6);
  require(rc == Z_OK, ErrorKind::Io, "zlib compression failed");
  z.resize(zlen);

  std::vector<std::uint8_t> out(std::begin(kPngSig), std::end(kPngSig));
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit, truecolor, deflate, adaptive, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

std::optional<Resolution> sniff_resolution(std::span<const std::uint8_t> b) {
  if (is_png(b)) {
    if (b.size() < 24) return std::nullopt;
    return Resolution{static_cast<int>(be32(b, 16)), static_cast<int>(be32(b, 20))};
  }
  if (is_jpeg(b)) {
    std::size_t i = 2;
    while (i + 9 < b.size()) {
      if (b[i] != 0xFF) return std::nullopt;
      std::uint8_t marker = b[i + 1];
      if (marker == 0xFF) {
        ++i;
        continue;
      }
      std::size_t len = (std::size_t{b[i + 2]} << 8) | b[i + 3];
      bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
      if (sof) {
        int h = (b[i + 5] << 8) | b[i + 6];
        int w = (b[i + 7] << 8) | b[i + 8];
        return Resolution{w, h};
      }
      i += 2 + len;
    }
  }
  return std::nullopt;
}

std::string sniff_mime(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return "image/png";
  if (is_jpeg(bytes)) return "image/jpeg";
  return "application/octet-stream";
}

VisualContext load_real(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open image '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto res = sniff_resolution(bytes);
  require(res.has_value(), ErrorKind::Io, "cannot determine resolution of image '" + path + "'");
  auto mime = sniff_mime(bytes);
  return VisualContext::real(std::move(bytes), std::move(mime), *res);
}

std::vector<std::uint8_t> noise_pixels(std::uint64_t run_seed, Resolution res, NoiseParams params) {
  require(res.width > 0 && res.height > 0, ErrorKind::Precondition, "noise resolution must be positive");
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                    static_cast<std::uint32_t>(res.width), static_cast<std::uint32_t>(res.height)};
  std::mt19937_64 rng(seq);
  // Box-Muller on raw engine output: std::normal_distribution is not
  // reproducible across standard library implementations.
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * kScale; };

  const std::size_t n = static_cast<std::size_t>(res.width) * static_cast<std::size_t>(res.height) * 3;
  std::vector<std::uint8_t> px(n);
  std::size_t i = 0;
  auto quantize = [&](double z) {
    double v = std::clamp(params.mean + params.stddev * z, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
  };
  while (i < n) {
    double r = std::sqrt(-2.0 * std::log(uniform()));
    double theta = 2.0 * std::numbers::pi * uniform();
    px[i++] = quantize(r * std::cos(theta));
    if (i < n) px[i++] = quantize(r * std::sin(theta));
  }
  return px;
}

VisualContext make_noise_context(const VisualContext& real, std::uint64_t run_seed, NoiseParams params) {
  require(real.kind == ContextKind::Real, ErrorKind::Precondition, "noise context must be derived from a real image");
  validate(real);
  const Resolution res = *real.resolution;
  auto px = noise_pixels(run_seed, res, params);
  VisualContext ctx;
  ctx.kind = ContextKind::Noise;
  ctx.payload = encode_png_rgb(px, res.width, res.height);
  ctx.mime = "image/png";
  ctx.resolution = res;
  return ctx;
}

}  // namespace lookback::image
