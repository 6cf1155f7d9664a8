#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace uwpose {

// 8-bit RGB raster, interleaved, row-major, top row first.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t& at(std::size_t row, std::size_t col, std::size_t channel) {
    return pixels[(row * width + col) * 3 + channel];
  }
  std::uint8_t at(std::size_t row, std::size_t col, std::size_t channel) const {
    return pixels[(row * width + col) * 3 + channel];
  }
  bool operator==(const RgbImage&) const = default;
};

// Reads PNG (8-bit RGB only) or binary PPM (P6, maxval 255), chosen by the
// file's magic bytes. Anything else is a FormatError; unreadable files an
// IoError.
RgbImage read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

}  // namespace uwpose
