#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace posefuse {

struct GrayImage16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;  // row major
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  std::array<std::uint8_t, 3> get(int x, int y) const;
};

/// Reads a grayscale PNG; 8-bit input is widened to 16 bits.
GrayImage16 read_png_gray16(const std::string& path);
void write_png_gray16(const std::string& path, const GrayImage16& image);

/// Reads any PNG as 8-bit RGB (alpha dropped, gray expanded).
RgbImage read_png_rgb(const std::string& path);
void write_png_rgb(const std::string& path, const RgbImage& image);

}  // namespace posefuse
