#include "posefuse/png_io.hpp"

#include "posefuse/error.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>

namespace posefuse {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw DataError(std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

class PngReader {
 public:
  explicit PngReader(const std::string& path) : path_(path) {
    file_.reset(std::fopen(path.c_str(), "rb"));
    if (!file_) throw DataError("cannot open " + path);
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file_.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
      throw DataError(path + ": not a PNG file");
    }
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                  png_error_handler, png_warning_handler);
    info_ = png_create_info_struct(png_);
    png_init_io(png_, file_.get());
    png_set_sig_bytes(png_, 8);
    png_read_info(png_, info_);
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

  std::vector<png_byte> read_rows(std::size_t row_bytes, int height) {
    std::vector<png_byte> data(row_bytes * static_cast<std::size_t>(height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[y] = data.data() + y * row_bytes;
    png_read_image(png_, rows.data());
    png_read_end(png_, nullptr);
    return data;
  }

 private:
  std::string path_;
  FilePtr file_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

void write_png(const std::string& path, int width, int height, int bit_depth,
               int color_type, const std::vector<png_bytep>& rows) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  const std::string tmp = path + ".tmp";
  {
    FilePtr file(std::fopen(tmp.c_str(), "wb"));
    if (!file) throw DataError("cannot write " + tmp);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              png_error_handler, png_warning_handler);
    png_infop info = png_create_info_struct(png);
    try {
      png_init_io(png, file.get());
      png_set_IHDR(png, info, width, height, bit_depth, color_type,
                   PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                   PNG_FILTER_TYPE_DEFAULT);
      png_write_info(png, info);
      if (bit_depth == 16) png_set_swap(png);
      png_write_image(png, const_cast<png_bytepp>(rows.data()));
      png_write_end(png, nullptr);
    } catch (...) {
      png_destroy_write_struct(&png, &info);
      throw;
    }
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace

RgbImage::RgbImage(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (!contains(x, y)) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[i] = r;
  pixels[i + 1] = g;
  pixels[i + 2] = b;
}

std::array<std::uint8_t, 3> RgbImage::get(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

GrayImage16 read_png_gray16(const std::string& path) {
  PngReader reader(path);
  png_structp png = reader.png();
  png_infop info = reader.info();
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    throw DataError(path + ": expected a grayscale PNG");
  }
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  GrayImage16 out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  const auto data = reader.read_rows(row_bytes, out.height);
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    const png_byte* row = data.data() + y * row_bytes;
    for (int x = 0; x < out.width; ++x) {
      std::uint16_t v;
      if (depth == 16) {
        v = static_cast<std::uint16_t>(row[2 * x] | (row[2 * x + 1] << 8));
      } else {
        v = static_cast<std::uint16_t>(row[x] * 257);
      }
      out.pixels[static_cast<std::size_t>(y) * out.width + x] = v;
    }
  }
  return out;
}

void write_png_gray16(const std::string& path, const GrayImage16& image) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  auto* base = reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(image.pixels.data()));
  for (int y = 0; y < image.height; ++y) {
    rows[y] = base + static_cast<std::size_t>(y) * image.width * 2;
  }
  write_png(path, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

RgbImage read_png_rgb(const std::string& path) {
  PngReader reader(path);
  png_structp png = reader.png();
  png_infop info = reader.info();
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  RgbImage out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  const auto data = reader.read_rows(row_bytes, out.height);
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int y = 0; y < out.height; ++y) {
    std::copy_n(data.data() + y * row_bytes, static_cast<std::size_t>(out.width) * 3,
                out.pixels.data() + static_cast<std::size_t>(y) * out.width * 3);
  }
  return out;
}

void write_png_rgb(const std::string& path, const RgbImage& image) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  auto* base = const_cast<png_bytep>(image.pixels.data());
  for (int y = 0; y < image.height; ++y) {
    rows[y] = base + static_cast<std::size_t>(y) * image.width * 3;
  }
  write_png(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

}  // namespace posefuse
