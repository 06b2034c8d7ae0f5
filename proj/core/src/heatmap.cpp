#include "posefuse/heatmap.hpp"

#include "posefuse/error.hpp"
#include "posefuse/io_util.hpp"
#include "posefuse/png_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

namespace posefuse {

Heatmap::Heatmap(int width, int height, std::vector<float> values, double scale)
    : width_(width), height_(height), scale_(scale), values_(std::move(values)) {
  if (width <= 0 || height <= 0) throw DataError("heatmap: empty grid");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DataError("heatmap: scale must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw DataError("heatmap: value count does not match dimensions");
  }
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw DataError("heatmap: cell value outside [0, 1]");
    }
  }
}

void Heatmap::set(int x, int y, float v) {
  if (!(v >= 0.0f && v <= 1.0f)) throw DataError("heatmap: value outside [0, 1]");
  values_[index(x, y)] = v;
}

double Heatmap::value_at(const PixelCoord& image_px, double floor) const {
  const double hx = image_px.x() * scale_;
  const double hy = image_px.y() * scale_;
  if (!(hx >= 0.0 && hy >= 0.0 && hx <= width_ - 1 && hy <= height_ - 1)) {
    return floor;
  }
  const int x0 = static_cast<int>(hx);
  const int y0 = static_cast<int>(hy);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = hx - x0;
  const double fy = hy - y0;
  const double top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
  const double bottom = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

double Heatmap::value_at(const Projection& p, double floor) const {
  if (p.behind) return floor;
  return value_at(p.pixel, floor);
}

CellRect Heatmap::cells_for_image_box(double x_min, double y_min, double x_max,
                                      double y_max) const {
  CellRect r;
  r.x0 = std::clamp(static_cast<int>(std::floor(x_min * scale_)), 0, width_);
  r.y0 = std::clamp(static_cast<int>(std::floor(y_min * scale_)), 0, height_);
  r.x1 = std::clamp(static_cast<int>(std::ceil(x_max * scale_)) + 1, 0, width_);
  r.y1 = std::clamp(static_cast<int>(std::ceil(y_max * scale_)) + 1, 0, height_);
  return r;
}

PixelCoord HeatmapPMF::cell_center(std::size_t cell) const {
  const auto w = static_cast<std::size_t>(region.width());
  const double x = static_cast<double>(region.x0 + static_cast<int>(cell % w));
  const double y = static_cast<double>(region.y0 + static_cast<int>(cell / w));
  return PixelCoord(x / scale, y / scale);
}

HeatmapPMF build_pmf(const Heatmap& h) { return build_pmf(h, h.full_rect()); }

HeatmapPMF build_pmf(const Heatmap& h, const CellRect& region) {
  HeatmapPMF pmf;
  pmf.region = region;
  pmf.scale = h.scale();
  if (region.empty()) throw EmptyHeatmap("heatmap: empty sampling region");
  pmf.cumulative.reserve(static_cast<std::size_t>(region.width()) * region.height());
  double running = 0.0;
  for (int y = region.y0; y < region.y1; ++y) {
    for (int x = region.x0; x < region.x1; ++x) {
      running += h.at(x, y);
      pmf.cumulative.push_back(running);
    }
  }
  if (running < 1e-12) {
    throw EmptyHeatmap("heatmap: total mass below 1e-12 (joint " +
                       std::to_string(h.joint_index) + ", camera " + h.camera_id +
                       ", frame " + std::to_string(h.frame_index) + ")");
  }
  pmf.total_mass = running;
  for (double& c : pmf.cumulative) c /= running;
  return pmf;
}

PixelCoord sample_pixel(const HeatmapPMF& pmf, SeededRandomSource& rng) {
  const double u = rng.uniform();
  auto it = std::upper_bound(pmf.cumulative.begin(), pmf.cumulative.end(), u);
  if (it == pmf.cumulative.end()) --it;
  return pmf.cell_center(static_cast<std::size_t>(it - pmf.cumulative.begin()));
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "heat-map file codec assumes a little-endian host");

constexpr std::size_t kHeaderSize = 20;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_heatmap_file(const HeatmapStack& stack) {
  if (stack.channels.empty()) throw DataError("heatmap file: no channels");
  const Heatmap& first = stack.channels.front();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + stack.channels.size() * first.values().size() * 4);
  out.insert(out.end(), {'P', 'F', 'H', 'M'});
  put<std::uint16_t>(out, kHeatmapFileVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(stack.channels.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(first.height()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(first.width()));
  put<float>(out, static_cast<float>(first.scale()));
  for (const Heatmap& h : stack.channels) {
    if (h.width() != first.width() || h.height() != first.height()) {
      throw DataError("heatmap file: channels differ in size");
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(h.values().data());
    out.insert(out.end(), p, p + h.values().size() * sizeof(float));
  }
  return out;
}

HeatmapStack decode_heatmap_file(std::span<const std::uint8_t> bytes,
                                 const std::string& camera_id, int frame_index) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), "PFHM", 4) != 0) {
    throw DataError("heatmap file: bad magic");
  }
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kHeatmapFileVersion) {
    throw DataError("heatmap file: unsupported version " + std::to_string(version));
  }
  const auto n_joints = get<std::uint16_t>(bytes, 6);
  const auto height = get<std::uint32_t>(bytes, 8);
  const auto width = get<std::uint32_t>(bytes, 12);
  const auto scale = get<float>(bytes, 16);
  const std::size_t cells = static_cast<std::size_t>(height) * width;
  if (bytes.size() != kHeaderSize + cells * n_joints * sizeof(float)) {
    throw DataError("heatmap file: size does not match header");
  }
  HeatmapStack stack;
  stack.camera_id = camera_id;
  stack.frame_index = frame_index;
  stack.channels.reserve(n_joints);
  for (std::size_t j = 0; j < n_joints; ++j) {
    std::vector<float> values(cells);
    std::memcpy(values.data(), bytes.data() + kHeaderSize + j * cells * sizeof(float),
                cells * sizeof(float));
    Heatmap h(static_cast<int>(width), static_cast<int>(height), std::move(values),
              static_cast<double>(scale));
    h.joint_index = static_cast<int>(j);
    h.camera_id = camera_id;
    h.frame_index = frame_index;
    stack.channels.push_back(std::move(h));
  }
  return stack;
}

void save_heatmap_file(const std::string& path, const HeatmapStack& stack) {
  write_binary_file_atomic(path, encode_heatmap_file(stack));
}

HeatmapStack load_heatmap_file(const std::string& path, const std::string& camera_id,
                               int frame_index) {
  const auto bytes = read_binary_file(path);
  try {
    return decode_heatmap_file(bytes, camera_id, frame_index);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Heatmap load_heatmap_png(const std::string& path, double scale) {
  const GrayImage16 img = read_png_gray16(path);
  std::vector<float> values(img.pixels.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<float>(img.pixels[i] / 65535.0);
  }
  return Heatmap(img.width, img.height, std::move(values), scale);
}

void save_heatmap_png(const std::string& path, const Heatmap& h) {
  GrayImage16 img;
  img.width = h.width();
  img.height = h.height();
  img.pixels.resize(h.values().size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(h.values()[i] * 65535.0));
  }
  write_png_gray16(path, img);
}

void check_heatmap_matches_camera(const Heatmap& h, const CameraCalibration& cam) {
  const double ew = cam.image_width() * h.scale();
  const double eh = cam.image_height() * h.scale();
  if (std::abs(h.width() - ew) > 1.0 || std::abs(h.height() - eh) > 1.0) {
    throw DataError("heatmap for camera " + cam.camera_id() + " is " +
                    std::to_string(h.width()) + "x" + std::to_string(h.height()) +
                    " but the image scaled by " + std::to_string(h.scale()) +
                    " is " + std::to_string(ew) + "x" + std::to_string(eh));
  }
}

}  // namespace posefuse
