#pragma once

#include "posefuse/geometry.hpp"
#include "posefuse/random.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace posefuse {

/// Lookup value for pixels outside the map or behind the camera.
inline constexpr double kHeatmapFloor = 1e-6;

/// Half-open rectangle of heat-map cells [x0, x1) x [y0, y1).
struct CellRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool empty() const { return x1 <= x0 || y1 <= y0; }
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

/// One joint's likelihood field for one camera and frame. Cell values are in
/// [0, 1]. The map may be stored at a lower resolution than the image:
/// heat-map coordinate = image pixel * scale.
class Heatmap {
 public:
  Heatmap() = default;
  /// Throws DataError when a value is outside [0, 1] or sizes mismatch.
  Heatmap(int width, int height, std::vector<float> values, double scale = 1.0);

  int width() const { return width_; }
  int height() const { return height_; }
  double scale() const { return scale_; }
  std::span<const float> values() const { return values_; }

  float at(int x, int y) const { return values_[index(x, y)]; }
  void set(int x, int y, float v);

  /// Bilinear interpolation at an image pixel; `floor` outside the grid.
  double value_at(const PixelCoord& image_px, double floor = kHeatmapFloor) const;
  /// As above; projections behind the camera also read `floor`.
  double value_at(const Projection& p, double floor = kHeatmapFloor) const;

  /// Whole grid.
  CellRect full_rect() const { return {0, 0, width_, height_}; }
  /// Cells covering an image-space box, clipped to the grid.
  CellRect cells_for_image_box(double x_min, double y_min, double x_max,
                               double y_max) const;

  int joint_index = 0;
  std::string camera_id;
  int frame_index = 0;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  double scale_ = 1.0;
  std::vector<float> values_;
};

/// Discrete distribution over the cells of a heat map region, with cell
/// probability proportional to heat value.
struct HeatmapPMF {
  std::vector<double> cumulative;  // nondecreasing, last entry exactly 1
  double total_mass = 0.0;
  CellRect region;
  double scale = 1.0;

  double probability(std::size_t cell) const {
    return cell == 0 ? cumulative[0] : cumulative[cell] - cumulative[cell - 1];
  }
  /// Image-space center of the i-th cell of the region.
  PixelCoord cell_center(std::size_t cell) const;
};

/// Throws EmptyHeatmap when the region's mass is below 1e-12.
HeatmapPMF build_pmf(const Heatmap& h);
HeatmapPMF build_pmf(const Heatmap& h, const CellRect& region);

/// Center (in image pixels) of a cell drawn with the PMF's probabilities.
PixelCoord sample_pixel(const HeatmapPMF& pmf, SeededRandomSource& rng);

/// All joint channels of one (frame, camera).
struct HeatmapStack {
  std::string camera_id;
  int frame_index = 0;
  std::vector<Heatmap> channels;
};

/// Binary heat-map file: little-endian header
/// {magic "PFHM", u16 version, u16 n_joints, u32 height, u32 width, f32 scale}
/// followed by n_joints float32 row-major grids.
inline constexpr std::uint16_t kHeatmapFileVersion = 1;

std::vector<std::uint8_t> encode_heatmap_file(const HeatmapStack& stack);
HeatmapStack decode_heatmap_file(std::span<const std::uint8_t> bytes,
                                 const std::string& camera_id, int frame_index);
void save_heatmap_file(const std::string& path, const HeatmapStack& stack);
HeatmapStack load_heatmap_file(const std::string& path,
                               const std::string& camera_id, int frame_index);

/// 16-bit grayscale PNG channel, value / 65535.
Heatmap load_heatmap_png(const std::string& path, double scale = 1.0);
void save_heatmap_png(const std::string& path, const Heatmap& h);

/// Heat-map dimensions must match the camera image after scaling (within a
/// cell of rounding). Throws DataError otherwise.
void check_heatmap_matches_camera(const Heatmap& h, const CameraCalibration& cam);

}  // namespace posefuse
