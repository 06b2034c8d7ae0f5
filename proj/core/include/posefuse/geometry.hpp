#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace posefuse {

/// World point in millimetres.
using Point3 = Eigen::Vector3d;
/// Image coordinate in pixels; cell (x, y) of a raster sits at integer (x, y).
using PixelCoord = Eigen::Vector2d;
using ProjectionMatrix = Eigen::Matrix<double, 3, 4>;

struct Ray {
  Point3 origin;
  Eigen::Vector3d direction;  // unit length

  Point3 at(double t) const { return origin + t * direction; }
};

/// Result of projecting a world point. A point is still projected when it is
/// behind the camera or outside the image; the flags tell callers to treat
/// the lookup as out of image.
struct Projection {
  PixelCoord pixel;
  double depth = 0.0;  // mm along the optical axis
  bool behind = false;
  bool in_image = false;

  bool visible() const { return !behind && in_image; }
};

/// Pinhole camera described by a 3x4 projection matrix in world millimetres.
///
/// The matrix is rescaled at construction so that the third row of its left
/// 3x3 block has unit norm and positive determinant. With that normalization
/// the homogeneous w component of a projected point is its depth in mm.
class CameraCalibration {
 public:
  CameraCalibration(std::string camera_id, const ProjectionMatrix& projection,
                    int image_width, int image_height);

  const std::string& camera_id() const { return camera_id_; }
  const ProjectionMatrix& projection() const { return projection_; }
  int image_width() const { return image_width_; }
  int image_height() const { return image_height_; }
  const Point3& center() const { return center_; }

  /// Throws DegenerateProjection when p lies on the camera's principal plane.
  Projection project(const Point3& p) const;
  Ray backproject(const PixelCoord& px) const;

  bool contains(const PixelCoord& px) const {
    return px.x() >= 0.0 && px.x() < image_width_ && px.y() >= 0.0 &&
           px.y() < image_height_;
  }

 private:
  std::string camera_id_;
  ProjectionMatrix projection_;
  Eigen::Matrix3d left_inverse_;
  Point3 center_;
  int image_width_;
  int image_height_;
};

/// Build P = K [R | -R C] for a camera at `center` looking at `target` with
/// world +z up. Image x grows to the right, image y grows downward.
CameraCalibration look_at_camera(std::string camera_id, const Point3& center,
                                 const Point3& target, double focal_px,
                                 int image_width, int image_height);

struct Triangulation {
  Point3 point;
  double residual_mm = 0.0;  // RMS perpendicular distance to the rays
};

/// Least-squares point closest to all rays. Throws DegenerateConfiguration
/// for fewer than two rays or when the normal matrix is ill conditioned.
Triangulation triangulate(std::span<const Ray> rays);

/// Distance between the closest points of the two (infinite) lines.
double pairwise_ray_distance(const Ray& a, const Ray& b);

/// Perpendicular distance from a point to a ray's line.
double point_ray_distance(const Point3& p, const Ray& r);

/// Calibration file: JSON array of
/// {"camera_id", "P": [12 reals, row major], "width", "height", "units"}.
/// Projection matrices are converted to millimetre world units on load.
std::vector<CameraCalibration> load_calibrations(const std::string& path);
std::vector<CameraCalibration> parse_calibrations(const std::string& json_text);
void save_calibrations(const std::string& path,
                       std::span<const CameraCalibration> cameras);

/// Index of the camera with the given id, or -1.
int find_camera(std::span<const CameraCalibration> cameras,
                const std::string& camera_id);

}  // namespace posefuse
