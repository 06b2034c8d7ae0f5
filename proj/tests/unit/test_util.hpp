#pragma once
// Shared fixtures for the unit tests. Everything here is written from first
// principles and does not call into the library code under test, except to
// construct its value types.

#include "posefuse/geometry.hpp"
#include "posefuse/heatmap.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("posefuse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Eigen::Vector3d random_unit(std::mt19937_64& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v(n(g), n(g), n(g));
  return v.normalized();
}

inline Eigen::Vector3d random_point(std::mt19937_64& g, double half_extent) {
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  return {u(g), u(g), u(g)};
}

/// P = K [R | -R C] built by hand, camera looking at `target`, world z up.
inline posefuse::ProjectionMatrix manual_projection(const Eigen::Vector3d& center,
                                                    const Eigen::Vector3d& target, double f,
                                                    double cx, double cy) {
  const Eigen::Vector3d z = (target - center).normalized();
  Eigen::Vector3d up(0, 0, 1);
  if (std::abs(z.dot(up)) > 0.99) up = Eigen::Vector3d(0, 1, 0);
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = f;
  k(1, 1) = f;
  k(0, 2) = cx;
  k(1, 2) = cy;
  posefuse::ProjectionMatrix p;
  p.leftCols<3>() = k * r;
  p.col(3) = -k * r * center;
  return p;
}

/// Camera somewhere on a sphere of radius 3-6 m around the origin, aimed near it.
inline posefuse::CameraCalibration random_camera(std::mt19937_64& g, const std::string& id) {
  std::uniform_real_distribution<double> dist(3000.0, 6000.0), f(300.0, 1200.0);
  const Eigen::Vector3d c = random_unit(g) * dist(g);
  const Eigen::Vector3d t = random_point(g, 300.0);
  const double focal = f(g);
  return posefuse::CameraCalibration(id, manual_projection(c, t, focal, 320.0, 240.0), 640, 480);
}

/// Unnormalized Gaussian bump of height 1 at `centre` (image px) on a w x h map.
inline posefuse::Heatmap gaussian_map(int w, int h, const Eigen::Vector2d& centre, double sigma,
                                      double scale = 1.0) {
  std::vector<float> v(static_cast<std::size_t>(w) * h, 0.0f);
  const Eigen::Vector2d c = centre * scale;
  const double s = sigma * scale;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d2 = (x - c.x()) * (x - c.x()) + (y - c.y()) * (y - c.y());
      v[static_cast<std::size_t>(y) * w + x] = static_cast<float>(std::exp(-d2 / (2 * s * s)));
    }
  }
  return posefuse::Heatmap(w, h, std::move(v), scale);
}

inline posefuse::Heatmap constant_map(int w, int h, float value) {
  return posefuse::Heatmap(w, h, std::vector<float>(static_cast<std::size_t>(w) * h, value));
}

/// Closest points of two lines, textbook closed form in extended precision.
inline void closest_points(const posefuse::Ray& a, const posefuse::Ray& b, Eigen::Vector3d& pa,
                           Eigen::Vector3d& pb) {
  using V = Eigen::Matrix<long double, 3, 1>;
  const V oa = a.origin.cast<long double>(), ob = b.origin.cast<long double>();
  const V da = a.direction.cast<long double>(), db = b.direction.cast<long double>();
  const V w0 = oa - ob;
  const long double aa = da.dot(da), bb = da.dot(db), cc = db.dot(db);
  const long double dd = da.dot(w0), ee = db.dot(w0);
  const long double den = aa * cc - bb * bb;
  const long double s = (bb * ee - cc * dd) / den;
  const long double t = (aa * ee - bb * dd) / den;
  pa = (oa + s * da).cast<double>();
  pb = (ob + t * db).cast<double>();
}

}  // namespace testutil
