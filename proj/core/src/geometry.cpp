#include "posefuse/geometry.hpp"

#include "posefuse/error.hpp"
#include "posefuse/io_util.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>

namespace posefuse {

namespace {

constexpr double kMaxCondition = 1e10;
constexpr double kParallelTolerance = 1e-12;

Eigen::Matrix3d perpendicular_projector(const Eigen::Vector3d& d) {
  return Eigen::Matrix3d::Identity() - d * d.transpose();
}

double units_to_mm(const std::string& units) {
  if (units == "mm") return 1.0;
  if (units == "cm") return 10.0;
  if (units == "m") return 1000.0;
  throw DataError("calibration: unknown units '" + units + "'");
}

}  // namespace

CameraCalibration::CameraCalibration(std::string camera_id,
                                     const ProjectionMatrix& projection,
                                     int image_width, int image_height)
    : camera_id_(std::move(camera_id)),
      image_width_(image_width),
      image_height_(image_height) {
  if (image_width <= 0 || image_height <= 0) {
    throw DataError("camera " + camera_id_ + ": image size must be positive");
  }
  if (!projection.allFinite()) {
    throw DataError("camera " + camera_id_ + ": projection is not finite");
  }
  Eigen::FullPivLU<ProjectionMatrix> lu(projection);
  if (lu.rank() < 3) {
    throw DataError("camera " + camera_id_ + ": projection has rank < 3");
  }
  const Eigen::Matrix3d left = projection.leftCols<3>();
  const double det = left.determinant();
  const double scale = left.norm();
  if (!(std::abs(det) > 1e-12 * scale * scale * scale)) {
    throw DataError("camera " + camera_id_ +
                    ": left 3x3 block is singular, camera center is at infinity");
  }
  const double row_norm = left.row(2).norm();
  // Already-normalized matrices are kept bit-exact so files round-trip.
  if (det > 0.0 && std::abs(row_norm - 1.0) < 4e-16) {
    projection_ = projection;
  } else {
    projection_ = projection / (det > 0.0 ? row_norm : -row_norm);
  }
  left_inverse_ = projection_.leftCols<3>().inverse();
  center_ = -left_inverse_ * projection_.col(3);
  if (!center_.allFinite()) {
    throw DataError("camera " + camera_id_ + ": camera center is not finite");
  }
}

Projection CameraCalibration::project(const Point3& p) const {
  const Eigen::Vector3d h = projection_.leftCols<3>() * p + projection_.col(3);
  // w is the depth in mm after normalization; compare relative to the
  // magnitude of the point so that far-off world origins do not trip it.
  if (std::abs(h.z()) < 1e-12 * std::max(1.0, p.norm())) {
    throw DegenerateProjection("camera " + camera_id_ +
                               ": point lies on the principal plane");
  }
  Projection out;
  out.pixel = h.head<2>() / h.z();
  out.depth = h.z();
  out.behind = h.z() <= 0.0;
  out.in_image = contains(out.pixel);
  return out;
}

Ray CameraCalibration::backproject(const PixelCoord& px) const {
  const Eigen::Vector3d d = left_inverse_ * Eigen::Vector3d(px.x(), px.y(), 1.0);
  return Ray{center_, d.normalized()};
}

CameraCalibration look_at_camera(std::string camera_id, const Point3& center,
                                 const Point3& target, double focal_px,
                                 int image_width, int image_height) {
  const Eigen::Vector3d forward = (target - center).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  if (right.norm() < 1e-9) {
    throw DataError("camera " + camera_id + ": optical axis is vertical");
  }
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d rotation;
  rotation.row(0) = right;
  rotation.row(1) = down;
  rotation.row(2) = forward;
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = focal_px;
  k(1, 1) = focal_px;
  k(0, 2) = 0.5 * image_width;
  k(1, 2) = 0.5 * image_height;
  ProjectionMatrix extrinsic;
  extrinsic.leftCols<3>() = rotation;
  extrinsic.col(3) = -rotation * center;
  return CameraCalibration(std::move(camera_id), k * extrinsic, image_width,
                           image_height);
}

Triangulation triangulate(std::span<const Ray> rays) {
  if (rays.size() < 2) {
    throw DegenerateConfiguration("triangulate: need at least two rays");
  }
  // Origins are taken relative to their mean to keep the right-hand side small.
  Point3 centre = Point3::Zero();
  for (const Ray& r : rays) centre += r.origin;
  centre /= static_cast<double>(rays.size());
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const Ray& r : rays) {
    const Eigen::Matrix3d proj = perpendicular_projector(r.direction);
    normal += proj;
    rhs += proj * (r.origin - centre);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal,
                                                     Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(2);
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw DegenerateConfiguration(
        "triangulate: rays are (nearly) parallel, normal matrix is ill conditioned");
  }
  Triangulation out;
  const auto solver = normal.ldlt();
  Eigen::Vector3d x = solver.solve(rhs);
  // One refinement step with the residual of the normal equations evaluated
  // in extended precision; near-parallel pairs lose digits otherwise.
  using Vec3L = Eigen::Matrix<long double, 3, 1>;
  using Mat3L = Eigen::Matrix<long double, 3, 3>;
  Mat3L normal_l = Mat3L::Zero();
  Vec3L rhs_l = Vec3L::Zero();
  for (const Ray& r : rays) {
    const Vec3L d = r.direction.cast<long double>();
    const Mat3L proj = Mat3L::Identity() - d * d.transpose() / d.squaredNorm();
    normal_l += proj;
    rhs_l += proj * (r.origin - centre).cast<long double>();
  }
  const Vec3L residual = rhs_l - normal_l * x.cast<long double>();
  x += solver.solve(residual.cast<double>());
  out.point = centre + x;
  double sum_sq = 0.0;
  for (const Ray& r : rays) {
    const double d = point_ray_distance(out.point, r);
    sum_sq += d * d;
  }
  out.residual_mm = std::sqrt(sum_sq / static_cast<double>(rays.size()));
  return out;
}

double point_ray_distance(const Point3& p, const Ray& r) {
  return (perpendicular_projector(r.direction) * (p - r.origin)).norm();
}

double pairwise_ray_distance(const Ray& a, const Ray& b) {
  const Eigen::Vector3d offset = a.origin - b.origin;
  const Eigen::Vector3d n = a.direction.cross(b.direction);
  const double n_norm = n.norm();
  if (n_norm < kParallelTolerance) {
    return (offset - offset.dot(a.direction) * a.direction).norm();
  }
  return std::abs(offset.dot(n)) / n_norm;
}

std::vector<CameraCalibration> parse_calibrations(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("calibration: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("calibration: expected a JSON array");
  std::vector<CameraCalibration> cameras;
  for (const auto& cam : doc) {
    try {
      const auto id = cam.at("camera_id").get<std::string>();
      const auto values = cam.at("P").get<std::vector<double>>();
      if (values.size() != 12) {
        throw DataError("calibration: camera " + id + " P needs 12 values");
      }
      ProjectionMatrix p;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) p(r, c) = values[r * 4 + c];
      const double mm = units_to_mm(cam.value("units", std::string("mm")));
      // P maps world points in file units; X_file = X_mm / mm.
      p.leftCols<3>() /= mm;
      if (find_camera(cameras, id) >= 0) {
        throw DataError("calibration: duplicate camera_id " + id);
      }
      cameras.emplace_back(id, p, cam.at("width").get<int>(),
                           cam.at("height").get<int>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("calibration: ") + e.what());
    }
  }
  if (cameras.empty()) throw DataError("calibration: no cameras");
  return cameras;
}

std::vector<CameraCalibration> load_calibrations(const std::string& path) {
  return parse_calibrations(read_text_file(path));
}

void save_calibrations(const std::string& path,
                       std::span<const CameraCalibration> cameras) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& cam : cameras) {
    std::vector<double> values;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) values.push_back(cam.projection()(r, c));
    doc.push_back({{"camera_id", cam.camera_id()},
                   {"P", values},
                   {"width", cam.image_width()},
                   {"height", cam.image_height()},
                   {"units", "mm"}});
  }
  write_text_file_atomic(path, doc.dump(2) + "\n");
}

int find_camera(std::span<const CameraCalibration> cameras,
                const std::string& camera_id) {
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    if (cameras[i].camera_id() == camera_id) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace posefuse
