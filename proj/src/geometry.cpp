#include "ppcreg/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "ppcreg/errors.hpp"

namespace ppcreg {

namespace {

constexpr double kOrthoTol = 1e-9;

bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite transform entries");
  }
  const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > kOrthoTol || std::abs(rotation.determinant() - 1.0) > kOrthoTol) {
    throw Error(ErrorCode::kInvalidArgument,
                "rotation is not orthonormal with det +1 (error " + std::to_string(ortho_err) + ")");
  }
}

RigidTransform RigidTransform::from_euler(const Vec3& a, const Vec3& translation) {
  const Mat3 r = (Eigen::AngleAxisd(a.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(a.y(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(a.x(), Vec3::UnitX()))
                     .toRotationMatrix();
  return {r, translation};
}

RigidTransform RigidTransform::from_euler_deg(const Vec3& angles_deg, const Vec3& translation) {
  return from_euler(angles_deg * (std::numbers::pi / 180.0), translation);
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_), Unchecked{}};
}

Eigen::Matrix<double, 3, 4> RigidTransform::matrix3x4() const {
  Eigen::Matrix<double, 3, 4> m;
  m << rotation_, translation_;
  return m;
}

CameraModel CameraModel::make(int width, int height, double pixel_spacing_mm,
                              double source_to_detector_mm) {
  CameraModel cam;
  const double f = source_to_detector_mm / pixel_spacing_mm;
  cam.focal_px = {f, f};
  cam.principal_point_px = {width / 2.0, height / 2.0};
  cam.detector_res = {width, height};
  cam.pixel_spacing = pixel_spacing_mm;
  cam.source_to_detector = source_to_detector_mm;
  cam.validate();
  return cam;
}

void CameraModel::validate() const {
  if (!(focal_px.x() > 0.0 && focal_px.y() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal length must be positive");
  }
  if (!(pixel_spacing > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pixel spacing must be positive");
  }
  if (detector_res.x() < 1 || detector_res.y() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "detector resolution must be positive");
  }
  if (!on_detector(principal_point_px)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point outside the detector");
  }
}

bool CameraModel::on_detector(const Vec2& p) const {
  // Pixel centers sit at integer coordinates; the detector covers half a pixel
  // beyond the outermost centers.
  return p.allFinite() && p.x() >= -0.5 && p.y() >= -0.5 && p.x() <= detector_res.x() - 0.5 &&
         p.y() <= detector_res.y() - 0.5;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

RigidTransform se3_exp_unchecked(const Mat3& r, const Vec3& t) {
  return {r, t, RigidTransform::Unchecked{}};
}

RigidTransform se3_exp(const MotionVector& dv) {
  if (!all_finite(dv.omega) || !all_finite(dv.trans)) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite motion vector");
  }
  const double theta = dv.omega.norm();
  if (theta >= std::numbers::pi) {
    throw Error(ErrorCode::kInvalidArgument, "rotation increment must be below pi");
  }
  const Mat3 k = skew(dv.omega);
  const Mat3 k2 = k * k;
  const double theta2 = theta * theta;

  // Rodrigues coefficients; Taylor forms near zero avoid cancellation.
  double a, b, c;
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    c = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 rot = Mat3::Identity() + a * k + b * k2;
  const Mat3 v = Mat3::Identity() + b * k + c * k2;
  return se3_exp_unchecked(rot, v * dv.trans);
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_,
          RigidTransform::Unchecked{}};
}

Vec2 project(const CameraModel& cam, const Vec3& x_cam) {
  if (!(x_cam.z() > kMinDepthMm)) {
    throw Error(ErrorCode::kBehindCamera, "point at depth " + std::to_string(x_cam.z()) + " mm");
  }
  return cam.principal_point_px + cam.focal_px.cwiseProduct(x_cam.head<2>() / x_cam.z());
}

Vec3 backproject_ray(const CameraModel& cam, const Vec2& p) {
  const Vec2 xy = (p - cam.principal_point_px).cwiseQuotient(cam.focal_px);
  return Vec3(xy.x(), xy.y(), 1.0).normalized();
}

}  // namespace ppcreg
