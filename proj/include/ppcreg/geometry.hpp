#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ppcreg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Camera frame convention: X-ray source at the origin, optical axis +z toward
// the detector. Every pose maps object-frame points into this frame.

/// Rigid object->camera transform, x_cam = rotation * x_obj + translation (mm).
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  /// Throws invalid-argument unless `rotation` is orthonormal with det +1
  /// (tolerance 1e-9) and every entry is finite.
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Rotation = Rz * Ry * Rx with angles in radians.
  static RigidTransform from_euler(const Vec3& angles_rad, const Vec3& translation);
  static RigidTransform from_euler_deg(const Vec3& angles_deg, const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  RigidTransform inverse() const;
  Eigen::Matrix<double, 3, 4> matrix3x4() const;

 private:
  struct Unchecked {};
  RigidTransform(const Mat3& r, const Vec3& t, Unchecked) : rotation_(r), translation_(t) {}
  friend RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
  friend RigidTransform se3_exp_unchecked(const Mat3& r, const Vec3& t);

  Mat3 rotation_;
  Vec3 translation_;
};

/// 6-DOF increment in the camera frame: rotation vector (rad) and translation (mm).
struct MotionVector {
  Vec3 omega = Vec3::Zero();
  Vec3 trans = Vec3::Zero();

  Vec6 as_vector() const {
    Vec6 v;
    v << omega, trans;
    return v;
  }
  static MotionVector from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
  double norm() const { return as_vector().norm(); }
};

struct CameraModel {
  Vec2 focal_px{1948.051948051948, 1948.051948051948};
  Vec2 principal_point_px{308.0, 240.0};
  Eigen::Vector2i detector_res{616, 480};
  double pixel_spacing = 0.616;
  double source_to_detector = 1200.0;

  /// Detector of the given size; focal length derived from the source-to-detector
  /// distance and pixel spacing, principal point at the detector center.
  static CameraModel make(int width, int height, double pixel_spacing_mm,
                          double source_to_detector_mm);
  static CameraModel default_detector() { return make(616, 480, 0.616, 1200.0); }

  /// Throws invalid-argument on non-positive focal/spacing or a principal point
  /// outside the detector.
  void validate() const;

  int width() const { return detector_res.x(); }
  int height() const { return detector_res.y(); }
  bool on_detector(const Vec2& p) const;
};

inline constexpr double kMinDepthMm = 1e-6;

Mat3 skew(const Vec3& v);

/// Exponential map of the twist (omega; trans). Throws invalid-argument on
/// non-finite input or |omega| >= pi.
RigidTransform se3_exp(const MotionVector& dv);

/// (a o b)(x) = a(b(x)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

inline Vec3 apply(const RigidTransform& t, const Vec3& x) {
  return t.rotation() * x + t.translation();
}

/// Pinhole projection of a camera-frame point; throws behind-camera when
/// z <= kMinDepthMm.
Vec2 project(const CameraModel& cam, const Vec3& x_cam);

/// Unit direction from the source through pixel `p`.
Vec3 backproject_ray(const CameraModel& cam, const Vec2& p);

}  // namespace ppcreg
