#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ppcreg/errors.hpp"
#include "ppcreg/geometry.hpp"
#include "ppcreg/volume.hpp"

#define EXPECT_PPC_ERROR(stmt, expected_code)                                         \
  do {                                                                                \
    try {                                                                             \
      stmt;                                                                           \
      ADD_FAILURE() << "expected " << ::ppcreg::to_string(expected_code);             \
    } catch (const ::ppcreg::Error& e) {                                              \
      EXPECT_EQ(e.code(), expected_code) << e.what();                                 \
    }                                                                                 \
  } while (0)

namespace ppcreg::testing {

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Vec3 random_box(std::mt19937_64& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  return {u(rng), u(rng), u(rng)};
}

/// Rotation of up to `max_angle` rad about a random axis plus translation in a box.
inline RigidTransform random_pose(std::mt19937_64& rng, double max_angle, double half_trans,
                                  const Vec3& center = Vec3::Zero()) {
  std::uniform_real_distribution<double> a(0.0, max_angle);
  const Mat3 r = Eigen::AngleAxisd(a(rng), random_unit(rng)).toRotationMatrix();
  return RigidTransform(r, center + random_box(rng, half_trans));
}

inline RigidTransform view_pose(double z = 800.0) {
  return RigidTransform::from_translation(Vec3(0.0, 0.0, z));
}

/// Sphere phantom used by the loop tests: 64^3 at 1 mm, r = 20 mm.
inline const Volume& sphere64() {
  static const Volume v = make_phantom(PhantomKind::kSphere, Eigen::Vector3i::Constant(64),
                                       Vec3::Ones(), PhantomParams{});
  return v;
}

inline const std::vector<SurfacePoint>& sphere64_surface() {
  static const std::vector<SurfacePoint> s = extract_surface_points(sphere64(), kDefaultGradThreshold, 4000, 0);
  return s;
}

inline const Volume& box64() {
  static const Volume v = make_phantom(PhantomKind::kBox, Eigen::Vector3i::Constant(64),
                                       Vec3::Ones(), PhantomParams{});
  return v;
}

inline const std::vector<SurfacePoint>& box64_surface() {
  static const std::vector<SurfacePoint> s = extract_surface_points(box64(), kDefaultGradThreshold, 4000, 0);
  return s;
}

}  // namespace ppcreg::testing
