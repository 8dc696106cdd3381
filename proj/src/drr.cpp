#include "ppcreg/drr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ppcreg/errors.hpp"

namespace ppcreg {

double default_step_mm(const Volume& v) { return 0.5 * v.spacing().minCoeff(); }

namespace {

// Slab test of the ray o + s*d against [lo, hi]; returns false on a miss.
bool clip_ray(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi, double& s0,
              double& s1) {
  s0 = 0.0;
  s1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    s0 = std::max(s0, ta);
    s1 = std::min(s1, tb);
    if (s0 >= s1) return false;
  }
  return true;
}

}  // namespace

Image2D render_drr(const Volume& v, const RigidTransform& t, const CameraModel& cam,
                   double step_mm) {
  if (!(step_mm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ray step must be positive");
  }
  const Vec3 lo = v.support_min();
  const Vec3 hi = v.support_max();
  bool any_in_front = false;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(),
                      (c & 4) ? hi.z() : lo.z());
    if (apply(t, corner).z() > 0.0) any_in_front = true;
  }
  if (!any_in_front) {
    throw Error(ErrorCode::kNothingVisible, "volume lies behind the source");
  }

  Image2D img = Image2D::for_camera(cam);
  const Mat3 rt = t.rotation().transpose();
  const Vec3 source_obj = -(rt * t.translation());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Vec3 dir = rt * backproject_ray(cam, Vec2(x, y));
      double s0, s1;
      if (!clip_ray(source_obj, dir, lo, hi, s0, s1)) continue;
      const double len = s1 - s0;
      const auto n = static_cast<long>(std::ceil(len / step_mm));
      if (n <= 0) continue;
      const double h = len / static_cast<double>(n);
      double sum = 0.0;
      for (long k = 0; k < n; ++k) {
        sum += v.sample(source_obj + dir * (s0 + (static_cast<double>(k) + 0.5) * h));
      }
      img.at(x, y) = static_cast<float>(sum * h);
    }
  }
  return img;
}

Image2D render_overlay(const Image2D& image, const ContourSet& contours) {
  Image2D out = image;
  if (contours.size() == 0) return out;
  float peak = 0.0f;
  for (float x : image.data) peak = std::max(peak, x);
  const float marker = peak > 0.0f ? 1.1f * peak : 1.0f;
  for (const Vec2& p : contours.p) {
    const long x = std::lround(p.x());
    const long y = std::lround(p.y());
    if (x < 0 || y < 0 || x >= out.width || y >= out.height) continue;
    out.at(static_cast<int>(x), static_cast<int>(y)) = marker;
  }
  return out;
}

}  // namespace ppcreg
