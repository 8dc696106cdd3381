#include "ppcreg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <random>
#include <string>

#include "ppcreg/errors.hpp"

namespace ppcreg {

Volume::Volume(const Eigen::Vector3i& dims, const Vec3& spacing, const Vec3& origin)
    : Volume(dims, spacing, origin,
             std::vector<float>(static_cast<std::size_t>(std::max(dims.x(), 0)) *
                                    std::max(dims.y(), 0) * std::max(dims.z(), 0),
                                0.0f)) {}

Volume::Volume(const Eigen::Vector3i& dims, const Vec3& spacing, const Vec3& origin,
               std::vector<float> data)
    : dims_(dims), spacing_(spacing), origin_(origin), data_(std::move(data)) {
  if ((dims.array() < 2).any()) {
    throw Error(ErrorCode::kInvalidArgument, "volume dims must be >= 2 per axis");
  }
  if (!spacing.allFinite() || (spacing.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "volume spacing must be positive");
  }
  if (!origin.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "volume origin must be finite");
  }
  const auto expected = static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  if (data_.size() != expected) {
    throw Error(ErrorCode::kInvalidArgument, "volume payload has " + std::to_string(data_.size()) +
                                                 " voxels, expected " + std::to_string(expected));
  }
}

void Volume::validate_data() const {
  for (float x : data_) {
    if (!std::isfinite(x) || x < 0.0f) {
      throw Error(ErrorCode::kInvalidArgument, "volume values must be finite and >= 0");
    }
  }
}

double Volume::sample(const Vec3& x_obj) const {
  const Vec3 u = to_voxel(x_obj);
  const double fx = std::floor(u.x()), fy = std::floor(u.y()), fz = std::floor(u.z());
  const int i0 = static_cast<int>(fx), j0 = static_cast<int>(fy), k0 = static_cast<int>(fz);
  if (i0 < -1 || j0 < -1 || k0 < -1 || i0 >= dims_.x() || j0 >= dims_.y() || k0 >= dims_.z()) {
    return 0.0;
  }
  const double tx = u.x() - fx, ty = u.y() - fy, tz = u.z() - fz;

  if (i0 >= 0 && j0 >= 0 && k0 >= 0 && i0 + 1 < dims_.x() && j0 + 1 < dims_.y() &&
      k0 + 1 < dims_.z()) {
    const std::size_t sx = 1;
    const auto sy = static_cast<std::size_t>(dims_.x());
    const std::size_t sz = sy * static_cast<std::size_t>(dims_.y());
    const float* c = &data_[index(i0, j0, k0)];
    const double c00 = c[0] * (1 - tx) + c[sx] * tx;
    const double c10 = c[sy] * (1 - tx) + c[sy + sx] * tx;
    const double c01 = c[sz] * (1 - tx) + c[sz + sx] * tx;
    const double c11 = c[sz + sy] * (1 - tx) + c[sz + sy + sx] * tx;
    return (c00 * (1 - ty) + c10 * ty) * (1 - tz) + (c01 * (1 - ty) + c11 * ty) * tz;
  }

  auto value = [&](int i, int j, int k) -> double {
    if (i < 0 || j < 0 || k < 0 || i >= dims_.x() || j >= dims_.y() || k >= dims_.z()) {
      return 0.0;
    }
    return data_[index(i, j, k)];
  };
  const double c00 = value(i0, j0, k0) * (1 - tx) + value(i0 + 1, j0, k0) * tx;
  const double c10 = value(i0, j0 + 1, k0) * (1 - tx) + value(i0 + 1, j0 + 1, k0) * tx;
  const double c01 = value(i0, j0, k0 + 1) * (1 - tx) + value(i0 + 1, j0, k0 + 1) * tx;
  const double c11 = value(i0, j0 + 1, k0 + 1) * (1 - tx) + value(i0 + 1, j0 + 1, k0 + 1) * tx;
  const double c0 = c00 * (1 - ty) + c10 * ty;
  const double c1 = c01 * (1 - ty) + c11 * ty;
  return c0 * (1 - tz) + c1 * tz;
}

const char* to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::kSphere: return "sphere";
    case PhantomKind::kBox: return "box";
    case PhantomKind::kTube: return "tube";
    case PhantomKind::kTwoSpheres: return "two-spheres";
  }
  return "unknown";
}

PhantomKind phantom_kind_from_string(const std::string& name) {
  for (auto kind : {PhantomKind::kSphere, PhantomKind::kBox, PhantomKind::kTube,
                    PhantomKind::kTwoSpheres}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown phantom kind '" + name + "'");
}

namespace {

// Occupancy for signed distance `sd` (negative inside): an erfc edge with
// length scale `h`, cut to exactly 0 / 1 beyond 4 h (jump below 1e-8).
double ramp(double sd, double h) {
  if (sd >= 4.0 * h) return 0.0;
  if (sd <= -4.0 * h) return 1.0;
  return 0.5 * std::erfc(sd / h);
}

double occupancy(PhantomKind kind, const Vec3& x, const PhantomParams& p, double h) {
  switch (kind) {
    case PhantomKind::kSphere:
      return ramp(x.norm() - p.radius, h);
    case PhantomKind::kBox: {
      double occ = 1.0;
      for (int a = 0; a < 3; ++a) occ *= ramp(std::abs(x[a]) - p.half_extent[a], h);
      return occ;
    }
    case PhantomKind::kTube:
      return ramp(x.head<2>().norm() - p.radius, h) * ramp(std::abs(x.z()) - p.half_length, h);
    case PhantomKind::kTwoSpheres: {
      const Vec3 c1(-p.separation / 2.0, 0.0, 0.0);
      const Vec3 c2(p.separation / 2.0, 0.0, 0.0);
      return std::max(ramp((x - c1).norm() - p.radius, h), ramp((x - c2).norm() - p.radius2, h));
    }
  }
  return 0.0;
}

}  // namespace

Volume make_phantom(PhantomKind kind, const Eigen::Vector3i& dims, const Vec3& spacing,
                    const PhantomParams& params) {
  if ((dims.array() < 16).any()) {
    throw Error(ErrorCode::kInvalidArgument, "phantom dims must be >= 16 per axis");
  }
  if (!(params.density > 0.0) || !std::isfinite(params.density)) {
    throw Error(ErrorCode::kInvalidArgument, "phantom density must be positive");
  }
  switch (kind) {
    case PhantomKind::kSphere:
      if (!(params.radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "radius must be > 0");
      break;
    case PhantomKind::kBox:
      if (!(params.half_extent.array() > 0.0).all()) {
        throw Error(ErrorCode::kInvalidArgument, "box half extents must be > 0");
      }
      break;
    case PhantomKind::kTube:
      if (!(params.radius > 0.0) || !(params.half_length > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "tube radius and half length must be > 0");
      }
      break;
    case PhantomKind::kTwoSpheres:
      if (!(params.radius > 0.0) || !(params.radius2 > 0.0) || !(params.separation >= 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "two-spheres radii must be > 0");
      }
      break;
  }
  if (params.texture_amplitude < 0.0 || params.texture_amplitude >= 1.0 ||
      !(params.texture_period_mm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "texture amplitude must be in [0,1), period > 0");
  }

  const Vec3 origin = -0.5 * spacing.cwiseProduct((dims.array() - 1).matrix().cast<double>());
  Volume vol(dims, spacing, origin);
  const double h = spacing.minCoeff();
  const double kw = 2.0 * std::numbers::pi / params.texture_period_mm;
  for (int k = 0; k < dims.z(); ++k) {
    for (int j = 0; j < dims.y(); ++j) {
      for (int i = 0; i < dims.x(); ++i) {
        const Vec3 x = vol.voxel_center(i, j, k);
        double value = params.density * occupancy(kind, x, params, h);
        if (value > 0.0 && params.texture_amplitude > 0.0) {
          value *= 1.0 + params.texture_amplitude * std::sin(kw * x.x()) * std::sin(kw * x.y()) *
                             std::sin(kw * x.z());
        }
        vol.at(i, j, k) = static_cast<float>(value);
      }
    }
  }
  return vol;
}

std::vector<SurfacePoint> extract_surface_points(const Volume& v, double grad_threshold,
                                                 std::size_t max_points, std::uint64_t seed) {
  const Eigen::Vector3i& d = v.dims();
  std::vector<SurfacePoint> candidates;

  auto axis_derivative = [&](int i, int j, int k, int axis) {
    Eigen::Vector3i lo(i, j, k), hi(i, j, k);
    if (lo[axis] > 0) lo[axis] -= 1;
    if (hi[axis] < d[axis] - 1) hi[axis] += 1;
    const double steps = hi[axis] - lo[axis];
    return (v.at(hi.x(), hi.y(), hi.z()) - static_cast<double>(v.at(lo.x(), lo.y(), lo.z()))) /
           (steps * v.spacing()[axis]);
  };

  for (int k = 0; k < d.z(); ++k) {
    for (int j = 0; j < d.y(); ++j) {
      for (int i = 0; i < d.x(); ++i) {
        const Vec3 grad(axis_derivative(i, j, k, 0), axis_derivative(i, j, k, 1),
                        axis_derivative(i, j, k, 2));
        const double mag = grad.norm();
        if (mag > 0.0 && mag >= grad_threshold) {
          candidates.push_back({v.voxel_center(i, j, k), grad / mag});
        }
      }
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::kEmptySurface, "no voxel reaches the gradient threshold");
  }
  if (candidates.size() <= max_points) return candidates;

  std::vector<SurfacePoint> picked;
  picked.reserve(max_points);
  std::mt19937_64 rng(seed);
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(picked), max_points, rng);
  return picked;
}

ContourSet select_apparent_contours(const std::vector<SurfacePoint>& points,
                                    const RigidTransform& t, const CameraModel& cam,
                                    const ContourParams& params) {
  if (points.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no surface points");
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 w = apply(t, points[i].w_obj);
    if (w.z() <= kMinDepthMm) continue;
    const Vec3 g = t.rotation() * points[i].g_obj;
    if (std::abs(g.dot(w.normalized())) <= params.tau) kept.push_back(i);
  }
  if (kept.size() < kMinContours) {
    throw Error(ErrorCode::kInsufficientContours,
                std::to_string(kept.size()) + " apparent-contour points survive selection");
  }
  if (params.max_contours >= kMinContours && kept.size() > params.max_contours) {
    std::vector<std::size_t> thinned(params.max_contours);
    for (std::size_t k = 0; k < params.max_contours; ++k) {
      thinned[k] = kept[k * kept.size() / params.max_contours];
    }
    kept = std::move(thinned);
  }

  ContourSet out;
  out.w_cam.reserve(kept.size());
  out.g_cam.reserve(kept.size());
  out.p.reserve(kept.size());
  out.source_index = kept;
  for (std::size_t i : kept) {
    const Vec3 w = apply(t, points[i].w_obj);
    out.w_cam.push_back(w);
    out.g_cam.push_back((t.rotation() * points[i].g_obj).normalized());
    out.p.push_back(project(cam, w));
  }
  return out;
}

}  // namespace ppcreg
