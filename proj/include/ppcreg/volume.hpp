#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ppcreg/geometry.hpp"

namespace ppcreg {

/// Scalar attenuation field (1/mm) on a regular grid. Voxel (0,0,0) has its
/// center at `origin`; storage is x-fastest.
class Volume {
 public:
  Volume(const Eigen::Vector3i& dims, const Vec3& spacing, const Vec3& origin);
  Volume(const Eigen::Vector3i& dims, const Vec3& spacing, const Vec3& origin,
         std::vector<float> data);

  const Eigen::Vector3i& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }
  std::size_t voxel_count() const { return data_.size(); }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_.x()) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.y()) * k);
  }
  float at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  float& at(int i, int j, int k) { return data_[index(i, j, k)]; }

  Vec3 voxel_center(int i, int j, int k) const {
    return origin_ + spacing_.cwiseProduct(Vec3(i, j, k));
  }
  /// Object-frame position -> continuous voxel coordinates.
  Vec3 to_voxel(const Vec3& x_obj) const { return (x_obj - origin_).cwiseQuotient(spacing_); }

  /// Trilinear interpolation with zero padding outside the grid.
  double sample(const Vec3& x_obj) const;

  /// Box outside which `sample` is identically zero (one voxel past the
  /// outermost centers).
  Vec3 support_min() const { return origin_ - spacing_; }
  Vec3 support_max() const { return origin_ + spacing_.cwiseProduct(dims_.cast<double>()); }

  /// Throws invalid-argument if values are negative or non-finite.
  void validate_data() const;

 private:
  Eigen::Vector3i dims_;
  Vec3 spacing_;
  Vec3 origin_;
  std::vector<float> data_;
};

enum class PhantomKind { kSphere, kBox, kTube, kTwoSpheres };

const char* to_string(PhantomKind kind);
/// Throws invalid-argument for unknown names.
PhantomKind phantom_kind_from_string(const std::string& name);

struct PhantomParams {
  double density = 0.02;  // 1/mm
  double radius = 20.0;   // sphere, tube, first of two-spheres
  double radius2 = 14.0;  // second of two-spheres
  double separation = 30.0;  // center distance of two-spheres, along x
  Vec3 half_extent{18.0, 12.0, 24.0};  // box
  double half_length = 24.0;  // tube, along z
  // Multiplicative sinusoidal texture inside the solid (0 disables).
  double texture_amplitude = 0.0;
  double texture_period_mm = 9.0;
};

/// Analytic solid rasterized with a smooth 0.5 erfc(d / h) edge, h one voxel
/// and d the signed distance to the surface, centered on the object-frame origin.
Volume make_phantom(PhantomKind kind, const Eigen::Vector3i& dims, const Vec3& spacing,
                    const PhantomParams& params);

struct SurfacePoint {
  Vec3 w_obj;
  Vec3 g_obj;  // unit
};

/// Default candidate threshold for unit-density-scale phantoms (1/mm^2).
inline constexpr double kDefaultGradThreshold = 0.003;

/// Central-difference gradient (one-sided at the border); voxels whose
/// gradient magnitude reaches `grad_threshold` are candidates, uniformly
/// subsampled to `max_points` with `seed`. Throws empty-surface.
std::vector<SurfacePoint> extract_surface_points(const Volume& v, double grad_threshold,
                                                 std::size_t max_points, std::uint64_t seed);

struct ContourSet {
  std::vector<Vec3> w_cam;
  std::vector<Vec3> g_cam;
  std::vector<Vec2> p;
  std::vector<std::size_t> source_index;  // into the surface point list

  std::size_t size() const { return w_cam.size(); }
};

struct ContourParams {
  double tau = 0.15;
  std::size_t max_contours = 800;
};

inline constexpr std::size_t kMinContours = 6;

/// Keeps surface points whose gradient is near-perpendicular to the viewing
/// ray, |g . r| <= tau, at pose `t`. Points behind the source are dropped.
/// More than `max_contours` survivors are thinned with an even stride.
/// Throws insufficient-contours below kMinContours survivors.
ContourSet select_apparent_contours(const std::vector<SurfacePoint>& points,
                                    const RigidTransform& t, const CameraModel& cam,
                                    const ContourParams& params = {});

}  // namespace ppcreg
