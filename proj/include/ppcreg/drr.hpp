#pragma once

#include <vector>

#include "ppcreg/geometry.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

/// Detector image of line integrals; row-major, pixel (x, y) centered at
/// integer detector coordinates.
struct Image2D {
  int width = 0;
  int height = 0;
  double pixel_spacing = 1.0;
  std::vector<float> data;

  Image2D() = default;
  Image2D(int w, int h, double spacing) : width(w), height(h), pixel_spacing(spacing),
      data(static_cast<std::size_t>(w) * h, 0.0f) {}
  static Image2D for_camera(const CameraModel& cam) {
    return {cam.width(), cam.height(), cam.pixel_spacing};
  }

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  bool same_geometry(const Image2D& o) const {
    return width == o.width && height == o.height && pixel_spacing == o.pixel_spacing;
  }
};

/// Default ray-marching step: half the smallest voxel spacing.
double default_step_mm(const Volume& v);

/// Digitally reconstructed radiograph of `v` placed at pose `t`: for each
/// pixel the source ray is clipped to the volume support and the trilinear
/// attenuation is integrated with a midpoint rule (step <= step_mm). Rays that
/// miss the support are exactly 0. Throws nothing-visible when the whole
/// support lies at or behind the source plane.
Image2D render_drr(const Volume& v, const RigidTransform& t, const CameraModel& cam,
                   double step_mm);

/// Copy of `image` with the pixel nearest each contour projection set to
/// 1.1 * max(image) (1.0 for an all-zero image). Off-detector points are skipped.
Image2D render_overlay(const Image2D& image, const ContourSet& contours);

}  // namespace ppcreg
