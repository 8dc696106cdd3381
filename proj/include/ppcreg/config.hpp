#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppcreg/evaluation.hpp"
#include "ppcreg/geometry.hpp"
#include "ppcreg/registration.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

/// Everything a batch experiment needs. Defaults reproduce the sphere
/// convergence benchmark with oracle correspondences.
struct ExperimentConfig {
  PhantomKind phantom_kind = PhantomKind::kSphere;
  Eigen::Vector3i phantom_dims{64, 64, 64};
  Vec3 phantom_spacing{1.0, 1.0, 1.0};
  PhantomParams phantom;

  int camera_width = 616;
  int camera_height = 480;
  double camera_pixel_spacing = 0.616;
  double camera_source_to_detector = 1200.0;

  double grad_threshold = kDefaultGradThreshold;
  std::size_t max_points = 4000;
  std::uint64_t surface_seed = 0;

  LoopConfig loop;
  SamplingRanges sampling;
  std::vector<View> views;  // empty selects a single "ap" view at (0, 0, 800) mm
  EvalThresholds thresholds;
  int jobs = 1;
  std::filesystem::path output_dir = ".";

  CameraModel camera() const;
  Volume make_volume() const;
  std::vector<View> effective_views() const;
};

/// Flat `section.key = value` text; `#` starts a comment, blank lines are
/// ignored, vector values are whitespace separated. Unknown keys, repeated
/// keys and malformed values raise a format error naming the line.
///
/// Keys (defaults in ExperimentConfig):
///   phantom.{kind, dims, spacing, density, radius, radius2, separation,
///            half_extent, half_length, texture_amplitude, texture_period_mm}
///   camera.{width, height, pixel_spacing, source_to_detector}
///   surface.{grad_threshold, max_points, seed}
///   contours.{tau, max_contours}
///   estimator.{kind, external_dir}
///   patch.{patch_radius_px, search_radius_px, min_ncc}
///   weighting.{strategy, delta_px}
///   loop.{max_iterations, rot_tol, trans_tol, step_mm}
///   solver.{tikhonov_lambda, min_rows}
///   noise.{sigma_px, outlier_frac, outlier_mag_px, seed}
///   sampling.{trans_range_mm, rot_range_deg, mtre_max_mm, n_samples, seed}
///   eval.{success_mm, bin_mm, sr_min, jobs}
///   view.<name> = rx ry rz tx ty tz   (degrees, mm; repeatable per name)
///   output.dir
ExperimentConfig parse_config(std::istream& is, const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace ppcreg
