#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ppcreg/correspondence.hpp"
#include "ppcreg/geometry.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

using RowMatrix6 = Eigen::Matrix<double, Eigen::Dynamic, 6>;

/// Linearized point-to-plane constraints, one row per correspondence.
///
/// Each contour point w (camera frame) with surface gradient g and matched
/// pixel p' defines the plane through the source spanned by s = w x g and the
/// back-projected ray r' of p'. With unit normal n = (s x r') / |s x r'|,
/// requiring the displaced point w + omega x w + t to lie on that plane gives
///
///     (n x w)^T omega - n^T t = n^T w,
///
/// so A[i] = [(n x w)^T, -n^T] and b[i] = n^T w. Rows whose plane is
/// degenerate or whose match is invalid are kept as zero rows with used = false.
struct PPCSystem {
  RowMatrix6 a;
  Eigen::VectorXd b;
  std::vector<Vec3> normals;
  std::vector<Vec3> points;  // w per row; drives the default omega scale
  std::vector<bool> used;

  std::size_t rows() const { return static_cast<std::size_t>(b.size()); }
  std::size_t used_count() const;

  /// Wraps an explicit (A, b) pair with every row used and no geometry.
  static PPCSystem from_matrix(const RowMatrix6& a, const Eigen::VectorXd& b);
};

struct SolverConfig {
  double tikhonov_lambda = 1e-6;
  std::size_t min_rows = 6;
  /// Scale (mm) applied to the rotational columns before regularizing; unset
  /// means the mean |w| over used rows with positive weight (1 when the system
  /// carries no points).
  std::optional<double> omega_scale;
};

inline constexpr double kDegeneratePlaneTol = 1e-8;

/// Throws insufficient-constraints when fewer than `min_rows` rows are usable.
PPCSystem build_ppc_system(const ContourSet& contours, const CorrespondenceSet& c,
                           const CameraModel& cam, std::size_t min_rows = 6);

/// argmin |W (A dv - b)|^2 + lambda |D dv|^2 with D = diag(s, s, s, 1, 1, 1),
/// s the omega scale. Solved through a column-pivoted QR of the stacked
/// [W A D^-1; sqrt(lambda) I] system, whose R factor is the Cholesky factor of
/// the regularized normal matrix.
///
/// Throws insufficient-constraints when fewer than `min_rows` rows carry
/// positive weight, rank-deficient when lambda = 0 and rank(W A) < 6.
MotionVector solve_ppc(const PPCSystem& sys, const WeightVector& w, const SolverConfig& cfg = {});

struct PPCJacobians {
  Eigen::Matrix<double, 6, Eigen::Dynamic> d_dv_d_b;
  Eigen::Matrix<double, 6, Eigen::Dynamic> d_dv_d_w;
};

/// Derivatives of the solve_ppc solution with respect to every b[i] and every
/// weight w[i], by implicit differentiation of
/// (A^T W^2 A + lambda D^2) dv = A^T W^2 b.
PPCJacobians ppc_jacobians(const PPCSystem& sys, const WeightVector& w,
                           const SolverConfig& cfg = {});

inline RigidTransform dv_to_transform(const MotionVector& dv) { return se3_exp(dv); }

}  // namespace ppcreg
