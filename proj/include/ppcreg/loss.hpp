#pragma once

#include <vector>

#include "ppcreg/geometry.hpp"

namespace ppcreg {

struct LossConfig {
  double alpha = 1.0;   // flow term
  double beta = 0.5;    // registration term
  double lambda = 1e-3; // motion regularizer
  double zeta = 1e-5;   // weight decay
  double gamma = 0.8;   // flow discount
  int n_fl = 1;         // flow estimates per sequence

  /// Throws invalid-argument on negative coefficients, gamma outside (0,1]
  /// or n_fl < 1.
  void validate() const;
};

/// Mean over points of |pred(w) - gt(w)|_1 (mm). Throws on an empty set.
double registration_loss(const RigidTransform& pred, const RigidTransform& gt,
                         const std::vector<Vec3>& points);

/// Discounted masked end-point error over a sequence of flow estimates:
///   sum_j gamma^(n_fl - j) * (1/N_cp) * sum_{masked i} |f_j[i] - f_gt[i]|_1,
/// j = 1..n_fl, N_cp the number of masked-in points.
double flow_loss(const std::vector<std::vector<Vec2>>& flow_seq, const std::vector<Vec2>& flow_gt,
                 const std::vector<bool>& mask, const LossConfig& cfg);

/// alpha*flow + beta*reg + lambda*|dv|_2 + (zeta/2)*weight_norm_sq.
double combined_loss(double flow_term, double reg_term, const MotionVector& dv,
                     double weight_norm_sq, const LossConfig& cfg);

}  // namespace ppcreg
