#include "ppcreg/loss.hpp"

#include <cmath>
#include <string>

#include "ppcreg/errors.hpp"

namespace ppcreg {

void LossConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || lambda < 0.0 || zeta < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "loss coefficients must be >= 0");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must lie in (0, 1]");
  }
  if (n_fl < 1) throw Error(ErrorCode::kInvalidArgument, "n_fl must be >= 1");
}

double registration_loss(const RigidTransform& pred, const RigidTransform& gt,
                         const std::vector<Vec3>& points) {
  if (points.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "registration loss needs at least one point");
  }
  double sum = 0.0;
  for (const Vec3& w : points) sum += (apply(pred, w) - apply(gt, w)).lpNorm<1>();
  return sum / static_cast<double>(points.size());
}

double flow_loss(const std::vector<std::vector<Vec2>>& flow_seq, const std::vector<Vec2>& flow_gt,
                 const std::vector<bool>& mask, const LossConfig& cfg) {
  cfg.validate();
  if (flow_seq.size() != static_cast<std::size_t>(cfg.n_fl)) {
    throw Error(ErrorCode::kInvalidArgument, "flow sequence has " + std::to_string(flow_seq.size()) +
                                                 " entries, n_fl is " + std::to_string(cfg.n_fl));
  }
  const std::size_t n = flow_gt.size();
  if (mask.size() != n) throw Error(ErrorCode::kInvalidArgument, "mask size mismatch");
  std::size_t n_cp = 0;
  for (bool m : mask) n_cp += m ? 1 : 0;
  if (n_cp == 0) throw Error(ErrorCode::kInvalidArgument, "flow mask selects no points");

  double total = 0.0;
  for (int j = 1; j <= cfg.n_fl; ++j) {
    const auto& f = flow_seq[static_cast<std::size_t>(j - 1)];
    if (f.size() != n) throw Error(ErrorCode::kInvalidArgument, "flow estimate size mismatch");
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) err += (f[i] - flow_gt[i]).lpNorm<1>();
    }
    total += std::pow(cfg.gamma, cfg.n_fl - j) * err / static_cast<double>(n_cp);
  }
  return total;
}

double combined_loss(double flow_term, double reg_term, const MotionVector& dv,
                     double weight_norm_sq, const LossConfig& cfg) {
  cfg.validate();
  return cfg.alpha * flow_term + cfg.beta * reg_term + cfg.lambda * dv.norm() +
         0.5 * cfg.zeta * weight_norm_sq;
}

}  // namespace ppcreg
