#include "ppcreg/ppc_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/QR>

#include "ppcreg/errors.hpp"

namespace ppcreg {

std::size_t PPCSystem::used_count() const {
  return static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
}

PPCSystem PPCSystem::from_matrix(const RowMatrix6& a, const Eigen::VectorXd& b) {
  if (a.rows() != b.size()) {
    throw Error(ErrorCode::kInvalidArgument, "A and b row counts differ");
  }
  PPCSystem sys;
  sys.a = a;
  sys.b = b;
  sys.normals.assign(static_cast<std::size_t>(b.size()), Vec3::Zero());
  sys.used.assign(static_cast<std::size_t>(b.size()), true);
  return sys;
}

PPCSystem build_ppc_system(const ContourSet& contours, const CorrespondenceSet& c,
                           const CameraModel& cam, std::size_t min_rows) {
  const std::size_t n = contours.size();
  if (c.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "correspondence count " + std::to_string(c.size()) +
                                                 " differs from contour count " + std::to_string(n));
  }
  PPCSystem sys;
  sys.a = RowMatrix6::Zero(static_cast<Eigen::Index>(n), 6);
  sys.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  sys.normals.assign(n, Vec3::Zero());
  sys.points = contours.w_cam;
  sys.used.assign(n, false);

  for (std::size_t i = 0; i < n; ++i) {
    if (!c.valid[i]) continue;
    const Vec3& w = contours.w_cam[i];
    const Vec3 s = w.cross(contours.g_cam[i]);
    const Vec3 ray = backproject_ray(cam, c.p_prime[i]);
    const Vec3 cr = s.cross(ray);
    const double len = cr.norm();
    if (!(len >= kDegeneratePlaneTol)) continue;
    const Vec3 normal = cr / len;
    const auto row = static_cast<Eigen::Index>(i);
    sys.a.row(row).head<3>() = normal.cross(w).transpose();
    sys.a.row(row).tail<3>() = -normal.transpose();
    sys.b[row] = normal.dot(w);
    sys.normals[i] = normal;
    sys.used[i] = true;
  }
  const std::size_t used = sys.used_count();
  if (used < min_rows) {
    throw Error(ErrorCode::kInsufficientConstraints,
                std::to_string(used) + " usable PPC rows, need " + std::to_string(min_rows));
  }
  return sys;
}

namespace {

// Factorized, column-balanced weighted problem shared by the solve and its
// derivatives. Unknowns are y = D dv.
struct Factorization {
  double omega_scale = 1.0;
  std::vector<Eigen::Index> active;  // rows with used && w > 0
  RowMatrix6 scaled_a;               // A D^-1, all rows
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  Vec6 y = Vec6::Zero();

  Vec6 to_dv(const Vec6& yy) const {
    Vec6 dv = yy;
    dv.head<3>() /= omega_scale;
    return dv;
  }

  // (A~^T W^2 A~ + lambda I)^-1 v via the R factor: M = P R^T R P^T.
  Vec6 apply_inverse_normal(const Vec6& v) const {
    const Eigen::Matrix<double, 6, 6> r =
        qr.matrixR().topLeftCorner(6, 6).template triangularView<Eigen::Upper>();
    Vec6 z = qr.colsPermutation().transpose() * v;
    z = r.transpose().triangularView<Eigen::Lower>().solve(z);
    z = r.triangularView<Eigen::Upper>().solve(z);
    return qr.colsPermutation() * z;
  }
};

// Mean |w| over the rows that carry weight, so a zero weight acts as deletion.
double resolve_omega_scale(const PPCSystem& sys, const WeightVector& w, const SolverConfig& cfg) {
  if (cfg.omega_scale) {
    if (!(*cfg.omega_scale > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "omega scale must be positive");
    }
    return *cfg.omega_scale;
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < sys.points.size() && i < sys.used.size(); ++i) {
    if (!sys.used[i] || !(w.w_diag[i] > 0.0)) continue;
    sum += sys.points[i].norm();
    ++count;
  }
  return count > 0 && sum > 0.0 ? sum / static_cast<double>(count) : 1.0;
}

Factorization factorize(const PPCSystem& sys, const WeightVector& w, const SolverConfig& cfg) {
  if (!(cfg.tikhonov_lambda >= 0.0) || cfg.min_rows < 6) {
    throw Error(ErrorCode::kInvalidArgument, "need tikhonov_lambda >= 0 and min_rows >= 6");
  }
  const std::size_t n = sys.rows();
  if (w.size() != n || sys.used.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "weight count " + std::to_string(w.size()) +
                                                 " differs from system rows " + std::to_string(n));
  }
  Factorization f;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(w.w_diag[i]) || w.w_diag[i] < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "weights must be finite and >= 0");
    }
    if (sys.used[i] && w.w_diag[i] > 0.0) f.active.push_back(static_cast<Eigen::Index>(i));
  }
  f.omega_scale = resolve_omega_scale(sys, w, cfg);
  if (f.active.size() < cfg.min_rows) {
    throw Error(ErrorCode::kInsufficientConstraints,
                std::to_string(f.active.size()) + " weighted rows, need " +
                    std::to_string(cfg.min_rows));
  }

  f.scaled_a = sys.a;
  f.scaled_a.leftCols<3>() /= f.omega_scale;

  const auto m = static_cast<Eigen::Index>(f.active.size());
  const bool regularized = cfg.tikhonov_lambda > 0.0;
  const Eigen::Index rows = m + (regularized ? 6 : 0);
  Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(rows, 6);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = f.active[static_cast<std::size_t>(k)];
    const double wi = w.w_diag[static_cast<std::size_t>(i)];
    stacked.row(k) = wi * f.scaled_a.row(i);
    rhs[k] = wi * sys.b[i];
  }
  if (regularized) {
    stacked.bottomRows(6) = std::sqrt(cfg.tikhonov_lambda) * Eigen::MatrixXd::Identity(6, 6);
  }
  f.qr.setThreshold(1e-12);
  f.qr.compute(stacked);
  if (f.qr.rank() < 6) {
    throw Error(ErrorCode::kRankDeficient,
                "weighted PPC system has rank " + std::to_string(f.qr.rank()));
  }
  f.y = f.qr.solve(rhs);
  return f;
}

}  // namespace

MotionVector solve_ppc(const PPCSystem& sys, const WeightVector& w, const SolverConfig& cfg) {
  const Factorization f = factorize(sys, w, cfg);
  return MotionVector::from_vector(f.to_dv(f.y));
}

PPCJacobians ppc_jacobians(const PPCSystem& sys, const WeightVector& w, const SolverConfig& cfg) {
  const Factorization f = factorize(sys, w, cfg);
  const auto n = static_cast<Eigen::Index>(sys.rows());
  PPCJacobians jac;
  jac.d_dv_d_b = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, n);
  jac.d_dv_d_w = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, n);
  for (const Eigen::Index i : f.active) {
    const double wi = w.w_diag[static_cast<std::size_t>(i)];
    const Vec6 row = f.scaled_a.row(i).transpose();
    const double residual = sys.b[i] - row.dot(f.y);
    jac.d_dv_d_b.col(i) = f.to_dv(f.apply_inverse_normal(wi * wi * row));
    jac.d_dv_d_w.col(i) = f.to_dv(f.apply_inverse_normal(2.0 * wi * residual * row));
  }
  return jac;
}

}  // namespace ppcreg
