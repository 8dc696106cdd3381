#pragma once

#include <random>

#include <Eigen/SVD>

#include "ppcreg/ppc_solver.hpp"

namespace ppcreg::testing {

struct RandomSystem {
  PPCSystem sys;
  WeightVector w;
};

/// Plane constraints from random contour-like points around (0, 0, 800) mm
/// with random unit normals; b is arbitrary.
inline RandomSystem random_ppc_system(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> radius(10.0, 60.0), weight(0.1, 1.0);
  RandomSystem rs;
  rs.sys.a.resize(n, 6);
  rs.sys.b.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Vec3 w = Vec3(0, 0, 800) + radius(rng) * dir;
    const Vec3 nrm = Vec3(g(rng), g(rng), g(rng)).normalized();
    rs.sys.a.row(i).head<3>() = nrm.cross(w).transpose();
    rs.sys.a.row(i).tail<3>() = -nrm.transpose();
    rs.sys.b[i] = 5.0 * g(rng);
    rs.sys.normals.push_back(nrm);
    rs.sys.points.push_back(w);
  }
  rs.sys.used.assign(static_cast<std::size_t>(n), true);
  for (Eigen::Index i = 0; i < n; ++i) rs.w.w_diag.push_back(weight(rng));
  return rs;
}

/// Weighted least squares through a full SVD, independent of the solver's QR.
inline Vec6 svd_least_squares(const PPCSystem& sys, const WeightVector& w) {
  const Eigen::Index n = sys.b.size();
  Eigen::MatrixXd wa(n, 6);
  Eigen::VectorXd wb(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = sys.used[static_cast<std::size_t>(i)] ? w.w_diag[static_cast<std::size_t>(i)] : 0.0;
    wa.row(i) = wi * sys.a.row(i);
    wb[i] = wi * sys.b[i];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(wa, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.solve(wb);
}

inline double relative_error(const Vec6& got, const Vec6& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

}  // namespace ppcreg::testing
