#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ppcreg/ppc_solver.hpp"
#include "solver_oracles.hpp"
#include "test_support.hpp"

using namespace ppcreg;
using ppcreg::testing::random_pose;
using ppcreg::testing::random_ppc_system;
using ppcreg::testing::relative_error;
using ppcreg::testing::svd_least_squares;
using ppcreg::testing::view_pose;

namespace {

const SolverConfig kExact{0.0, 6, std::nullopt};

struct Scene {
  ContourSet contours;
  CorrespondenceSet corr;
};

Scene oracle_scene(const RigidTransform& t, const RigidTransform& gt) {
  const auto cam = CameraModel::default_detector();
  Scene s;
  s.contours = select_apparent_contours(ppcreg::testing::sphere64_surface(), t, cam, {});
  s.corr = oracle_correspondences(s.contours, t, gt, cam);
  return s;
}

WeightVector ones(std::size_t n) { return WeightVector{std::vector<double>(n, 1.0)}; }

}  // namespace

TEST(BuildSystem, RowsFollowPlaneConstruction) {
  std::mt19937_64 rng(51);
  const auto cam = CameraModel::default_detector();
  const auto t = random_pose(rng, 3.0, 30.0, Vec3(0, 0, 800));
  const auto gt = compose(random_pose(rng, 0.05, 5.0), t);
  const Scene s = oracle_scene(t, gt);
  const PPCSystem sys = build_ppc_system(s.contours, s.corr, cam);
  ASSERT_EQ(sys.rows(), s.contours.size());
  for (std::size_t i = 0; i < sys.rows(); ++i) {
    if (!sys.used[i]) continue;
    const Vec3& w = s.contours.w_cam[i];
    const Vec3& n = sys.normals[i];
    EXPECT_NEAR(n.norm(), 1.0, 1e-9);
    const auto row = static_cast<Eigen::Index>(i);
    EXPECT_LT((sys.a.row(row).head<3>().transpose() - n.cross(w)).norm(), 1e-12);
    EXPECT_LT((sys.a.row(row).tail<3>().transpose() + n).norm(), 1e-15);
    EXPECT_NEAR(sys.b[row], n.dot(w), 1e-12);
    // The plane contains the source ray through p' and the tangent w x g.
    EXPECT_NEAR(n.dot(backproject_ray(cam, s.corr.p_prime[i])), 0.0, 1e-12);
    EXPECT_NEAR(n.dot(w.cross(s.contours.g_cam[i]).normalized()), 0.0, 1e-9);
  }
}

TEST(BuildSystem, ZeroMisalignmentGivesZeroB) {
  std::mt19937_64 rng(52);
  const auto cam = CameraModel::default_detector();
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = random_pose(rng, 3.0, 30.0, Vec3(0, 0, 800));
    const Scene s = oracle_scene(t, t);
    const PPCSystem sys = build_ppc_system(s.contours, s.corr, cam);
    EXPECT_LE(sys.b.cwiseAbs().maxCoeff(), 1e-9);
    const auto dv = solve_ppc(sys, ones(sys.rows()));
    EXPECT_LE(dv.norm(), 1e-9);
  }
}

TEST(BuildSystem, DegeneratePlaneAndInvalidRowsUnused) {
  const auto cam = CameraModel::default_detector();
  ContourSet cs;
  for (int i = 0; i < 8; ++i) {
    const Vec3 w(10.0 * std::cos(i), 10.0 * std::sin(i), 800.0);
    cs.w_cam.push_back(w);
    cs.g_cam.push_back(Vec3(-std::sin(i), std::cos(i), 0.0));
    cs.p.push_back(project(cam, w));
    cs.source_index.push_back(static_cast<std::size_t>(i));
  }
  // Row 0: gradient along the viewing ray makes s = w x g vanish.
  cs.g_cam[0] = cs.w_cam[0].normalized();
  CorrespondenceSet c;
  c.p = cs.p;
  c.p_prime = cs.p;
  c.valid.assign(8, true);
  c.score.assign(8, 1.0);
  c.valid[1] = false;
  const PPCSystem sys = build_ppc_system(cs, c, cam);
  EXPECT_FALSE(sys.used[0]);
  EXPECT_FALSE(sys.used[1]);
  EXPECT_EQ(sys.used_count(), 6u);
  EXPECT_EQ(sys.a.row(0).norm(), 0.0);
  EXPECT_EQ(sys.b[0], 0.0);

  c.valid[2] = false;
  EXPECT_PPC_ERROR(build_ppc_system(cs, c, cam), ErrorCode::kInsufficientConstraints);
}

TEST(BuildSystem, FirstOrderConsistency) {
  std::mt19937_64 rng(53);
  const auto cam = CameraModel::default_detector();
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = random_pose(rng, 3.0, 30.0, Vec3(0, 0, 800));
    Vec6 v;
    for (int k = 0; k < 6; ++k) v[k] = std::normal_distribution<double>()(rng);
    v.head<3>() *= 1e-3;
    v.tail<3>() *= 0.5;
    const auto dv = MotionVector::from_vector(v);
    const Scene s = oracle_scene(t, compose(se3_exp(dv), t));
    const PPCSystem sys = build_ppc_system(s.contours, s.corr, cam);
    const double bn = sys.b.norm();
    ASSERT_GT(bn, 0.0);
    EXPECT_LE((sys.a * v - sys.b).norm() / bn, 5.0 * dv.norm());
  }
}

TEST(Solve, ZeroRhsGivesZero) {
  std::mt19937_64 rng(54);
  auto rs = random_ppc_system(rng, 40);
  rs.sys.b.setZero();
  for (double lambda : {0.0, 1e-6, 1.0}) {
    const auto dv = solve_ppc(rs.sys, rs.w, {lambda, 6, std::nullopt});
    EXPECT_EQ(dv.as_vector(), Vec6::Zero());
  }
}

TEST(Solve, MatchesSvdOracle) {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> rows(6, 500);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rs = random_ppc_system(rng, rows(rng));
    const Vec6 got = solve_ppc(rs.sys, rs.w, kExact).as_vector();
    EXPECT_LE(relative_error(got, svd_least_squares(rs.sys, rs.w)), 1e-8);
  }
}

TEST(Solve, ExactlyDeterminedSystem) {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rs = random_ppc_system(rng, 6);
    const Vec6 dv = solve_ppc(rs.sys, rs.w, kExact).as_vector();
    EXPECT_LE((rs.sys.a * dv - rs.sys.b).norm(), 1e-8);
  }
}

TEST(Solve, RegularizedMatchesNormalEquations) {
  std::mt19937_64 rng(57);
  const auto rs = random_ppc_system(rng, 60);
  const double lambda = 0.3, scale = 7.0;
  const Vec6 dv = solve_ppc(rs.sys, rs.w, {lambda, 6, scale}).as_vector();
  Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
  Vec6 rhs = Vec6::Zero();
  for (Eigen::Index i = 0; i < rs.sys.b.size(); ++i) {
    const double w2 = rs.w.w_diag[static_cast<std::size_t>(i)] * rs.w.w_diag[static_cast<std::size_t>(i)];
    m += w2 * rs.sys.a.row(i).transpose() * rs.sys.a.row(i);
    rhs += w2 * rs.sys.a.row(i).transpose() * rs.sys.b[i];
  }
  Vec6 d2;
  d2 << scale * scale, scale * scale, scale * scale, 1, 1, 1;
  m += lambda * Eigen::Matrix<double, 6, 6>(d2.asDiagonal());
  EXPECT_LE(relative_error(dv, m.ldlt().solve(rhs)), 1e-9);
}

TEST(Solve, Errors) {
  std::mt19937_64 rng(58);
  auto rs = random_ppc_system(rng, 10);
  auto w = rs.w;
  for (std::size_t i = 5; i < 10; ++i) w.w_diag[i] = 0.0;
  EXPECT_PPC_ERROR(solve_ppc(rs.sys, w), ErrorCode::kInsufficientConstraints);

  // Rank 5: the last column duplicates the fifth.
  auto deficient = rs.sys;
  deficient.a.col(5) = deficient.a.col(4);
  EXPECT_PPC_ERROR(solve_ppc(deficient, rs.w, kExact), ErrorCode::kRankDeficient);
  EXPECT_NO_THROW(solve_ppc(deficient, rs.w, {1e-6, 6, std::nullopt}));

  w = rs.w;
  w.w_diag[0] = -1.0;
  EXPECT_PPC_ERROR(solve_ppc(rs.sys, w), ErrorCode::kInvalidArgument);
  w.w_diag[0] = NAN;
  EXPECT_PPC_ERROR(solve_ppc(rs.sys, w), ErrorCode::kInvalidArgument);
  EXPECT_PPC_ERROR(solve_ppc(rs.sys, rs.w, {-1.0, 6, std::nullopt}), ErrorCode::kInvalidArgument);
  EXPECT_PPC_ERROR(solve_ppc(rs.sys, WeightVector{{1.0, 1.0}}), ErrorCode::kInvalidArgument);
}

TEST(Solve, WeightScaleInvariance) {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rs = random_ppc_system(rng, 80);
    const Vec6 base = solve_ppc(rs.sys, rs.w, kExact).as_vector();
    for (double c : {1e-3, 0.5, 42.0}) {
      WeightVector scaled = rs.w;
      for (double& x : scaled.w_diag) x *= c;
      EXPECT_LE(relative_error(solve_ppc(rs.sys, scaled, kExact).as_vector(), base), 1e-9);
    }
  }
}

TEST(Solve, ZeroWeightEqualsDeletedRow) {
  std::mt19937_64 rng(60);
  for (int trial = 0; trial < 20; ++trial) {
    auto rs = random_ppc_system(rng, 30);
    auto w = rs.w;
    w.w_diag[7] = 0.0;
    ppcreg::testing::RandomSystem trimmed;
    trimmed.sys = rs.sys;
    const Eigen::Index n = rs.sys.b.size();
    RowMatrix6 a(n - 1, 6);
    Eigen::VectorXd b(n - 1);
    for (Eigen::Index i = 0, k = 0; i < n; ++i) {
      if (i == 7) continue;
      a.row(k) = rs.sys.a.row(i);
      b[k] = rs.sys.b[i];
      trimmed.w.w_diag.push_back(rs.w.w_diag[static_cast<std::size_t>(i)]);
      ++k;
    }
    trimmed.sys.a = a;
    trimmed.sys.b = b;
    trimmed.sys.used.assign(static_cast<std::size_t>(n - 1), true);
    trimmed.sys.points.erase(trimmed.sys.points.begin() + 7);
    trimmed.sys.normals.erase(trimmed.sys.normals.begin() + 7);
    for (const SolverConfig& cfg : {kExact, SolverConfig{}}) {
      const Vec6 x = solve_ppc(rs.sys, w, cfg).as_vector();
      const Vec6 y = solve_ppc(trimmed.sys, trimmed.w, cfg).as_vector();
      EXPECT_LE((x - y).norm(), 1e-10 * std::max(1.0, y.norm()));
    }
  }
}

TEST(Solve, LinearInB) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    auto r1 = random_ppc_system(rng, 50);
    auto r2 = r1;
    std::normal_distribution<double> g(0.0, 5.0);
    for (Eigen::Index i = 0; i < r2.sys.b.size(); ++i) r2.sys.b[i] = g(rng);
    auto sum = r1;
    sum.sys.b = r1.sys.b + r2.sys.b;
    const SolverConfig cfg{};
    const Vec6 x1 = solve_ppc(r1.sys, r1.w, cfg).as_vector();
    const Vec6 x2 = solve_ppc(r2.sys, r1.w, cfg).as_vector();
    const Vec6 xs = solve_ppc(sum.sys, r1.w, cfg).as_vector();
    EXPECT_LE((xs - x1 - x2).norm(), 1e-9 * std::max(1.0, xs.norm()));
  }
}

TEST(Jacobians, MatchCentralDifferences) {
  std::mt19937_64 rng(62);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const auto rs = random_ppc_system(rng, 12 + trial * 5);
    for (const SolverConfig& cfg : {SolverConfig{}, kExact}) {
      const auto jac = ppc_jacobians(rs.sys, rs.w, cfg);
      const Eigen::Index n = rs.sys.b.size();
      Eigen::Matrix<double, 6, Eigen::Dynamic> fd_b(6, n), fd_w(6, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        auto plus = rs.sys, minus = rs.sys;
        plus.b[i] += h;
        minus.b[i] -= h;
        fd_b.col(i) = (solve_ppc(plus, rs.w, cfg).as_vector() - solve_ppc(minus, rs.w, cfg).as_vector()) / (2 * h);
        auto wp = rs.w, wm = rs.w;
        wp.w_diag[static_cast<std::size_t>(i)] += h;
        wm.w_diag[static_cast<std::size_t>(i)] -= h;
        fd_w.col(i) = (solve_ppc(rs.sys, wp, cfg).as_vector() - solve_ppc(rs.sys, wm, cfg).as_vector()) / (2 * h);
      }
      EXPECT_LE((jac.d_dv_d_b - fd_b).norm() / fd_b.norm(), 1e-4);
      EXPECT_LE((jac.d_dv_d_w - fd_w).norm() / fd_w.norm(), 1e-4);
    }
  }
}

TEST(Jacobians, StationaryResidualRowHasZeroWeightGradient) {
  // Consistent system: every residual is zero, so no weight can move dv.
  std::mt19937_64 rng(63);
  auto rs = random_ppc_system(rng, 30);
  Vec6 truth;
  truth << 1e-3, -2e-3, 5e-4, 0.7, -0.2, 1.1;
  rs.sys.b = rs.sys.a * truth;
  rs.w.w_diag[4] = 0.0;
  const auto jac = ppc_jacobians(rs.sys, rs.w, kExact);
  EXPECT_LE(jac.d_dv_d_w.col(4).norm(), 1e-15);
  EXPECT_LE(jac.d_dv_d_w.norm(), 1e-9);
  EXPECT_EQ(jac.d_dv_d_b.col(4).norm(), 0.0);
}

TEST(DvToTransform, AliasAndTaylorRemainder) {
  EXPECT_EQ(dv_to_transform(MotionVector{}).rotation(), Mat3::Identity());
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 100; ++trial) {
    Vec6 v;
    for (int k = 0; k < 6; ++k) v[k] = std::normal_distribution<double>()(rng);
    v *= std::uniform_real_distribution<double>(1e-4, 0.05)(rng) / v.norm();
    const auto dv = MotionVector::from_vector(v);
    const auto a = dv_to_transform(dv), b = se3_exp(dv);
    EXPECT_EQ(a.rotation(), b.rotation());
    EXPECT_EQ(a.translation(), b.translation());
    const Vec3 w = ppcreg::testing::random_box(rng, 50.0) + Vec3(0, 0, 800);
    const Vec3 linear = w + dv.omega.cross(w) + dv.trans;
    EXPECT_LE((apply(a, w) - linear).norm(), dv.norm() * dv.norm() * w.norm());
  }
}
