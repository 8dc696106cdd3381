#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ppcreg/correspondence.hpp"
#include "ppcreg/drr.hpp"
#include "ppcreg/geometry.hpp"
#include "ppcreg/ppc_solver.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

enum class EstimatorKind { kOracle, kPatch, kExternal };

const char* to_string(EstimatorKind kind);
EstimatorKind estimator_from_string(const std::string& name);

struct LoopConfig {
  int max_iterations = 10;
  double rot_tol = 1e-4;    // rad
  double trans_tol = 1e-3;  // mm
  EstimatorKind estimator = EstimatorKind::kOracle;
  PatchMatchConfig patch;
  std::filesystem::path external_dir;
  WeightingConfig weighting;
  ContourParams contours;
  SolverConfig solver;
  double step_mm = 0.0;  // <= 0 selects default_step_mm(volume)
  NoiseModel noise;      // applied on top of the estimator output when active

  /// Throws invalid-argument on max_iterations < 1 or non-positive tolerances.
  void validate() const;
};

/// Builds the estimator selected in `cfg`; the oracle needs `gt`.
std::unique_ptr<CorrespondenceEstimator> make_estimator(const LoopConfig& cfg,
                                                        const std::optional<RigidTransform>& gt);

struct UpdateDiagnostics {
  std::size_t num_contours = 0;
  std::size_t num_correspondences = 0;  // valid matches
  std::size_t num_rows = 0;             // used PPC rows
  double mean_flow_px = 0.0;
};

struct UpdateResult {
  MotionVector dv;
  RigidTransform t_next;
  UpdateDiagnostics diagnostics;
};

/// Per-iteration hook; sees the pose the step started from and its contours.
using IterationObserver =
    std::function<void(int iteration, const RigidTransform& pose, const ContourSet& contours)>;

/// One render -> contours -> correspondences -> weights -> PPC solve cycle.
/// The DRR is only rendered for estimators that consume it. Returns
/// t_next = se3_exp(dv) o t_i. Throws insufficient-contours /
/// insufficient-constraints (or the estimator's error) when the step cannot
/// produce an update.
UpdateResult update_step(const Volume& v, const std::vector<SurfacePoint>& surface,
                         const Image2D& flr, const RigidTransform& t_i, const CameraModel& cam,
                         const LoopConfig& cfg, const CorrespondenceEstimator& estimator,
                         int iteration = 1, const IterationObserver& observer = {});

enum class RunStatus { kConverged, kMaxIterations, kFailed };

const char* to_string(RunStatus s);
RunStatus run_status_from_string(const std::string& name);

struct IterationRecord {
  int iteration = 0;
  MotionVector dv;
  std::size_t num_correspondences = 0;
  double mean_flow_px = 0.0;
  std::optional<double> mrpd_mm;
};

struct RegistrationResult {
  RigidTransform t_final;
  int iterations_run = 0;
  std::vector<IterationRecord> trace;
  RunStatus status = RunStatus::kMaxIterations;
  std::string failure_reason;
};

/// Iterates update_step up to max_iterations, stopping once |omega| < rot_tol
/// and |t| < trans_tol. Never throws for a failed step: the result carries
/// status kFailed, the reason, and the trace up to that point. The mRPD trace
/// column is filled when `gt` is given, measured on the surface points.
/// `estimator` overrides the one selected in `cfg` when non-null.
RegistrationResult run_registration(const Volume& v, const std::vector<SurfacePoint>& surface,
                                    const Image2D& flr, const RigidTransform& t_init,
                                    const CameraModel& cam, const LoopConfig& cfg,
                                    const std::optional<RigidTransform>& gt = std::nullopt,
                                    const CorrespondenceEstimator* estimator = nullptr,
                                    const IterationObserver& observer = {});

std::vector<Vec3> surface_targets(const std::vector<SurfacePoint>& surface);

/// Mixes a base seed with a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace ppcreg
