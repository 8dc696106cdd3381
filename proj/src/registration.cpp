#include "ppcreg/registration.hpp"

#include <cmath>

#include "ppcreg/errors.hpp"
#include "ppcreg/metrics.hpp"

namespace ppcreg {

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kOracle: return "oracle";
    case EstimatorKind::kPatch: return "patch";
    case EstimatorKind::kExternal: return "external";
  }
  return "unknown";
}

EstimatorKind estimator_from_string(const std::string& name) {
  for (auto k : {EstimatorKind::kOracle, EstimatorKind::kPatch, EstimatorKind::kExternal}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown estimator '" + name + "'");
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kConverged: return "converged";
    case RunStatus::kMaxIterations: return "max-iterations";
    case RunStatus::kFailed: return "failed";
  }
  return "unknown";
}

RunStatus run_status_from_string(const std::string& name) {
  for (auto s : {RunStatus::kConverged, RunStatus::kMaxIterations, RunStatus::kFailed}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown run status '" + name + "'");
}

void LoopConfig::validate() const {
  if (max_iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  }
  if (!(rot_tol > 0.0) || !(trans_tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "convergence tolerances must be positive");
  }
}

std::unique_ptr<CorrespondenceEstimator> make_estimator(const LoopConfig& cfg,
                                                        const std::optional<RigidTransform>& gt) {
  switch (cfg.estimator) {
    case EstimatorKind::kOracle:
      if (!gt) {
        throw Error(ErrorCode::kInvalidArgument, "oracle estimator needs the ground-truth pose");
      }
      return std::make_unique<OracleEstimator>(*gt);
    case EstimatorKind::kPatch:
      return std::make_unique<PatchMatchEstimator>(cfg.patch);
    case EstimatorKind::kExternal:
      return std::make_unique<ExternalEstimator>(cfg.external_dir);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown estimator");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<Vec3> surface_targets(const std::vector<SurfacePoint>& surface) {
  std::vector<Vec3> out;
  out.reserve(surface.size());
  for (const auto& s : surface) out.push_back(s.w_obj);
  return out;
}

UpdateResult update_step(const Volume& v, const std::vector<SurfacePoint>& surface,
                         const Image2D& flr, const RigidTransform& t_i, const CameraModel& cam,
                         const LoopConfig& cfg, const CorrespondenceEstimator& estimator,
                         int iteration, const IterationObserver& observer) {
  const ContourSet contours = select_apparent_contours(surface, t_i, cam, cfg.contours);
  if (observer) observer(iteration, t_i, contours);

  std::optional<Image2D> drr;
  if (estimator.needs_drr()) {
    drr = render_drr(v, t_i, cam, cfg.step_mm > 0.0 ? cfg.step_mm : default_step_mm(v));
  }
  const EstimationContext ctx{contours, t_i, cam, flr, drr ? &*drr : nullptr, iteration};
  CorrespondenceSet corr = estimator.estimate(ctx);
  if (cfg.noise.active()) {
    NoiseModel noise = cfg.noise;
    noise.seed = derive_seed(cfg.noise.seed, static_cast<std::uint64_t>(iteration));
    corr = add_correspondence_noise(corr, noise, cam);
  }

  const WeightVector weights = weight_correspondences(corr, cfg.weighting);
  const PPCSystem sys = build_ppc_system(contours, corr, cam, cfg.solver.min_rows);
  const MotionVector dv = solve_ppc(sys, weights, cfg.solver);

  UpdateResult out{dv, compose(dv_to_transform(dv), t_i), {}};
  out.diagnostics.num_contours = contours.size();
  out.diagnostics.num_correspondences = corr.valid_count();
  out.diagnostics.num_rows = sys.used_count();
  double flow_sum = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (corr.valid[i]) flow_sum += corr.flow(i).norm();
  }
  if (out.diagnostics.num_correspondences > 0) {
    out.diagnostics.mean_flow_px = flow_sum / static_cast<double>(out.diagnostics.num_correspondences);
  }
  return out;
}

RegistrationResult run_registration(const Volume& v, const std::vector<SurfacePoint>& surface,
                                    const Image2D& flr, const RigidTransform& t_init,
                                    const CameraModel& cam, const LoopConfig& cfg,
                                    const std::optional<RigidTransform>& gt,
                                    const CorrespondenceEstimator* estimator,
                                    const IterationObserver& observer) {
  RegistrationResult result;
  result.t_final = t_init;

  std::unique_ptr<CorrespondenceEstimator> owned;
  std::vector<Vec3> targets;
  try {
    cfg.validate();
    if (estimator == nullptr) {
      owned = make_estimator(cfg, gt);
      estimator = owned.get();
    }
    if (gt) targets = surface_targets(surface);
  } catch (const std::exception& e) {
    result.status = RunStatus::kFailed;
    result.failure_reason = e.what();
    return result;
  }

  RigidTransform pose = t_init;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    UpdateResult step;
    try {
      step = update_step(v, surface, flr, pose, cam, cfg, *estimator, it, observer);
    } catch (const std::exception& e) {
      result.status = RunStatus::kFailed;
      result.failure_reason = e.what();
      return result;
    }
    pose = step.t_next;
    result.t_final = pose;
    result.iterations_run = it;

    IterationRecord rec;
    rec.iteration = it;
    rec.dv = step.dv;
    rec.num_correspondences = step.diagnostics.num_correspondences;
    rec.mean_flow_px = step.diagnostics.mean_flow_px;
    if (gt) {
      try {
        rec.mrpd_mm = mrpd(pose, *gt, targets, cam);
      } catch (const Error&) {
        rec.mrpd_mm = std::nullopt;
      }
    }
    result.trace.push_back(rec);

    if (step.dv.omega.norm() < cfg.rot_tol && step.dv.trans.norm() < cfg.trans_tol) {
      result.status = RunStatus::kConverged;
      return result;
    }
  }
  result.status = RunStatus::kMaxIterations;
  return result;
}

}  // namespace ppcreg
