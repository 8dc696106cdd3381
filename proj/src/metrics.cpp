#include "ppcreg/metrics.hpp"

#include "ppcreg/errors.hpp"

namespace ppcreg {

double mtre(const RigidTransform& a, const RigidTransform& b, const std::vector<Vec3>& targets) {
  if (targets.empty()) throw Error(ErrorCode::kInvalidArgument, "mTRE needs at least one target");
  double sum = 0.0;
  for (const Vec3& x : targets) sum += (apply(a, x) - apply(b, x)).norm();
  return sum / static_cast<double>(targets.size());
}

double mrpd(const RigidTransform& est, const RigidTransform& gt, const std::vector<Vec3>& targets,
            const CameraModel& cam) {
  if (targets.empty()) throw Error(ErrorCode::kInvalidArgument, "mRPD needs at least one target");
  double sum = 0.0;
  for (const Vec3& x : targets) {
    const Vec3 ray = backproject_ray(cam, project(cam, apply(est, x)));
    const Vec3 y = apply(gt, x);
    sum += (y - y.dot(ray) * ray).norm();
  }
  return sum / static_cast<double>(targets.size());
}

}  // namespace ppcreg
