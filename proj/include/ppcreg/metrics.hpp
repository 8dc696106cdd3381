#pragma once

#include <vector>

#include "ppcreg/geometry.hpp"

namespace ppcreg {

/// Mean target registration error: mean |a(x) - b(x)| over targets (mm).
/// Throws invalid-argument on an empty target set.
double mtre(const RigidTransform& a, const RigidTransform& b, const std::vector<Vec3>& targets);

/// Mean re-projection distance: mean distance from gt(x) to the source ray
/// through project(cam, est(x)). Throws behind-camera when est(x) is not in
/// front of the source.
double mrpd(const RigidTransform& est, const RigidTransform& gt, const std::vector<Vec3>& targets,
            const CameraModel& cam);

}  // namespace ppcreg
