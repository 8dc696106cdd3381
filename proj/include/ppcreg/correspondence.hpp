#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ppcreg/drr.hpp"
#include "ppcreg/geometry.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

/// 2D matches (p in the DRR, p_prime in the fixed image) at projected
/// contour points. Invalid rows carry score 0; valid p_prime lie on the detector.
struct CorrespondenceSet {
  std::vector<Vec2> p;
  std::vector<Vec2> p_prime;
  std::vector<bool> valid;
  std::vector<double> score;

  std::size_t size() const { return p.size(); }
  std::size_t valid_count() const;
  Vec2 flow(std::size_t i) const { return p_prime[i] - p[i]; }
  bool operator==(const CorrespondenceSet&) const = default;
};

/// Diagonal of the PPC weight matrix W.
struct WeightVector {
  std::vector<double> w_diag;
  std::size_t size() const { return w_diag.size(); }
  std::size_t positive_count() const;
};

/// Ground-truth matches: each contour point is carried back to the object
/// frame through `pose` and forward through `gt`. Rows whose target falls
/// behind the source or off the detector are invalid.
CorrespondenceSet oracle_correspondences(const ContourSet& contours, const RigidTransform& pose,
                                         const RigidTransform& gt, const CameraModel& cam);

struct NoiseModel {
  double sigma_px = 0.0;
  double outlier_frac = 0.0;
  double outlier_mag_px = 0.0;
  std::uint64_t seed = 0;

  bool active() const { return sigma_px > 0.0 || (outlier_frac > 0.0 && outlier_mag_px > 0.0); }
};

/// Gaussian jitter (std sigma_px per axis) on valid rows, except a random
/// floor(outlier_frac * N_valid) subset which instead receives an offset of
/// uniform direction and magnitude uniform in [0, outlier_mag_px]. Rows pushed
/// off the detector become invalid. Deterministic per seed.
CorrespondenceSet add_correspondence_noise(const CorrespondenceSet& c, const NoiseModel& noise,
                                           const CameraModel& cam);

struct PatchMatchConfig {
  int patch_radius_px = 5;
  int search_radius_px = 20;
  double min_ncc = 0.3;
};

/// Exhaustive integer-offset NCC search of the DRR patch around each contour
/// projection inside the fixed image, refined to sub-pixel by 1D parabola
/// fits through the peak along each axis.
CorrespondenceSet patch_match_correspondences(const Image2D& drr, const Image2D& flr,
                                              const ContourSet& contours,
                                              const PatchMatchConfig& cfg = {});

// Exchange format: one header line, then `index,p_x,p_y,pprime_x,pprime_y,valid,score`.
inline constexpr const char* kCorrespondenceHeader = "index,p_x,p_y,pprime_x,pprime_y,valid,score";

void save_correspondences(const std::filesystem::path& path, const CorrespondenceSet& c);

/// Throws count-mismatch when the row count differs from the contour count and
/// format-error (with the offending line number) for malformed rows,
/// non-finite values, duplicate or out-of-range indices, p rows that disagree
/// with the contour projections, or valid rows off the detector.
CorrespondenceSet load_external_correspondences(const std::filesystem::path& path,
                                                const ContourSet& contours,
                                                const CameraModel& cam);

enum class WeightingStrategy { kUniform, kScore, kResidualRobust };

const char* to_string(WeightingStrategy s);
WeightingStrategy weighting_from_string(const std::string& name);

struct WeightingConfig {
  WeightingStrategy strategy = WeightingStrategy::kUniform;
  double delta_px = 3.0;  // residual-robust only
};

/// Invalid rows always get weight 0. Residual-robust: min(1, delta / |f_i - f_ref|)
/// where f_ref is `prior_flow[i]` when given, else the per-axis median of the
/// valid flows.
WeightVector weight_correspondences(const CorrespondenceSet& c, const WeightingConfig& cfg,
                                    const std::vector<Vec2>* prior_flow = nullptr);

/// Everything an estimator may look at during one update step.
struct EstimationContext {
  const ContourSet& contours;
  const RigidTransform& pose;
  const CameraModel& cam;
  const Image2D& flr;
  const Image2D* drr = nullptr;  // present when the estimator needs_drr()
  int iteration = 1;             // 1-based
};

/// Common interface of the oracle, patch-matching and file-based estimators.
/// Implementations are immutable and safe to share between threads.
class CorrespondenceEstimator {
 public:
  virtual ~CorrespondenceEstimator() = default;
  virtual std::string name() const = 0;
  virtual bool needs_drr() const { return false; }
  virtual CorrespondenceSet estimate(const EstimationContext& ctx) const = 0;
};

class OracleEstimator final : public CorrespondenceEstimator {
 public:
  explicit OracleEstimator(RigidTransform gt) : gt_(std::move(gt)) {}
  std::string name() const override { return "oracle"; }
  CorrespondenceSet estimate(const EstimationContext& ctx) const override;

 private:
  RigidTransform gt_;
};

class PatchMatchEstimator final : public CorrespondenceEstimator {
 public:
  explicit PatchMatchEstimator(PatchMatchConfig cfg = {}) : cfg_(cfg) {}
  std::string name() const override { return "patch"; }
  bool needs_drr() const override { return true; }
  CorrespondenceSet estimate(const EstimationContext& ctx) const override;

 private:
  PatchMatchConfig cfg_;
};

/// Reads `<dir>/corr_iter_<k>.csv` at iteration k.
class ExternalEstimator final : public CorrespondenceEstimator {
 public:
  explicit ExternalEstimator(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string name() const override { return "external"; }
  CorrespondenceSet estimate(const EstimationContext& ctx) const override;
  std::filesystem::path file_for_iteration(int iteration) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace ppcreg
