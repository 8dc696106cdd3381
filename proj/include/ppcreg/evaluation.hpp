#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppcreg/geometry.hpp"
#include "ppcreg/registration.hpp"
#include "ppcreg/volume.hpp"

namespace ppcreg {

struct SamplingRanges {
  double trans_range_mm = 60.0;  // per axis, +-
  double rot_range_deg = 40.0;   // per axis, +-
  double mtre_max_mm = 60.0;
  int n_samples = 600;
  std::uint64_t seed = 0;

  void validate() const;
};

struct InitialSample {
  RigidTransform t_init;
  double mtre_mm = 0.0;
};

/// Random initial poses around `gt`. Each draw takes per-axis uniform
/// rotations and translations within the ranges, scales all six by one
/// uniform factor in [0, 1] so small misalignments are as likely as large
/// ones, and perturbs the object frame: t_init = gt o delta. Draws whose mTRE
/// exceeds mtre_max are rejected. Throws infeasible-ranges when fewer than
/// 1% of the first 1e5 draws are accepted.
std::vector<InitialSample> sample_initial_transforms(const RigidTransform& gt,
                                                     const SamplingRanges& ranges,
                                                     const std::vector<Vec3>& targets);

struct CaseRecord {
  int case_id = 0;
  std::string view;
  double mtre_init_mm = 0.0;
  double mrpd_final_mm = 0.0;  // NaN when undefined (failed run)
  RunStatus status = RunStatus::kMaxIterations;
  int iterations = 0;
  double wall_time_s = 0.0;

  bool operator==(const CaseRecord& o) const;
};

inline constexpr double kSuccessThresholdMm = 2.0;

bool is_success(const CaseRecord& r, double threshold_mm = kSuccessThresholdMm);

/// Fraction of records that finished (converged or hit the iteration cap)
/// with mRPD <= threshold; failed runs only count in the denominator.
double success_ratio(const std::vector<CaseRecord>& records,
                     double threshold_mm = kSuccessThresholdMm);

struct CaptureRange {
  int bins = 0;  // k: capture covers [0, k * bin_mm)
  double bin_mm = 5.0;
  bool skipped_empty_bins = false;

  double lower_mm() const { return bins > 0 ? (bins - 1) * bin_mm : 0.0; }
  double upper_mm() const { return bins * bin_mm; }
  /// "55-60" style, or "0" when even the first bin misses the target SR.
  std::string label() const;
  bool operator==(const CaptureRange&) const = default;
};

/// Bins records by initial mTRE into [0, bin), [bin, 2 bin), ... and returns
/// the largest k (up to the highest non-empty bin) such that every non-empty
/// bin below k * bin_mm reaches `sr_min`. Empty bins below k are skipped and
/// flagged. Throws invalid-argument on an empty record set.
CaptureRange capture_range(const std::vector<CaseRecord>& records, double bin_mm = 5.0,
                           double sr_min = 0.95, double threshold_mm = kSuccessThresholdMm);

struct EvalThresholds {
  double success_mm = kSuccessThresholdMm;
  double bin_mm = 5.0;
  double sr_min = 0.95;
};

/// Table-style aggregates; mRPD statistics cover successful cases only.
struct Aggregates {
  std::size_t n_cases = 0;
  std::size_t n_success = 0;
  double success_ratio = 0.0;
  double mrpd_mean_mm = 0.0;
  double mrpd_std_mm = 0.0;
  CaptureRange capture;
  double runtime_mean_s = 0.0;
  double runtime_std_s = 0.0;
  EvalThresholds thresholds;
};

Aggregates aggregate(const std::vector<CaseRecord>& records, const EvalThresholds& th = {});

struct EvalReport {
  std::vector<CaseRecord> records;  // ordered by case_id
  Aggregates aggregates;
};

struct View {
  std::string name;
  RigidTransform gt;
};

/// For each view: renders the fixed image at the view's ground truth, samples
/// initial poses, and registers every case. Cases run on `parallelism`
/// threads; per-case seeds derive from (noise seed, case_id) so records do not
/// depend on scheduling. Per-case failures are recorded, never thrown.
EvalReport run_benchmark(const Volume& v, const std::vector<SurfacePoint>& surface,
                         const CameraModel& cam, const std::vector<View>& views,
                         const SamplingRanges& ranges, const LoopConfig& loop, int parallelism,
                         const EvalThresholds& th = {});

inline constexpr const char* kReportHeader =
    "case_id,view,mtre_init_mm,mrpd_final_mm,status,iterations,wall_time_s";

/// Per-case rows only. With `include_timing == false` the wall-time column
/// holds `nan`, which makes the output a pure function of the inputs.
void write_records(std::ostream& os, const std::vector<CaseRecord>& records,
                   bool include_timing = true);
/// Records followed by a `# key=value` aggregate footer.
void write_report(std::ostream& os, const EvalReport& report, bool include_timing = true);
/// Parses rows written by write_records/write_report; footer lines are
/// ignored. Throws format-error with the line number.
std::vector<CaseRecord> read_records(std::istream& is);

/// "mRPD 0.60 +- 0.40 mm | SR 97.0 % | CR 55-60 mm | runtime 8.05 +- 0.20 s"
std::string summary_row(const Aggregates& a);

}  // namespace ppcreg
