#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "metric_oracles.hpp"
#include "ppcreg/evaluation.hpp"
#include "ppcreg/metrics.hpp"
#include "test_support.hpp"

using namespace ppcreg;
using ppcreg::testing::random_box;
using ppcreg::testing::random_pose;
using ppcreg::testing::sphere64;
using ppcreg::testing::sphere64_surface;
using ppcreg::testing::view_pose;

namespace {

CaseRecord record(double mtre_init, double mrpd_final, RunStatus status = RunStatus::kConverged) {
  CaseRecord r;
  r.view = "ap";
  r.mtre_init_mm = mtre_init;
  r.mrpd_final_mm = mrpd_final;
  r.status = status;
  r.iterations = 3;
  return r;
}

}  // namespace

TEST(Mtre, ExamplesAndOracle) {
  std::mt19937_64 rng(91);
  std::vector<Vec3> targets;
  for (int i = 0; i < 40; ++i) targets.push_back(random_box(rng, 30.0));
  const auto t = random_pose(rng, 2.0, 40.0, Vec3(0, 0, 800));
  EXPECT_EQ(mtre(t, t, targets), 0.0);
  const auto shifted = compose(RigidTransform::from_translation(Vec3(3, 0, 4)), t);
  EXPECT_NEAR(mtre(shifted, t, targets), 5.0, 1e-12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_pose(rng, 3.0, 80.0);
    const auto b = random_pose(rng, 3.0, 80.0);
    EXPECT_NEAR(mtre(a, b, targets), ppcreg::testing::brute_mtre(a, b, targets), 1e-12 * 100.0);
  }
  EXPECT_PPC_ERROR(mtre(t, t, {}), ErrorCode::kInvalidArgument);
}

TEST(Mrpd, ExamplesAndOracle) {
  const auto cam = CameraModel::default_detector();
  std::mt19937_64 rng(92);
  std::vector<Vec3> targets;
  for (int i = 0; i < 40; ++i) targets.push_back(random_box(rng, 30.0));
  const auto gt = random_pose(rng, 0.5, 20.0, Vec3(0, 0, 800));
  EXPECT_NEAR(mrpd(gt, gt, targets, cam), 0.0, 1e-9);

  // Motion along the viewing ray of a single target is invisible.
  const Vec3 x = targets[0];
  const Vec3 ray = apply(gt, x).normalized();
  const auto along = compose(RigidTransform::from_translation(37.0 * ray), gt);
  EXPECT_NEAR(mrpd(along, gt, {x}, cam), 0.0, 1e-9);
  EXPECT_GT(mtre(along, gt, {x}), 36.0);

  for (int trial = 0; trial < 100; ++trial) {
    const auto est = compose(random_pose(rng, 0.3, 30.0), gt);
    EXPECT_NEAR(mrpd(est, gt, targets, cam), ppcreg::testing::brute_mrpd(est, gt, targets, cam), 1e-9);
  }
  EXPECT_PPC_ERROR(mrpd(view_pose(-50.0), gt, targets, cam), ErrorCode::kBehindCamera);
}

TEST(SuccessRatio, Examples) {
  std::vector<CaseRecord> rs(10, record(3.0, 0.0));
  EXPECT_EQ(success_ratio(rs), 1.0);

  rs.clear();
  for (int i = 0; i < 100; ++i) rs.push_back(record(1.0, i < 97 ? 1.5 : 2.5));
  EXPECT_DOUBLE_EQ(success_ratio(rs), 0.97);

  rs = {record(1.0, 0.5), record(1.0, std::nan(""), RunStatus::kFailed)};
  EXPECT_DOUBLE_EQ(success_ratio(rs), 0.5);
  // A failed run never counts, whatever its stored distance.
  rs[1].mrpd_final_mm = 0.0;
  EXPECT_DOUBLE_EQ(success_ratio(rs), 0.5);
  EXPECT_TRUE(is_success(record(1.0, 2.0)));
  EXPECT_FALSE(is_success(record(1.0, 2.0 + 1e-12)));
}

TEST(SuccessRatio, MonotoneInThreshold) {
  std::mt19937_64 rng(93);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rs = ppcreg::testing::random_report(rng);
    double prev = 0.0;
    for (double th = 0.0; th <= 12.0; th += 0.25) {
      const double sr = success_ratio(rs, th);
      EXPECT_GE(sr, prev);
      EXPECT_LE(sr, 1.0);
      prev = sr;
    }
  }
}

TEST(CaptureRange, Examples) {
  std::vector<CaseRecord> rs;
  for (int b = 0; b < 12; ++b) {
    for (int i = 0; i < 5; ++i) rs.push_back(record(5.0 * b + 1.0 + i * 0.7, 0.3));
  }
  auto cr = capture_range(rs);
  EXPECT_EQ(cr.label(), "55-60");
  EXPECT_FALSE(cr.skipped_empty_bins);

  for (auto& r : rs) {
    if (r.mtre_init_mm >= 25.0 && r.mtre_init_mm < 30.0) r.mrpd_final_mm = 9.0;
  }
  cr = capture_range(rs);
  EXPECT_EQ(cr.label(), "20-25");
  EXPECT_DOUBLE_EQ(cr.lower_mm(), 20.0);
  EXPECT_DOUBLE_EQ(cr.upper_mm(), 25.0);

  // Empty bins below the cut are skipped and flagged.
  std::vector<CaseRecord> holes = {record(1.0, 0.1), record(17.0, 0.1), record(23.0, 9.0)};
  cr = capture_range(holes);
  EXPECT_EQ(cr.label(), "15-20");
  EXPECT_TRUE(cr.skipped_empty_bins);

  EXPECT_EQ(capture_range({record(2.0, 5.0)}).label(), "0");
  EXPECT_PPC_ERROR(capture_range({}), ErrorCode::kInvalidArgument);
}

TEST(CaptureRange, MatchesBruteForceAndIgnoresOrder) {
  std::mt19937_64 rng(94);
  for (int trial = 0; trial < 100; ++trial) {
    auto rs = ppcreg::testing::random_report(rng);
    const auto expected = ppcreg::testing::brute_capture_range(rs, 5.0, 0.95, 2.0);
    EXPECT_EQ(capture_range(rs), expected);
    std::shuffle(rs.begin(), rs.end(), rng);
    EXPECT_EQ(capture_range(rs), expected);
  }
}

TEST(Sampling, ZeroRangesReturnGroundTruth) {
  const auto targets = surface_targets(sphere64_surface());
  SamplingRanges r;
  r.trans_range_mm = 0.0;
  r.rot_range_deg = 0.0;
  r.n_samples = 5;
  const auto gt = view_pose();
  for (const auto& s : sample_initial_transforms(gt, r, targets)) {
    EXPECT_EQ(s.mtre_mm, 0.0);
    EXPECT_EQ(s.t_init.matrix3x4(), gt.matrix3x4());
  }
}

TEST(Sampling, DefaultRangesCoverEveryBin) {
  const auto targets = surface_targets(sphere64_surface());
  SamplingRanges r;
  r.seed = 7;
  const auto samples = sample_initial_transforms(view_pose(), r, targets);
  ASSERT_EQ(samples.size(), 600u);
  std::vector<int> hist(12, 0);
  for (const auto& s : samples) {
    EXPECT_LE(s.mtre_mm, r.mtre_max_mm);
    EXPECT_NEAR(s.mtre_mm, mtre(s.t_init, view_pose(), targets), 1e-12);
    ++hist[std::min(11, static_cast<int>(s.mtre_mm / 5.0))];
  }
  for (int b = 0; b < 12; ++b) EXPECT_GT(hist[b], 0) << "bin " << b;

  const auto again = sample_initial_transforms(view_pose(), r, targets);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ASSERT_EQ(samples[i].t_init.matrix3x4(), again[i].t_init.matrix3x4());
  }
}

TEST(Sampling, Errors) {
  const auto targets = surface_targets(sphere64_surface());
  SamplingRanges r;
  r.mtre_max_mm = 1e-6;
  r.n_samples = 10;
  EXPECT_PPC_ERROR(sample_initial_transforms(view_pose(), r, targets), ErrorCode::kInfeasibleRanges);
  r = {};
  r.n_samples = 0;
  EXPECT_PPC_ERROR(sample_initial_transforms(view_pose(), r, targets), ErrorCode::kInvalidArgument);
  r = {};
  EXPECT_PPC_ERROR(sample_initial_transforms(view_pose(), r, {}), ErrorCode::kInvalidArgument);
}

TEST(Benchmark, SingleCaseAtGroundTruth) {
  SamplingRanges r;
  r.trans_range_mm = 0.0;
  r.rot_range_deg = 0.0;
  r.n_samples = 1;
  const auto cam = CameraModel::default_detector();
  const auto report = run_benchmark(sphere64(), sphere64_surface(), cam, {{"ap", view_pose()}}, r,
                                    LoopConfig{}, 1);
  ASSERT_EQ(report.records.size(), 1u);
  EXPECT_EQ(report.aggregates.success_ratio, 1.0);
  EXPECT_LE(report.records[0].mrpd_final_mm, 1e-6);
  EXPECT_EQ(report.records[0].status, RunStatus::kConverged);
}

TEST(Benchmark, ParallelismDoesNotChangeRecords) {
  SamplingRanges r;
  r.trans_range_mm = 20.0;
  r.rot_range_deg = 10.0;
  r.mtre_max_mm = 30.0;
  r.n_samples = 12;
  r.seed = 3;
  LoopConfig loop;
  loop.noise = {1.5, 0.2, 30.0, 11};
  loop.weighting.strategy = WeightingStrategy::kResidualRobust;
  const auto cam = CameraModel::default_detector();
  const std::vector<View> views = {{"ap", view_pose()},
                                   {"lat", RigidTransform::from_euler_deg(Vec3(0, 90, 0), Vec3(5, 0, 780))}};
  const auto a = run_benchmark(sphere64(), sphere64_surface(), cam, views, r, loop, 1);
  const auto b = run_benchmark(sphere64(), sphere64_surface(), cam, views, r, loop, 8);
  ASSERT_EQ(a.records.size(), 24u);
  std::ostringstream sa, sb;
  write_records(sa, a.records, false);
  write_records(sb, b.records, false);
  EXPECT_EQ(sa.str(), sb.str());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].case_id, static_cast<int>(i));
    EXPECT_EQ(a.records[i].view, i < 12 ? "ap" : "lat");
  }
}

TEST(Benchmark, Errors) {
  const auto cam = CameraModel::default_detector();
  SamplingRanges r;
  r.n_samples = 1;
  EXPECT_PPC_ERROR(run_benchmark(sphere64(), sphere64_surface(), cam, {}, r, LoopConfig{}, 1),
                   ErrorCode::kInvalidArgument);
  EXPECT_PPC_ERROR(run_benchmark(sphere64(), sphere64_surface(), cam, {{"ap", view_pose()}}, r,
                                 LoopConfig{}, 0),
                   ErrorCode::kInvalidArgument);
  EXPECT_PPC_ERROR(run_benchmark(sphere64(), sphere64_surface(), cam, {{"a,b", view_pose()}}, r,
                                 LoopConfig{}, 1),
                   ErrorCode::kInvalidArgument);
}

TEST(Report, AggregatesRecomputableFromRecords) {
  std::mt19937_64 rng(95);
  for (int trial = 0; trial < 20; ++trial) {
    EvalReport report;
    report.records = ppcreg::testing::random_report(rng);
    for (auto& r : report.records) r.wall_time_s = 0.01 + 0.1 * static_cast<double>(rng() % 100) / 7.0;
    report.aggregates = aggregate(report.records);
    std::stringstream ss;
    write_report(ss, report);
    const auto back = read_records(ss);
    ASSERT_EQ(back.size(), report.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], report.records[i]);
    const auto again = aggregate(back);
    EXPECT_EQ(again.n_cases, report.aggregates.n_cases);
    EXPECT_EQ(again.n_success, report.aggregates.n_success);
    EXPECT_EQ(again.success_ratio, report.aggregates.success_ratio);
    EXPECT_EQ(again.mrpd_mean_mm, report.aggregates.mrpd_mean_mm);
    EXPECT_EQ(again.mrpd_std_mm, report.aggregates.mrpd_std_mm);
    EXPECT_EQ(again.capture, report.aggregates.capture);
    EXPECT_EQ(again.runtime_mean_s, report.aggregates.runtime_mean_s);
    EXPECT_EQ(again.runtime_std_s, report.aggregates.runtime_std_s);
  }
}

TEST(Report, AggregatesOverSuccessesOnly) {
  const std::vector<CaseRecord> rs = {record(1.0, 1.0), record(2.0, 3.0), record(3.0, 0.0),
                                      record(4.0, std::nan(""), RunStatus::kFailed)};
  const auto a = aggregate(rs);
  EXPECT_EQ(a.n_cases, 4u);
  EXPECT_EQ(a.n_success, 2u);
  EXPECT_DOUBLE_EQ(a.success_ratio, 0.5);
  EXPECT_DOUBLE_EQ(a.mrpd_mean_mm, 0.5);
  EXPECT_DOUBLE_EQ(a.mrpd_std_mm, std::sqrt(0.5));
}

TEST(Report, FormatAndErrors) {
  EvalReport report;
  report.records = {record(1.25, 0.5), record(7.0, std::nan(""), RunStatus::kFailed)};
  report.records[1].case_id = 1;
  report.aggregates = aggregate(report.records);
  std::ostringstream os;
  write_report(os, report, false);
  const std::string text = os.str();
  EXPECT_EQ(text.rfind(std::string(kReportHeader) + "\n", 0), 0u);
  EXPECT_NE(text.find("1,ap,7,nan,failed,3,nan\n"), std::string::npos);
  EXPECT_NE(text.find("# success_ratio=0.5"), std::string::npos);
  EXPECT_NE(text.find("# mrpd_statistics=successful-cases-only"), std::string::npos);
  EXPECT_EQ(text.find("runtime_mean_s"), std::string::npos);

  std::istringstream bad(std::string(kReportHeader) + "\n0,ap,1,0.5,converged,3,0.1\n1,ap,x,0.5,converged,3,0.1\n");
  try {
    read_records(bad);
    ADD_FAILURE() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
  std::istringstream wrong_header("id,view\n");
  EXPECT_PPC_ERROR(read_records(wrong_header), ErrorCode::kFormat);
}

TEST(Report, SummaryRow) {
  Aggregates a;
  a.mrpd_mean_mm = 0.6;
  a.mrpd_std_mm = 0.4;
  a.success_ratio = 0.97;
  a.capture.bins = 12;
  a.runtime_mean_s = 8.05;
  a.runtime_std_s = 0.2;
  EXPECT_EQ(summary_row(a), "mRPD 0.60 +- 0.40 mm | SR 97.0 % | CR 55-60 mm | runtime 8.05 +- 0.20 s");
}
