#include "ppcreg/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "ppcreg/drr.hpp"
#include "ppcreg/errors.hpp"
#include "ppcreg/metrics.hpp"

namespace ppcreg {

void SamplingRanges::validate() const {
  if (!(trans_range_mm >= 0.0) || !(rot_range_deg >= 0.0) || !(mtre_max_mm >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sampling ranges must be >= 0");
  }
  if (n_samples < 1) throw Error(ErrorCode::kInvalidArgument, "n_samples must be >= 1");
}

std::vector<InitialSample> sample_initial_transforms(const RigidTransform& gt,
                                                     const SamplingRanges& ranges,
                                                     const std::vector<Vec3>& targets) {
  ranges.validate();
  if (targets.empty()) throw Error(ErrorCode::kInvalidArgument, "sampling needs targets");

  constexpr long kProbeDraws = 100000;
  std::mt19937_64 rng(ranges.seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<InitialSample> out;
  out.reserve(static_cast<std::size_t>(ranges.n_samples));
  long draws = 0;
  while (out.size() < static_cast<std::size_t>(ranges.n_samples)) {
    if (draws >= kProbeDraws && static_cast<double>(out.size()) < 0.01 * static_cast<double>(draws)) {
      throw Error(ErrorCode::kInfeasibleRanges,
                  std::to_string(out.size()) + " of " + std::to_string(draws) +
                      " draws within mTRE " + std::to_string(ranges.mtre_max_mm) + " mm");
    }
    ++draws;
    const double scale = unit(rng);
    Vec3 angles, trans;
    for (int a = 0; a < 3; ++a) angles[a] = scale * ranges.rot_range_deg * sym(rng);
    for (int a = 0; a < 3; ++a) trans[a] = scale * ranges.trans_range_mm * sym(rng);
    const RigidTransform t_init = compose(gt, RigidTransform::from_euler_deg(angles, trans));
    const double err = mtre(t_init, gt, targets);
    if (err > ranges.mtre_max_mm) continue;
    out.push_back({t_init, err});
  }
  return out;
}

namespace {

bool same_double(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

}  // namespace

bool CaseRecord::operator==(const CaseRecord& o) const {
  return case_id == o.case_id && view == o.view && same_double(mtre_init_mm, o.mtre_init_mm) &&
         same_double(mrpd_final_mm, o.mrpd_final_mm) && status == o.status &&
         iterations == o.iterations && same_double(wall_time_s, o.wall_time_s);
}

bool is_success(const CaseRecord& r, double threshold_mm) {
  return r.status != RunStatus::kFailed && std::isfinite(r.mrpd_final_mm) &&
         r.mrpd_final_mm <= threshold_mm;
}

double success_ratio(const std::vector<CaseRecord>& records, double threshold_mm) {
  if (records.empty()) return 0.0;
  const auto ok = std::count_if(records.begin(), records.end(),
                                [&](const CaseRecord& r) { return is_success(r, threshold_mm); });
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

std::string CaptureRange::label() const {
  if (bins == 0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g-%g", lower_mm(), upper_mm());
  return buf;
}

CaptureRange capture_range(const std::vector<CaseRecord>& records, double bin_mm, double sr_min,
                           double threshold_mm) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "capture range needs records");
  if (!(bin_mm > 0.0)) throw Error(ErrorCode::kInvalidArgument, "bin width must be positive");

  std::map<long, std::pair<std::size_t, std::size_t>> bins;  // index -> (successes, total)
  for (const CaseRecord& r : records) {
    if (!(r.mtre_init_mm >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "record without a valid initial mTRE");
    }
    auto& b = bins[static_cast<long>(std::floor(r.mtre_init_mm / bin_mm))];
    b.first += is_success(r, threshold_mm) ? 1 : 0;
    b.second += 1;
  }
  CaptureRange cr;
  cr.bin_mm = bin_mm;
  const long last = bins.rbegin()->first;
  long k = 0;
  while (k <= last) {
    auto it = bins.find(k);
    if (it != bins.end()) {
      const double sr = static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
      if (sr < sr_min) break;
    }
    ++k;
  }
  cr.bins = static_cast<int>(k);
  for (long j = 0; j < k; ++j) {
    if (!bins.contains(j)) cr.skipped_empty_bins = true;
  }
  return cr;
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& stdev) {
  mean = 0.0;
  stdev = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  stdev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

Aggregates aggregate(const std::vector<CaseRecord>& records, const EvalThresholds& th) {
  Aggregates a;
  a.thresholds = th;
  a.n_cases = records.size();
  if (records.empty()) return a;
  std::vector<double> mrpds, times;
  for (const CaseRecord& r : records) {
    if (is_success(r, th.success_mm)) mrpds.push_back(r.mrpd_final_mm);
    if (std::isfinite(r.wall_time_s)) times.push_back(r.wall_time_s);
  }
  a.n_success = mrpds.size();
  a.success_ratio = success_ratio(records, th.success_mm);
  mean_std(mrpds, a.mrpd_mean_mm, a.mrpd_std_mm);
  mean_std(times, a.runtime_mean_s, a.runtime_std_s);
  a.capture = capture_range(records, th.bin_mm, th.sr_min, th.success_mm);
  return a;
}

EvalReport run_benchmark(const Volume& v, const std::vector<SurfacePoint>& surface,
                         const CameraModel& cam, const std::vector<View>& views,
                         const SamplingRanges& ranges, const LoopConfig& loop, int parallelism,
                         const EvalThresholds& th) {
  if (views.empty()) throw Error(ErrorCode::kInvalidArgument, "benchmark needs at least one view");
  if (parallelism < 1) throw Error(ErrorCode::kInvalidArgument, "parallelism must be >= 1");
  loop.validate();
  ranges.validate();
  for (const View& view : views) {
    if (view.name.empty() || view.name.find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "view names must be non-empty without commas");
    }
  }
  const std::vector<Vec3> targets = surface_targets(surface);
  const double step = loop.step_mm > 0.0 ? loop.step_mm : default_step_mm(v);

  struct Case {
    int id;
    std::size_t view;
    InitialSample sample;
  };
  std::vector<Image2D> fixed_images;
  std::vector<Case> cases;
  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    fixed_images.push_back(render_drr(v, views[vi].gt, cam, step));
    SamplingRanges view_ranges = ranges;
    view_ranges.seed = derive_seed(ranges.seed, vi);
    for (const InitialSample& s : sample_initial_transforms(views[vi].gt, view_ranges, targets)) {
      cases.push_back({static_cast<int>(cases.size()), vi, s});
    }
  }

  std::vector<CaseRecord> records(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      const Case& c = cases[i];
      const View& view = views[c.view];
      LoopConfig cfg = loop;
      cfg.noise.seed = derive_seed(loop.noise.seed, static_cast<std::uint64_t>(c.id));

      const auto t0 = std::chrono::steady_clock::now();
      const RegistrationResult res = run_registration(v, surface, fixed_images[c.view],
                                                      c.sample.t_init, cam, cfg, view.gt);
      CaseRecord rec;
      rec.case_id = c.id;
      rec.view = view.name;
      rec.mtre_init_mm = c.sample.mtre_mm;
      rec.status = res.status;
      rec.iterations = res.iterations_run;
      rec.mrpd_final_mm = std::numeric_limits<double>::quiet_NaN();
      if (res.status != RunStatus::kFailed) {
        try {
          rec.mrpd_final_mm = mrpd(res.t_final, view.gt, targets, cam);
        } catch (const Error&) {
          rec.status = RunStatus::kFailed;
        }
      }
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      records[i] = rec;
    }
  };
  const auto n_threads =
      static_cast<std::size_t>(std::min<long>(parallelism, static_cast<long>(cases.size())));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th_ : pool) th_.join();

  EvalReport report;
  report.records = std::move(records);
  report.aggregates = aggregate(report.records, th);
  return report;
}

namespace {

std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void write_records(std::ostream& os, const std::vector<CaseRecord>& records, bool include_timing) {
  os << kReportHeader << '\n';
  for (const CaseRecord& r : records) {
    os << r.case_id << ',' << r.view << ',' << fmt17(r.mtre_init_mm) << ','
       << fmt17(r.mrpd_final_mm) << ',' << to_string(r.status) << ',' << r.iterations << ','
       << (include_timing ? fmt17(r.wall_time_s) : std::string("nan")) << '\n';
  }
}

void write_report(std::ostream& os, const EvalReport& report, bool include_timing) {
  write_records(os, report.records, include_timing);
  const Aggregates& a = report.aggregates;
  os << "# n_cases=" << a.n_cases << '\n'
     << "# n_success=" << a.n_success << '\n'
     << "# success_threshold_mm=" << fmt17(a.thresholds.success_mm) << '\n'
     << "# success_ratio=" << fmt17(a.success_ratio) << '\n'
     << "# mrpd_mean_mm=" << fmt17(a.mrpd_mean_mm) << '\n'
     << "# mrpd_std_mm=" << fmt17(a.mrpd_std_mm) << '\n'
     << "# mrpd_statistics=successful-cases-only\n"
     << "# capture_range_mm=" << a.capture.label() << '\n'
     << "# capture_range_bin_mm=" << fmt17(a.thresholds.bin_mm) << '\n'
     << "# capture_range_sr_min=" << fmt17(a.thresholds.sr_min) << '\n'
     << "# capture_range_empty_bins_skipped=" << (a.capture.skipped_empty_bins ? 1 : 0) << '\n';
  if (include_timing) {
    os << "# runtime_mean_s=" << fmt17(a.runtime_mean_s) << '\n'
       << "# runtime_std_s=" << fmt17(a.runtime_std_s) << '\n';
  }
}

namespace {

double parse_field(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw Error(ErrorCode::kFormat, "line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<CaseRecord> read_records(std::istream& is) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line) || line != kReportHeader) {
    throw Error(ErrorCode::kFormat, "line 1: missing report header");
  }
  std::vector<CaseRecord> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 7) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": expected 7 fields");
    }
    CaseRecord r;
    r.case_id = static_cast<int>(parse_field(f[0], line_no));
    r.view = f[1];
    r.mtre_init_mm = parse_field(f[2], line_no);
    r.mrpd_final_mm = parse_field(f[3], line_no);
    try {
      r.status = run_status_from_string(f[4]);
    } catch (const Error&) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": bad status '" + f[4] + "'");
    }
    r.iterations = static_cast<int>(parse_field(f[5], line_no));
    r.wall_time_s = parse_field(f[6], line_no);
    out.push_back(r);
  }
  return out;
}

std::string summary_row(const Aggregates& a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "mRPD %.2f +- %.2f mm | SR %.1f %% | CR %s mm | runtime %.2f +- %.2f s",
                a.mrpd_mean_mm, a.mrpd_std_mm, 100.0 * a.success_ratio, a.capture.label().c_str(),
                a.runtime_mean_s, a.runtime_std_s);
  return buf;
}

}  // namespace ppcreg
