// ppcreg: phantom generation, DRR rendering, single-case registration and
// batch evaluation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppcreg/config.hpp"
#include "ppcreg/drr.hpp"
#include "ppcreg/errors.hpp"
#include "ppcreg/evaluation.hpp"
#include "ppcreg/io.hpp"
#include "ppcreg/metrics.hpp"
#include "ppcreg/registration.hpp"
#include "ppcreg/volume.hpp"

namespace fs = std::filesystem;
using namespace ppcreg;

namespace {

Vec3 expand3(const std::vector<double>& v) {
  return v.size() == 1 ? Vec3::Constant(v[0]) : Vec3(v[0], v[1], v[2]);
}

RigidTransform pose_from_args(const std::vector<double>& six) {
  return RigidTransform::from_euler_deg(Vec3(six[0], six[1], six[2]), Vec3(six[3], six[4], six[5]));
}

std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct CameraArgs {
  double source_to_detector = 1200.0;
};

struct SurfaceArgs {
  double grad_threshold = kDefaultGradThreshold;
  std::size_t max_points = 4000;
  std::uint64_t seed = 0;
  double tau = 0.15;
  std::size_t max_contours = 800;
};

void add_surface_options(CLI::App* cmd, SurfaceArgs& s) {
  cmd->add_option("--grad-threshold", s.grad_threshold, "Surface gradient threshold (1/mm^2)")
      ->capture_default_str();
  cmd->add_option("--max-points", s.max_points, "Surface point budget")->capture_default_str();
  cmd->add_option("--surface-seed", s.seed, "Surface subsampling seed")->capture_default_str();
  cmd->add_option("--tau", s.tau, "Apparent-contour tolerance |g . w_hat|")->capture_default_str();
  cmd->add_option("--max-contours", s.max_contours, "Contour points kept per iteration")
      ->capture_default_str();
}

// --- make-phantom ---------------------------------------------------------

struct PhantomArgs {
  std::string kind = "sphere";
  std::vector<int> dims{64};
  std::vector<double> spacing{1.0};
  PhantomParams params;
  std::vector<double> half_extent{18.0, 12.0, 24.0};
  fs::path out;
};

int cmd_make_phantom(const PhantomArgs& a) {
  const Eigen::Vector3i dims = a.dims.size() == 1 ? Eigen::Vector3i::Constant(a.dims[0])
                                                  : Eigen::Vector3i(a.dims[0], a.dims[1], a.dims[2]);
  PhantomParams p = a.params;
  p.half_extent = expand3(a.half_extent);
  const Volume v = make_phantom(phantom_kind_from_string(a.kind), dims, expand3(a.spacing), p);
  write_volume(a.out, v);
  const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
  std::printf("dims %d %d %d  range [%g, %g]  -> %s\n", dims.x(), dims.y(), dims.z(), *lo, *hi,
              a.out.c_str());
  return 0;
}

// --- render ---------------------------------------------------------------

struct RenderArgs {
  fs::path volume;
  std::vector<double> pose{0, 0, 0, 0, 0, 800};
  fs::path pose_file;
  int width = 616;
  int height = 480;
  double pixel_spacing = 0.616;
  CameraArgs cam;
  double step_mm = 0.0;
  fs::path out;
  fs::path pgm;
  fs::path overlay;
  SurfaceArgs surface;
};

int cmd_render(const RenderArgs& a) {
  const Volume v = read_volume(a.volume);
  const RigidTransform t = a.pose_file.empty() ? pose_from_args(a.pose) : read_pose(a.pose_file);
  const CameraModel cam =
      CameraModel::make(a.width, a.height, a.pixel_spacing, a.cam.source_to_detector);
  const Image2D img = render_drr(v, t, cam, a.step_mm > 0.0 ? a.step_mm : default_step_mm(v));
  write_image(a.out, img);
  if (!a.pgm.empty()) write_pgm(a.pgm, img);
  if (!a.overlay.empty()) {
    const auto surface =
        extract_surface_points(v, a.surface.grad_threshold, a.surface.max_points, a.surface.seed);
    const ContourSet contours = select_apparent_contours(
        surface, t, cam, ContourParams{a.surface.tau, a.surface.max_contours});
    write_pgm(a.overlay, render_overlay(img, contours));
  }
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  std::printf("%dx%d  range [%g, %g]  -> %s\n", img.width, img.height, *lo, *hi, a.out.c_str());
  return 0;
}

// --- register -------------------------------------------------------------

struct RegisterArgs {
  fs::path volume;
  fs::path fixed;
  std::vector<double> init;
  fs::path init_file;
  std::vector<double> gt;
  fs::path gt_file;
  CameraArgs cam;
  std::string estimator = "oracle";
  fs::path external_dir;
  std::string weighting = "uniform";
  double delta_px = 3.0;
  int max_iterations = 10;
  double step_mm = 0.0;
  NoiseModel noise;
  SurfaceArgs surface;
  fs::path out;
  fs::path trace;
  fs::path overlay_dir;
  int overlay_iterations = 3;
  bool strict = false;
};

void write_trace(const fs::path& path, const RegistrationResult& r) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  os << "iteration,omega_x,omega_y,omega_z,t_x,t_y,t_z,num_correspondences,mean_flow_px,mrpd_mm\n";
  for (const IterationRecord& it : r.trace) {
    os << it.iteration;
    for (int k = 0; k < 3; ++k) os << ',' << fmt17(it.dv.omega[k]);
    for (int k = 0; k < 3; ++k) os << ',' << fmt17(it.dv.trans[k]);
    os << ',' << it.num_correspondences << ',' << fmt17(it.mean_flow_px) << ','
       << (it.mrpd_mm ? fmt17(*it.mrpd_mm) : std::string("nan")) << '\n';
  }
  os << "# status=" << to_string(r.status) << '\n' << "# iterations=" << r.iterations_run << '\n';
  if (!r.failure_reason.empty()) os << "# failure=" << r.failure_reason << '\n';
}

int cmd_register(const RegisterArgs& a) {
  const Volume v = read_volume(a.volume);
  const Image2D flr = read_image(a.fixed);
  const CameraModel cam =
      CameraModel::make(flr.width, flr.height, flr.pixel_spacing, a.cam.source_to_detector);
  const RigidTransform t_init = a.init_file.empty() ? pose_from_args(a.init) : read_pose(a.init_file);
  std::optional<RigidTransform> gt;
  if (!a.gt_file.empty()) gt = read_pose(a.gt_file);
  else if (!a.gt.empty()) gt = pose_from_args(a.gt);

  LoopConfig cfg;
  cfg.max_iterations = a.max_iterations;
  cfg.estimator = estimator_from_string(a.estimator);
  cfg.external_dir = a.external_dir;
  cfg.weighting = {weighting_from_string(a.weighting), a.delta_px};
  cfg.contours = {a.surface.tau, a.surface.max_contours};
  cfg.step_mm = a.step_mm;
  cfg.noise = a.noise;
  cfg.validate();

  const auto surface =
      extract_surface_points(v, a.surface.grad_threshold, a.surface.max_points, a.surface.seed);
  IterationObserver observer;
  if (!a.overlay_dir.empty()) {
    fs::create_directories(a.overlay_dir);
    observer = [&](int it, const RigidTransform&, const ContourSet& contours) {
      if (it > a.overlay_iterations) return;
      write_pgm(a.overlay_dir / ("overlay_iter_" + std::to_string(it) + ".pgm"),
                render_overlay(flr, contours));
    };
  }
  const RegistrationResult r = run_registration(v, surface, flr, t_init, cam, cfg, gt, nullptr, observer);

  write_pose(a.out, r.t_final);
  if (!a.trace.empty()) write_trace(a.trace, r);
  std::printf("status %s  iterations %d", to_string(r.status), r.iterations_run);
  if (gt && r.status != RunStatus::kFailed) {
    try {
      std::printf("  mRPD %.6f mm", mrpd(r.t_final, *gt, surface_targets(surface), cam));
    } catch (const Error&) {
      std::printf("  mRPD undefined");
    }
  }
  std::printf("\n");
  if (r.status == RunStatus::kFailed) {
    std::fprintf(stderr, "registration failed: %s\n", r.failure_reason.c_str());
    if (a.strict) return 1;
  }
  return 0;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  fs::path config;
  int jobs = 0;
  fs::path out;
  bool no_timing = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(a.config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  if (a.jobs > 0) cfg.jobs = a.jobs;
  const Volume v = cfg.make_volume();
  const auto surface = extract_surface_points(v, cfg.grad_threshold, cfg.max_points, cfg.surface_seed);
  const EvalReport report = run_benchmark(v, surface, cfg.camera(), cfg.effective_views(),
                                          cfg.sampling, cfg.loop, cfg.jobs, cfg.thresholds);
  const fs::path out = a.out.empty() ? cfg.output_dir / "records.csv" : a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os(out);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + out.string());
  write_report(os, report, !a.no_timing);
  if (!os) throw Error(ErrorCode::kIo, "write failed: " + out.string());
  std::printf("%zu cases (%zu successful) -> %s\n", report.aggregates.n_cases,
              report.aggregates.n_success, out.c_str());
  if (report.aggregates.capture.skipped_empty_bins) {
    std::printf("warning: capture range skipped empty mTRE bins\n");
  }
  std::printf("%s\n", summary_row(report.aggregates).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-to-plane 2D/3D registration toolkit"};
  app.require_subcommand(1);

  PhantomArgs ph;
  auto* mk = app.add_subcommand("make-phantom", "Write a synthetic attenuation volume");
  mk->add_option("--kind", ph.kind, "sphere | box | tube | two-spheres")
      ->check(CLI::IsMember({"sphere", "box", "tube", "two-spheres"}))
      ->capture_default_str();
  mk->add_option("--dims", ph.dims, "Voxels per axis (1 or 3 values)")->expected(1, 3)->capture_default_str();
  mk->add_option("--spacing", ph.spacing, "Voxel spacing in mm (1 or 3 values)")->expected(1, 3)->capture_default_str();
  mk->add_option("--density", ph.params.density, "Attenuation inside the solid (1/mm)")->capture_default_str();
  mk->add_option("--radius", ph.params.radius, "Sphere / tube / first sphere radius (mm)")->capture_default_str();
  mk->add_option("--radius2", ph.params.radius2, "Second sphere radius (mm)")->capture_default_str();
  mk->add_option("--separation", ph.params.separation, "Two-spheres center distance (mm)")->capture_default_str();
  mk->add_option("--half-extent", ph.half_extent, "Box half extents (mm, 1 or 3 values)")->expected(1, 3);
  mk->add_option("--half-length", ph.params.half_length, "Tube half length (mm)")->capture_default_str();
  mk->add_option("--texture-amplitude", ph.params.texture_amplitude, "Interior texture amplitude in [0,1)")
      ->capture_default_str();
  mk->add_option("--texture-period", ph.params.texture_period_mm, "Texture period (mm)")->capture_default_str();
  mk->add_option("-o,--output", ph.out, "Volume file")->required();

  RenderArgs rd;
  auto* rn = app.add_subcommand("render", "Render a DRR of a volume at a pose");
  rn->add_option("--volume", rd.volume, "Volume file")->required()->check(CLI::ExistingFile);
  auto* rn_pose = rn->add_option("--pose", rd.pose, "rx ry rz (deg) tx ty tz (mm)")->expected(6);
  rn->add_option("--pose-file", rd.pose_file, "3x4 pose file")->check(CLI::ExistingFile)->excludes(rn_pose);
  rn->add_option("--width", rd.width, "Detector width (px)")->capture_default_str();
  rn->add_option("--height", rd.height, "Detector height (px)")->capture_default_str();
  rn->add_option("--pixel-spacing", rd.pixel_spacing, "Detector pixel spacing (mm)")->capture_default_str();
  rn->add_option("--sdd", rd.cam.source_to_detector, "Source-to-detector distance (mm)")->capture_default_str();
  rn->add_option("--step", rd.step_mm, "Ray-marching step (mm, 0 = half voxel)")->capture_default_str();
  rn->add_option("-o,--output", rd.out, "Raw f32 image file")->required();
  rn->add_option("--pgm", rd.pgm, "Also write a 16-bit PGM");
  rn->add_option("--overlay", rd.overlay, "Write a PGM with apparent contours marked");
  add_surface_options(rn, rd.surface);

  RegisterArgs rg;
  auto* re = app.add_subcommand("register", "Register a volume to a fixed image");
  re->add_option("--volume", rg.volume, "Volume file")->required()->check(CLI::ExistingFile);
  re->add_option("--fixed", rg.fixed, "Fixed image (raw f32)")->required()->check(CLI::ExistingFile);
  auto* re_init = re->add_option("--init", rg.init, "Initial pose: rx ry rz (deg) tx ty tz (mm)")->expected(6);
  auto* re_init_file = re->add_option("--init-file", rg.init_file, "Initial pose file")->check(CLI::ExistingFile);
  re_init->excludes(re_init_file);
  auto* re_gt = re->add_option("--gt", rg.gt, "Ground-truth pose: rx ry rz (deg) tx ty tz (mm)")->expected(6);
  re->add_option("--gt-file", rg.gt_file, "Ground-truth pose file")->check(CLI::ExistingFile)->excludes(re_gt);
  re->add_option("--sdd", rg.cam.source_to_detector, "Source-to-detector distance (mm)")->capture_default_str();
  re->add_option("--estimator", rg.estimator, "oracle | patch | external")
      ->check(CLI::IsMember({"oracle", "patch", "external"}))
      ->capture_default_str();
  re->add_option("--external-dir", rg.external_dir, "Directory holding corr_iter_<k>.csv files");
  re->add_option("--weighting", rg.weighting, "uniform | score | residual-robust")
      ->check(CLI::IsMember({"uniform", "score", "residual-robust"}))
      ->capture_default_str();
  re->add_option("--delta", rg.delta_px, "Residual-robust threshold (px)")->capture_default_str();
  re->add_option("--max-iterations", rg.max_iterations, "Iteration cap")->capture_default_str();
  re->add_option("--step", rg.step_mm, "Ray-marching step (mm, 0 = half voxel)")->capture_default_str();
  re->add_option("--noise-sigma", rg.noise.sigma_px, "Correspondence jitter (px)");
  re->add_option("--outlier-frac", rg.noise.outlier_frac, "Outlier fraction of valid matches");
  re->add_option("--outlier-mag", rg.noise.outlier_mag_px, "Maximum outlier displacement (px)");
  re->add_option("--noise-seed", rg.noise.seed, "Noise seed");
  add_surface_options(re, rg.surface);
  re->add_option("-o,--output", rg.out, "Final pose file")->required();
  re->add_option("--trace", rg.trace, "Per-iteration trace (CSV)");
  re->add_option("--overlay-dir", rg.overlay_dir, "Directory for per-iteration contour overlays");
  re->add_option("--overlay-iterations", rg.overlay_iterations, "Overlays written for the first N iterations")
      ->capture_default_str();
  re->add_flag("--strict", rg.strict, "Exit nonzero when registration fails");

  EvaluateArgs ev;
  auto* eva = app.add_subcommand("evaluate", "Run a batch benchmark from a config file");
  eva->add_option("config", ev.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  eva->add_option("--jobs", ev.jobs, "Worker threads (overrides eval.jobs)");
  eva->add_option("-o,--output", ev.out, "Records file (default <output.dir>/records.csv)");
  eva->add_flag("--no-timing", ev.no_timing, "Write nan in the wall-time column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (mk->parsed()) return cmd_make_phantom(ph);
    if (rn->parsed()) return cmd_render(rd);
    if (re->parsed()) {
      if (rg.init.empty() && rg.init_file.empty()) {
        std::cerr << "register: one of --init or --init-file is required\n";
        return 2;
      }
      return cmd_register(rg);
    }
    if (eva->parsed()) return cmd_evaluate(ev);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
