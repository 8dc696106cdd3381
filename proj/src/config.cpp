#include "ppcreg/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "ppcreg/errors.hpp"

namespace ppcreg {

CameraModel ExperimentConfig::camera() const {
  return CameraModel::make(camera_width, camera_height, camera_pixel_spacing,
                           camera_source_to_detector);
}

Volume ExperimentConfig::make_volume() const {
  return make_phantom(phantom_kind, phantom_dims, phantom_spacing, phantom);
}

std::vector<View> ExperimentConfig::effective_views() const {
  if (!views.empty()) return views;
  return {View{"ap", RigidTransform::from_translation(Vec3(0.0, 0.0, 800.0))}};
}

namespace {

using Tokens = std::vector<std::string>;

struct BadValue {
  std::string what;
};

double num(const std::string& s) {
  std::size_t used = 0;
  double v = std::numeric_limits<double>::quiet_NaN();
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) throw BadValue{"bad number '" + s + "'"};
  return v;
}

long long integer(const std::string& s) {
  const double v = num(s);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw BadValue{"expected an integer, got '" + s + "'"};
  return static_cast<long long>(v);
}

void arity(const Tokens& t, std::size_t n) {
  if (t.size() != n) {
    throw BadValue{"expected " + std::to_string(n) + " value(s), got " + std::to_string(t.size())};
  }
}

double one(const Tokens& t) {
  arity(t, 1);
  return num(t[0]);
}

long long one_int(const Tokens& t) {
  arity(t, 1);
  return integer(t[0]);
}

std::size_t count(const Tokens& t) {
  const long long v = one_int(t);
  if (v < 0) throw BadValue{"expected a non-negative count"};
  return static_cast<std::size_t>(v);
}

Vec3 vec3_or_scalar(const Tokens& t) {
  if (t.size() == 1) return Vec3::Constant(num(t[0]));
  arity(t, 3);
  return {num(t[0]), num(t[1]), num(t[2])};
}

template <class F>
auto wrap_domain(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw BadValue{e.what()};
  }
}

using Setter = std::function<void(ExperimentConfig&, const Tokens&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"phantom.kind", [](auto& c, const Tokens& t) {
         arity(t, 1);
         c.phantom_kind = wrap_domain([&] { return phantom_kind_from_string(t[0]); });
       }},
      {"phantom.dims", [](auto& c, const Tokens& t) {
         const Vec3 d = vec3_or_scalar(t);
         for (int a = 0; a < 3; ++a) {
           if (d[a] != std::floor(d[a]) || d[a] < 1 || d[a] > 4096) throw BadValue{"bad dims"};
         }
         c.phantom_dims = d.cast<int>();
       }},
      {"phantom.spacing", [](auto& c, const Tokens& t) { c.phantom_spacing = vec3_or_scalar(t); }},
      {"phantom.density", [](auto& c, const Tokens& t) { c.phantom.density = one(t); }},
      {"phantom.radius", [](auto& c, const Tokens& t) { c.phantom.radius = one(t); }},
      {"phantom.radius2", [](auto& c, const Tokens& t) { c.phantom.radius2 = one(t); }},
      {"phantom.separation", [](auto& c, const Tokens& t) { c.phantom.separation = one(t); }},
      {"phantom.half_extent", [](auto& c, const Tokens& t) { c.phantom.half_extent = vec3_or_scalar(t); }},
      {"phantom.half_length", [](auto& c, const Tokens& t) { c.phantom.half_length = one(t); }},
      {"phantom.texture_amplitude", [](auto& c, const Tokens& t) { c.phantom.texture_amplitude = one(t); }},
      {"phantom.texture_period_mm", [](auto& c, const Tokens& t) { c.phantom.texture_period_mm = one(t); }},
      {"camera.width", [](auto& c, const Tokens& t) { c.camera_width = static_cast<int>(one_int(t)); }},
      {"camera.height", [](auto& c, const Tokens& t) { c.camera_height = static_cast<int>(one_int(t)); }},
      {"camera.pixel_spacing", [](auto& c, const Tokens& t) { c.camera_pixel_spacing = one(t); }},
      {"camera.source_to_detector", [](auto& c, const Tokens& t) { c.camera_source_to_detector = one(t); }},
      {"surface.grad_threshold", [](auto& c, const Tokens& t) { c.grad_threshold = one(t); }},
      {"surface.max_points", [](auto& c, const Tokens& t) { c.max_points = count(t); }},
      {"surface.seed", [](auto& c, const Tokens& t) { c.surface_seed = count(t); }},
      {"contours.tau", [](auto& c, const Tokens& t) { c.loop.contours.tau = one(t); }},
      {"contours.max_contours", [](auto& c, const Tokens& t) { c.loop.contours.max_contours = count(t); }},
      {"estimator.kind", [](auto& c, const Tokens& t) {
         arity(t, 1);
         c.loop.estimator = wrap_domain([&] { return estimator_from_string(t[0]); });
       }},
      {"estimator.external_dir", [](auto& c, const Tokens& t) {
         arity(t, 1);
         c.loop.external_dir = t[0];
       }},
      {"patch.patch_radius_px", [](auto& c, const Tokens& t) { c.loop.patch.patch_radius_px = static_cast<int>(one_int(t)); }},
      {"patch.search_radius_px", [](auto& c, const Tokens& t) { c.loop.patch.search_radius_px = static_cast<int>(one_int(t)); }},
      {"patch.min_ncc", [](auto& c, const Tokens& t) { c.loop.patch.min_ncc = one(t); }},
      {"weighting.strategy", [](auto& c, const Tokens& t) {
         arity(t, 1);
         c.loop.weighting.strategy = wrap_domain([&] { return weighting_from_string(t[0]); });
       }},
      {"weighting.delta_px", [](auto& c, const Tokens& t) { c.loop.weighting.delta_px = one(t); }},
      {"loop.max_iterations", [](auto& c, const Tokens& t) { c.loop.max_iterations = static_cast<int>(one_int(t)); }},
      {"loop.rot_tol", [](auto& c, const Tokens& t) { c.loop.rot_tol = one(t); }},
      {"loop.trans_tol", [](auto& c, const Tokens& t) { c.loop.trans_tol = one(t); }},
      {"loop.step_mm", [](auto& c, const Tokens& t) { c.loop.step_mm = one(t); }},
      {"solver.tikhonov_lambda", [](auto& c, const Tokens& t) { c.loop.solver.tikhonov_lambda = one(t); }},
      {"solver.min_rows", [](auto& c, const Tokens& t) { c.loop.solver.min_rows = count(t); }},
      {"noise.sigma_px", [](auto& c, const Tokens& t) { c.loop.noise.sigma_px = one(t); }},
      {"noise.outlier_frac", [](auto& c, const Tokens& t) { c.loop.noise.outlier_frac = one(t); }},
      {"noise.outlier_mag_px", [](auto& c, const Tokens& t) { c.loop.noise.outlier_mag_px = one(t); }},
      {"noise.seed", [](auto& c, const Tokens& t) { c.loop.noise.seed = count(t); }},
      {"sampling.trans_range_mm", [](auto& c, const Tokens& t) { c.sampling.trans_range_mm = one(t); }},
      {"sampling.rot_range_deg", [](auto& c, const Tokens& t) { c.sampling.rot_range_deg = one(t); }},
      {"sampling.mtre_max_mm", [](auto& c, const Tokens& t) { c.sampling.mtre_max_mm = one(t); }},
      {"sampling.n_samples", [](auto& c, const Tokens& t) { c.sampling.n_samples = static_cast<int>(one_int(t)); }},
      {"sampling.seed", [](auto& c, const Tokens& t) { c.sampling.seed = count(t); }},
      {"eval.success_mm", [](auto& c, const Tokens& t) { c.thresholds.success_mm = one(t); }},
      {"eval.bin_mm", [](auto& c, const Tokens& t) { c.thresholds.bin_mm = one(t); }},
      {"eval.sr_min", [](auto& c, const Tokens& t) { c.thresholds.sr_min = one(t); }},
      {"eval.jobs", [](auto& c, const Tokens& t) { c.jobs = static_cast<int>(one_int(t)); }},
      {"output.dir", [](auto& c, const Tokens& t) {
         arity(t, 1);
         c.output_dir = t[0];
       }},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config(std::istream& is, const std::string& source_name) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::kFormat, source_name + ": line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    std::istringstream ks(line.substr(0, eq));
    std::string key, extra;
    ks >> key;
    if (key.empty() || (ks >> extra)) fail("malformed key");
    Tokens values;
    std::istringstream vs(line.substr(eq + 1));
    for (std::string tok; vs >> tok;) values.push_back(tok);
    if (values.empty()) fail("missing value for '" + key + "'");
    if (!seen.insert(key).second) fail("duplicate key '" + key + "'");

    try {
      if (key.starts_with("view.")) {
        const std::string name = key.substr(5);
        if (name.empty() || name.find(',') != std::string::npos) fail("bad view name");
        arity(values, 6);
        Vec3 angles, trans;
        for (int a = 0; a < 3; ++a) angles[a] = num(values[a]);
        for (int a = 0; a < 3; ++a) trans[a] = num(values[3 + a]);
        cfg.views.push_back({name, RigidTransform::from_euler_deg(angles, trans)});
        continue;
      }
      auto it = setters().find(key);
      if (it == setters().end()) fail("unknown key '" + key + "'");
      it->second(cfg, values);
    } catch (const BadValue& e) {
      fail(key + ": " + e.what);
    }
  }
  line_no = 0;
  try {
    cfg.loop.validate();
    cfg.sampling.validate();
    cfg.camera().validate();
    if (cfg.jobs < 1) throw Error(ErrorCode::kInvalidArgument, "eval.jobs must be >= 1");
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, source_name + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return parse_config(is, path.string());
}

}  // namespace ppcreg
