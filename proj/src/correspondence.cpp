#include "ppcreg/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

#include "ppcreg/errors.hpp"

namespace ppcreg {

std::size_t CorrespondenceSet::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

std::size_t WeightVector::positive_count() const {
  return static_cast<std::size_t>(
      std::count_if(w_diag.begin(), w_diag.end(), [](double x) { return x > 0.0; }));
}

namespace {

CorrespondenceSet empty_like(const ContourSet& contours) {
  CorrespondenceSet c;
  const std::size_t n = contours.size();
  c.p = contours.p;
  c.p_prime = contours.p;
  c.valid.assign(n, false);
  c.score.assign(n, 0.0);
  return c;
}

}  // namespace

CorrespondenceSet oracle_correspondences(const ContourSet& contours, const RigidTransform& pose,
                                         const RigidTransform& gt, const CameraModel& cam) {
  CorrespondenceSet c = empty_like(contours);
  // Camera-frame map taking the current estimate of a point to its true position.
  const RigidTransform to_gt = compose(gt, pose.inverse());
  for (std::size_t i = 0; i < contours.size(); ++i) {
    const Vec3 x_gt = apply(to_gt, contours.w_cam[i]);
    if (x_gt.z() <= kMinDepthMm) continue;
    const Vec2 target = project(cam, x_gt);
    if (!cam.on_detector(target)) continue;
    c.p_prime[i] = target;
    c.valid[i] = true;
    c.score[i] = 1.0;
  }
  return c;
}

CorrespondenceSet add_correspondence_noise(const CorrespondenceSet& c, const NoiseModel& noise,
                                           const CameraModel& cam) {
  CorrespondenceSet out = c;
  std::vector<std::size_t> valid_rows;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.valid[i]) valid_rows.push_back(i);
  }
  std::mt19937_64 rng(noise.seed);

  const auto n_out = static_cast<std::size_t>(
      std::floor(std::clamp(noise.outlier_frac, 0.0, 1.0) * static_cast<double>(valid_rows.size())));
  std::vector<bool> is_outlier(c.size(), false);
  if (n_out > 0 && noise.outlier_mag_px > 0.0) {
    std::vector<std::size_t> picked;
    std::sample(valid_rows.begin(), valid_rows.end(), std::back_inserter(picked), n_out, rng);
    for (std::size_t i : picked) is_outlier[i] = true;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i : valid_rows) {
    if (is_outlier[i]) {
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const double mag = noise.outlier_mag_px * unit(rng);
      out.p_prime[i] += mag * Vec2(std::cos(angle), std::sin(angle));
    } else if (noise.sigma_px > 0.0) {
      const double dx = gauss(rng);
      const double dy = gauss(rng);
      out.p_prime[i] += noise.sigma_px * Vec2(dx, dy);
    }
    if (!cam.on_detector(out.p_prime[i])) {
      out.valid[i] = false;
      out.score[i] = 0.0;
      out.p_prime[i] = c.p_prime[i];
    }
  }
  return out;
}

namespace {

// Summed-area tables of intensity and squared intensity for O(1) window stats.
struct IntegralImage {
  int w = 0, h = 0;
  std::vector<double> sum, sum_sq;

  explicit IntegralImage(const Image2D& img) : w(img.width), h(img.height) {
    sum.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    sum_sq = sum;
    for (int y = 0; y < h; ++y) {
      double row = 0.0, row_sq = 0.0;
      for (int x = 0; x < w; ++x) {
        const double v = img.at(x, y);
        row += v;
        row_sq += v * v;
        sum[idx(x + 1, y + 1)] = sum[idx(x + 1, y)] + row;
        sum_sq[idx(x + 1, y + 1)] = sum_sq[idx(x + 1, y)] + row_sq;
      }
    }
  }
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * (w + 1) + x; }
  // Window [x0, x1] x [y0, y1], inclusive.
  double box(const std::vector<double>& t, int x0, int y0, int x1, int y1) const {
    return t[idx(x1 + 1, y1 + 1)] - t[idx(x0, y1 + 1)] - t[idx(x1 + 1, y0)] + t[idx(x0, y0)];
  }
};

double parabola_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace

CorrespondenceSet patch_match_correspondences(const Image2D& drr, const Image2D& flr,
                                              const ContourSet& contours,
                                              const PatchMatchConfig& cfg) {
  if (!drr.same_geometry(flr)) {
    throw Error(ErrorCode::kInvalidArgument, "patch matching needs images of equal geometry");
  }
  if (cfg.patch_radius_px < 1 || cfg.search_radius_px < 1) {
    throw Error(ErrorCode::kInvalidArgument, "patch and search radii must be >= 1");
  }
  CorrespondenceSet c = empty_like(contours);
  const IntegralImage flr_tables(flr);
  const int r = cfg.patch_radius_px;
  const int s = cfg.search_radius_px;
  const int side = 2 * r + 1;
  const double n_px = static_cast<double>(side * side);
  const int grid = 2 * s + 1;
  std::vector<double> tmpl(static_cast<std::size_t>(side * side));
  std::vector<double> ncc(static_cast<std::size_t>(grid * grid));

  for (std::size_t i = 0; i < contours.size(); ++i) {
    const Vec2& p = contours.p[i];
    if (!p.allFinite()) continue;
    const long cxl = std::lround(p.x());
    const long cyl = std::lround(p.y());
    if (cxl - r < 0 || cyl - r < 0 || cxl + r >= drr.width || cyl + r >= drr.height) continue;
    const int cx = static_cast<int>(cxl), cy = static_cast<int>(cyl);

    double mean = 0.0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) mean += drr.at(cx + dx, cy + dy);
    mean /= n_px;
    double norm_sq = 0.0;
    for (int dy = -r, k = 0; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx, ++k) {
        tmpl[k] = drr.at(cx + dx, cy + dy) - mean;
        norm_sq += tmpl[k] * tmpl[k];
      }
    }
    if (norm_sq <= 1e-20 * n_px) continue;
    const double tmpl_norm = std::sqrt(norm_sq);

    double best = -2.0;
    int best_ox = 0, best_oy = 0;
    std::fill(ncc.begin(), ncc.end(), -2.0);
    for (int oy = -s; oy <= s; ++oy) {
      const int y0 = cy + oy - r;
      if (y0 < 0 || y0 + side > flr.height) continue;
      for (int ox = -s; ox <= s; ++ox) {
        const int x0 = cx + ox - r;
        if (x0 < 0 || x0 + side > flr.width) continue;
        const double bs = flr_tables.box(flr_tables.sum, x0, y0, x0 + side - 1, y0 + side - 1);
        const double bss = flr_tables.box(flr_tables.sum_sq, x0, y0, x0 + side - 1, y0 + side - 1);
        const double var = bss - bs * bs / n_px;
        double score = 0.0;
        if (var > 1e-20 * n_px) {
          double dot = 0.0;
          for (int dy = 0, k = 0; dy < side; ++dy) {
            const float* row = &flr.data[static_cast<std::size_t>(y0 + dy) * flr.width + x0];
            for (int dx = 0; dx < side; ++dx, ++k) dot += tmpl[k] * row[dx];
          }
          // The template has zero mean, so the window mean drops out of the dot product.
          score = dot / (tmpl_norm * std::sqrt(var));
        }
        ncc[static_cast<std::size_t>((oy + s) * grid + (ox + s))] = score;
        if (score > best) {
          best = score;
          best_ox = ox;
          best_oy = oy;
        }
      }
    }
    if (best < cfg.min_ncc) continue;

    auto at = [&](int ox, int oy) {
      if (ox < -s || ox > s || oy < -s || oy > s) return -2.0;
      return ncc[static_cast<std::size_t>((oy + s) * grid + (ox + s))];
    };
    double sub_x = 0.0, sub_y = 0.0;
    const double l = at(best_ox - 1, best_oy), rr = at(best_ox + 1, best_oy);
    if (l > -2.0 && rr > -2.0) sub_x = parabola_offset(l, best, rr);
    const double u = at(best_ox, best_oy - 1), d = at(best_ox, best_oy + 1);
    if (u > -2.0 && d > -2.0) sub_y = parabola_offset(u, best, d);

    const Vec2 target = p + Vec2(best_ox + sub_x, best_oy + sub_y);
    if (target.x() < -0.5 || target.y() < -0.5 || target.x() > flr.width - 0.5 ||
        target.y() > flr.height - 0.5) {
      continue;
    }
    c.p_prime[i] = target;
    c.valid[i] = true;
    c.score[i] = std::clamp(best, 0.0, 1.0);
  }
  return c;
}

void save_correspondences(const std::filesystem::path& path, const CorrespondenceSet& c) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << kCorrespondenceHeader << '\n';
  char buf[256];
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n", i, c.p[i].x(),
                  c.p[i].y(), c.p_prime[i].x(), c.p_prime[i].y(), c.valid[i] ? 1 : 0, c.score[i]);
    out << buf;
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

namespace {

[[noreturn]] void format_error(const std::filesystem::path& path, std::size_t line,
                               const std::string& msg) {
  throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& field, const std::filesystem::path& path, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    format_error(path, line, "malformed number '" + field + "'");
  }
  if (used != field.size()) format_error(path, line, "malformed number '" + field + "'");
  if (!std::isfinite(v)) format_error(path, line, "non-finite value '" + field + "'");
  return v;
}

}  // namespace

CorrespondenceSet load_external_correspondences(const std::filesystem::path& path,
                                                const ContourSet& contours,
                                                const CameraModel& cam) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) format_error(path, 1, "missing header");
  if (line != kCorrespondenceHeader) format_error(path, 1, "unexpected header '" + line + "'");

  struct Row {
    std::size_t line;
    std::vector<std::string> fields;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Row row{line_no, {}};
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.fields.push_back(field);
    rows.push_back(std::move(row));
  }
  const std::size_t n = contours.size();
  if (rows.size() != n) {
    throw Error(ErrorCode::kCountMismatch, path.string() + ": " + std::to_string(rows.size()) +
                                               " rows for " + std::to_string(n) + " contour points");
  }

  CorrespondenceSet c = empty_like(contours);
  std::vector<bool> seen(n, false);
  for (const Row& row : rows) {
    if (row.fields.size() != 7) {
      format_error(path, row.line, "expected 7 fields, got " + std::to_string(row.fields.size()));
    }
    const double index_d = parse_double(row.fields[0], path, row.line);
    if (index_d < 0.0 || index_d != std::floor(index_d) || index_d >= static_cast<double>(n)) {
      format_error(path, row.line, "index out of range");
    }
    const auto i = static_cast<std::size_t>(index_d);
    if (seen[i]) format_error(path, row.line, "duplicate index " + std::to_string(i));
    seen[i] = true;

    const Vec2 p(parse_double(row.fields[1], path, row.line),
                 parse_double(row.fields[2], path, row.line));
    const Vec2 pp(parse_double(row.fields[3], path, row.line),
                  parse_double(row.fields[4], path, row.line));
    const std::string& vf = row.fields[5];
    if (vf != "0" && vf != "1") format_error(path, row.line, "valid flag must be 0 or 1");
    const double score = parse_double(row.fields[6], path, row.line);
    if (score < 0.0 || score > 1.0) format_error(path, row.line, "score outside [0,1]");
    if ((p - contours.p[i]).cwiseAbs().maxCoeff() > 1e-3) {
      format_error(path, row.line, "p does not match contour projection " + std::to_string(i));
    }
    const bool valid = vf == "1";
    if (valid && !cam.on_detector(pp)) format_error(path, row.line, "valid p' off the detector");

    c.p[i] = p;
    c.p_prime[i] = pp;
    c.valid[i] = valid;
    c.score[i] = valid ? score : 0.0;
  }
  return c;
}

const char* to_string(WeightingStrategy s) {
  switch (s) {
    case WeightingStrategy::kUniform: return "uniform";
    case WeightingStrategy::kScore: return "score";
    case WeightingStrategy::kResidualRobust: return "residual-robust";
  }
  return "unknown";
}

WeightingStrategy weighting_from_string(const std::string& name) {
  for (auto s : {WeightingStrategy::kUniform, WeightingStrategy::kScore,
                 WeightingStrategy::kResidualRobust}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown weighting strategy '" + name + "'");
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

WeightVector weight_correspondences(const CorrespondenceSet& c, const WeightingConfig& cfg,
                                    const std::vector<Vec2>* prior_flow) {
  const std::size_t n = c.size();
  WeightVector w{std::vector<double>(n, 0.0)};
  switch (cfg.strategy) {
    case WeightingStrategy::kUniform:
      for (std::size_t i = 0; i < n; ++i) w.w_diag[i] = c.valid[i] ? 1.0 : 0.0;
      break;
    case WeightingStrategy::kScore:
      for (std::size_t i = 0; i < n; ++i) w.w_diag[i] = c.valid[i] ? std::clamp(c.score[i], 0.0, 1.0) : 0.0;
      break;
    case WeightingStrategy::kResidualRobust: {
      if (!(cfg.delta_px > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "residual-robust delta must be positive");
      }
      if (prior_flow != nullptr && prior_flow->size() != n) {
        throw Error(ErrorCode::kInvalidArgument, "prior flow size mismatch");
      }
      Vec2 median_flow = Vec2::Zero();
      if (prior_flow == nullptr) {
        std::vector<double> fx, fy;
        for (std::size_t i = 0; i < n; ++i) {
          if (!c.valid[i]) continue;
          fx.push_back(c.flow(i).x());
          fy.push_back(c.flow(i).y());
        }
        if (fx.empty()) break;
        median_flow = {median(std::move(fx)), median(std::move(fy))};
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!c.valid[i]) continue;
        const Vec2 ref = prior_flow ? (*prior_flow)[i] : median_flow;
        const double resid = (c.flow(i) - ref).norm();
        w.w_diag[i] = resid <= cfg.delta_px ? 1.0 : cfg.delta_px / resid;
      }
      break;
    }
  }
  return w;
}

CorrespondenceSet OracleEstimator::estimate(const EstimationContext& ctx) const {
  return oracle_correspondences(ctx.contours, ctx.pose, gt_, ctx.cam);
}

CorrespondenceSet PatchMatchEstimator::estimate(const EstimationContext& ctx) const {
  if (ctx.drr == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "patch matching requires the DRR");
  }
  return patch_match_correspondences(*ctx.drr, ctx.flr, ctx.contours, cfg_);
}

std::filesystem::path ExternalEstimator::file_for_iteration(int iteration) const {
  return dir_ / ("corr_iter_" + std::to_string(iteration) + ".csv");
}

CorrespondenceSet ExternalEstimator::estimate(const EstimationContext& ctx) const {
  return load_external_correspondences(file_for_iteration(ctx.iteration), ctx.contours, ctx.cam);
}

}  // namespace ppcreg
