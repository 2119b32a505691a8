#include "pcdc/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "pcdc/error.hpp"
#include "pcdc/knn.hpp"

namespace pcdc {

namespace {

using Vec3 = std::array<double, 3>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 to_vec(const Coord& c) {
  return {static_cast<double>(c.x), static_cast<double>(c.y), static_cast<double>(c.z)};
}

void require_points(std::span<const Coord> rec, std::span<const Coord> ref) {
  if (rec.empty() || ref.empty()) fail(ErrorCode::kEmptyCloud, "distortion of an empty cloud");
}

// Mean squared error from `from` to its nearest neighbours in `to`. With
// normals, the error is the squared projection onto the normal of the
// point on the `normal_side` (0: the point in `from`, 1: its neighbour).
double directed_mse(std::span<const Coord> from, std::span<const Coord> to,
                    const std::vector<Vec3>* normals, int normal_side) {
  const KnnAdjacency adj = build_knn(from, to, 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const Coord o = adj.offset(i, 0);
    const Vec3 d = to_vec(o);
    double e = dot(d, d);
    if (normals) {
      const Vec3& n = (*normals)[normal_side == 0 ? i : adj.index(i, 0)];
      if (dot(n, n) > 0.0) {
        const double p = dot(d, n);
        e = std::min(e, p * p);
      }
    }
    acc += e;
  }
  return acc / static_cast<double>(from.size());
}

Distortion combine(double ab, double ba, double peak) {
  Distortion d;
  d.mse_rec_to_ref = ab;
  d.mse_ref_to_rec = ba;
  d.mse = std::max(ab, ba);
  d.psnr = psnr_from_mse(d.mse, peak);
  return d;
}

// Least-squares cubic in x; coefficients lowest order first.
Eigen::Vector4d cubic_fit(std::span<const RdPoint> c) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(c.size()), 4);
  Eigen::VectorXd y(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double x = c[i].psnr;
    a(r, 0) = 1.0;
    a(r, 1) = x;
    a(r, 2) = x * x;
    a(r, 3) = x * x * x;
    y(r) = std::log(c[i].bpp);
  }
  return a.colPivHouseholderQr().solve(y);
}

double cubic_integral(const Eigen::Vector4d& p, double lo, double hi) {
  auto prim = [&](double x) {
    return p(0) * x + p(1) * x * x / 2.0 + p(2) * x * x * x / 3.0 + p(3) * x * x * x * x / 4.0;
  };
  return prim(hi) - prim(lo);
}

void check_curve(std::span<const RdPoint> c, const char* name) {
  if (c.size() < 4) {
    fail(ErrorCode::kInvalidArgument, std::string("bd_rate: curve ") + name + " needs 4 points");
  }
  for (const RdPoint& p : c) {
    if (!(p.bpp > 0.0) || !std::isfinite(p.bpp) || !std::isfinite(p.psnr)) {
      fail(ErrorCode::kInvalidArgument,
           std::string("bd_rate: curve ") + name + " has a non-positive rate or infinite PSNR");
    }
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double psnr_from_mse(double mse, double peak) {
  if (mse <= 0.0) return kLosslessPsnr;
  return 10.0 * std::log10(3.0 * peak * peak / mse);
}

Distortion d1(std::span<const Coord> rec, std::span<const Coord> ref, double peak) {
  require_points(rec, ref);
  return combine(directed_mse(rec, ref, nullptr, 0), directed_mse(ref, rec, nullptr, 0), peak);
}

std::vector<Vec3> estimate_normals(std::span<const Coord> cloud, std::size_t k) {
  std::vector<Vec3> normals(cloud.size(), Vec3{0.0, 0.0, 0.0});
  if (cloud.size() < 3) return normals;
  const std::size_t kk = std::min(k, cloud.size());
  const KnnAdjacency adj = build_knn(cloud, cloud, kk);
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const Coord& c : cloud) centroid += Eigen::Vector3d(c.x, c.y, c.z);
  centroid /= static_cast<double>(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < kk; ++j) {
      const Coord& c = cloud[adj.index(i, j)];
      mean += Eigen::Vector3d(c.x, c.y, c.z);
    }
    mean /= static_cast<double>(kk);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t j = 0; j < kk; ++j) {
      const Coord& c = cloud[adj.index(i, j)];
      const Eigen::Vector3d d = Eigen::Vector3d(c.x, c.y, c.z) - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d ev = es.eigenvalues();
    if (!(ev(2) > 0.0) || ev(1) <= 1e-9 * ev(2)) continue;  // rank < 2
    Eigen::Vector3d n = es.eigenvectors().col(0).normalized();
    const Coord& p = cloud[i];
    if (n.dot(Eigen::Vector3d(p.x, p.y, p.z) - centroid) < 0.0) n = -n;
    normals[i] = {n.x(), n.y(), n.z()};
  }
  return normals;
}

Distortion d2(std::span<const Coord> rec, std::span<const Coord> ref, double peak) {
  require_points(rec, ref);
  const std::vector<Vec3> normals = estimate_normals(ref, 12);
  return combine(directed_mse(rec, ref, &normals, 1), directed_mse(ref, rec, &normals, 0), peak);
}

double bd_rate(std::span<const RdPoint> a, std::span<const RdPoint> b) {
  check_curve(a, "a");
  check_curve(b, "b");
  auto range = [](std::span<const RdPoint> c) {
    auto [lo, hi] = std::minmax_element(c.begin(), c.end(), [](const RdPoint& x, const RdPoint& y) {
      return x.psnr < y.psnr;
    });
    return std::pair{lo->psnr, hi->psnr};
  };
  const auto [alo, ahi] = range(a);
  const auto [blo, bhi] = range(b);
  const double lo = std::max(alo, blo), hi = std::min(ahi, bhi);
  if (!(hi > lo)) fail(ErrorCode::kNoOverlap, "bd_rate: PSNR ranges do not overlap");
  const double ia = cubic_integral(cubic_fit(a), lo, hi);
  const double ib = cubic_integral(cubic_fit(b), lo, hi);
  return (std::exp((ib - ia) / (hi - lo)) - 1.0) * 100.0;
}

std::vector<RdPoint> read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  std::vector<RdPoint> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    RdPoint p;
    if (!(ss >> p.bpp >> p.psnr)) {
      if (first) {
        first = false;
        continue;
      }
      fail(ErrorCode::kInvalidArgument, "bad curve row in " + path + ": " + line);
    }
    first = false;
    out.push_back(p);
  }
  return out;
}

ResidualStats residual_stats(const nn::Tensor& estimate, const nn::Tensor& truth,
                             std::size_t bins, double range) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    fail(ErrorCode::kShapeMismatch, "residual_stats: shapes differ");
  }
  if (bins == 0 || !(range > 0.0)) fail(ErrorCode::kInvalidArgument, "residual_stats: bad bins");
  ResidualStats s;
  s.lo = -range;
  s.hi = range;
  s.histogram.assign(bins, 0);
  s.count = estimate.size();
  if (s.count == 0) return s;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.count; ++i) sum += estimate[i] - truth[i];
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (std::size_t i = 0; i < s.count; ++i) {
    const double r = estimate[i] - truth[i];
    sq += (r - s.mean) * (r - s.mean);
    const double pos = (r - s.lo) / (s.hi - s.lo) * static_cast<double>(bins);
    const auto b = static_cast<std::size_t>(
        std::clamp(std::floor(pos), 0.0, static_cast<double>(bins - 1)));
    ++s.histogram[b];
  }
  s.variance = sq / static_cast<double>(s.count);
  return s;
}

std::string format_psnr(double psnr) { return std::isinf(psnr) ? "lossless" : fmt(psnr); }

void write_composition_csv(std::ostream& out, std::span<const FrameReport> reports,
                           std::span<const FrameQuality> quality) {
  out << "frame,kind,layer,points,header_bits,c3_bits,c4_bits,f4_bits,z_bits,total_bits,bpp,"
         "c3_frac,c4_frac,f4_frac,z_frac,d1_psnr,d2_psnr\n";
  for (const FrameReport& r : reports) {
    const double c3 = 8.0 * static_cast<double>(r.c3_bytes), c4 = 8.0 * static_cast<double>(r.c4_bytes);
    const double f4 = 8.0 * static_cast<double>(r.f4_bytes), z = 8.0 * static_cast<double>(r.z_bytes);
    const double sections = c3 + c4 + f4 + z;
    const double total = 8.0 * static_cast<double>(r.record_bytes);
    auto frac = [&](double v) { return sections > 0.0 ? v / sections : 0.0; };
    std::string q1 = "", q2 = "";
    for (const FrameQuality& q : quality) {
      if (q.frame_index == r.frame_index) {
        q1 = format_psnr(q.d1_psnr);
        q2 = format_psnr(q.d2_psnr);
      }
    }
    out << r.frame_index << ',' << kind_letter(r.kind) << ',' << r.layer << ',' << r.points << ','
        << static_cast<long long>(total - sections) << ',' << static_cast<long long>(c3) << ','
        << static_cast<long long>(c4) << ',' << static_cast<long long>(f4) << ','
        << static_cast<long long>(z) << ',' << static_cast<long long>(total) << ','
        << fmt(r.points ? total / static_cast<double>(r.points) : 0.0) << ',' << fmt(frac(c3))
        << ',' << fmt(frac(c4)) << ',' << fmt(frac(f4)) << ',' << fmt(frac(z)) << ',' << q1 << ','
        << q2 << '\n';
  }
}

void write_quality_csv(std::ostream& out, std::span<const FrameQuality> quality) {
  out << "frame,d1_psnr,d2_psnr\n";
  for (const FrameQuality& q : quality) {
    out << q.frame_index << ',' << format_psnr(q.d1_psnr) << ',' << format_psnr(q.d2_psnr) << '\n';
  }
}

void write_report_json(std::ostream& out, std::span<const FrameReport> reports,
                       std::span<const FrameQuality> quality) {
  using nlohmann::ordered_json;
  ordered_json root;
  root["schema"] = "pcdc.report/1";
  root["bd_rate_fit"] = "cubic least squares of ln(bpp) over PSNR";
  ordered_json frames = ordered_json::array();
  for (const FrameReport& r : reports) {
    ordered_json f;
    f["frame"] = r.frame_index;
    f["kind"] = std::string(1, kind_letter(r.kind));
    f["layer"] = r.layer;
    f["points"] = r.points;
    f["bytes"] = {{"record", r.record_bytes}, {"c3", r.c3_bytes}, {"c4", r.c4_bytes},
                  {"f4", r.f4_bytes}, {"z", r.z_bytes}};
    f["estimate_bits"] = {{"f4", r.estimate_f4_bits}, {"z", r.estimate_z_bits}};
    for (const FrameQuality& q : quality) {
      if (q.frame_index == r.frame_index) {
        f["d1_psnr"] = format_psnr(q.d1_psnr);
        f["d2_psnr"] = format_psnr(q.d2_psnr);
      }
    }
    const FeatureDiagnostics& d = r.diagnostics;
    if (d.truth.size() > 0 && d.truth.rows() == d.aligned.rows()) {
      ordered_json res;
      auto add = [&](const char* name, const nn::Tensor& est) {
        if (est.rows() != d.truth.rows() || est.cols() != d.truth.cols()) return;
        const ResidualStats s = residual_stats(est, d.truth);
        res[name] = {{"mean", s.mean}, {"variance", s.variance}, {"lo", s.lo}, {"hi", s.hi},
                     {"histogram", s.histogram}};
      };
      add("aligned", d.aligned);
      add("refined", d.refined);
      add("interpolated", d.interpolated);
      f["residuals"] = res;
    }
    frames.push_back(f);
  }
  root["frames"] = frames;
  out << root.dump(2) << '\n';
}

}  // namespace pcdc
