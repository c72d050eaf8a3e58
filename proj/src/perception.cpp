#include "msm/perception.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>

namespace msm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Linear-interpolation percentile of a sorted sample, q in [0,1].
double percentile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct AxisSummary {
  double span = 0.0;
  double center = 0.0;
};

AxisSummary percentile_interval(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const double lo = percentile_sorted(values, 0.05);
  const double hi = percentile_sorted(values, 0.95);
  return {hi - lo, 0.5 * (lo + hi)};
}

// Any unit vector orthogonal to n.
Vec3 orthogonal_unit(const Vec3& n) {
  Vec3 cand = n.cross(Vec3::UnitZ());
  if (cand.squaredNorm() < 1e-12) cand = n.cross(Vec3::UnitX());
  return cand.normalized();
}

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool point_enclosed(const Vec3& p, const Geometry& geometry, double inflation) {
  if (const auto* box = std::get_if<CuboidModel>(&geometry)) {
    const Vec3 q = so3_exp(box->r).transpose() * (p - box->t);
    for (int i = 0; i < 3; ++i) {
      if (std::abs(q[i]) > inflation * 0.5 * box->d[i]) return false;
    }
    return true;
  }
  if (const auto* cyl = std::get_if<CylinderModel>(&geometry)) {
    const Vec3 rel = p - cyl->b;
    const double axial = rel.dot(cyl->n);
    if (axial < -0.1) return false;
    const double radial = (rel - axial * cyl->n).norm();
    return radial <= inflation * cyl->radius;
  }
  const auto& plane = std::get<PlaneModel>(geometry);
  const Vec3 rel = p - plane.center;
  const double off = rel.dot(plane.normal);
  if (std::abs(off) > 0.1) return false;
  return (rel - off * plane.normal).norm() <= inflation * plane.extent;
}

}  // namespace

PlaneFit fit_ground_plane(const std::vector<Vec3>& points) {
  if (points.size() < 3) {
    throw DegenerateInput("ground plane needs at least 3 points");
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 c = p - centroid;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 evals = eig.eigenvalues();  // ascending
  if (evals[2] <= 0.0 || evals[1] <= 1e-10 * evals[2]) {
    throw DegenerateInput("ground points are collinear");
  }
  Vec3 normal = eig.eigenvectors().col(0);
  if (normal.z() < 0.0) normal = -normal;

  double sq_sum = 0.0;
  double extent = 0.0;
  for (const auto& p : points) {
    const double off = (p - centroid).dot(normal);
    sq_sum += off * off;
    extent = std::max(extent, ((p - centroid) - off * normal).norm());
  }
  PlaneFit fit;
  fit.plane = PlaneModel{centroid, normal, std::max(extent, 1e-6)};
  fit.rms = std::sqrt(sq_sum / static_cast<double>(points.size()));
  return fit;
}

AccumulatedCloud accumulate_scans(const std::vector<ScanFrame>& frames,
                                  double window_seconds) {
  AccumulatedCloud out;
  if (frames.empty()) {
    out.odom_pose = Pose::identity();
    out.true_pose = Pose::identity();
    return out;
  }
  const ScanFrame& newest = frames.back();
  out.odom_pose = newest.odom_pose;
  out.true_pose = newest.true_pose;
  out.window = {newest.timestamp - window_seconds, newest.timestamp};

  const Pose ref_inv = se3_inverse(newest.odom_pose);
  for (const auto& frame : frames) {
    if (frame.timestamp < out.window.t0 - 1e-9) continue;
    const Pose rel = se3_compose(ref_inv, frame.odom_pose);
    for (const auto& p : frame.points) {
      LabeledPoint moved = p;
      moved.position = rel.apply(p.position);
      out.points.push_back(moved);
    }
  }
  return out;
}

std::vector<LabeledPoint> voxel_downsample(const std::vector<LabeledPoint>& cloud,
                                           double voxel) {
  if (voxel <= 0.0) return cloud;
  struct KeyHash {
    std::size_t operator()(const std::array<long long, 3>& c) const {
      std::size_t h = 1469598103934665603ull;
      for (long long v : c) {
        h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      }
      return h;
    }
  };
  std::unordered_map<std::array<long long, 3>, std::size_t, KeyHash> best;
  best.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud[i].position;
    const std::array<long long, 3> key{static_cast<long long>(std::floor(p.x() / voxel)),
                                       static_cast<long long>(std::floor(p.y() / voxel)),
                                       static_cast<long long>(std::floor(p.z() / voxel))};
    const auto [it, inserted] = best.emplace(key, i);
    if (!inserted && lex_less(p, cloud[it->second].position)) it->second = i;
  }
  std::vector<std::size_t> keep;
  keep.reserve(best.size());
  for (const auto& [key, idx] : best) keep.push_back(idx);
  std::sort(keep.begin(), keep.end());
  std::vector<LabeledPoint> out;
  out.reserve(keep.size());
  for (std::size_t idx : keep) out.push_back(cloud[idx]);
  return out;
}

std::vector<LabeledPoint> filter_elevation(const std::vector<LabeledPoint>& cloud,
                                           const PlaneModel& ground, double z_min,
                                           double z_max) {
  std::vector<LabeledPoint> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) {
    const double h = (p.position - ground.center).dot(ground.normal);
    if (h >= z_min && h <= z_max) out.push_back(p);
  }
  return out;
}

std::vector<std::vector<std::size_t>> cluster_dbscan(const std::vector<Vec3>& points,
                                                     double eps, int min_pts) {
  const std::size_t n = points.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lex_less(points[a], points[b])) return true;
    if (lex_less(points[b], points[a])) return false;
    return a < b;
  });

  // Uniform grid for neighbor queries; cells are eps-sized so neighbors live
  // in the 27 surrounding cells.
  struct CellHash {
    std::size_t operator()(const std::array<long long, 3>& c) const {
      std::size_t h = 1469598103934665603ull;
      for (long long v : c) {
        h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      }
      return h;
    }
  };
  auto cell_of = [&](const Vec3& p) {
    return std::array<long long, 3>{static_cast<long long>(std::floor(p.x() / eps)),
                                    static_cast<long long>(std::floor(p.y() / eps)),
                                    static_cast<long long>(std::floor(p.z() / eps))};
  };
  std::unordered_map<std::array<long long, 3>, std::vector<std::size_t>, CellHash> grid;
  for (std::size_t rank = 0; rank < n; ++rank) {
    grid[cell_of(points[order[rank]])].push_back(rank);
  }

  const double eps_sq = eps * eps;
  auto neighbors = [&](std::size_t rank) {
    std::vector<std::size_t> found;
    const Vec3& p = points[order[rank]];
    const auto base = cell_of(p);
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        for (long long dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find({base[0] + dx, base[1] + dy, base[2] + dz});
          if (it == grid.end()) continue;
          for (std::size_t other : it->second) {
            if ((points[order[other]] - p).squaredNorm() <= eps_sq) {
              found.push_back(other);
            }
          }
        }
      }
    }
    std::sort(found.begin(), found.end());
    return found;
  };

  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  std::vector<std::vector<std::size_t>> clusters;

  for (std::size_t rank = 0; rank < n; ++rank) {
    if (label[rank] != kUnvisited) continue;
    auto seed_nbrs = neighbors(rank);
    if (static_cast<int>(seed_nbrs.size()) < min_pts) {
      label[rank] = kNoise;
      continue;
    }
    const int cluster_id = static_cast<int>(clusters.size());
    clusters.emplace_back();
    label[rank] = cluster_id;
    clusters.back().push_back(order[rank]);

    std::deque<std::size_t> queue(seed_nbrs.begin(), seed_nbrs.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (label[q] == kNoise) {
        label[q] = cluster_id;  // border point
        clusters.back().push_back(order[q]);
        continue;
      }
      if (label[q] != kUnvisited) continue;
      label[q] = cluster_id;
      clusters.back().push_back(order[q]);
      auto nbrs = neighbors(q);
      if (static_cast<int>(nbrs.size()) >= min_pts) {
        queue.insert(queue.end(), nbrs.begin(), nbrs.end());
      }
    }
    std::sort(clusters.back().begin(), clusters.back().end());
  }
  return clusters;
}

std::vector<Vec2> convex_hull_2d(std::vector<Vec2> points) {
  if (points.size() < 3) throw DegenerateInput("hull needs at least 3 points");
  std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const Vec2& a, const Vec2& b) {
                             return a.x() == b.x() && a.y() == b.y();
                           }),
               points.end());
  const std::size_t n = points.size();
  if (n < 3) throw DegenerateInput("hull needs at least 3 distinct points");

  std::vector<Vec2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {  // lower hull
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper hull
    while (k >= t && cross2(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);  // last point repeats the first
  if (hull.size() < 3) throw DegenerateInput("input points are collinear");
  return hull;
}

CuboidMeasurement fit_cuboid(const PointCluster& cluster, const PlaneModel& ground) {
  if (cluster.points.size() < 20) {
    throw InsufficientEvidence("cuboid fit needs at least 20 points");
  }
  const Vec3 n = ground.normal.normalized();
  const Vec3 e1 = orthogonal_unit(n);
  const Vec3 e2 = n.cross(e1);

  std::vector<Vec2> flat;
  flat.reserve(cluster.points.size());
  for (const auto& p : cluster.points) {
    const Vec3 rel = p - ground.center;
    flat.emplace_back(rel.dot(e1), rel.dot(e2));
  }
  const std::vector<Vec2> hull = convex_hull_2d(flat);

  Vec2 hull_mean = Vec2::Zero();
  for (const auto& h : hull) hull_mean += h;
  hull_mean /= static_cast<double>(hull.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& h : hull) {
    const Vec2 c = h - hull_mean;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(hull.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double lo = eig.eigenvalues()[0], hi = eig.eigenvalues()[1];
  if (lo <= 0.0 || hi / lo < 1.05) {
    throw AmbiguousAxis("principal axis of hull is ambiguous");
  }
  const Vec2 a = eig.eigenvectors().col(1);  // largest eigenvalue
  Vec3 b1 = (a.x() * e1 + a.y() * e2).normalized();
  const Vec3 b3 = n;

  auto summarize = [&](const Vec3& axis) {
    std::vector<double> proj;
    proj.reserve(cluster.points.size());
    for (const auto& p : cluster.points) proj.push_back(p.dot(axis));
    return percentile_interval(proj);
  };

  // Heading: the half with the lower mean height faces forward. Ties keep the
  // axis in the +x half-space of the body frame.
  {
    const AxisSummary along = summarize(b1);
    double h_fwd = 0.0, h_rear = 0.0;
    int n_fwd = 0, n_rear = 0;
    for (const auto& p : cluster.points) {
      const double h = (p - ground.center).dot(b3);
      if (p.dot(b1) > along.center) {
        h_fwd += h;
        ++n_fwd;
      } else {
        h_rear += h;
        ++n_rear;
      }
    }
    if (n_fwd > 0) h_fwd /= n_fwd;
    if (n_rear > 0) h_rear /= n_rear;
    const double diff = h_fwd - h_rear;
    if (diff > 0.01) {
      b1 = -b1;
    } else if (std::abs(diff) <= 0.01) {
      if (b1.x() < -1e-12 || (std::abs(b1.x()) <= 1e-12 && b1.y() < 0.0)) b1 = -b1;
    }
  }
  const Vec3 b2 = b3.cross(b1);

  const AxisSummary s1 = summarize(b1);
  const AxisSummary s2 = summarize(b2);
  const AxisSummary s3 = summarize(b3);
  if (s1.span <= 1e-6 || s2.span <= 1e-6 || s3.span <= 1e-6) {
    throw DegenerateInput("cuboid percentile span collapsed to zero");
  }

  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b3;

  CuboidMeasurement m;
  m.model.r = so3_log(R);
  m.model.t = s1.center * b1 + s2.center * b2 + s3.center * b3;
  m.model.d = Vec3(s1.span, s2.span, s3.span);
  m.n_points = static_cast<int>(cluster.points.size());
  m.mean_confidence = cluster.mean_confidence;
  return m;
}

CylinderMeasurement fit_cylinder(const PointCluster& cluster,
                                 const PlaneModel& ground) {
  if (cluster.points.size() < 10) {
    throw InsufficientEvidence("cylinder fit needs at least 10 points");
  }
  const Vec3 n = ground.normal.normalized();
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : cluster.points) centroid += p;
  centroid /= static_cast<double>(cluster.points.size());

  Mat3 cov = Mat3::Zero();
  for (const auto& p : cluster.points) {
    const Vec3 c = p - centroid;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(cluster.points.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Vec3 axis = eig.eigenvectors().col(2);  // largest eigenvalue
  if (axis.dot(n) < 0.0) axis = -axis;
  if (axis.dot(n) < std::cos(30.0 * kPi / 180.0)) {
    throw AxisTilt("cylinder axis deviates more than 30 deg from vertical");
  }

  const Vec3 f1 = orthogonal_unit(axis);
  const Vec3 f2 = axis.cross(f1);
  std::vector<Vec2> flat;
  flat.reserve(cluster.points.size());
  double max_radial = 0.0;
  for (const auto& p : cluster.points) {
    const Vec3 rel = p - centroid;
    const Vec2 q(rel.dot(f1), rel.dot(f2));
    max_radial = std::max(max_radial, q.norm());
    flat.push_back(q);
  }

  CylinderMeasurement m;
  m.cls = cluster.cls;
  m.n_points = static_cast<int>(cluster.points.size());
  m.mean_confidence = cluster.mean_confidence;

  Vec2 center2 = Vec2::Zero();
  if (max_radial < 1e-9) {
    m.degenerate = true;  // every point sits on the axis line
  } else {
    // Algebraic (Kasa) circle fit: unbiased on arcs, unlike the centroid.
    Eigen::MatrixXd A(flat.size(), 3);
    Eigen::VectorXd rhs(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
      A(i, 0) = 2.0 * flat[i].x();
      A(i, 1) = 2.0 * flat[i].y();
      A(i, 2) = 1.0;
      rhs(i) = flat[i].squaredNorm();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() == 3) {
      const Eigen::Vector3d sol = qr.solve(rhs);
      center2 = Vec2(sol[0], sol[1]);
    }
  }

  const Vec3 axis_point = centroid + center2.x() * f1 + center2.y() * f2;
  double radius = 0.0;
  for (const auto& p : cluster.points) {
    const Vec3 rel = p - axis_point;
    radius += (rel - rel.dot(axis) * axis).norm();
  }
  radius /= static_cast<double>(cluster.points.size());
  if (radius < 1e-9) m.degenerate = true;

  const double s = (ground.center - axis_point).dot(n) / axis.dot(n);
  m.model.b = axis_point + s * axis;
  m.model.n = axis;
  m.model.radius = radius;
  return m;
}

ConfidenceEstimate object_confidence(const std::vector<LabeledPoint>& cloud,
                                     const Geometry& geometry) {
  double sum = 0.0;
  int count = 0;
  for (const auto& p : cloud) {
    if (point_enclosed(p.position, geometry, 1.05)) {
      sum += p.confidence;
      ++count;
    }
  }
  if (count == 0) return {0.0, true};
  return {sum / count, false};
}

MeasurementSet extract_measurements(const std::vector<ScanFrame>& frames,
                                    const PerceptionParams& params) {
  AccumulatedCloud acc = accumulate_scans(frames, params.accumulation_window);
  acc.points = voxel_downsample(acc.points, params.voxel_size);
  MeasurementSet out;
  out.odom_pose = acc.odom_pose;
  out.true_pose = acc.true_pose;
  out.window = acc.window;
  if (acc.points.empty()) return out;

  std::vector<Vec3> ground_pts;
  for (const auto& p : acc.points) {
    if (p.predicted_class == SemanticClass::kGround) ground_pts.push_back(p.position);
  }
  if (static_cast<int>(ground_pts.size()) < params.min_ground_points) return out;
  try {
    out.ground = fit_ground_plane(ground_pts);
  } catch (const DegenerateInput&) {
    return out;
  }
  const PlaneModel& ground = out.ground->plane;

  auto class_cloud = [&](SemanticClass cls, double z_min, double z_max) {
    std::vector<LabeledPoint> sel;
    for (const auto& p : acc.points) {
      if (p.predicted_class == cls) sel.push_back(p);
    }
    return filter_elevation(sel, ground, z_min, z_max);
  };

  {  // vehicles
    const auto cloud =
        class_cloud(SemanticClass::kVehicle, params.vehicle_z_min, params.vehicle_z_max);
    std::vector<Vec3> pts;
    pts.reserve(cloud.size());
    for (const auto& p : cloud) pts.push_back(p.position);
    for (const auto& idx : cluster_dbscan(pts, params.vehicle_eps, params.vehicle_min_pts)) {
      PointCluster cluster;
      cluster.cls = SemanticClass::kVehicle;
      cluster.window = acc.window;
      double conf = 0.0;
      for (std::size_t i : idx) {
        cluster.points.push_back(cloud[i].position);
        conf += cloud[i].confidence;
      }
      cluster.mean_confidence = conf / static_cast<double>(idx.size());
      try {
        CuboidMeasurement m = fit_cuboid(cluster, ground);
        const auto est = object_confidence(cloud, Geometry{m.model});
        if (!est.empty_evidence) m.mean_confidence = est.value;
        out.cuboids.push_back(std::move(m));
      } catch (const std::runtime_error&) {
        // unusable cluster; keep the rest of the window
      }
    }
  }

  for (SemanticClass cls : {SemanticClass::kLightPole, SemanticClass::kTreeTrunk}) {
    const auto cloud = class_cloud(cls, params.cylinder_z_min, params.cylinder_z_max);
    std::vector<Vec3> pts;
    pts.reserve(cloud.size());
    for (const auto& p : cloud) pts.push_back(p.position);
    for (const auto& idx :
         cluster_dbscan(pts, params.cylinder_eps, params.cylinder_min_pts)) {
      PointCluster cluster;
      cluster.cls = cls;
      cluster.window = acc.window;
      double conf = 0.0;
      for (std::size_t i : idx) {
        cluster.points.push_back(cloud[i].position);
        conf += cloud[i].confidence;
      }
      cluster.mean_confidence = conf / static_cast<double>(idx.size());
      try {
        CylinderMeasurement m = fit_cylinder(cluster, ground);
        if (m.degenerate) continue;
        const auto est = object_confidence(cloud, Geometry{m.model});
        if (!est.empty_evidence) m.mean_confidence = est.value;
        out.cylinders.push_back(std::move(m));
      } catch (const std::runtime_error&) {
      }
    }
  }
  return out;
}

}  // namespace msm
