#include "msm/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "msm/factor_graph.hpp"

namespace msm {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::MatrixXd spd_floor(Eigen::MatrixXd m, double eps) {
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(eps);
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

double catmull_rom(double p0, double p1, double p2, double p3, double u) {
  return 0.5 * (2.0 * p1 + (-p0 + p2) * u +
                (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
}

// Periodic distance between angle bins, in bin units.
double bin_distance_sq(const GridSpec& grid, int i0, int j0, int i1, int j1) {
  const double dr = static_cast<double>(i0 - i1);
  double da = 0.0;
  if (!grid.collapse_angle) {
    const int n = grid.n_angle();
    const int raw = std::abs(j0 - j1);
    da = static_cast<double>(std::min(raw, n - raw));
  }
  return dr * dr + da * da;
}

}  // namespace

int error_dim(SemanticClass cls) {
  return cls == SemanticClass::kVehicle ? 4 : 2;
}

int GridSpec::n_range() const {
  return static_cast<int>(std::lround((range_max - range_min) / range_step));
}

int GridSpec::n_angle() const {
  if (collapse_angle) return 1;
  return static_cast<int>(std::lround(2.0 * kPi / angle_step));
}

int GridSpec::range_bin(double range) const {
  if (range < range_min || range > range_max) return -1;
  const int i = static_cast<int>((range - range_min) / range_step);
  return std::min(i, n_range() - 1);
}

int GridSpec::angle_bin(double angle) const {
  if (collapse_angle) return 0;
  const double w = wrap_angle(angle);
  const int j = static_cast<int>(std::floor((w + kPi) / angle_step));
  return std::clamp(j, 0, n_angle() - 1);
}

double GridSpec::range_center(int i) const {
  return range_min + (i + 0.5) * range_step;
}

double GridSpec::angle_center(int j) const {
  if (collapse_angle) return 0.0;
  return -kPi + (j + 0.5) * angle_step;
}

GridSpec default_grid(SemanticClass cls) {
  GridSpec grid;
  grid.collapse_angle = is_cylinder_class(cls);
  return grid;
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

SampleCollection collect_samples(const WorldSpec& world,
                                 const std::vector<MeasurementSet>& events) {
  SampleCollection out;
  for (const auto& ev : events) {
    const Pose& x = ev.true_pose;  // characterization uses ground truth
    for (const auto& m : ev.cuboids) {
      const CuboidModel w = transform_cuboid(x, m.model);
      const WorldObject* best = nullptr;
      double best_d = kVehicleAssocThreshold;
      for (const auto& obj : world.objects) {
        if (obj.state.cls != SemanticClass::kVehicle) continue;
        const auto& truth = std::get<CuboidModel>(obj.state.geometry);
        const double d = (truth.t - w.t).head<2>().norm();
        if (d < best_d) {
          best_d = d;
          best = &obj;
        }
      }
      if (best == nullptr) {
        ++out.dropped;
        continue;
      }
      const auto& truth = std::get<CuboidModel>(best->state.geometry);
      SampleRecord rec;
      rec.cls = SemanticClass::kVehicle;
      rec.range = viewing_range(best->state, x.t);
      rec.angle = wrap_angle(viewing_angle(best->state, x.t));
      rec.confidence = m.mean_confidence;
      rec.geometric_error.resize(4);
      rec.geometric_error << w.t.x() - truth.t.x(), w.t.y() - truth.t.y(),
          w.d.x() - truth.d.x(), w.d.y() - truth.d.y();
      out.samples.push_back(std::move(rec));
    }
    for (const auto& m : ev.cylinders) {
      const CylinderModel w = transform_cylinder(x, m.model);
      const WorldObject* best = nullptr;
      double best_d = kCylinderAssocThreshold;
      for (const auto& obj : world.objects) {
        if (obj.state.cls != m.cls) continue;
        const auto& truth = std::get<CylinderModel>(obj.state.geometry);
        const double d = (truth.b - w.b).head<2>().norm();
        if (d < best_d) {
          best_d = d;
          best = &obj;
        }
      }
      if (best == nullptr) {
        ++out.dropped;
        continue;
      }
      const auto& truth = std::get<CylinderModel>(best->state.geometry);
      SampleRecord rec;
      rec.cls = m.cls;
      rec.range = viewing_range(best->state, x.t);
      rec.angle = wrap_angle(viewing_angle(best->state, x.t));
      rec.confidence = m.mean_confidence;
      rec.geometric_error.resize(2);
      rec.geometric_error << w.b.x() - truth.b.x(), w.b.y() - truth.b.y();
      out.samples.push_back(std::move(rec));
    }
  }
  return out;
}

SemanticConfidenceModel fit_semantic_model(const std::vector<SampleRecord>& samples,
                                           SemanticClass cls, const GridSpec& grid) {
  const int nr = grid.n_range(), na = grid.n_angle();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(nr, na);
  Eigen::MatrixXi count = Eigen::MatrixXi::Zero(nr, na);
  for (const auto& s : samples) {
    if (s.cls != cls) continue;
    const int i = grid.range_bin(s.range);
    if (i < 0) continue;
    const int j = grid.angle_bin(s.angle);
    sum(i, j) += s.confidence;
    count(i, j) += 1;
  }
  const int populated = (count.array() > 0).count();
  if (2 * populated < nr * na) {
    throw InsufficientEvidence("semantic fit: fewer than half of the bins populated");
  }

  SemanticConfidenceModel model;
  model.cls = cls;
  model.grid = grid;
  model.count = count;
  model.mean = Eigen::MatrixXd::Zero(nr, na);
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j) {
      if (count(i, j) > 0) {
        model.mean(i, j) = std::clamp(sum(i, j) / count(i, j), 0.0, 1.0);
      }
    }
  }
  // Inverse-distance fill of empty bins from the populated ones.
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j) {
      if (count(i, j) > 0) continue;
      double wsum = 0.0, vsum = 0.0;
      for (int i2 = 0; i2 < nr; ++i2) {
        for (int j2 = 0; j2 < na; ++j2) {
          if (count(i2, j2) == 0) continue;
          const double w = 1.0 / bin_distance_sq(grid, i, j, i2, j2);
          wsum += w;
          vsum += w * model.mean(i2, j2);
        }
      }
      model.mean(i, j) = std::clamp(vsum / wsum, 0.0, 1.0);
    }
  }
  return model;
}

GeometricUncertaintyModel fit_geometric_model(const std::vector<SampleRecord>& samples,
                                              SemanticClass cls, const GridSpec& grid,
                                              int min_bin_count, double eps) {
  const int nr = grid.n_range(), na = grid.n_angle();
  const int dim = error_dim(cls);

  std::vector<std::vector<const SampleRecord*>> bins(nr * na);
  for (const auto& s : samples) {
    if (s.cls != cls) continue;
    const int i = grid.range_bin(s.range);
    if (i < 0) continue;
    bins[i * na + grid.angle_bin(s.angle)].push_back(&s);
  }

  GeometricUncertaintyModel model;
  model.cls = cls;
  model.grid = grid;
  model.dim = dim;
  model.eps = eps;
  model.min_bin_count = min_bin_count;
  model.count = Eigen::MatrixXi::Zero(nr, na);
  model.bin_cov.assign(nr * na, Eigen::MatrixXd());
  model.populated.assign(nr * na, 0);

  int n_populated = 0;
  for (int k = 0; k < nr * na; ++k) {
    model.count(k / na, k % na) = static_cast<int>(bins[k].size());
    if (static_cast<int>(bins[k].size()) < min_bin_count) continue;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto* s : bins[k]) mean += s->geometric_error;
    mean /= static_cast<double>(bins[k].size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto* s : bins[k]) {
      const Eigen::VectorXd c = s->geometric_error - mean;
      cov += c * c.transpose();
    }
    cov /= static_cast<double>(bins[k].size() - 1);
    model.bin_cov[k] = spd_floor(cov, eps);
    model.populated[k] = 1;
    ++n_populated;
  }
  if (n_populated == 0) {
    throw InsufficientEvidence("geometric fit: no bin reached the minimum count");
  }
  // Complete the grid so the interpolant has a value at every node.
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j) {
      const int k = i * na + j;
      if (model.populated[k]) continue;
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
      double wsum = 0.0;
      for (int i2 = 0; i2 < nr; ++i2) {
        for (int j2 = 0; j2 < na; ++j2) {
          const int k2 = i2 * na + j2;
          if (!model.populated[k2]) continue;
          const double w = 1.0 / bin_distance_sq(grid, i, j, i2, j2);
          wsum += w;
          acc += w * model.bin_cov[k2];
        }
      }
      model.bin_cov[k] = spd_floor(acc / wsum, eps);
    }
  }
  return model;
}

double predict_confidence(const SemanticConfidenceModel& model, double range,
                          double angle) {
  const GridSpec& g = model.grid;
  const int nr = g.n_range(), na = g.n_angle();

  double gx = (range - g.range_center(0)) / g.range_step;
  gx = std::clamp(gx, 0.0, static_cast<double>(nr - 1));
  int i0 = std::min(static_cast<int>(gx), nr - 2 >= 0 ? nr - 2 : 0);
  if (nr == 1) i0 = 0;
  const double u = nr == 1 ? 0.0 : gx - i0;

  if (na == 1) {
    const double a = model.mean(i0, 0);
    const double b = model.mean(std::min(i0 + 1, nr - 1), 0);
    return std::clamp(a + u * (b - a), 0.0, 1.0);
  }

  double ga = (wrap_angle(angle) - g.angle_center(0)) / g.angle_step;
  ga = std::fmod(std::fmod(ga, na) + na, na);  // periodic
  const int j0 = static_cast<int>(ga);
  const int j1 = (j0 + 1) % na;
  const double v = ga - j0;

  const int i1 = std::min(i0 + 1, nr - 1);
  const double val = (1 - u) * (1 - v) * model.mean(i0, j0) +
                     (1 - u) * v * model.mean(i0, j1) +
                     u * (1 - v) * model.mean(i1, j0) + u * v * model.mean(i1, j1);
  return std::clamp(val, 0.0, 1.0);
}

namespace {

// Monotone-chain hull + containment test over populated bin centers, with the
// angle axis unrolled linearly (documented choice).
bool inside_populated_hull(const GeometricUncertaintyModel& model, double range,
                           double angle) {
  const GridSpec& g = model.grid;
  const int nr = g.n_range(), na = g.n_angle();
  std::vector<Vec2> pts;
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j) {
      if (model.populated[i * na + j]) {
        pts.emplace_back(g.range_center(i) / g.range_step,
                         g.angle_center(j) / g.angle_step);
      }
    }
  }
  const Vec2 q(range / g.range_step, wrap_angle(angle) / g.angle_step);
  if (na == 1) {  // degenerate: interval test on range only
    double lo = 1e300, hi = -1e300;
    for (const auto& p : pts) {
      lo = std::min(lo, p.x());
      hi = std::max(hi, p.x());
    }
    return q.x() >= lo - 1e-9 && q.x() <= hi + 1e-9;
  }
  std::vector<Vec2> hull;
  try {
    hull = convex_hull_2d(pts);
  } catch (const DegenerateInput&) {
    return false;  // too few/collinear centers: always clamp to nearest
  }
  for (std::size_t k = 0; k < hull.size(); ++k) {
    const Vec2& a = hull[k];
    const Vec2& b = hull[(k + 1) % hull.size()];
    const double cross = (b.x() - a.x()) * (q.y() - a.y()) -
                         (b.y() - a.y()) * (q.x() - a.x());
    if (cross < -1e-9) return false;
  }
  return true;
}

int nearest_populated_bin(const GeometricUncertaintyModel& model, double range,
                          double angle) {
  const GridSpec& g = model.grid;
  const int nr = g.n_range(), na = g.n_angle();
  const double w = wrap_angle(angle);
  int best = -1;
  double best_d = 1e300;
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j) {
      const int k = i * na + j;
      if (!model.populated[k]) continue;
      const double dr = (range - g.range_center(i)) / g.range_step;
      double da = 0.0;
      if (na > 1) {
        da = std::abs(wrap_angle(w - g.angle_center(j))) / g.angle_step;
      }
      const double d = dr * dr + da * da;
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
  }
  return best;
}

}  // namespace

Eigen::MatrixXd predict_covariance(const GeometricUncertaintyModel& model,
                                   double range, double angle) {
  const GridSpec& g = model.grid;
  const int nr = g.n_range(), na = g.n_angle();
  const int dim = model.dim;

  if (!inside_populated_hull(model, range, angle)) {
    return model.bin_cov[nearest_populated_bin(model, range, angle)];
  }

  double gx = (range - g.range_center(0)) / g.range_step;
  gx = std::clamp(gx, 0.0, static_cast<double>(nr - 1));
  int i1 = std::min(static_cast<int>(gx), std::max(nr - 2, 0));
  const double u = nr == 1 ? 0.0 : gx - i1;
  auto ridx = [&](int i) { return std::clamp(i, 0, nr - 1); };

  Eigen::MatrixXd out(dim, dim);
  if (na == 1) {
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) {
        out(r, c) = catmull_rom(model.bin_cov[ridx(i1 - 1)](r, c),
                                model.bin_cov[ridx(i1)](r, c),
                                model.bin_cov[ridx(i1 + 1)](r, c),
                                model.bin_cov[ridx(i1 + 2)](r, c), u);
      }
    }
    return spd_floor(out, model.eps);
  }

  double ga = (wrap_angle(angle) - g.angle_center(0)) / g.angle_step;
  ga = std::fmod(std::fmod(ga, na) + na, na);
  const int j1 = static_cast<int>(ga);
  const double v = ga - j1;
  auto aidx = [&](int j) { return ((j % na) + na) % na; };

  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      double rows[4];
      for (int di = -1; di <= 2; ++di) {
        const int i = ridx(i1 + di);
        rows[di + 1] = catmull_rom(model.bin_cov[i * na + aidx(j1 - 1)](r, c),
                                   model.bin_cov[i * na + aidx(j1)](r, c),
                                   model.bin_cov[i * na + aidx(j1 + 1)](r, c),
                                   model.bin_cov[i * na + aidx(j1 + 2)](r, c), v);
      }
      out(r, c) = catmull_rom(rows[0], rows[1], rows[2], rows[3], u);
    }
  }
  return spd_floor(out, model.eps);
}

double entropy(const Eigen::MatrixXd& sigma) {
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument("entropy: covariance not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("entropy: covariance not positive definite");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  double log_det = 0.0;
  for (int i = 0; i < l.rows(); ++i) log_det += std::log(l(i, i));
  return log_det;  // = 1/2 ln det(sigma)
}

ConfidenceRegion confidence_region(const SemanticConfidenceModel& semantic,
                                   const GeometricUncertaintyModel& geometric,
                                   double level, double loc_bound, double dim_bound,
                                   std::optional<double> entropy_cap) {
  const GridSpec& g = semantic.grid;
  ConfidenceRegion out;
  for (int i = 0; i < g.n_range(); ++i) {
    for (int j = 0; j < g.n_angle(); ++j) {
      const double r = g.range_center(i);
      const double a = g.angle_center(j);
      const bool sem_ok = predict_confidence(semantic, r, a) >= level;

      const Eigen::MatrixXd cov = predict_covariance(geometric, r, a);
      bool met_ok = true;
      for (int c = 0; c < cov.rows(); ++c) {
        const double two_sigma = 2.0 * std::sqrt(std::max(cov(c, c), 0.0));
        const double bound = c < 2 ? loc_bound : dim_bound;
        if (two_sigma > bound) {
          met_ok = false;
          break;
        }
      }
      if (met_ok && entropy_cap) met_ok = entropy(cov) <= *entropy_cap;

      if (sem_ok) out.semantic.push_back({i, j});
      if (met_ok) out.metric.push_back({i, j});
      if (sem_ok && met_ok) out.intersection.push_back({i, j});
    }
  }
  return out;
}

void save_samples(const std::vector<SampleRecord>& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sample file: " + path);
  out << "class,range,angle,confidence,e1,e2,e3,e4\n";
  char buf[256];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g", class_name(s.cls), s.range,
                  s.angle, s.confidence);
    out << buf;
    for (int i = 0; i < 4; ++i) {
      out << ',';
      if (i < s.geometric_error.size()) {
        std::snprintf(buf, sizeof(buf), "%.9g", s.geometric_error[i]);
        out << buf;
      }
    }
    out << '\n';
  }
}

std::vector<SampleRecord> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read sample file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("class,range,angle", 0) != 0) {
    throw std::runtime_error("sample file: missing header");
  }
  std::vector<SampleRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 8) fields.emplace_back();
    SampleRecord rec;
    rec.cls = class_from_name(fields[0]);
    rec.range = std::stod(fields[1]);
    rec.angle = std::stod(fields[2]);
    rec.confidence = std::stod(fields[3]);
    std::vector<double> errs;
    for (int i = 4; i < 8; ++i) {
      if (!fields[i].empty()) errs.push_back(std::stod(fields[i]));
    }
    rec.geometric_error = Eigen::Map<Eigen::VectorXd>(errs.data(), errs.size());
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

using nlohmann::json;

json grid_to_json(const GridSpec& g) {
  return json{{"range_min", g.range_min},
              {"range_max", g.range_max},
              {"range_step", g.range_step},
              {"angle_step", g.angle_step},
              {"collapse_angle", g.collapse_angle}};
}

GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.range_min = j.at("range_min").get<double>();
  g.range_max = j.at("range_max").get<double>();
  g.range_step = j.at("range_step").get<double>();
  g.angle_step = j.at("angle_step").get<double>();
  g.collapse_angle = j.at("collapse_angle").get<bool>();
  return g;
}

}  // namespace

void save_semantic_model(const SemanticConfidenceModel& model,
                         const std::string& path) {
  json root;
  root["format"] = "msm-semantic-model";
  root["version"] = 1;
  root["class"] = class_name(model.cls);
  root["grid"] = grid_to_json(model.grid);
  json mean = json::array(), count = json::array();
  for (int i = 0; i < model.mean.rows(); ++i) {
    for (int j = 0; j < model.mean.cols(); ++j) {
      mean.push_back(model.mean(i, j));
      count.push_back(model.count(i, j));
    }
  }
  root["mean"] = mean;
  root["count"] = count;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << root.dump(2) << "\n";
}

SemanticConfidenceModel load_semantic_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  json root;
  in >> root;
  if (root.value("format", "") != "msm-semantic-model") {
    throw std::runtime_error("unrecognized semantic model file");
  }
  SemanticConfidenceModel model;
  model.cls = class_from_name(root.at("class").get<std::string>());
  model.grid = grid_from_json(root.at("grid"));
  const int nr = model.grid.n_range(), na = model.grid.n_angle();
  model.mean.resize(nr, na);
  model.count.resize(nr, na);
  int k = 0;
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j, ++k) {
      model.mean(i, j) = root.at("mean").at(k).get<double>();
      model.count(i, j) = root.at("count").at(k).get<int>();
    }
  }
  return model;
}

void save_geometric_model(const GeometricUncertaintyModel& model,
                          const std::string& path) {
  json root;
  root["format"] = "msm-geometric-model";
  root["version"] = 1;
  root["class"] = class_name(model.cls);
  root["grid"] = grid_to_json(model.grid);
  root["dim"] = model.dim;
  root["eps"] = model.eps;
  root["min_bin_count"] = model.min_bin_count;
  json covs = json::array(), count = json::array(), populated = json::array();
  for (std::size_t k = 0; k < model.bin_cov.size(); ++k) {
    json entries = json::array();
    for (int r = 0; r < model.dim; ++r) {
      for (int c = 0; c < model.dim; ++c) entries.push_back(model.bin_cov[k](r, c));
    }
    covs.push_back(std::move(entries));
    populated.push_back(static_cast<int>(model.populated[k]));
  }
  for (int i = 0; i < model.count.rows(); ++i) {
    for (int j = 0; j < model.count.cols(); ++j) count.push_back(model.count(i, j));
  }
  root["cov"] = covs;
  root["count"] = count;
  root["populated"] = populated;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << root.dump(2) << "\n";
}

GeometricUncertaintyModel load_geometric_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  json root;
  in >> root;
  if (root.value("format", "") != "msm-geometric-model") {
    throw std::runtime_error("unrecognized geometric model file");
  }
  GeometricUncertaintyModel model;
  model.cls = class_from_name(root.at("class").get<std::string>());
  model.grid = grid_from_json(root.at("grid"));
  model.dim = root.at("dim").get<int>();
  model.eps = root.at("eps").get<double>();
  model.min_bin_count = root.at("min_bin_count").get<int>();
  const int nr = model.grid.n_range(), na = model.grid.n_angle();
  model.count.resize(nr, na);
  model.bin_cov.assign(nr * na, Eigen::MatrixXd());
  model.populated.assign(nr * na, 0);
  int k = 0;
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j, ++k) {
      model.count(i, j) = root.at("count").at(k).get<int>();
      model.populated[k] =
          static_cast<std::uint8_t>(root.at("populated").at(k).get<int>());
      Eigen::MatrixXd cov(model.dim, model.dim);
      int e = 0;
      for (int r = 0; r < model.dim; ++r) {
        for (int c = 0; c < model.dim; ++c) {
          cov(r, c) = root.at("cov").at(k).at(e++).get<double>();
        }
      }
      model.bin_cov[k] = std::move(cov);
    }
  }
  return model;
}

}  // namespace msm
