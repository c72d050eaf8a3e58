#include "msm/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Sparse>
#include <json.hpp>

#include "msm/parallel.hpp"

namespace msm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDiffStep = 1e-6;

Eigen::MatrixXd sqrt_information(const Eigen::MatrixXd& cov, const char* what) {
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument(std::string(what) + " covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) +
                                " covariance is not positive definite");
  }
  const auto n = cov.rows();
  return llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
}

Pose pose_retract(const Pose& x, const Eigen::Ref<const Eigen::VectorXd>& d) {
  Twist6 tw;
  tw << d[0], d[1], d[2], d[3], d[4], d[5];
  return se3_compose(x, se3_exp(tw));
}

CuboidModel cuboid_retract(const CuboidModel& l,
                           const Eigen::Ref<const Eigen::VectorXd>& d) {
  CuboidModel out = l;
  const Pose p = pose_retract(l.pose(), d.head(6));
  out.r = so3_log(p.R);
  out.t = p.t;
  out.d = (l.d + d.segment(6, 3)).cwiseMax(1e-3);
  return out;
}

// Tangent basis of the unit axis direction; columns span the plane normal to n.
Eigen::Matrix<double, 3, 2> axis_basis(const Vec3& n) {
  Vec3 u = n.cross(Vec3::UnitZ());
  if (u.squaredNorm() < 1e-12) u = n.cross(Vec3::UnitX());
  u.normalize();
  Eigen::Matrix<double, 3, 2> b;
  b.col(0) = u;
  b.col(1) = n.cross(u);
  return b;
}

CylinderModel cylinder_retract(const CylinderModel& l,
                               const Eigen::Ref<const Eigen::VectorXd>& d) {
  CylinderModel out = l;
  out.b = l.b + d.head(3);
  out.n = (l.n + axis_basis(l.n) * d.segment(3, 2)).normalized();
  out.radius = std::max(1e-4, l.radius + d[5]);
  return out;
}

int landmark_dof(const ObjectState& state) {
  return std::holds_alternative<CuboidModel>(state.geometry) ? 9 : 6;
}

Vec3 landmark_point(const ObjectState& state) {
  if (const auto* box = std::get_if<CuboidModel>(&state.geometry)) return box->t;
  return std::get<CylinderModel>(state.geometry).b;
}

// Central-difference Jacobian over a local chart.
template <typename Resid, typename Retract, typename Var>
Eigen::MatrixXd numeric_jacobian(const Var& var, int dof, const Resid& resid,
                                 const Retract& retract, int out_dim) {
  Eigen::MatrixXd j(out_dim, dof);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(dof);
  for (int k = 0; k < dof; ++k) {
    d[k] = kDiffStep;
    const Eigen::VectorXd plus = resid(retract(var, d));
    d[k] = -kDiffStep;
    const Eigen::VectorXd minus = resid(retract(var, d));
    d[k] = 0.0;
    j.col(k) = (plus - minus) / (2.0 * kDiffStep);
  }
  return j;
}

}  // namespace

Mat9 default_cuboid_covariance() {
  Mat9 cov = Mat9::Zero();
  for (int i = 0; i < 3; ++i) cov(i, i) = 0.15 * 0.15;          // rotation
  for (int i = 3; i < 6; ++i) cov(i, i) = 0.1 * 0.1;            // translation
  for (int i = 6; i < 9; ++i) cov(i, i) = 0.15 * 0.15;          // dimensions
  return cov;
}

Mat7 default_cylinder_covariance() {
  Mat7 cov = Mat7::Zero();
  for (int i = 0; i < 3; ++i) cov(i, i) = 0.1 * 0.1;            // root
  for (int i = 3; i < 6; ++i) cov(i, i) = 0.05 * 0.05;          // axis
  cov(6, 6) = 0.15 * 0.15;                                      // radius
  return cov;
}

int FactorGraph::add_pose(int robot, const Pose& estimate) {
  const int id = static_cast<int>(poses_.size());
  poses_.push_back(PoseVariable{robot, estimate});
  chains_[robot].push_back(id);
  return id;
}

int FactorGraph::add_prior(int robot, const Pose& value, const Mat6& cov) {
  PriorFactor f;
  f.value = value;
  f.cov = cov;
  f.sqrt_info = sqrt_information(cov, "prior");
  f.pose = chains_.count(robot) ? chains_.at(robot).back() : add_pose(robot, value);
  priors_.push_back(std::move(f));
  return priors_.back().pose;
}

int FactorGraph::add_odometry(int robot, const Pose& rel, const Mat6& cov) {
  if (!chains_.count(robot) || chains_.at(robot).empty()) {
    throw std::logic_error("odometry requires an existing pose for the robot");
  }
  OdometryFactor f;
  f.rel = rel;
  f.cov = cov;
  f.sqrt_info = sqrt_information(cov, "odometry");
  f.pose_a = chains_.at(robot).back();
  f.pose_b = add_pose(robot, se3_compose(poses_[f.pose_a].estimate, rel));
  odometry_.push_back(std::move(f));
  return odometry_.back().pose_b;
}

int FactorGraph::next_landmark_id() const {
  return landmarks_.empty() ? 0 : landmarks_.rbegin()->first + 1;
}

int FactorGraph::add_landmark(const ObjectState& state) {
  if (std::holds_alternative<PlaneModel>(state.geometry)) {
    throw std::invalid_argument("plane objects cannot become landmarks");
  }
  validate(state);
  const int id = next_landmark_id();
  Landmark lm;
  lm.state = state;
  lm.state.id = static_cast<std::uint32_t>(id);
  landmarks_.emplace(id, std::move(lm));
  return id;
}

AssociationResult FactorGraph::associate(const Vec3& point, SemanticClass cls,
                                         double threshold) const {
  AssociationResult out;
  double best = threshold;
  for (const auto& [id, lm] : landmarks_) {  // ascending id = tie-break rule
    if (lm.state.cls != cls) continue;
    const double dist = (landmark_point(lm.state) - point).norm();
    if (dist < best || (dist == best && !out.landmark)) {
      best = dist;
      out.landmark = id;
      out.distance = dist;
    }
  }
  if (!out.landmark) out.distance = std::numeric_limits<double>::infinity();
  return out;
}

int FactorGraph::add_cuboid_factor(int pose_id, std::optional<int> landmark_id,
                                   const CuboidMeasurement& meas, const Mat9& cov) {
  const Pose& x = poses_.at(pose_id).estimate;
  CuboidModel z = meas.model;
  int id;
  if (landmark_id) {
    id = *landmark_id;
    Landmark& lm = landmarks_.at(id);
    if (lm.state.cls != SemanticClass::kVehicle) {
      throw std::invalid_argument("cuboid measurement matched to a non-vehicle landmark");
    }
    // The box fit is symmetric under 180-degree yaw when the height cue is
    // weak; canonicalize the measurement against the landmark so the residual
    // stays in the small-rotation regime.
    const auto& box = std::get<CuboidModel>(lm.state.geometry);
    const Pose world_meas = se3_compose(x, z.pose());
    const Mat3 rel = so3_exp(box.r).transpose() * world_meas.R;
    const double yaw = std::atan2(rel(1, 0), rel(0, 0));
    if (std::abs(yaw) > 0.5 * kPi) {
      const Pose flipped{world_meas.R * rot_z(kPi), world_meas.t};
      const Pose body = se3_compose(se3_inverse(x), flipped);
      z.r = so3_log(body.R);
      z.t = body.t;
    }
    lm.confidence_sum += meas.mean_confidence;
    lm.n_obs += 1;
    lm.state.confidence = lm.confidence_sum / lm.n_obs;
    lm.n_factors += 1;
  } else {
    ObjectState state;
    state.cls = SemanticClass::kVehicle;
    state.confidence = meas.mean_confidence;
    state.geometry = transform_cuboid(x, z);
    id = add_landmark(state);
    Landmark& lm = landmarks_.at(id);
    lm.confidence_sum = meas.mean_confidence;
    lm.n_obs = 1;
    lm.n_factors = 1;
  }
  CuboidFactor f;
  f.pose = pose_id;
  f.landmark = id;
  f.meas = z;
  f.mean_confidence = meas.mean_confidence;
  f.cov = cov;
  f.sqrt_info = sqrt_information(cov, "cuboid");
  cuboids_.push_back(std::move(f));
  return id;
}

int FactorGraph::add_cylinder_factor(int pose_id, std::optional<int> landmark_id,
                                     const CylinderMeasurement& meas, const Mat7& cov) {
  const Pose& x = poses_.at(pose_id).estimate;
  int id;
  if (landmark_id) {
    id = *landmark_id;
    Landmark& lm = landmarks_.at(id);
    if (lm.state.cls != meas.cls) {
      throw std::invalid_argument("cylinder measurement class does not match landmark");
    }
    lm.confidence_sum += meas.mean_confidence;
    lm.n_obs += 1;
    lm.state.confidence = lm.confidence_sum / lm.n_obs;
    lm.n_factors += 1;
  } else {
    ObjectState state;
    state.cls = meas.cls;
    state.confidence = meas.mean_confidence;
    state.geometry = transform_cylinder(x, meas.model);
    id = add_landmark(state);
    Landmark& lm = landmarks_.at(id);
    lm.confidence_sum = meas.mean_confidence;
    lm.n_obs = 1;
    lm.n_factors = 1;
  }
  CylinderFactor f;
  f.pose = pose_id;
  f.landmark = id;
  f.meas = meas.model;
  f.mean_confidence = meas.mean_confidence;
  f.cov = cov;
  f.sqrt_info = sqrt_information(cov, "cylinder");
  cylinders_.push_back(std::move(f));
  return id;
}

struct FactorGraph::Layout {
  std::vector<int> pose_offset;
  std::map<int, int> lm_offset;
  std::map<int, int> lm_dof;
  int total = 0;
};

FactorGraph::Layout FactorGraph::make_layout() const {
  Layout layout;
  layout.pose_offset.resize(poses_.size());
  for (std::size_t i = 0; i < poses_.size(); ++i) {
    layout.pose_offset[i] = layout.total;
    layout.total += 6;
  }
  for (const auto& [id, lm] : landmarks_) {
    if (lm.n_factors == 0) continue;  // unobserved landmarks stay fixed
    layout.lm_offset[id] = layout.total;
    layout.lm_dof[id] = landmark_dof(lm.state);
    layout.total += layout.lm_dof[id];
  }
  return layout;
}

struct FactorGraph::Blocks {
  double cost = 0.0;
  std::vector<Eigen::VectorXd> e;
  std::vector<Eigen::MatrixXd> j;
  std::vector<std::array<int, 2>> offsets;  // global column offsets, -1 unused
  std::vector<std::array<int, 2>> dims;
};

FactorGraph::Blocks FactorGraph::evaluate(const std::vector<PoseVariable>& poses,
                                          const std::map<int, Landmark>& landmarks,
                                          const Layout& layout, bool with_jacobians,
                                          bool parallel) const {
  // Factor slots: priors, odometry, cuboids, cylinders, in insertion order.
  const std::size_t np = priors_.size(), no = odometry_.size(), nb = cuboids_.size();
  const std::size_t n = np + no + nb + cylinders_.size();

  Blocks blocks;
  blocks.e.resize(n);
  blocks.j.resize(n);
  blocks.offsets.assign(n, {-1, -1});
  blocks.dims.assign(n, {0, 0});

  auto eval_slot = [&](std::size_t slot) {
    if (slot < np) {
      const PriorFactor& f = priors_[slot];
      const auto resid = [&](const Pose& x) -> Eigen::VectorXd {
        return se3_log(se3_compose(se3_inverse(f.value), x));
      };
      const Pose& x = poses[f.pose].estimate;
      blocks.e[slot] = f.sqrt_info * resid(x);
      blocks.offsets[slot] = {layout.pose_offset[f.pose], -1};
      blocks.dims[slot] = {6, 0};
      if (with_jacobians) {
        blocks.j[slot] = f.sqrt_info * numeric_jacobian(x, 6, resid, pose_retract, 6);
      }
      return;
    }
    if (slot < np + no) {
      const OdometryFactor& f = odometry_[slot - np];
      const Pose& xa = poses[f.pose_a].estimate;
      const Pose& xb = poses[f.pose_b].estimate;
      const Pose rel_inv = se3_inverse(f.rel);
      const auto resid_ab = [&](const Pose& a, const Pose& b) -> Eigen::VectorXd {
        return se3_log(se3_compose(rel_inv, se3_compose(se3_inverse(a), b)));
      };
      blocks.e[slot] = f.sqrt_info * resid_ab(xa, xb);
      blocks.offsets[slot] = {layout.pose_offset[f.pose_a], layout.pose_offset[f.pose_b]};
      blocks.dims[slot] = {6, 6};
      if (with_jacobians) {
        Eigen::MatrixXd j(6, 12);
        j.leftCols(6) = numeric_jacobian(
            xa, 6, [&](const Pose& a) { return resid_ab(a, xb); }, pose_retract, 6);
        j.rightCols(6) = numeric_jacobian(
            xb, 6, [&](const Pose& b) { return resid_ab(xa, b); }, pose_retract, 6);
        blocks.j[slot] = f.sqrt_info * j;
      }
      return;
    }
    if (slot < np + no + nb) {
      const CuboidFactor& f = cuboids_[slot - np - no];
      const Pose& x = poses[f.pose].estimate;
      const auto& lm = std::get<CuboidModel>(landmarks.at(f.landmark).state.geometry);
      const auto resid = [&](const Pose& xe, const CuboidModel& le) -> Eigen::VectorXd {
        return cuboid_error(xe, le, f.meas);
      };
      blocks.e[slot] = f.sqrt_info * resid(x, lm);
      blocks.offsets[slot] = {layout.pose_offset[f.pose], layout.lm_offset.at(f.landmark)};
      blocks.dims[slot] = {6, 9};
      if (with_jacobians) {
        Eigen::MatrixXd j(9, 15);
        j.leftCols(6) = numeric_jacobian(
            x, 6, [&](const Pose& xe) { return resid(xe, lm); }, pose_retract, 9);
        j.rightCols(9) = numeric_jacobian(
            lm, 9, [&](const CuboidModel& le) { return resid(x, le); }, cuboid_retract, 9);
        blocks.j[slot] = f.sqrt_info * j;
      }
      return;
    }
    const CylinderFactor& f = cylinders_[slot - np - no - nb];
    const Pose& x = poses[f.pose].estimate;
    const auto& lm = std::get<CylinderModel>(landmarks.at(f.landmark).state.geometry);
    const auto resid = [&](const Pose& xe, const CylinderModel& le) -> Eigen::VectorXd {
      return cylinder_error(xe, le, f.meas);
    };
    blocks.e[slot] = f.sqrt_info * resid(x, lm);
    blocks.offsets[slot] = {layout.pose_offset[f.pose], layout.lm_offset.at(f.landmark)};
    blocks.dims[slot] = {6, 6};
    if (with_jacobians) {
      Eigen::MatrixXd j(7, 12);
      j.leftCols(6) = numeric_jacobian(
          x, 6, [&](const Pose& xe) { return resid(xe, lm); }, pose_retract, 7);
      j.rightCols(6) = numeric_jacobian(
          lm, 6, [&](const CylinderModel& le) { return resid(x, le); }, cylinder_retract, 7);
      blocks.j[slot] = f.sqrt_info * j;
    }
  };

  if (parallel) {
    parallel_for(n, eval_slot);
  } else {
    for (std::size_t i = 0; i < n; ++i) eval_slot(i);
  }

  double cost = 0.0;  // serial reduction keeps the sum order fixed
  for (const auto& e : blocks.e) cost += e.squaredNorm();
  blocks.cost = 0.5 * cost;
  return blocks;
}

Linearization FactorGraph::linearize() const {
  const Layout layout = make_layout();
  Blocks b = evaluate(poses_, landmarks_, layout, true, true);
  return Linearization{b.cost, std::move(b.e), std::move(b.j)};
}

Linearization FactorGraph::linearize_reference() const {
  const Layout layout = make_layout();
  Blocks b = evaluate(poses_, landmarks_, layout, true, false);
  return Linearization{b.cost, std::move(b.e), std::move(b.j)};
}

double FactorGraph::current_cost() const {
  const Layout layout = make_layout();
  return evaluate(poses_, landmarks_, layout, false, true).cost;
}

namespace {

using SparseMat = Eigen::SparseMatrix<double>;

void assemble_from(const std::vector<Eigen::VectorXd>& es,
                   const std::vector<Eigen::MatrixXd>& js,
                   const std::vector<std::array<int, 2>>& offsets,
                   const std::vector<std::array<int, 2>>& dims,
                   std::vector<Eigen::Triplet<double>>& triplets, Eigen::VectorXd& g) {
  for (std::size_t s = 0; s < es.size(); ++s) {
    int col = 0;
    std::array<Eigen::MatrixXd, 2> jv;
    for (int v = 0; v < 2; ++v) {
      if (offsets[s][v] < 0) continue;
      jv[v] = js[s].middleCols(col, dims[s][v]);
      col += dims[s][v];
    }
    for (int u = 0; u < 2; ++u) {
      if (offsets[s][u] < 0) continue;
      g.segment(offsets[s][u], dims[s][u]) += jv[u].transpose() * es[s];
      for (int v = 0; v < 2; ++v) {
        if (offsets[s][v] < 0) continue;
        const Eigen::MatrixXd h = jv[u].transpose() * jv[v];
        for (int r = 0; r < h.rows(); ++r) {
          for (int c = 0; c < h.cols(); ++c) {
            triplets.emplace_back(offsets[s][u] + r, offsets[s][v] + c, h(r, c));
          }
        }
      }
    }
  }
}

}  // namespace

OptimizeResult FactorGraph::optimize(const OptimizeConfig& cfg) {
  if (priors_.empty()) {
    throw std::logic_error("graph has no prior factor; gauge is free");
  }
  const Layout layout = make_layout();
  OptimizeResult result;
  if (layout.total == 0) return result;

  auto apply_step = [&](const Eigen::VectorXd& delta, std::vector<PoseVariable>& poses,
                        std::map<int, Landmark>& landmarks) {
    poses = poses_;
    landmarks = landmarks_;
    for (std::size_t i = 0; i < poses.size(); ++i) {
      poses[i].estimate =
          pose_retract(poses[i].estimate, delta.segment(layout.pose_offset[i], 6));
    }
    for (auto& [id, lm] : landmarks) {
      const auto it = layout.lm_offset.find(id);
      if (it == layout.lm_offset.end()) continue;
      if (auto* box = std::get_if<CuboidModel>(&lm.state.geometry)) {
        *box = cuboid_retract(*box, delta.segment(it->second, 9));
      } else {
        auto& cyl = std::get<CylinderModel>(lm.state.geometry);
        cyl = cylinder_retract(cyl, delta.segment(it->second, 6));
      }
    }
  };

  Blocks blocks = evaluate(poses_, landmarks_, layout, true, true);
  double cost = blocks.cost;
  result.initial_cost = cost;
  result.cost_history.push_back(cost);

  double lambda = cfg.lambda0;
  bool converged = false;
  int iter = 0;
  while (iter < cfg.max_iters && !converged) {
    ++iter;
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.total);
    assemble_from(blocks.e, blocks.j, blocks.offsets, blocks.dims, triplets, g);

    bool accepted = false;
    while (!accepted) {
      std::vector<Eigen::Triplet<double>> damped = triplets;
      for (int i = 0; i < layout.total; ++i) damped.emplace_back(i, i, lambda);
      SparseMat h(layout.total, layout.total);
      h.setFromTriplets(damped.begin(), damped.end());

      Eigen::SimplicialLDLT<SparseMat> solver(h);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        if (lambda > cfg.lambda_max) {
          throw std::runtime_error("normal equations singular even at maximum damping");
        }
        continue;
      }
      const Eigen::VectorXd delta = solver.solve(-g);

      std::vector<PoseVariable> cand_poses;
      std::map<int, Landmark> cand_landmarks;
      apply_step(delta, cand_poses, cand_landmarks);
      const double new_cost =
          evaluate(cand_poses, cand_landmarks, layout, false, true).cost;

      if (new_cost <= cost) {
        poses_ = std::move(cand_poses);
        landmarks_ = std::move(cand_landmarks);
        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        cost = new_cost;
        result.cost_history.push_back(cost);
        lambda = std::max(lambda * 0.5, 1e-12);
        accepted = true;
        if (rel < cfg.tol) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > cfg.lambda_max) break;  // stalled; report non-convergence
      }
    }
    if (!accepted) break;
    if (!converged) blocks = evaluate(poses_, landmarks_, layout, true, true);
  }

  result.final_cost = cost;
  result.iterations = iter;
  result.converged = converged;
  return result;
}

std::map<int, Eigen::MatrixXd> FactorGraph::landmark_covariances(
    const std::vector<int>& ids) const {
  const Layout layout = make_layout();
  for (int id : ids) {
    if (!landmarks_.count(id)) {
      throw std::invalid_argument("unknown landmark id");
    }
    if (!layout.lm_offset.count(id)) {
      throw NoInformation("landmark has no attached factors");
    }
  }
  const Blocks blocks = evaluate(poses_, landmarks_, layout, true, true);
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.total);
  assemble_from(blocks.e, blocks.j, blocks.offsets, blocks.dims, triplets, g);
  SparseMat h(layout.total, layout.total);
  h.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<SparseMat> solver(h);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("information matrix is singular; optimize first");
  }
  std::map<int, Eigen::MatrixXd> out;
  for (int id : ids) {
    const int offset = layout.lm_offset.at(id);
    const int dof = layout.lm_dof.at(id);
    Eigen::MatrixXd cov(dof, dof);
    for (int k = 0; k < dof; ++k) {
      Eigen::VectorXd unit = Eigen::VectorXd::Zero(layout.total);
      unit[offset + k] = 1.0;
      cov.col(k) = solver.solve(unit).segment(offset, dof);
    }
    out[id] = 0.5 * (cov + cov.transpose());
  }
  return out;
}

Eigen::MatrixXd FactorGraph::landmark_covariance(int id) const {
  return landmark_covariances({id}).at(id);
}

Eigen::MatrixXd FactorGraph::planning_covariance(int id) const {
  const Eigen::MatrixXd cov = landmark_covariance(id);
  const Landmark& lm = landmarks_.at(id);
  if (const auto* box = std::get_if<CuboidModel>(&lm.state.geometry)) {
    // Local chart is [rotation; body translation; dims]; map the translation
    // block into the world frame and keep the planar position + footprint dims.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(4, 9);
    t.block(0, 3, 2, 3) = so3_exp(box->r).topRows(2);
    t(2, 6) = 1.0;
    t(3, 7) = 1.0;
    return t * cov * t.transpose();
  }
  return cov.topLeftCorner(2, 2);
}

FactorGraph merge_graphs(const std::vector<FactorGraph>& graphs,
                         const std::vector<Pose>& base_transforms,
                         double vehicle_threshold, double cylinder_threshold) {
  if (graphs.size() != base_transforms.size()) {
    throw std::invalid_argument("one base transform per graph is required");
  }
  FactorGraph merged;
  int next_robot = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const FactorGraph& src = graphs[gi];
    const Pose& base = base_transforms[gi];
    const int pose_off = static_cast<int>(merged.poses_.size());

    std::map<int, int> robot_map;
    for (const auto& [robot, chain] : src.chains_) robot_map[robot] = next_robot++;
    for (const auto& pv : src.poses_) {
      merged.poses_.push_back(
          PoseVariable{robot_map.at(pv.robot), se3_compose(base, pv.estimate)});
    }
    for (const auto& [robot, chain] : src.chains_) {
      auto& dst = merged.chains_[robot_map.at(robot)];
      for (int id : chain) dst.push_back(id + pose_off);
    }

    std::map<int, int> lm_map;
    for (const auto& [id, lm] : src.landmarks_) {
      const ObjectState moved = transform_object(base, lm.state);
      const double thr = lm.state.cls == SemanticClass::kVehicle ? vehicle_threshold
                                                                 : cylinder_threshold;
      const auto match = merged.associate(landmark_point(moved), moved.cls, thr);
      if (match.landmark) {
        Landmark& dst = merged.landmarks_.at(*match.landmark);
        dst.confidence_sum += lm.confidence_sum;
        dst.n_obs += lm.n_obs;
        dst.n_factors += lm.n_factors;
        if (dst.n_obs > 0) dst.state.confidence = dst.confidence_sum / dst.n_obs;
        lm_map[id] = *match.landmark;
      } else {
        const int new_id = merged.next_landmark_id();
        Landmark copy = lm;
        copy.state = moved;
        copy.state.id = static_cast<std::uint32_t>(new_id);
        merged.landmarks_.emplace(new_id, std::move(copy));
        lm_map[id] = new_id;
      }
    }

    for (const auto& f : src.priors_) {
      PriorFactor nf = f;
      nf.pose += pose_off;
      nf.value = se3_compose(base, f.value);
      merged.priors_.push_back(std::move(nf));
    }
    for (const auto& f : src.odometry_) {
      OdometryFactor nf = f;
      nf.pose_a += pose_off;
      nf.pose_b += pose_off;
      merged.odometry_.push_back(std::move(nf));
    }
    for (const auto& f : src.cuboids_) {
      CuboidFactor nf = f;
      nf.pose += pose_off;
      nf.landmark = lm_map.at(f.landmark);
      merged.cuboids_.push_back(std::move(nf));
    }
    for (const auto& f : src.cylinders_) {
      CylinderFactor nf = f;
      nf.pose += pose_off;
      nf.landmark = lm_map.at(f.landmark);
      merged.cylinders_.push_back(std::move(nf));
    }
  }
  return merged;
}

namespace {

using nlohmann::json;

json mat_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

Eigen::MatrixXd mat_from_json(const json& j, int rows, int cols) {
  if (static_cast<int>(j.size()) != rows * cols) {
    throw std::runtime_error("graph file: matrix size mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  int k = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = j[k++].get<double>();
  }
  return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vec3 vec3_from_json(const json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

json pose_to_json(const Pose& p) {
  json out;
  out["R"] = mat_to_json(p.R);
  out["t"] = vec_to_json(p.t);
  return out;
}

Pose pose_from_json(const json& j) {
  Pose p;
  p.R = mat_from_json(j.at("R"), 3, 3);
  p.t = vec3_from_json(j.at("t"));
  return p;
}

json geometry_to_json(const ObjectState& state) {
  json out;
  if (const auto* box = std::get_if<CuboidModel>(&state.geometry)) {
    out["r"] = vec_to_json(box->r);
    out["t"] = vec_to_json(box->t);
    out["d"] = vec_to_json(box->d);
  } else if (const auto* cyl = std::get_if<CylinderModel>(&state.geometry)) {
    out["b"] = vec_to_json(cyl->b);
    out["n"] = vec_to_json(cyl->n);
    out["radius"] = cyl->radius;
  }
  return out;
}

Geometry geometry_from_json(const json& j, SemanticClass cls) {
  if (cls == SemanticClass::kVehicle) {
    return CuboidModel{vec3_from_json(j.at("r")), vec3_from_json(j.at("t")),
                       vec3_from_json(j.at("d"))};
  }
  return CylinderModel{vec3_from_json(j.at("b")), vec3_from_json(j.at("n")),
                       j.at("radius").get<double>()};
}

}  // namespace

void save_graph(const FactorGraph& graph, const std::string& path) {
  json root;
  root["format"] = "msm-graph";
  root["version"] = 1;

  json robots = json::object();
  for (const auto& [robot, chain] : graph.chains_) {
    robots[std::to_string(robot)] = chain;
  }
  root["robots"] = robots;

  json poses = json::array();
  for (std::size_t i = 0; i < graph.poses_.size(); ++i) {
    json p = pose_to_json(graph.poses_[i].estimate);
    p["id"] = i;
    p["robot"] = graph.poses_[i].robot;
    poses.push_back(std::move(p));
  }
  root["poses"] = poses;

  json landmarks = json::array();
  for (const auto& [id, lm] : graph.landmarks_) {
    json l = geometry_to_json(lm.state);
    l["id"] = id;
    l["class"] = class_name(lm.state.cls);
    l["confidence"] = lm.state.confidence;
    l["confidence_sum"] = lm.confidence_sum;
    l["n_obs"] = lm.n_obs;
    landmarks.push_back(std::move(l));
  }
  root["landmarks"] = landmarks;

  json priors = json::array();
  for (const auto& f : graph.priors_) {
    json o;
    o["pose"] = f.pose;
    o["value"] = pose_to_json(f.value);
    o["cov"] = mat_to_json(f.cov);
    priors.push_back(std::move(o));
  }
  json odom = json::array();
  for (const auto& f : graph.odometry_) {
    json o;
    o["a"] = f.pose_a;
    o["b"] = f.pose_b;
    o["rel"] = pose_to_json(f.rel);
    o["cov"] = mat_to_json(f.cov);
    odom.push_back(std::move(o));
  }
  json cubs = json::array();
  for (const auto& f : graph.cuboids_) {
    json o;
    o["pose"] = f.pose;
    o["landmark"] = f.landmark;
    o["r"] = vec_to_json(f.meas.r);
    o["t"] = vec_to_json(f.meas.t);
    o["d"] = vec_to_json(f.meas.d);
    o["confidence"] = f.mean_confidence;
    o["cov"] = mat_to_json(f.cov);
    cubs.push_back(std::move(o));
  }
  json cyls = json::array();
  for (const auto& f : graph.cylinders_) {
    json o;
    o["pose"] = f.pose;
    o["landmark"] = f.landmark;
    o["b"] = vec_to_json(f.meas.b);
    o["n"] = vec_to_json(f.meas.n);
    o["radius"] = f.meas.radius;
    o["confidence"] = f.mean_confidence;
    o["cov"] = mat_to_json(f.cov);
    cyls.push_back(std::move(o));
  }
  root["factors"] = {{"prior", priors}, {"odometry", odom}, {"cuboid", cubs},
                     {"cylinder", cyls}};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file: " + path);
  out << root.dump(2) << "\n";
}

FactorGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read graph file: " + path);
  json root;
  in >> root;
  if (root.value("format", "") != "msm-graph" || root.value("version", 0) != 1) {
    throw std::runtime_error("unrecognized graph file format");
  }

  FactorGraph g;
  g.poses_.resize(root.at("poses").size());
  for (const auto& p : root.at("poses")) {
    const int id = p.at("id").get<int>();
    g.poses_.at(id) = PoseVariable{p.at("robot").get<int>(), pose_from_json(p)};
  }
  for (const auto& [key, chain] : root.at("robots").items()) {
    g.chains_[std::stoi(key)] = chain.get<std::vector<int>>();
  }
  for (const auto& l : root.at("landmarks")) {
    Landmark lm;
    lm.state.cls = class_from_name(l.at("class").get<std::string>());
    lm.state.confidence = l.at("confidence").get<double>();
    lm.state.id = static_cast<std::uint32_t>(l.at("id").get<int>());
    lm.state.geometry = geometry_from_json(l, lm.state.cls);
    lm.confidence_sum = l.at("confidence_sum").get<double>();
    lm.n_obs = l.at("n_obs").get<int>();
    g.landmarks_.emplace(l.at("id").get<int>(), std::move(lm));
  }
  const auto& factors = root.at("factors");
  for (const auto& o : factors.at("prior")) {
    PriorFactor f;
    f.pose = o.at("pose").get<int>();
    f.value = pose_from_json(o.at("value"));
    f.cov = mat_from_json(o.at("cov"), 6, 6);
    f.sqrt_info = sqrt_information(f.cov, "prior");
    g.priors_.push_back(std::move(f));
  }
  for (const auto& o : factors.at("odometry")) {
    OdometryFactor f;
    f.pose_a = o.at("a").get<int>();
    f.pose_b = o.at("b").get<int>();
    f.rel = pose_from_json(o.at("rel"));
    f.cov = mat_from_json(o.at("cov"), 6, 6);
    f.sqrt_info = sqrt_information(f.cov, "odometry");
    g.odometry_.push_back(std::move(f));
  }
  for (const auto& o : factors.at("cuboid")) {
    CuboidFactor f;
    f.pose = o.at("pose").get<int>();
    f.landmark = o.at("landmark").get<int>();
    f.meas = CuboidModel{vec3_from_json(o.at("r")), vec3_from_json(o.at("t")),
                         vec3_from_json(o.at("d"))};
    f.mean_confidence = o.at("confidence").get<double>();
    f.cov = mat_from_json(o.at("cov"), 9, 9);
    f.sqrt_info = sqrt_information(f.cov, "cuboid");
    g.landmarks_.at(f.landmark).n_factors += 1;
    g.cuboids_.push_back(std::move(f));
  }
  for (const auto& o : factors.at("cylinder")) {
    CylinderFactor f;
    f.pose = o.at("pose").get<int>();
    f.landmark = o.at("landmark").get<int>();
    f.meas = CylinderModel{vec3_from_json(o.at("b")), vec3_from_json(o.at("n")),
                           o.at("radius").get<double>()};
    f.mean_confidence = o.at("confidence").get<double>();
    f.cov = mat_from_json(o.at("cov"), 7, 7);
    f.sqrt_info = sqrt_information(f.cov, "cylinder");
    g.landmarks_.at(f.landmark).n_factors += 1;
    g.cylinders_.push_back(std::move(f));
  }
  return g;
}

}  // namespace msm
