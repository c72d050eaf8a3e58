#include "msm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "msm/lidar.hpp"
#include "msm/map_io.hpp"
#include "msm/perception.hpp"

namespace msm {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 landmark_anchor(const ObjectState& state) {
  if (const auto* box = std::get_if<CuboidModel>(&state.geometry)) return box->t;
  return std::get<CylinderModel>(state.geometry).b;
}

// Measurement covariance: class defaults with the planning channels replaced
// by the fitted model's prediction at the estimated viewing geometry. The
// model's localization block is near-isotropic in the ground plane, so it is
// scattered into the residual slots without re-rotation.
Mat9 cuboid_measurement_cov(const ModelSet& models, const ObjectState& world_state,
                            const Vec3& sensor_position) {
  Mat9 cov = default_cuboid_covariance();
  const auto& model = models.geometric_for(SemanticClass::kVehicle);
  const double range = viewing_range(world_state, sensor_position);
  const double angle = viewing_angle(world_state, sensor_position);
  Eigen::MatrixXd p = predict_covariance(model, range, angle);
  // A single box fit is never centimeter-perfect; without a floor an
  // overconfident model would let one measurement lock the estimate.
  constexpr double kVarFloor = 0.08 * 0.08;
  for (int i = 0; i < 4; ++i) p(i, i) = std::max(p(i, i), kVarFloor);
  const int slots[4] = {3, 4, 6, 7};  // t_x, t_y, d_x, d_y
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) cov(slots[i], slots[j]) = p(i, j);
  }
  return cov;
}

Mat7 cylinder_measurement_cov(const ModelSet& models, const ObjectState& world_state,
                              const Vec3& sensor_position) {
  Mat7 cov = default_cylinder_covariance();
  const auto& model = models.geometric_for(world_state.cls);
  const double range = viewing_range(world_state, sensor_position);
  Eigen::MatrixXd p = predict_covariance(model, range, 0.0);
  constexpr double kVarFloor = 0.02 * 0.02;
  for (int i = 0; i < 2; ++i) p(i, i) = std::max(p(i, i), kVarFloor);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) cov(i, j) = p(i, j);  // b_x, b_y
  }
  return cov;
}

// Insertion gates. Grazing or single-face views collapse a box to a sliver
//(one face has no depth) and mislabeled speckle forms small low-support
// clusters; as factors either kind drags poses through the rotation channel
// and seeds bogus landmarks, so require minimum support and plausible extent.
bool credible_cuboid(const CuboidMeasurement& m) {
  const Vec3& d = m.model.d;
  const double horiz_min = std::min(d.x(), d.y());
  const double horiz_max = std::max(d.x(), d.y());
  return m.n_points >= 30 && m.mean_confidence >= 0.5 && d.z() >= 0.5 &&
         horiz_min >= 0.8 && horiz_max <= 12.0;
}

bool credible_cylinder(const CylinderMeasurement& m) {
  return !m.degenerate && m.n_points >= 20 && m.mean_confidence >= 0.5 &&
         m.model.radius <= 0.8 && m.model.n.z() >= 0.995;
}

constexpr double kSweepSpacing = 2.0;    // meters between cruise sweep frames
constexpr double kSweepRangeCap = 30.0;  // keep sweep returns inside this range
constexpr double kFactorRangeCap = 14.0;  // single-window fits degrade beyond this
constexpr double kDedupMinRange = 9.0;    // dedup only the distant band

double lerp_angle(double a, double b, double f) {
  return a + f * std::remainder(b - a, 2.0 * kPi);
}

// Simulated flight + estimator state for one mission. Observation pauses fire
// the full scan -> segmentation -> measurement -> factor pipeline and a batch
// re-optimization; exploration legs are delegated from the planner loop.
class MissionEnv final : public ExplorationEnv {
 public:
  MissionEnv(const WorldSpec& world, const ExperimentConfig& cfg,
             const ModelSet& models, const std::vector<ObjectState>& prior,
             std::uint64_t seed)
      : world_(world),
        cfg_(cfg),
        models_(models),
        prior_(prior),
        odo_stream_(RngStream::from_seed(seed).child(stream_tag("odometry"))),
        scan_stream_(RngStream::from_seed(seed).child(stream_tag("scan"))),
        seg_stream_(RngStream::from_seed(seed).child(stream_tag("segmentation"))),
        sweep_scan_stream_(RngStream::from_seed(seed).child(stream_tag("sweep-scan"))),
        sweep_seg_stream_(RngStream::from_seed(seed).child(stream_tag("sweep-seg"))) {
    const auto& b = world_.bounds;
    true_pose_.R = Mat3::Identity();
    true_pose_.t = Vec3(b.min_x + cfg.mission.start_margin,
                        b.min_y + cfg.mission.start_margin, cfg.planner.altitude);
    Mat6 prior_cov = Mat6::Identity() * 1e-6;
    pose_id_ = graph_.add_prior(0, true_pose_, prior_cov);
  }

  FactorGraph& graph() { return graph_; }
  std::vector<FlightEvent>& flight() { return flight_; }
  double path_length() const { return path_length_; }

  void fly_to(const Vec2& xy, double altitude, double heading) {
    Pose target{rot_z(heading), Vec3(xy.x(), xy.y(), altitude)};
    const Pose prev_true = true_pose_;
    const int prev_pose_id = pose_id_;
    const Pose rel = se3_compose(se3_inverse(true_pose_), target);
    const double dist = rel.t.norm();
    const Pose noisy = simulate_odometry(rel, cfg_.odometry, odo_stream_.child(legs_));
    ++legs_;
    const double sig_t =
        std::max(cfg_.odometry.sigma_translation_per_m * dist, 1e-4);
    const double sig_r = std::max(cfg_.odometry.sigma_yaw_per_m * dist, 1e-5);
    Mat6 cov = Mat6::Identity();
    cov.topLeftCorner(3, 3) *= sig_r * sig_r;
    cov.bottomRightCorner(3, 3) *= sig_t * sig_t;
    pose_id_ = graph_.add_odometry(0, noisy, cov);
    path_length_ += dist;
    true_pose_ = target;

    // Altimeter/IMU analog: the vehicle holds commanded altitude and level
    // attitude, so anchor z, roll, and pitch on every pose while leaving x, y,
    // and yaw effectively unconstrained. Without this the per-axis odometry
    // noise lets z random-walk, which breaks the 3-D association gates.
    const Pose est = graph_.pose(pose_id_).estimate;
    Pose anchor{rot_z(yaw_of(est.R)),
                Vec3(est.t.x(), est.t.y(), altitude)};
    Mat6 anchor_cov = Mat6::Zero();
    constexpr double kLoose = 1e6;      // variance for unconstrained channels
    constexpr double kSigAttitude = 0.01;
    constexpr double kSigAltitude = 0.05;
    anchor_cov(0, 0) = kSigAttitude * kSigAttitude;  // roll
    anchor_cov(1, 1) = kSigAttitude * kSigAttitude;  // pitch
    anchor_cov(2, 2) = kLoose;                       // yaw
    anchor_cov(3, 3) = kLoose;                       // x
    anchor_cov(4, 4) = kLoose;                       // y
    anchor_cov(5, 5) = kSigAltitude * kSigAltitude;  // z
    graph_.add_prior(0, anchor, anchor_cov);

    // Sweep frames captured while cruising the leg. True poses interpolate the
    // commanded trajectory; estimated poses are assigned by restamp_buffer()
    // just before extraction, so they always reflect the optimized trajectory.
    // Ground returns are dropped (pause windows supply the plane fit) and far
    // returns add nothing the gates would keep, which bounds the buffer.
    const double duration = dist / cfg_.mission.speed;
    const int n_sweep = static_cast<int>(std::floor(dist / kSweepSpacing));
    for (int k = 1; k <= n_sweep; ++k) {
      const double f = k * kSweepSpacing / dist;
      if (f >= 1.0 - 1e-9) break;
      Pose p_true{rot_z(lerp_angle(yaw_of(prev_true.R), yaw_of(target.R), f)),
                  prev_true.t + f * (target.t - prev_true.t)};
      ScanFrame frame = simulate_scan(world_, p_true, cfg_.sensor,
                                      sweep_scan_stream_.child(legs_).child(k));
      frame = simulate_segmentation(frame, cfg_.field, world_,
                                    sweep_seg_stream_.child(legs_).child(k));
      frame.timestamp = t_ + f * duration;
      std::vector<LabeledPoint> kept;
      for (const auto& p : frame.points) {
        if (p.predicted_class != SemanticClass::kGround &&
            p.position.norm() <= kSweepRangeCap) {
          kept.push_back(p);
        }
      }
      frame.points = std::move(kept);
      buffer_.push_back(std::move(frame));
      anchors_.push_back({prev_pose_id, pose_id_, f});
    }
    t_ += duration;
  }

  // Re-projects every buffered frame with the current pose estimates, so the
  // accumulated cloud stays registered to the optimized trajectory instead of
  // the estimates that happened to be current when a frame was captured.
  void restamp_buffer() {
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
      const auto& [a, b, f] = anchors_[i];
      const Pose pa = graph_.pose(a).estimate;
      const Pose pb = graph_.pose(b).estimate;
      buffer_[i].odom_pose = Pose{rot_z(lerp_angle(yaw_of(pa.R), yaw_of(pb.R), f)),
                                  pa.t + f * (pb.t - pa.t)};
    }
  }

  // One observation pause: append a static window of scans to the rolling
  // frame buffer, extract object measurements from everything inside the
  // accumulation window (pause frames plus cruise sweeps, possibly spanning
  // several viewing directions), attach factors, and re-optimize.
  void observe() {
    for (int k = 0; k < cfg_.mission.window_frames; ++k) {
      ScanFrame f = simulate_scan(world_, true_pose_, cfg_.sensor,
                                  scan_stream_.child(events_).child(k));
      f = simulate_segmentation(f, cfg_.field, world_,
                                seg_stream_.child(events_).child(k));
      f.timestamp = t_;
      t_ += cfg_.mission.scan_period;
      buffer_.push_back(std::move(f));
      anchors_.push_back({pose_id_, pose_id_, 0.0});
    }
    ++events_;
    // Frames are appended in time order, so pruning removes a prefix; the
    // anchor list is pruned in lockstep.
    const double newest = buffer_.back().timestamp;
    std::size_t keep = 0;
    while (keep < buffer_.size() &&
           buffer_[keep].timestamp < newest - cfg_.mission.accumulation_s - 1e-9) {
      ++keep;
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<long>(keep));
    anchors_.erase(anchors_.begin(), anchors_.begin() + static_cast<long>(keep));
    restamp_buffer();

    PerceptionParams pp = cfg_.perception;
    pp.accumulation_window = cfg_.mission.accumulation_s;
    const MeasurementSet ms = extract_measurements(buffer_, pp);
    const Pose est = graph_.pose(pose_id_).estimate;
    int added = 0;
    for (const auto& m : ms.cuboids) {
      if (!credible_cuboid(m)) continue;
      ObjectState world_state;
      world_state.cls = SemanticClass::kVehicle;
      world_state.confidence = m.mean_confidence;
      world_state.geometry = transform_cuboid(est, m.model);
      const auto assoc = graph_.associate(landmark_anchor(world_state),
                                          SemanticClass::kVehicle,
                                          kVehicleAssocThreshold);
      if (!admit_factor(assoc.landmark, world_state)) continue;
      const int lm = graph_.add_cuboid_factor(
          pose_id_, assoc.landmark, m,
          cuboid_measurement_cov(models_, world_state, est.t));
      record_factor_cell(lm, world_state);
      ++added;
    }
    for (const auto& m : ms.cylinders) {
      if (!credible_cylinder(m)) continue;
      ObjectState world_state;
      world_state.cls = m.cls;
      world_state.confidence = m.mean_confidence;
      world_state.geometry = transform_cylinder(est, m.model);
      const auto assoc = graph_.associate(landmark_anchor(world_state), m.cls,
                                          kCylinderAssocThreshold);
      if (!admit_factor(assoc.landmark, world_state)) continue;
      const int lm = graph_.add_cylinder_factor(
          pose_id_, assoc.landmark, m,
          cylinder_measurement_cov(models_, world_state, est.t));
      record_factor_cell(lm, world_state);
      ++added;
    }
    if (added > 0) graph_.optimize();
  }

  std::optional<int> landmark_near(const Vec3& point, SemanticClass cls,
                                   double radius) const {
    return graph_.associate(point, cls, radius).landmark;
  }

  // Distant measurements of one landmark from the same (range, viewing-angle)
  // bin repeat the same systematic draw: a second factor from that bin would
  // shrink the marginal without adding knowledge, which both overstates
  // confidence and freezes the exploration entropy before the robot arrives.
  // Admit one distant factor per bin, nothing beyond the range where
  // single-window fits degrade, and every close-in view.
  std::pair<int, int> viewing_cell(const ObjectState& world_state) const {
    const Vec3 sensor = graph_.pose(pose_id_).estimate.t;
    const GridSpec& grid = models_.geometric_for(world_state.cls).grid;
    return {grid.range_bin(viewing_range(world_state, sensor)),
            grid.angle_bin(viewing_angle(world_state, sensor))};
  }

  bool admit_factor(const std::optional<int>& landmark,
                    const ObjectState& world_state) const {
    const Vec3 sensor = graph_.pose(pose_id_).estimate.t;
    const double range = viewing_range(world_state, sensor);
    if (range > kFactorRangeCap) return false;
    if (range <= kDedupMinRange || !landmark) return true;
    const auto it = factor_cells_.find(*landmark);
    return it == factor_cells_.end() ||
           it->second.count(viewing_cell(world_state)) == 0;
  }

  void record_factor_cell(int landmark, const ObjectState& world_state) {
    factor_cells_[landmark].insert(viewing_cell(world_state));
  }

  void log_event(FlightEvent::Kind kind, int landmark) {
    flight_.push_back(FlightEvent{kind, true_pose_.t, landmark});
  }

  // --- planner environment --------------------------------------------------
  void fly_and_observe(const ViewpointSample& vp, int landmark_id) override {
    fly_to(vp.position, vp.altitude, vp.heading);
    observe();
    log_event(FlightEvent::Kind::kViewpoint, landmark_id);
  }

  Eigen::MatrixXd landmark_planning_cov(int id) override {
    return graph_.planning_covariance(id);
  }

  ObjectState landmark_state(int id) override { return graph_.landmark(id).state; }

  Vec2 robot_position() override {
    return Vec2(true_pose_.t.x(), true_pose_.t.y());
  }

  std::vector<Obstacle2D> obstacles_excluding(int landmark_id) override {
    const Vec2 target = footprint_center(graph_.landmark(landmark_id).state);
    std::vector<Obstacle2D> out;
    for (const auto& obj : prior_) {
      const Vec2 c = footprint_center(obj);
      if ((c - target).norm() < 3.0) continue;  // the object under study
      out.push_back(Obstacle2D{c, footprint_radius(obj) + 0.6});
    }
    return out;
  }

  std::optional<Bounds> world_bounds() override { return world_.bounds; }

 private:
  const WorldSpec& world_;
  const ExperimentConfig& cfg_;
  const ModelSet& models_;
  const std::vector<ObjectState>& prior_;
  FactorGraph graph_;
  std::vector<FlightEvent> flight_;
  RngStream odo_stream_, scan_stream_, seg_stream_;
  RngStream sweep_scan_stream_, sweep_seg_stream_;
  // Each buffered frame is tied to the graph poses bracketing its capture
  // (pose_a == pose_b for pause frames); frac interpolates along the leg.
  struct FrameAnchor {
    int pose_a;
    int pose_b;
    double frac;
  };
  std::vector<ScanFrame> buffer_;
  std::vector<FrameAnchor> anchors_;
  std::unordered_map<int, std::set<std::pair<int, int>>> factor_cells_;
  Pose true_pose_;
  int pose_id_ = 0;
  double t_ = 0.0;
  double path_length_ = 0.0;
  std::uint64_t legs_ = 0;
  std::uint64_t events_ = 0;
};

MissionResult run_mission(const WorldSpec& world, const ExperimentConfig& cfg,
                          std::uint64_t seed, bool active, const ModelSet* models,
                          const std::vector<ObjectState>* prior_override) {
  const auto t0 = std::chrono::steady_clock::now();

  const ModelSet local =
      models ? ModelSet{} : bundled_default_models(cfg.field, cfg.uncertainty);
  const ModelSet& use_models = models ? *models : local;

  std::vector<ObjectState> prior =
      prior_override
          ? *prior_override
          : make_prior_map(world, cfg.prior_sigma,
                           RngStream::from_seed(seed).child(stream_tag("prior")));

  MissionResult result;
  result.mission = active ? "active" : "baseline";
  result.seed = seed;

  MissionEnv env(world, cfg, use_models, prior, seed);

  std::vector<Vec2> targets;
  targets.reserve(prior.size());
  for (const auto& obj : prior) targets.push_back(footprint_center(obj));
  const std::vector<int> order = plan_visit_order(targets, env.robot_position());

  for (int idx : order) {
    const ObjectState& pobj = prior[idx];
    const Vec2 pxy = targets[idx];

    // Park on a quartering bearing relative to the object's prior heading when
    // it has one: a view down a box axis hides the length and a broadside view
    // hides the width, while a quartering view keeps both horizontal extents
    // visible. Fall back towards the approach side when the preferred spots
    // are blocked.
    auto approach = [&](double standoff) {
      Vec2 back = env.robot_position() - pxy;
      if (back.norm() < 1e-9) back = Vec2(1.0, 0.0);
      const double approach_bearing = std::atan2(back.y(), back.x());
      std::vector<double> bearings;
      if (const auto* cub = std::get_if<CuboidModel>(&pobj.geometry)) {
        const double obj_yaw = yaw_of(so3_exp(cub->r));
        const double deg = kPi / 180.0;
        for (double off : {45.0, -45.0, 135.0, -135.0}) {
          bearings.push_back(obj_yaw + off * deg);
        }
      }
      bearings.push_back(approach_bearing);
      Vec2 pos = pxy + standoff * Vec2(std::cos(approach_bearing),
                                       std::sin(approach_bearing));
      for (double b : bearings) {
        const Vec2 cand = pxy + standoff * Vec2(std::cos(b), std::sin(b));
        if (!world.bounds.contains(cand)) continue;
        bool blocked = false;
        for (const auto& other : prior) {
          if ((footprint_center(other) - cand).norm() <
              footprint_radius(other) + 1.0) {
            blocked = true;
            break;
          }
        }
        if (!blocked) {
          pos = cand;
          break;
        }
      }
      const double heading = std::atan2(pxy.y() - pos.y(), pxy.x() - pos.x());
      env.fly_to(pos, cfg.planner.altitude, heading);
      env.observe();
    };

    approach(cfg.mission.standoff);
    std::optional<int> lm =
        env.landmark_near(landmark_anchor(pobj), pobj.cls, 3.0);
    env.log_event(FlightEvent::Kind::kStandoff, lm.value_or(-1));

    if (active && is_target_class(pobj.cls)) {
      if (!lm) {  // one closer retry before giving the object up
        approach(0.6 * cfg.mission.standoff);
        lm = env.landmark_near(landmark_anchor(pobj), pobj.cls, 3.0);
        env.log_event(FlightEvent::Kind::kStandoff, lm.value_or(-1));
      }
      if (lm) {
        result.planner_logs.push_back(run_object_exploration(
            env, *lm, use_models.semantic_for(pobj.cls),
            use_models.geometric_for(pobj.cls), cfg.planner));
        const auto& lg = result.planner_logs.back();
        std::fprintf(stderr, "[dbg] lm=%d rounds=%zu H=%.3f note='%s'\n", *lm,
                     lg.rounds.size(), lg.final_entropy, lg.note.c_str());
      }
    }
  }

  env.graph().optimize();
  result.map = export_observed_landmarks(env.graph());
  result.metrics = compute_metrics(result.map, world);
  result.metrics.path_length = env.path_length();
  result.flight = std::move(env.flight());
  result.graph = std::move(env.graph());
  result.metrics.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

const SemanticConfidenceModel& ModelSet::semantic_for(SemanticClass cls) const {
  const auto it = semantic.find(cls);
  if (it == semantic.end()) {
    throw std::runtime_error(std::string("no semantic model for class ") +
                             class_name(cls));
  }
  return it->second;
}

const GeometricUncertaintyModel& ModelSet::geometric_for(SemanticClass cls) const {
  const auto it = geometric.find(cls);
  if (it == geometric.end()) {
    throw std::runtime_error(std::string("no geometric model for class ") +
                             class_name(cls));
  }
  return it->second;
}

ModelSet bundled_default_models(const ConfidenceField& field,
                                const UncertaintyConfig& unc) {
  ModelSet out;
  const SemanticClass classes[3] = {SemanticClass::kVehicle,
                                    SemanticClass::kLightPole,
                                    SemanticClass::kTreeTrunk};
  for (SemanticClass cls : classes) {
    const GridSpec grid =
        cls == SemanticClass::kVehicle ? unc.vehicle_grid : unc.cylinder_grid;
    const int nr = grid.n_range(), na = grid.n_angle();

    SemanticConfidenceModel sem;
    sem.cls = cls;
    sem.grid = grid;
    sem.mean.resize(nr, na);
    sem.count = Eigen::MatrixXi::Constant(nr, na, 1000);
    for (int i = 0; i < nr; ++i) {
      for (int j = 0; j < na; ++j) {
        sem.mean(i, j) = field.mean(cls, grid.range_center(i), grid.angle_center(j));
      }
    }
    out.semantic[cls] = std::move(sem);

    GeometricUncertaintyModel geo;
    geo.cls = cls;
    geo.grid = grid;
    geo.dim = error_dim(cls);
    geo.eps = unc.eps;
    geo.min_bin_count = unc.min_bin_count;
    geo.count = Eigen::MatrixXi::Constant(nr, na, 1000);
    geo.populated.assign(static_cast<std::size_t>(nr) * na, 1);
    geo.bin_cov.resize(static_cast<std::size_t>(nr) * na);
    // Total-error (bias plus spread) magnitudes measured from single-window
    // box fits. Percentile extents only span what the rays actually hit, so a
    // view down the long axis hides the length (narrow lobe, grows with
    // range), a broadside view beyond ~5 m hides the width, and localization
    // error grows with range and is worst end-on. A characterized model
    // supersedes these when provided.
    for (int i = 0; i < nr; ++i) {
      const double r = grid.range_center(i);
      for (int j = 0; j < na; ++j) {
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(geo.dim, geo.dim);
        if (cls == SemanticClass::kVehicle) {
          const double a = grid.angle_center(j);
          const double ca = std::abs(std::cos(a));
          const double sa = std::abs(std::sin(a));
          // Lobes are kept broad: the cubic interpolation between bin centers
          // overshoots around sharp single-bin spikes, and an undershoot below
          // zero gets floored into a near-zero variance, i.e. a fake perfect
          // measurement. Adjacent-bin variance ratios stay under ~6x.
          const double end_lobe = std::pow(ca, 6.0);
          const double side_lobe = std::pow(sa, 4.0);
          const double loc = 0.10 + 0.035 * r + 0.15 * r * end_lobe;
          // Broadside hides both end faces, so the length estimate degrades
          // there as well as down the long axis; oblique views do best.
          const double sl =
              0.15 + 0.030 * r + 0.22 * r * end_lobe + 0.15 * side_lobe;
          const double sw =
              0.10 + 0.012 * r + 0.20 * std::max(0.0, r - 5.0) * side_lobe;
          cov.diagonal() << loc * loc, loc * loc, sl * sl, sw * sw;
        } else {
          const double loc = 0.01 + 0.002 * r;
          cov.diagonal() << loc * loc, loc * loc;
        }
        geo.bin_cov[static_cast<std::size_t>(i) * na + j] = cov;
      }
    }
    out.geometric[cls] = std::move(geo);
  }
  return out;
}

std::vector<ObjectState> make_prior_map(const WorldSpec& world, double sigma,
                                        RngStream stream) {
  std::vector<ObjectState> out;
  out.reserve(world.objects.size());
  for (const auto& obj : world.objects) {
    ObjectState s = obj.state;
    RngStream child = stream.child(s.id);
    const double dx = sigma * child.next_gaussian();
    const double dy = sigma * child.next_gaussian();
    if (auto* box = std::get_if<CuboidModel>(&s.geometry)) {
      box->t.x() += dx;
      box->t.y() += dy;
    } else if (auto* cyl = std::get_if<CylinderModel>(&s.geometry)) {
      cyl->b.x() += dx;
      cyl->b.y() += dy;
    }
    out.push_back(std::move(s));
  }
  return out;
}

MissionResult run_baseline(const WorldSpec& world, const ExperimentConfig& cfg,
                           std::uint64_t seed, const ModelSet* models,
                           const std::vector<ObjectState>* prior_override) {
  return run_mission(world, cfg, seed, false, models, prior_override);
}

MissionResult run_active(const WorldSpec& world, const ExperimentConfig& cfg,
                         std::uint64_t seed, const ModelSet* models,
                         const std::vector<ObjectState>* prior_override) {
  return run_mission(world, cfg, seed, true, models, prior_override);
}

CharacterizeResult run_characterize(const WorldSpec& world,
                                    const ExperimentConfig& cfg,
                                    std::uint64_t seed) {
  const auto& unc = cfg.uncertainty;
  RngStream root = RngStream::from_seed(seed);
  RngStream scan_stream = root.child(stream_tag("char-scan"));
  RngStream seg_stream = root.child(stream_tag("char-segmentation"));

  std::vector<MeasurementSet> events;
  double t = 0.0;
  std::uint64_t pose_idx = 0;
  const double dtheta = unc.spiral_step_deg * kPi / 180.0;

  for (const auto& obj : world.objects) {
    const Vec2 center = footprint_center(obj.state);
    // Archimedean spiral: radius advances by `pitch` per revolution, so every
    // range bin is crossed in every angular sector when pitch <= bin width.
    for (double theta = 0.0;; theta += dtheta) {
      const double r = unc.spiral_r_min + unc.spiral_pitch * theta / (2.0 * kPi);
      if (r > unc.spiral_r_max) break;
      const Vec2 pos = center + r * Vec2(std::cos(theta), std::sin(theta));
      if (!world.bounds.contains(pos)) {
        ++pose_idx;
        continue;
      }
      const double heading = std::atan2(center.y() - pos.y(), center.x() - pos.x());
      const Pose pose{rot_z(heading), Vec3(pos.x(), pos.y(), cfg.planner.altitude)};

      std::vector<ScanFrame> frames;
      frames.reserve(cfg.mission.window_frames);
      for (int k = 0; k < cfg.mission.window_frames; ++k) {
        ScanFrame f = simulate_scan(world, pose, cfg.sensor,
                                    scan_stream.child(pose_idx).child(k));
        f = simulate_segmentation(f, cfg.field, world,
                                  seg_stream.child(pose_idx).child(k));
        f.timestamp = t;
        f.odom_pose = pose;  // characterization flies on ground truth
        t += cfg.mission.scan_period;
        frames.push_back(std::move(f));
      }
      events.push_back(extract_measurements(frames, cfg.perception));
      ++pose_idx;
    }
  }

  CharacterizeResult out;
  out.samples = collect_samples(world, events);

  const SemanticClass classes[3] = {SemanticClass::kVehicle,
                                    SemanticClass::kLightPole,
                                    SemanticClass::kTreeTrunk};
  for (SemanticClass cls : classes) {
    const GridSpec grid =
        cls == SemanticClass::kVehicle ? unc.vehicle_grid : unc.cylinder_grid;
    const bool present = std::any_of(
        world.objects.begin(), world.objects.end(),
        [cls](const WorldObject& o) { return o.state.cls == cls; });
    if (!present) continue;
    out.models.semantic[cls] = fit_semantic_model(out.samples.samples, cls, grid);
    out.models.geometric[cls] = fit_geometric_model(
        out.samples.samples, cls, grid, unc.min_bin_count, unc.eps);
  }
  return out;
}

MetricsReport compute_metrics(const std::vector<ObjectState>& estimated,
                              const WorldSpec& world, double match_radius) {
  MetricsReport report;

  std::vector<const ObjectState*> truths;
  for (const auto& obj : world.objects) {
    if (is_target_class(obj.state.cls)) truths.push_back(&obj.state);
  }
  report.true_targets = static_cast<int>(truths.size());

  // Closest estimate per true object; an estimate matches at most one truth.
  std::vector<double> best_dist(truths.size(),
                                std::numeric_limits<double>::infinity());
  std::vector<const ObjectState*> best_est(truths.size(), nullptr);
  for (const auto& est : estimated) {
    if (!is_target_class(est.cls)) continue;
    int nearest = -1;
    double nd = match_radius;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      const double d = (footprint_center(est) - footprint_center(*truths[i])).norm();
      if (d < nd) {
        nd = d;
        nearest = static_cast<int>(i);
      }
    }
    if (nearest >= 0 && nd < best_dist[nearest]) {
      best_dist[nearest] = nd;
      best_est[nearest] = &est;
    }
  }

  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (!best_est[i]) continue;
    ++report.matched_targets;
    const auto& td = std::get<CuboidModel>(truths[i]->geometry).d;
    const auto& ed = std::get<CuboidModel>(best_est[i]->geometry).d;
    const double tl = std::max(td.x(), td.y()), tw = std::min(td.x(), td.y());
    const double el = std::max(ed.x(), ed.y()), ew = std::min(ed.x(), ed.y());
    report.errors.push_back(std::abs(el - tl));
    report.errors.push_back(std::abs(ew - tw));
  }

  report.objects_mapped =
      truths.empty() ? 1.0
                     : static_cast<double>(report.matched_targets) / truths.size();
  if (report.errors.empty()) {
    report.err_mean = std::numeric_limits<double>::quiet_NaN();
    report.err_std = std::numeric_limits<double>::quiet_NaN();
  } else {
    double sum = 0.0;
    for (double e : report.errors) sum += e;
    report.err_mean = sum / report.errors.size();
    double var = 0.0;
    for (double e : report.errors) var += (e - report.err_mean) * (e - report.err_mean);
    report.err_std = std::sqrt(var / report.errors.size());  // population std
  }
  return report;
}

MergeResult merge_maps(const std::vector<FactorGraph>& graphs,
                       const std::vector<Pose>& base_transforms,
                       const WorldSpec& world) {
  MergeResult out;
  out.graph = merge_graphs(graphs, base_transforms);
  out.graph.optimize();
  out.map = export_observed_landmarks(out.graph);
  out.metrics = compute_metrics(out.map, world);
  return out;
}

std::vector<ObjectState> export_observed_landmarks(const FactorGraph& graph) {
  std::vector<ObjectState> out;
  for (const auto& [id, lm] : graph.landmarks()) {
    if (lm.n_factors < 1) continue;
    ObjectState s = lm.state;
    s.id = static_cast<std::uint32_t>(id);
    out.push_back(std::move(s));
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::string out = "seed,mission,err_mean_m,err_std_m,mapped_frac,path_len_m\n";
  char buf[256];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%llu,%s,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<unsigned long long>(row.seed), row.mission.c_str(),
                  row.report.err_mean, row.report.err_std,
                  row.report.objects_mapped, row.report.path_length);
    out += buf;
  }
  atomic_write_text(path, out);
}

void save_flight_log(const std::vector<FlightEvent>& flight, const std::string& path) {
  std::string out = "event,kind,x,y,z,landmark\n";
  char buf[256];
  for (std::size_t i = 0; i < flight.size(); ++i) {
    const auto& e = flight[i];
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.9g,%.9g,%.9g,%d\n", i,
                  e.kind == FlightEvent::Kind::kStandoff ? "standoff" : "viewpoint",
                  e.position.x(), e.position.y(), e.position.z(), e.landmark);
    out += buf;
  }
  atomic_write_text(path, out);
}

}  // namespace msm
