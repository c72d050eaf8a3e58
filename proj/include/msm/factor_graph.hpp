#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msm/objects.hpp"
#include "msm/perception.hpp"
#include "msm/residuals.hpp"
#include "msm/se3.hpp"

namespace msm {

struct NoInformation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Default nearest-neighbor association gates, by landmark class.
inline constexpr double kVehicleAssocThreshold = 2.0;   // meters
inline constexpr double kCylinderAssocThreshold = 1.0;  // meters

struct AssociationResult {
  std::optional<int> landmark;  // empty = start a new landmark
  double distance = 0.0;
};

struct PoseVariable {
  int robot = 0;
  Pose estimate;
};

struct Landmark {
  ObjectState state;
  double confidence_sum = 0.0;
  int n_obs = 0;      // measurements folded into the confidence mean
  int n_factors = 0;  // factors currently attached
};

struct PriorFactor {
  int pose = 0;
  Pose value;
  Mat6 cov;
  Eigen::MatrixXd sqrt_info;
};

struct OdometryFactor {
  int pose_a = 0;
  int pose_b = 0;
  Pose rel;
  Mat6 cov;
  Eigen::MatrixXd sqrt_info;
};

struct CuboidFactor {
  int pose = 0;
  int landmark = 0;
  CuboidModel meas;
  double mean_confidence = 0.0;
  Mat9 cov;
  Eigen::MatrixXd sqrt_info;
};

struct CylinderFactor {
  int pose = 0;
  int landmark = 0;
  CylinderModel meas;
  double mean_confidence = 0.0;
  Mat7 cov;
  Eigen::MatrixXd sqrt_info;
};

struct OptimizeConfig {
  int max_iters = 100;
  double tol = 1e-8;  // relative cost decrease
  double lambda0 = 1e-4;
  double lambda_max = 1e8;
};

struct OptimizeResult {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;
};

// Per-factor whitened residuals and Jacobians at the current estimates.
struct Linearization {
  double cost = 0.0;
  std::vector<Eigen::VectorXd> residuals;
  std::vector<Eigen::MatrixXd> jacobians;
};

// Default measurement covariances used when no fitted uncertainty model is
// available. Residual ordering: cuboid [rotation(3); translation(3); dims(3)],
// cylinder [root(3); axis(3); radius(1)].
Mat9 default_cuboid_covariance();
Mat7 default_cylinder_covariance();

// Pose chain(s) + object landmarks + measurement factors, optimized in batch
// by Levenberg-Marquardt with manifold retractions.
class FactorGraph {
 public:
  // --- construction -------------------------------------------------------
  int add_prior(int robot, const Pose& value, const Mat6& cov);
  int add_odometry(int robot, const Pose& rel, const Mat6& cov);

  // Seeds a landmark without evidence (e.g. from a prior map). Only cuboid
  // and cylinder geometries can become landmarks.
  int add_landmark(const ObjectState& state);

  // Nearest same-class landmark by centroid/root distance; ties broken by the
  // smaller landmark id. `point` is in the world frame.
  AssociationResult associate(const Vec3& point, SemanticClass cls,
                              double threshold) const;

  // Appends a measurement factor. Without a landmark id, a new landmark is
  // initialized by pushing the measurement through the pose estimate. The
  // landmark confidence becomes the running mean of measurement confidences.
  int add_cuboid_factor(int pose_id, std::optional<int> landmark_id,
                        const CuboidMeasurement& meas, const Mat9& cov);
  int add_cylinder_factor(int pose_id, std::optional<int> landmark_id,
                          const CylinderMeasurement& meas, const Mat7& cov);

  // --- inference ----------------------------------------------------------
  OptimizeResult optimize(const OptimizeConfig& cfg = {});

  // Marginal covariance of one landmark's local parameters at the current
  // estimates (cuboids 9x9: [rot, trans, dims]; cylinders 6x6: [root, axis
  // tangent, radius]). Throws NoInformation for landmarks without factors.
  Eigen::MatrixXd landmark_covariance(int id) const;
  std::map<int, Eigen::MatrixXd> landmark_covariances(const std::vector<int>& ids) const;

  // The sub-block driving exploration decisions: vehicles -> world-frame
  // [t_x, t_y, d_x, d_y] (4x4), poles/trunks -> [b_x, b_y] (2x2).
  Eigen::MatrixXd planning_covariance(int id) const;

  // Whitened residuals/Jacobians over all factors; the two variants are
  // bit-identical, one evaluates factors in parallel.
  Linearization linearize() const;
  Linearization linearize_reference() const;
  double current_cost() const;

  // --- access -------------------------------------------------------------
  int n_poses() const { return static_cast<int>(poses_.size()); }
  const PoseVariable& pose(int id) const { return poses_.at(id); }
  Pose& pose_estimate(int id) { return poses_.at(id).estimate; }
  const std::vector<int>& robot_chain(int robot) const { return chains_.at(robot); }
  const std::map<int, std::vector<int>>& chains() const { return chains_; }
  int last_pose(int robot) const { return chains_.at(robot).back(); }
  const Landmark& landmark(int id) const { return landmarks_.at(id); }
  const std::map<int, Landmark>& landmarks() const { return landmarks_; }
  std::size_t n_factors() const {
    return priors_.size() + odometry_.size() + cuboids_.size() + cylinders_.size();
  }
  const std::vector<PriorFactor>& prior_factors() const { return priors_; }
  const std::vector<OdometryFactor>& odometry_factors() const { return odometry_; }
  const std::vector<CuboidFactor>& cuboid_factors() const { return cuboids_; }
  const std::vector<CylinderFactor>& cylinder_factors() const { return cylinders_; }

 private:
  friend FactorGraph load_graph(const std::string& path);
  friend void save_graph(const FactorGraph& graph, const std::string& path);
  friend FactorGraph merge_graphs(const std::vector<FactorGraph>& graphs,
                                  const std::vector<Pose>& base_transforms,
                                  double vehicle_threshold, double cylinder_threshold);

  struct Layout;
  struct Blocks;
  Layout make_layout() const;
  Blocks evaluate(const std::vector<PoseVariable>& poses,
                  const std::map<int, Landmark>& landmarks, const Layout& layout,
                  bool with_jacobians, bool parallel) const;

  int add_pose(int robot, const Pose& estimate);
  int next_landmark_id() const;

  std::vector<PoseVariable> poses_;
  std::map<int, std::vector<int>> chains_;  // robot -> pose ids, time order
  std::map<int, Landmark> landmarks_;
  std::vector<PriorFactor> priors_;
  std::vector<OdometryFactor> odometry_;
  std::vector<CuboidFactor> cuboids_;
  std::vector<CylinderFactor> cylinders_;
};

// Combines per-robot graphs into one, mapping each robot's world into the
// common frame by its base transform and re-associating landmarks across
// robots with the usual class-gated nearest-neighbor rule.
FactorGraph merge_graphs(const std::vector<FactorGraph>& graphs,
                         const std::vector<Pose>& base_transforms,
                         double vehicle_threshold = kVehicleAssocThreshold,
                         double cylinder_threshold = kCylinderAssocThreshold);

// Versioned JSON snapshot; round-trip stable.
void save_graph(const FactorGraph& graph, const std::string& path);
FactorGraph load_graph(const std::string& path);

}  // namespace msm
