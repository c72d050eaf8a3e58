#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msm/objects.hpp"
#include "msm/uncertainty.hpp"
#include "msm/world.hpp"

namespace msm {

// Circular no-fly footprint in the ground plane (already inflated).
struct Obstacle2D {
  Vec2 center;
  double radius = 0.0;
};

struct ViewpointSample {
  Vec2 position;       // ground-plane, world frame
  double altitude = 3.0;
  double heading = 0.0;  // faces the object anchor
  double range = 0.0;    // polar coordinates in the object's estimated frame
  double angle = 0.0;
  double predicted_confidence = 0.0;
  Eigen::MatrixXd predicted_covariance;
  bool reachable = true;
  int id = 0;
  int grid_key = 0;  // sampling-grid cell, used to exhaust the sample set
};

struct ViewpointSet {
  std::vector<ViewpointSample> samples;
  std::string note;  // diagnostic when empty
};

struct CandidatePath {
  std::vector<int> viewpoints;  // indices into the sample list, length = horizon
  double gain = 0.0;            // nats
  double length = 0.0;          // meters of travel
};

enum class SamplingStrategy { kUniform, kCentroid };

struct PlannerConfig {
  int horizon = 2;                 // T
  double confidence_level = 0.95;
  // Differential entropy stop level in nats for the 4-channel vehicle
  // planning block. Sized at the diminishing-returns point where the pose
  // marginal, not the measurement model, limits further shrinkage.
  double entropy_threshold = -9.0;
  SamplingStrategy strategy = SamplingStrategy::kUniform;
  int max_samples = 8;             // a; keeps the path enumeration at most 8*7
  int path_budget = 10000;         // P(a,T) guard
  double sample_range_step = 2.0;  // meters
  double sample_angle_step = 22.5 * 3.14159265358979323846 / 180.0;
  double altitude = 3.0;
  int max_rounds = 50;
  // Per-channel 2-sigma bounds defining the metric part of the sampling
  // region. The strict defaults suit characterized (spread-only) models;
  // missions running on the bundled total-error defaults need looser ones.
  double loc_bound = 0.1;  // meters, localization channels
  double dim_bound = 0.2;  // meters, dimension channels
};

// Open tour from `start` over the target positions; exact dynamic programming
// for up to 10 targets, nearest-neighbor + 2-opt beyond. Returns indices.
std::vector<int> plan_visit_order(const std::vector<Vec2>& targets, const Vec2& start);

// Exact open-tour solver, exposed for cross-checking the heuristic.
std::vector<int> plan_visit_order_exact(const std::vector<Vec2>& targets,
                                        const Vec2& start);

double tour_length(const std::vector<Vec2>& targets, const std::vector<int>& order,
                   const Vec2& start);

// True if the segment from a to b crosses any obstacle disk.
bool segment_blocked(const Vec2& a, const Vec2& b,
                     const std::vector<Obstacle2D>& obstacles);

// Viewpoints inside the 95% semantic/metric intersection region around the
// object estimate, filtered to collision-free positions with unobstructed
// line of sight (the obstacle set must exclude the object itself). `exclude`
// removes sampling-grid cells that were already flown.
ViewpointSet sample_viewpoints(const ObjectState& object,
                               const SemanticConfidenceModel& semantic,
                               const GeometricUncertaintyModel& geometric,
                               const PlannerConfig& config,
                               const std::vector<Obstacle2D>& obstacles,
                               const std::optional<Bounds>& bounds = {},
                               const std::vector<int>& exclude = {});

// All ordered tuples of `horizon` distinct samples: exactly a!/(a-T)! paths.
// Throws when the count would exceed config.path_budget.
std::vector<CandidatePath> enumerate_candidate_paths(int n_samples, int horizon,
                                                     int budget = 10000);

// Recursive covariance update: (prior^-1 + measurement^-1)^-1.
Eigen::MatrixXd fuse_covariance(const Eigen::MatrixXd& prior,
                                const Eigen::MatrixXd& measurement);

// Entropy drop from fusing the path's predicted measurement covariances into
// sigma_t; never negative.
double information_gain(const Eigen::MatrixXd& sigma_t, const CandidatePath& path,
                        const std::vector<ViewpointSample>& samples);

// Fills gain and travel length for every candidate; the two variants are
// bit-identical, one runs across candidates in parallel.
void evaluate_path_gains(std::vector<CandidatePath>& paths,
                         const Eigen::MatrixXd& sigma_t,
                         const std::vector<ViewpointSample>& samples,
                         const Vec2& start);
void evaluate_path_gains_reference(std::vector<CandidatePath>& paths,
                                   const Eigen::MatrixXd& sigma_t,
                                   const std::vector<ViewpointSample>& samples,
                                   const Vec2& start);

// Argmax gain; ties within 1e-9 nats go to the shorter path, then to the
// lexicographically smaller viewpoint id tuple.
const CandidatePath& select_path(const std::vector<CandidatePath>& candidates);

bool should_stop(double current_entropy, double entropy_threshold,
                 int samples_remaining);

// One exploration round as executed.
struct ExplorationRound {
  int round = 0;
  double entropy_before = 0.0;
  double entropy_after = 0.0;
  double gain_predicted = 0.0;   // fused-model prediction for the chosen path
  double gain_realized = 0.0;    // measured from the SLAM marginals
  double path_length = 0.0;
  int n_candidates = 0;
  bool fallback = false;
  std::vector<ViewpointSample> flown;
};

struct ExplorationLog {
  int landmark_id = 0;
  std::vector<ExplorationRound> rounds;
  double final_entropy = 0.0;
  double final_confidence = 0.0;
  bool constraint_met = true;  // final confidence reached the level
  std::string note;
};

// What the exploration loop needs from the simulation + SLAM stack.
class ExplorationEnv {
 public:
  virtual ~ExplorationEnv() = default;
  // Fly to the viewpoint (scanning on the way), run perception and fold the
  // measurements into the graph.
  virtual void fly_and_observe(const ViewpointSample& viewpoint, int landmark_id) = 0;
  virtual Eigen::MatrixXd landmark_planning_cov(int landmark_id) = 0;
  virtual ObjectState landmark_state(int landmark_id) = 0;
  virtual Vec2 robot_position() = 0;
  virtual std::vector<Obstacle2D> obstacles_excluding(int landmark_id) = 0;
  virtual std::optional<Bounds> world_bounds() = 0;
};

// Receding-horizon loop: sample -> enumerate -> select -> fly -> re-estimate,
// until the entropy threshold is met or the sample set is exhausted. An empty
// first-round viewpoint set falls back to one closest-approach view, flagged.
ExplorationLog run_object_exploration(ExplorationEnv& env, int landmark_id,
                                      const SemanticConfidenceModel& semantic,
                                      const GeometricUncertaintyModel& geometric,
                                      const PlannerConfig& config);

// CSV: object_id,round,entropy_before,entropy_after,gain_predicted,
// gain_realized,path_length_m,n_candidates
void save_planner_log(const std::vector<ExplorationLog>& logs, const std::string& path);

}  // namespace msm
