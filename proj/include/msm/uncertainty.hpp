#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msm/objects.hpp"
#include "msm/perception.hpp"
#include "msm/world.hpp"

namespace msm {

// One (measurement, ground truth) pair from a characterization flight.
// Error channels: vehicles [x, y, length, width]; poles/trunks [x, y].
struct SampleRecord {
  SemanticClass cls = SemanticClass::kVehicle;
  double range = 0.0;
  double angle = 0.0;  // radians in (-pi, pi]
  double confidence = 0.0;
  Eigen::VectorXd geometric_error;
};

int error_dim(SemanticClass cls);  // 4 for vehicles, 2 for poles/trunks

// Discretization of the (range, viewing angle) domain. Bin centers are the
// interpolation nodes; the angle axis wraps around.
struct GridSpec {
  double range_min = 2.5;
  double range_max = 40.0;
  double range_step = 2.5;
  double angle_step = 22.5 * 3.14159265358979323846 / 180.0;
  bool collapse_angle = false;  // poles/trunks: angle dimension dropped

  int n_range() const;
  int n_angle() const;
  int range_bin(double range) const;  // -1 outside [range_min, range_max]
  int angle_bin(double angle) const;
  double range_center(int i) const;
  double angle_center(int j) const;
};

GridSpec default_grid(SemanticClass cls);

double wrap_angle(double a);  // into (-pi, pi]

// f^s: per-bin mean classification confidence with bilinear interpolation.
struct SemanticConfidenceModel {
  SemanticClass cls = SemanticClass::kVehicle;
  GridSpec grid;
  Eigen::MatrixXd mean;    // n_range x n_angle, empty bins filled at fit time
  Eigen::MatrixXi count;   // raw per-bin sample counts
};

// f^g: per-bin sample covariance of the geometric error with smooth
// interpolation over bin centers and an SPD floor.
struct GeometricUncertaintyModel {
  SemanticClass cls = SemanticClass::kVehicle;
  GridSpec grid;
  int dim = 4;
  double eps = 1e-6;       // eigenvalue floor, m^2
  int min_bin_count = 20;
  std::vector<Eigen::MatrixXd> bin_cov;  // row-major [range][angle], filled grid
  Eigen::MatrixXi count;
  std::vector<std::uint8_t> populated;   // bins that met min_bin_count
};

struct SampleCollection {
  std::vector<SampleRecord> samples;
  int dropped = 0;  // measurements with no ground-truth object inside the gate
};

// Pairs every measurement with its true object (class-gated nearest neighbor
// through the true sensor pose) and emits one record per pair.
SampleCollection collect_samples(const WorldSpec& world,
                                 const std::vector<MeasurementSet>& events);

// Throws InsufficientEvidence when fewer than half of the bins are populated.
SemanticConfidenceModel fit_semantic_model(const std::vector<SampleRecord>& samples,
                                           SemanticClass cls, const GridSpec& grid);

// Throws InsufficientEvidence when no bin reaches min_bin_count samples.
GeometricUncertaintyModel fit_geometric_model(const std::vector<SampleRecord>& samples,
                                              SemanticClass cls, const GridSpec& grid,
                                              int min_bin_count = 20,
                                              double eps = 1e-6);

// Bilinear over bin centers; range clamps to the grid edge, angle wraps.
double predict_confidence(const SemanticConfidenceModel& model, double range,
                          double angle);

// Cubic (Catmull-Rom) interpolation of covariance entries over bin centers,
// SPD-projected. Queries outside the convex hull of populated bins return the
// nearest populated bin's covariance.
Eigen::MatrixXd predict_covariance(const GeometricUncertaintyModel& model,
                                   double range, double angle);

// 1/2 ln det(sigma) in nats, via Cholesky. Throws on non-SPD input.
double entropy(const Eigen::MatrixXd& sigma);

struct RegionCell {
  int range_bin = 0;
  int angle_bin = 0;
};

struct ConfidenceRegion {
  std::vector<RegionCell> semantic;      // confidence >= level
  std::vector<RegionCell> metric;        // 2-sigma per channel within bounds
  std::vector<RegionCell> intersection;  // both
};

// Grid cells (evaluated at bin centers) meeting the semantic and metric
// criteria. Localization channels use loc_bound, dimension channels dim_bound.
ConfidenceRegion confidence_region(const SemanticConfidenceModel& semantic,
                                   const GeometricUncertaintyModel& geometric,
                                   double level, double loc_bound = 0.1,
                                   double dim_bound = 0.2,
                                   std::optional<double> entropy_cap = {});

// Sample file: CSV `class,range,angle,confidence,e1,e2,e3,e4`; unused error
// channels stay blank.
void save_samples(const std::vector<SampleRecord>& samples, const std::string& path);
std::vector<SampleRecord> load_samples(const std::string& path);

// Versioned JSON snapshots, round-trip stable.
void save_semantic_model(const SemanticConfidenceModel& model, const std::string& path);
SemanticConfidenceModel load_semantic_model(const std::string& path);
void save_geometric_model(const GeometricUncertaintyModel& model,
                          const std::string& path);
GeometricUncertaintyModel load_geometric_model(const std::string& path);

}  // namespace msm
