#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msm/config.hpp"
#include "msm/factor_graph.hpp"
#include "msm/planner.hpp"
#include "msm/uncertainty.hpp"
#include "msm/world.hpp"

namespace msm {

// Accuracy summary over target-class objects, matched to ground truth by
// same-class nearest neighbor within the match radius. Errors pool the
// absolute length and width residuals of every matched object; the spread is
// the population standard deviation.
struct MetricsReport {
  std::vector<double> errors;  // |length err|, |width err| per matched target
  double err_mean = 0.0;
  double err_std = 0.0;
  double objects_mapped = 0.0;  // matched true targets / true targets
  double path_length = 0.0;     // meters flown
  double wall_time = 0.0;       // seconds, excluded from CSV output
  int matched_targets = 0;
  int true_targets = 0;
};

struct FlightEvent {
  enum class Kind { kStandoff, kViewpoint } kind = Kind::kStandoff;
  Vec3 position;
  int landmark = -1;  // graph landmark observed at the stop, -1 if none
};

// Fitted uncertainty models keyed by class.
struct ModelSet {
  std::map<SemanticClass, SemanticConfidenceModel> semantic;
  std::map<SemanticClass, GeometricUncertaintyModel> geometric;

  const SemanticConfidenceModel& semantic_for(SemanticClass cls) const;
  const GeometricUncertaintyModel& geometric_for(SemanticClass cls) const;
};

// Analytic stand-in for a characterization run: confidence means evaluated
// straight from the simulator field, and smooth range-growing covariances.
// Used whenever no fitted models are supplied.
ModelSet bundled_default_models(const ConfidenceField& field,
                                const UncertaintyConfig& unc);

// Ground-truth object list with positions perturbed by sigma per axis.
std::vector<ObjectState> make_prior_map(const WorldSpec& world, double sigma,
                                        RngStream stream);

struct MissionResult {
  std::string mission;  // "active" | "baseline"
  std::uint64_t seed = 0;
  FactorGraph graph;
  std::vector<ObjectState> map;  // observed landmarks, world frame
  MetricsReport metrics;
  std::vector<FlightEvent> flight;
  std::vector<ExplorationLog> planner_logs;  // active missions only
};

// One simulated flight over the world: a shortest-order tour over the prior
// map with a single standoff pause per object (baseline), optionally followed
// by per-object viewpoint exploration for target-class objects (active).
// Both missions share the estimator; they differ only in viewpoint policy.
// `models` supplies measurement covariances and the exploration regions; when
// null, bundled defaults derived from the config are used. `prior_override`
// substitutes the prior map (used by multi-robot splits).
MissionResult run_baseline(const WorldSpec& world, const ExperimentConfig& cfg,
                           std::uint64_t seed, const ModelSet* models = nullptr,
                           const std::vector<ObjectState>* prior_override = nullptr);
MissionResult run_active(const WorldSpec& world, const ExperimentConfig& cfg,
                         std::uint64_t seed, const ModelSet* models = nullptr,
                         const std::vector<ObjectState>* prior_override = nullptr);

// Spiral characterization flights around every object, one spiral per object,
// sampling measurements against ground truth and fitting the per-class
// models. Fitting failures (insufficient coverage) propagate.
struct CharacterizeResult {
  SampleCollection samples;
  ModelSet models;
};
CharacterizeResult run_characterize(const WorldSpec& world,
                                    const ExperimentConfig& cfg,
                                    std::uint64_t seed);

MetricsReport compute_metrics(const std::vector<ObjectState>& estimated,
                              const WorldSpec& world, double match_radius = 3.0);

// merge_graphs + optimize + metrics against the shared world.
struct MergeResult {
  FactorGraph graph;
  std::vector<ObjectState> map;
  MetricsReport metrics;
};
MergeResult merge_maps(const std::vector<FactorGraph>& graphs,
                       const std::vector<Pose>& base_transforms,
                       const WorldSpec& world);

// Landmarks with at least one attached measurement factor, as world-frame
// object states (seeded-but-never-observed landmarks are dropped).
std::vector<ObjectState> export_observed_landmarks(const FactorGraph& graph);

struct MetricsRow {
  std::uint64_t seed = 0;
  std::string mission;
  MetricsReport report;
};

// CSV with header seed,mission,err_mean_m,err_std_m,mapped_frac,path_len_m;
// formatting is fixed so identical runs produce identical bytes.
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

void save_flight_log(const std::vector<FlightEvent>& flight, const std::string& path);

}  // namespace msm
