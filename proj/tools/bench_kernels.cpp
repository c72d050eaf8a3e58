// Timing + bit-identity comparison of the OpenMP kernels against the serial
// reference implementations: ray casting, factor linearization, and candidate
// path evaluation.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "msm/factor_graph.hpp"
#include "msm/lidar.hpp"
#include "msm/planner.hpp"
#include "msm/world.hpp"

using namespace msm;

namespace {

template <class F>
double time_best_ms(F&& f, int reps = 5) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    if (ms < best) best = ms;
  }
  return best;
}

bool scans_identical(const ScanFrame& a, const ScanFrame& b) {
  if (a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (a.points[i].position != b.points[i].position ||
        a.points[i].confidence != b.points[i].confidence ||
        a.points[i].predicted_class != b.points[i].predicted_class ||
        a.points[i].object_id != b.points[i].object_id) {
      return false;
    }
  }
  return true;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-24s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

FactorGraph build_graph(int n_poses, int n_landmarks) {
  FactorGraph g;
  Mat6 odo_cov = Mat6::Identity() * 1e-4;
  g.add_prior(0, Pose::identity(), odo_cov);
  Pose truth = Pose::identity();
  std::vector<CuboidModel> boxes(n_landmarks);
  for (int k = 0; k < n_landmarks; ++k) {
    boxes[k].t = Vec3(10.0 * k, 5.0, 0.8);
    boxes[k].d = Vec3(4.5, 1.9, 1.6);
  }
  for (int i = 1; i < n_poses; ++i) {
    Pose rel;
    rel.t = Vec3(1.0, 0.0, 0.0);
    g.add_odometry(0, rel, odo_cov);
    truth = se3_compose(truth, rel);
    if (i % 5 == 0) {
      const int k = (i / 5) % n_landmarks;
      CuboidMeasurement meas;
      meas.model = transform_cuboid(se3_inverse(truth), boxes[k]);
      meas.n_points = 100;
      meas.mean_confidence = 0.9;
      const auto assoc = g.associate(boxes[k].t, SemanticClass::kVehicle, 2.0);
      g.add_cuboid_factor(g.last_pose(0), assoc.landmark, meas,
                          default_cuboid_covariance());
    }
  }
  return g;
}

}  // namespace

int main() {
  // --- ray casting ----------------------------------------------------------
  {
    WorldGenConfig wcfg;
    wcfg.n_vehicles = 6;
    wcfg.n_light_poles = 4;
    wcfg.n_tree_trunks = 4;
    const WorldSpec world = generate_world(17, wcfg);
    const SensorSpec sensor = SensorSpec::standard();
    Pose pose;
    pose.t = Vec3(0.0, 0.0, 3.0);
    const RngStream stream = RngStream::from_seed(3).child(11);

    ScanFrame serial_out, parallel_out;
    const double s = time_best_ms(
        [&] { serial_out = simulate_scan_reference(world, pose, sensor, stream); });
    const double p =
        time_best_ms([&] { parallel_out = simulate_scan(world, pose, sensor, stream); });
    report("ray casting", s, p, scans_identical(serial_out, parallel_out));
  }

  // --- factor linearization -------------------------------------------------
  {
    const FactorGraph g = build_graph(600, 24);
    Linearization serial_out, parallel_out;
    const double s = time_best_ms([&] { serial_out = g.linearize_reference(); });
    const double p = time_best_ms([&] { parallel_out = g.linearize(); });
    bool same = serial_out.cost == parallel_out.cost &&
                serial_out.residuals.size() == parallel_out.residuals.size();
    for (std::size_t i = 0; same && i < serial_out.residuals.size(); ++i) {
      same = serial_out.residuals[i] == parallel_out.residuals[i] &&
             serial_out.jacobians[i] == parallel_out.jacobians[i];
    }
    report("factor linearization", s, p, same);
  }

  // --- candidate path evaluation --------------------------------------------
  {
    const int a = 10, T = 3;
    std::vector<ViewpointSample> samples(a);
    for (int i = 0; i < a; ++i) {
      samples[i].position = Vec2(5.0 * std::cos(0.6 * i), 5.0 * std::sin(0.6 * i));
      samples[i].predicted_covariance =
          Eigen::MatrixXd::Identity(4, 4) * (0.01 + 0.001 * i);
    }
    const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(4, 4) * 0.5;
    auto paths = enumerate_candidate_paths(a, T, 1000);
    auto serial_paths = paths;
    auto parallel_paths = paths;
    const double s = time_best_ms([&] {
      evaluate_path_gains_reference(serial_paths, sigma, samples, Vec2(0, 0));
    });
    const double p = time_best_ms(
        [&] { evaluate_path_gains(parallel_paths, sigma, samples, Vec2(0, 0)); });
    bool same = true;
    for (std::size_t i = 0; same && i < serial_paths.size(); ++i) {
      same = serial_paths[i].gain == parallel_paths[i].gain &&
             serial_paths[i].length == parallel_paths[i].length;
    }
    report("path gain evaluation", s, p, same);
  }
  return 0;
}
