#include "msm/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "msm/parallel.hpp"

namespace msm {

namespace {

constexpr double kPi = 3.14159265358979323846;

double dist2d(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

Vec2 anchor_xy(const ObjectState& object) { return footprint_center(object); }

double object_yaw(const ObjectState& object) {
  if (const auto* box = std::get_if<CuboidModel>(&object.geometry)) {
    return yaw_of(so3_exp(box->r));
  }
  return 0.0;  // cylinders have no longitudinal axis
}

}  // namespace

double tour_length(const std::vector<Vec2>& targets, const std::vector<int>& order,
                   const Vec2& start) {
  double len = 0.0;
  Vec2 cur = start;
  for (int idx : order) {
    len += dist2d(cur, targets[idx]);
    cur = targets[idx];
  }
  return len;
}

std::vector<int> plan_visit_order_exact(const std::vector<Vec2>& targets,
                                        const Vec2& start) {
  const int n = static_cast<int>(targets.size());
  if (n == 0) return {};
  const int full = (1 << n) - 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dp(full + 1, std::vector<double>(n, inf));
  std::vector<std::vector<int>> parent(full + 1, std::vector<int>(n, -1));
  for (int i = 0; i < n; ++i) dp[1 << i][i] = dist2d(start, targets[i]);

  for (int mask = 1; mask <= full; ++mask) {
    for (int i = 0; i < n; ++i) {
      if (!(mask & (1 << i)) || dp[mask][i] == inf) continue;
      for (int j = 0; j < n; ++j) {
        if (mask & (1 << j)) continue;
        const int nm = mask | (1 << j);
        const double cand = dp[mask][i] + dist2d(targets[i], targets[j]);
        if (cand < dp[nm][j]) {
          dp[nm][j] = cand;
          parent[nm][j] = i;
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (dp[full][i] < dp[full][best]) best = i;
  }
  std::vector<int> order;
  int mask = full, cur = best;
  while (cur >= 0) {
    order.push_back(cur);
    const int p = parent[mask][cur];
    mask &= ~(1 << cur);
    cur = p;
  }
  std::reverse(order.begin(), order.end());
  return order;
}

std::vector<int> plan_visit_order(const std::vector<Vec2>& targets, const Vec2& start) {
  const int n = static_cast<int>(targets.size());
  if (n == 0) return {};
  if (n <= 10) return plan_visit_order_exact(targets, start);

  // Nearest neighbor, ties to the smaller id.
  std::vector<int> order;
  std::vector<bool> used(n, false);
  Vec2 cur = start;
  for (int step = 0; step < n; ++step) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double d = dist2d(cur, targets[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    used[best] = true;
    order.push_back(best);
    cur = targets[best];
  }

  // 2-opt on the open path (the far end is free).
  bool improved = true;
  int passes = 0;
  while (improved && passes++ < 100) {
    improved = false;
    for (int i = 0; i < n - 1; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const Vec2& pred = i == 0 ? start : targets[order[i - 1]];
        double before = dist2d(pred, targets[order[i]]);
        double after = dist2d(pred, targets[order[j]]);
        if (j + 1 < n) {
          before += dist2d(targets[order[j]], targets[order[j + 1]]);
          after += dist2d(targets[order[i]], targets[order[j + 1]]);
        }
        if (after < before - 1e-12) {
          std::reverse(order.begin() + i, order.begin() + j + 1);
          improved = true;
        }
      }
    }
  }
  return order;
}

bool segment_blocked(const Vec2& a, const Vec2& b,
                     const std::vector<Obstacle2D>& obstacles) {
  const Vec2 ab = b - a;
  const double len_sq = ab.squaredNorm();
  for (const auto& obs : obstacles) {
    double t = 0.0;
    if (len_sq > 0.0) t = std::clamp((obs.center - a).dot(ab) / len_sq, 0.0, 1.0);
    if ((a + t * ab - obs.center).norm() < obs.radius) return true;
  }
  return false;
}

namespace {

struct GridSample {
  double range;
  double angle;
  int key;
};

// The polar sampling lattice over the model domain; kept in one place so the
// exploration loop can tell when the set is exhausted.
std::vector<GridSample> sampling_lattice(const GridSpec& grid,
                                         const PlannerConfig& config) {
  std::vector<GridSample> out;
  const int n_angles = std::max(
      1, static_cast<int>(std::lround(2.0 * kPi / config.sample_angle_step)));
  int ri = 0;
  for (double r = grid.range_min + 0.5 * config.sample_range_step;
       r <= grid.range_max; r += config.sample_range_step, ++ri) {
    for (int ai = 0; ai < n_angles; ++ai) {
      const double a = -kPi + (ai + 0.5) * config.sample_angle_step;
      out.push_back({r, a, ri * 10000 + ai});
    }
  }
  return out;
}

ViewpointSample make_viewpoint(const ObjectState& object, double range, double angle,
                               int key, const SemanticConfidenceModel& semantic,
                               const GeometricUncertaintyModel& geometric,
                               const PlannerConfig& config) {
  const Vec2 anchor = anchor_xy(object);
  const double yaw = object_yaw(object);
  const double bearing = yaw + angle;
  ViewpointSample vp;
  vp.position = anchor + range * Vec2(std::cos(bearing), std::sin(bearing));
  vp.altitude = config.altitude;
  vp.heading = wrap_angle(bearing + kPi);
  vp.range = range;
  vp.angle = angle;
  vp.predicted_confidence = predict_confidence(semantic, range, angle);
  vp.predicted_covariance = predict_covariance(geometric, range, angle);
  vp.grid_key = key;
  return vp;
}

bool viewpoint_valid(const ViewpointSample& vp, const Vec2& anchor,
                     const std::vector<Obstacle2D>& obstacles,
                     const std::optional<Bounds>& bounds) {
  if (bounds && !bounds->contains(vp.position)) return false;
  for (const auto& obs : obstacles) {
    if ((vp.position - obs.center).norm() < obs.radius) return false;
  }
  return !segment_blocked(vp.position, anchor, obstacles);
}

}  // namespace

ViewpointSet sample_viewpoints(const ObjectState& object,
                               const SemanticConfidenceModel& semantic,
                               const GeometricUncertaintyModel& geometric,
                               const PlannerConfig& config,
                               const std::vector<Obstacle2D>& obstacles,
                               const std::optional<Bounds>& bounds,
                               const std::vector<int>& exclude) {
  const GridSpec& grid = semantic.grid;
  const ConfidenceRegion region =
      confidence_region(semantic, geometric, config.confidence_level,
                        config.loc_bound, config.dim_bound);
  ViewpointSet out;
  if (region.intersection.empty()) {
    out.note = "intersection region is empty";
    return out;
  }
  std::set<std::pair<int, int>> cells;
  for (const auto& c : region.intersection) cells.insert({c.range_bin, c.angle_bin});
  const std::set<int> skip(exclude.begin(), exclude.end());
  const Vec2 anchor = anchor_xy(object);

  std::vector<ViewpointSample> kept;
  if (config.strategy == SamplingStrategy::kUniform) {
    for (const auto& s : sampling_lattice(grid, config)) {
      if (skip.count(s.key)) continue;
      const int rb = grid.range_bin(s.range);
      if (rb < 0 || !cells.count({rb, grid.angle_bin(s.angle)})) continue;
      ViewpointSample vp =
          make_viewpoint(object, s.range, s.angle, s.key, semantic, geometric, config);
      if (vp.predicted_confidence < config.confidence_level) continue;
      if (!viewpoint_valid(vp, anchor, obstacles, bounds)) continue;
      kept.push_back(std::move(vp));
    }
  } else {
    // One sample per connected component of the region, at its area centroid.
    const int na = grid.n_angle();
    std::set<std::pair<int, int>> todo = cells;
    while (!todo.empty()) {
      std::vector<std::pair<int, int>> comp;
      std::map<std::pair<int, int>, double> unwrapped;
      std::deque<std::pair<int, int>> queue{*todo.begin()};
      unwrapped[*todo.begin()] = grid.angle_center(todo.begin()->second);
      todo.erase(todo.begin());
      while (!queue.empty()) {
        const auto cell = queue.front();
        queue.pop_front();
        comp.push_back(cell);
        const double base = unwrapped.at(cell);
        const std::pair<int, int> nb[4] = {
            {cell.first - 1, cell.second},
            {cell.first + 1, cell.second},
            {cell.first, (cell.second + 1) % na},
            {cell.first, (cell.second + na - 1) % na}};
        const double ang[4] = {base, base, base + grid.angle_step,
                               base - grid.angle_step};
        for (int k = 0; k < 4; ++k) {
          if (na == 1 && k >= 2) break;
          auto it = todo.find(nb[k]);
          if (it == todo.end()) continue;
          unwrapped[nb[k]] = ang[k];
          queue.push_back(nb[k]);
          todo.erase(it);
        }
      }
      double wsum = 0.0, rsum = 0.0, asum = 0.0;
      for (const auto& cell : comp) {
        const double w = grid.range_center(cell.first);  // polar cell area ~ r
        wsum += w;
        rsum += w * grid.range_center(cell.first);
        asum += w * unwrapped.at(cell);
      }
      double r = rsum / wsum;
      double a = wrap_angle(asum / wsum);
      if (!cells.count({grid.range_bin(r), grid.angle_bin(a)})) {
        // Centroid fell outside (non-convex component): snap to the nearest
        // member cell center.
        double best = std::numeric_limits<double>::infinity();
        std::pair<int, int> best_cell = comp.front();
        for (const auto& cell : comp) {
          const double dr = (r - grid.range_center(cell.first)) / grid.range_step;
          const double da =
              wrap_angle(a - grid.angle_center(cell.second)) / grid.angle_step;
          const double d = dr * dr + da * da;
          if (d < best) {
            best = d;
            best_cell = cell;
          }
        }
        r = grid.range_center(best_cell.first);
        a = grid.angle_center(best_cell.second);
      }
      const int key = -(static_cast<int>(kept.size()) + 1);  // synthetic cell key
      if (skip.count(key)) continue;
      ViewpointSample vp = make_viewpoint(object, r, a, key, semantic, geometric, config);
      if (!viewpoint_valid(vp, anchor, obstacles, bounds)) continue;
      kept.push_back(std::move(vp));
    }
  }

  if (kept.empty()) {
    out.note = "no reachable viewpoint in the region";
    return out;
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const ViewpointSample& a, const ViewpointSample& b) {
                     return a.predicted_confidence > b.predicted_confidence;
                   });
  if (static_cast<int>(kept.size()) > config.max_samples) {
    kept.resize(config.max_samples);
  }
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].id = static_cast<int>(i);
  out.samples = std::move(kept);
  return out;
}

std::vector<CandidatePath> enumerate_candidate_paths(int n_samples, int horizon,
                                                     int budget) {
  if (horizon < 1 || horizon > n_samples) {
    throw std::invalid_argument("path horizon must satisfy 1 <= T <= a");
  }
  long long count = 1;
  for (int k = 0; k < horizon; ++k) {
    count *= (n_samples - k);
    if (count > budget) {
      throw std::runtime_error(
          "candidate path count exceeds budget; reduce samples or horizon");
    }
  }
  std::vector<CandidatePath> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<int> current;
  std::vector<bool> used(n_samples, false);
  const std::function<void()> recurse = [&]() {
    if (static_cast<int>(current.size()) == horizon) {
      out.push_back(CandidatePath{current, 0.0, 0.0});
      return;
    }
    for (int i = 0; i < n_samples; ++i) {
      if (used[i]) continue;
      used[i] = true;
      current.push_back(i);
      recurse();
      current.pop_back();
      used[i] = false;
    }
  };
  recurse();
  return out;
}

Eigen::MatrixXd fuse_covariance(const Eigen::MatrixXd& prior,
                                const Eigen::MatrixXd& measurement) {
  if (prior.rows() != measurement.rows() || prior.cols() != measurement.cols()) {
    throw std::invalid_argument("fuse_covariance: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> la(prior), lb(measurement);
  if (la.info() != Eigen::Success || lb.info() != Eigen::Success) {
    throw std::invalid_argument("fuse_covariance: inputs must be positive definite");
  }
  const auto n = prior.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd info = la.solve(eye) + lb.solve(eye);
  Eigen::LLT<Eigen::MatrixXd> li(info);
  const Eigen::MatrixXd post = li.solve(eye);
  return 0.5 * (post + post.transpose());
}

double information_gain(const Eigen::MatrixXd& sigma_t, const CandidatePath& path,
                        const std::vector<ViewpointSample>& samples) {
  if (path.viewpoints.empty()) return 0.0;
  Eigen::MatrixXd sigma = sigma_t;
  for (int idx : path.viewpoints) {
    sigma = fuse_covariance(sigma, samples.at(idx).predicted_covariance);
  }
  return std::max(0.0, entropy(sigma_t) - entropy(sigma));
}

namespace {

void fill_path(CandidatePath& path, const Eigen::MatrixXd& sigma_t,
               const std::vector<ViewpointSample>& samples, const Vec2& start) {
  path.gain = information_gain(sigma_t, path, samples);
  double len = 0.0;
  Vec2 cur = start;
  for (int idx : path.viewpoints) {
    len += dist2d(cur, samples.at(idx).position);
    cur = samples.at(idx).position;
  }
  path.length = len;
}

}  // namespace

void evaluate_path_gains(std::vector<CandidatePath>& paths,
                         const Eigen::MatrixXd& sigma_t,
                         const std::vector<ViewpointSample>& samples,
                         const Vec2& start) {
  parallel_for(paths.size(),
               [&](std::size_t i) { fill_path(paths[i], sigma_t, samples, start); });
}

void evaluate_path_gains_reference(std::vector<CandidatePath>& paths,
                                   const Eigen::MatrixXd& sigma_t,
                                   const std::vector<ViewpointSample>& samples,
                                   const Vec2& start) {
  for (auto& path : paths) fill_path(path, sigma_t, samples, start);
}

const CandidatePath& select_path(const std::vector<CandidatePath>& candidates) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_path: no candidates");
  }
  const CandidatePath* best = &candidates.front();
  for (const auto& c : candidates) {
    if (&c == best) continue;
    if (c.gain > best->gain + 1e-9) {
      best = &c;
    } else if (std::abs(c.gain - best->gain) <= 1e-9) {
      if (c.length < best->length - 1e-12) {
        best = &c;
      } else if (std::abs(c.length - best->length) <= 1e-12 &&
                 c.viewpoints < best->viewpoints) {
        best = &c;
      }
    }
  }
  return *best;
}

bool should_stop(double current_entropy, double entropy_threshold,
                 int samples_remaining) {
  return current_entropy < entropy_threshold || samples_remaining == 0;
}

namespace {

// Closest collision-free view along the current approach bearing; used when
// the sampled region is unreachable.
std::optional<ViewpointSample> fallback_viewpoint(
    const ObjectState& object, const Vec2& robot,
    const SemanticConfidenceModel& semantic, const GeometricUncertaintyModel& geometric,
    const PlannerConfig& config, const std::vector<Obstacle2D>& obstacles,
    const std::optional<Bounds>& bounds) {
  const Vec2 anchor = anchor_xy(object);
  Vec2 dir = robot - anchor;
  if (dir.norm() < 1e-9) dir = Vec2(1.0, 0.0);
  dir.normalize();
  const double bearing = std::atan2(dir.y(), dir.x());
  const double angle = wrap_angle(bearing - object_yaw(object));
  const GridSpec& grid = semantic.grid;
  for (int i = 0; i < grid.n_range(); ++i) {
    const double r = grid.range_center(i);
    ViewpointSample vp = make_viewpoint(object, r, angle, -900000 - i, semantic,
                                        geometric, config);
    if (viewpoint_valid(vp, anchor, obstacles, bounds)) return vp;
  }
  return std::nullopt;
}

}  // namespace

ExplorationLog run_object_exploration(ExplorationEnv& env, int landmark_id,
                                      const SemanticConfidenceModel& semantic,
                                      const GeometricUncertaintyModel& geometric,
                                      const PlannerConfig& config) {
  ExplorationLog log;
  log.landmark_id = landmark_id;

  Eigen::MatrixXd sigma = env.landmark_planning_cov(landmark_id);
  double h = entropy(sigma);
  std::vector<int> visited;
  int remaining = std::numeric_limits<int>::max();

  for (int round = 0; round < config.max_rounds; ++round) {
    if (should_stop(h, config.entropy_threshold, remaining)) break;

    const ObjectState state = env.landmark_state(landmark_id);
    const auto obstacles = env.obstacles_excluding(landmark_id);
    const auto bounds = env.world_bounds();
    ViewpointSet set = sample_viewpoints(state, semantic, geometric, config, obstacles,
                                         bounds, visited);
    if (set.samples.empty()) {
      if (!visited.empty()) break;  // sample set exhausted
      const auto fb = fallback_viewpoint(state, env.robot_position(), semantic,
                                         geometric, config, obstacles, bounds);
      log.note = set.note.empty() ? "fallback" : set.note;
      if (!fb) {
        log.note += "; no reachable fallback view";
        break;
      }
      ExplorationRound rec;
      rec.round = round;
      rec.entropy_before = h;
      rec.fallback = true;
      rec.n_candidates = 0;
      const Vec2 start = env.robot_position();
      rec.path_length = dist2d(start, fb->position);
      CandidatePath single{{0}, 0.0, rec.path_length};
      rec.gain_predicted =
          information_gain(sigma, single, std::vector<ViewpointSample>{*fb});
      env.fly_and_observe(*fb, landmark_id);
      sigma = env.landmark_planning_cov(landmark_id);
      rec.entropy_after = entropy(sigma);
      rec.gain_realized = rec.entropy_before - rec.entropy_after;
      rec.flown.push_back(*fb);
      h = rec.entropy_after;
      log.rounds.push_back(std::move(rec));
      break;
    }

    remaining = static_cast<int>(set.samples.size());
    const int horizon = std::min(config.horizon, remaining);
    auto candidates =
        enumerate_candidate_paths(remaining, horizon, config.path_budget);
    evaluate_path_gains(candidates, sigma, set.samples, env.robot_position());
    const CandidatePath& best = select_path(candidates);

    ExplorationRound rec;
    rec.round = round;
    rec.entropy_before = h;
    rec.gain_predicted = best.gain;
    rec.path_length = best.length;
    rec.n_candidates = static_cast<int>(candidates.size());
    for (int idx : best.viewpoints) {
      const ViewpointSample& vp = set.samples[idx];
      env.fly_and_observe(vp, landmark_id);
      visited.push_back(vp.grid_key);
      rec.flown.push_back(vp);
    }
    sigma = env.landmark_planning_cov(landmark_id);
    rec.entropy_after = entropy(sigma);
    rec.gain_realized = rec.entropy_before - rec.entropy_after;
    h = rec.entropy_after;
    log.rounds.push_back(std::move(rec));
    remaining -= horizon;
  }

  log.final_entropy = h;
  log.final_confidence = env.landmark_state(landmark_id).confidence;
  log.constraint_met = log.final_confidence >= config.confidence_level;
  return log;
}

void save_planner_log(const std::vector<ExplorationLog>& logs,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write planner log: " + path);
  out << "object_id,round,entropy_before,entropy_after,gain_predicted,"
         "gain_realized,path_length_m,n_candidates\n";
  char buf[256];
  for (const auto& log : logs) {
    for (const auto& r : log.rounds) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%d\n",
                    log.landmark_id, r.round, r.entropy_before, r.entropy_after,
                    r.gain_predicted, r.gain_realized, r.path_length,
                    r.n_candidates);
      out << buf;
    }
  }
}

}  // namespace msm
