#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modqp/environment.hpp"
#include "modqp/kinematics.hpp"
#include "modqp/qp.hpp"

namespace modqp {

/// Time-parameterized goal: either a single destination (held with
/// v~ = 0) or piecewise-linear waypoints with strictly increasing times.
struct GoalTrajectory {
  std::vector<std::pair<double, Vec3>> waypoints;

  bool destination_only() const { return waypoints.size() == 1; }
  const Vec3& final_position() const { return waypoints.back().second; }
  /// (p~, v~) at time t. Holds the final waypoint with v~ = 0 after T.
  MotionGoal sample(double t) const;
};

struct Scenario {
  ConfigurationGraph config;
  ModuleLibrary library;
  std::vector<std::string> goal_frames;
  std::vector<GoalTrajectory> goal_trajectories;
  BoundaryPolyhedron boundary;  // empty faces = unbounded workspace
  std::vector<OrientedBox> obstacle_boxes;
  std::vector<int> box_levels;
  std::vector<ObstacleSphere> raw_spheres;
  TuningConfig tuning;
  std::map<JointRef, double> initial_theta;
  int step_budget = 20000;

  /// All obstacle spheres: generated box covers plus raw spheres.
  std::vector<ObstacleSphere> all_spheres() const;
};

struct StepRecord {
  double t = 0.0;
  VecX theta;
  VecX theta_dot;
  std::vector<Vec3> goal_positions;
  std::vector<Vec3> module_positions;  // BFS module order
  std::vector<double> margins;         // h - G x per inequality row
  std::vector<RowKind> margin_kinds;
  std::vector<int> kept_counts;  // per module, BFS order
  SolveStatus status = SolveStatus::kOptimal;
  double solve_time = 0.0;
  double kkt_residual = 0.0;
};

struct TrajectoryLog {
  std::vector<StepRecord> records;
};

struct RunResult {
  bool success = false;
  bool budget_exhausted = false;
  TrajectoryLog log;
  std::string failure;
};

/// One-step Euler integration with a position-limit clamp. The clamp is
/// expected to be inactive when the position-limit bounds held; returns
/// true if it had to bind.
bool integrate(VecX* theta, const VecX& theta_dot, double dt, const std::vector<JointLimits>& limits);

/// Algorithm state for one scenario run: kinematics graph, goal chains,
/// the global joint vector, and the per-step loop.
class Planner {
 public:
  explicit Planner(const Scenario& scenario);

  const KinematicsGraph& graph() const { return gk_; }
  const std::vector<JointRef>& global_joints() const { return global_joints_; }
  const VecX& theta() const { return theta_; }
  void set_theta(const VecX& theta);
  Vec3 goal_position(size_t goal) const;
  const ChainState& goal_chain(size_t goal) const { return goal_chains_[goal]; }

  /// Assembles (recomputing boundary directions and refined obstacle
  /// sets from the current state) and solves the step QP.
  StepSolution plan_step(double t);

  /// The program assembled by the last plan_step call.
  const StepProgram& last_program() const { return last_program_; }
  const std::vector<int>& last_kept_counts() const { return last_kept_counts_; }

  /// Runs the loop until the summed goal distance drops below epsilon,
  /// a step fails, or the step budget runs out. If `publish_stream` is
  /// given, writes one `t, dθ₁..dθₙ` line per step. `on_step` sees the
  /// assembled program of each solved step (for offline QP dumps).
  RunResult run(std::ostream* publish_stream = nullptr,
                const std::function<void(int, const StepProgram&)>& on_step = {});

 private:
  AssembleInputs make_inputs(double t);

  const Scenario& scenario_;
  KinematicsGraph gk_;
  std::vector<ChainState> goal_chains_;
  std::vector<ChainState> body_chains_;  // one per module, BFS order
  std::vector<JointRef> global_joints_;
  std::map<JointRef, int> global_index_;
  std::vector<JointLimits> limits_;
  std::vector<std::string> joint_names_;
  std::vector<std::vector<int>> goal_cols_;  // chain col -> global col
  std::vector<std::vector<int>> body_cols_;
  std::vector<ObstacleSphere> spheres_;
  VecX theta_;
  std::map<std::string, double> prev_speed_;
  StepProgram last_program_;
  std::vector<int> last_kept_counts_;
};

}  // namespace modqp
