#pragma once

#include <string>
#include <vector>

#include "modqp/environment.hpp"
#include "modqp/kinematics.hpp"
#include "modqp/lie.hpp"

namespace modqp {

enum class RowKind {
  kControlGoal,
  kJointPosLimit,
  kJointVelLimit,
  kBoundary,
  kObstacle,
  kRepulsive,
};

std::string to_string(RowKind k);

enum class ControlMode { kHardEquality, kSequentialSoft };

/// The assembled QP for one control step:
///   minimize 1/2 x' H x + f' x
///   s.t. A x = b, G x <= h, lo <= x <= hi.
struct StepProgram {
  int n = 0;
  MatX H;
  VecX f;
  MatX A;
  VecX b;
  std::vector<RowKind> eq_kinds;
  MatX G;
  VecX h;
  std::vector<RowKind> ineq_kinds;
  VecX lo, hi;
};

enum class SolveStatus { kOptimal, kInfeasible, kMaxIterations };

std::string to_string(SolveStatus s);

struct StepSolution {
  VecX theta_dot;
  SolveStatus status = SolveStatus::kInfeasible;
  double kkt_residual = 0.0;
  std::vector<int> active_set;  // inequality rows active at the solution
  double solve_time = 0.0;      // seconds
  // Multipliers for the independent KKT recheck.
  VecX eq_mult;
  VecX ineq_mult;
  VecX lo_mult, hi_mult;
  std::string certificate;  // populated when status == kInfeasible
};

struct TuningConfig {
  std::vector<Vec3> gains;  // diagonal of K per goal, 1/s
  double lambda = 1e3;
  double mu = 10.0;
  double gamma_max = 0.1;     // m/s, magnitude cap for the repulsive bound
  double d_min = 0.12;        // m, proximity threshold for penalties
  double contact_eps = 0.005; // m, penetration-onset threshold
  double dt = 0.05;           // s
  double epsilon = 1e-3;      // m, termination tolerance
  ControlMode mode = ControlMode::kSequentialSoft;
};

/// A chain plus the mapping of its columns into the global joint vector.
struct IndexedChain {
  const ChainState* chain = nullptr;
  std::vector<int> global_cols;
};

struct MotionGoal {
  Vec3 position;  // p~
  Vec3 velocity;  // v~
};

/// Stacked control rows for all goals: per goal, 3 rows of
/// point_velocity_map(p_F) * J scattered to global columns, and
/// rhs = v~ + K (p~ - p_F).
void control_rows(const std::vector<IndexedChain>& chains, const std::vector<MotionGoal>& goals,
                  const std::vector<Vec3>& gains, int n_global, MatX* M, VecX* rhs);

struct JointLimits {
  double pos_min, pos_max, vel_min, vel_max;
};

/// Per-variable velocity box combining velocity limits with the
/// position-limit rows divided by dt. Throws std::runtime_error naming
/// the joint when a coordinate is already out of position range.
void limit_bounds(const VecX& theta, const std::vector<JointLimits>& limits,
                  const std::vector<std::string>& joint_names, double dt, VecX* lo, VecX* hi);

/// Per-module-body data the assembler consumes; the planner recomputes
/// refined obstacle sets and contact lists from the current state every
/// step.
struct ModuleBodyState {
  std::string module_id;
  Vec3 p;          // p_Mi
  double radius = 0.0;
  MatX J_global;   // 6 x n, global columns
  std::vector<ObstacleSphere> kept;      // refined, excluding contacts
  std::vector<ObstaclePlane> planes;     // aligned with kept
  std::vector<ObstacleSphere> contacts;  // within contact_eps
  double prev_speed = 0.0;  // ||v_Mi|| at the previous step
};

struct AssembleInputs {
  std::vector<IndexedChain> chains;
  std::vector<MotionGoal> goals;
  std::vector<ModuleBodyState> bodies;
  const BoundaryPolyhedron* boundary = nullptr;  // optional
  VecX theta;  // global joint values
  std::vector<JointLimits> limits;
  std::vector<std::string> joint_names;
};

StepProgram assemble(const AssembleInputs& in, const TuningConfig& tuning);

StepSolution solve(const StepProgram& qp, double tol = 1e-9, int max_iter = 200);

/// Independent KKT residual from the program and a returned solution:
/// max of stationarity, primal feasibility, dual feasibility, and
/// complementary slackness violations.
double kkt_residual(const StepProgram& qp, const StepSolution& sol);

}  // namespace modqp
