#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "modqp/planner.hpp"
#include "modqp/scenario_io.hpp"

using namespace modqp;
namespace fs = std::filesystem;

namespace {

Scenario load(const std::string& name) {
  return load_scenario(fs::path(MODQP_DATA_DIR) / "scenarios" / name);
}

double goal_error(const Planner& p, const Scenario& sc) {
  double err = 0.0;
  for (size_t i = 0; i < sc.goal_frames.size(); ++i) {
    err += (p.goal_position(i) - sc.goal_trajectories[i].final_position()).norm();
  }
  return err;
}

std::vector<JointLimits> planner_limits(const Planner& p) {
  std::vector<JointLimits> lims;
  for (const auto& j : p.global_joints()) {
    const JointInfo& info = p.graph().joint_info(j);
    lims.push_back({info.pos_min, info.pos_max, info.vel_min, info.vel_max});
  }
  return lims;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("goal trajectory sampling") {
  GoalTrajectory tr;
  tr.waypoints = {{0.0, Vec3(0, 0, 0)}, {2.0, Vec3(1, 0, 0)}};
  CHECK((tr.sample(1.0).position - Vec3(0.5, 0, 0)).norm() < 1e-15);
  CHECK((tr.sample(1.0).velocity - Vec3(0.5, 0, 0)).norm() < 1e-15);
  CHECK(tr.sample(5.0).velocity.norm() == 0.0);
  CHECK((tr.sample(5.0).position - Vec3(1, 0, 0)).norm() == 0.0);
  CHECK(tr.sample(-1.0).velocity.norm() == 0.0);

  GoalTrajectory dest;
  dest.waypoints = {{0.0, Vec3(1, 2, 3)}};
  CHECK(dest.destination_only());
  CHECK((dest.sample(7.0).position - Vec3(1, 2, 3)).norm() == 0.0);
}

TEST_CASE("integrate clamps at position limits") {
  VecX theta(2);
  theta << 1.5, 0.0;
  VecX rate(2);
  rate << 1.0, -0.5;
  std::vector<JointLimits> lims{{-M_PI / 2, M_PI / 2, -3, 3}, {-M_PI / 2, M_PI / 2, -3, 3}};
  CHECK(integrate(&theta, rate, 0.2, lims));  // joint 0 would pass pi/2
  CHECK(theta[0] == doctest::Approx(M_PI / 2));
  CHECK(theta[1] == doctest::Approx(-0.1));
  CHECK_THROWS(integrate(&theta, VecX::Zero(3), 0.1, lims));
}

TEST_CASE("goal at the current tip is a fixed point") {
  Scenario sc = load("ckbot5_sphere.scn");
  Planner probe(sc);
  sc.goal_trajectories[0].waypoints = {{0.0, probe.goal_position(0)}};
  Planner p(sc);
  const RunResult result = p.run();
  CHECK(result.success);
  CHECK(result.log.records.size() <= 1);
  CHECK((p.theta() - probe.theta()).norm() == 0.0);
}

TEST_CASE("hard step without obstacles is the pseudoinverse step") {
  Scenario sc = load("smores4_dest.scn");
  REQUIRE(sc.tuning.mode == ControlMode::kHardEquality);
  Planner p(sc);
  const StepSolution sol = p.plan_step(0.0);
  REQUIRE(sol.status == SolveStatus::kOptimal);

  const ChainState& chain = p.goal_chain(0);
  const MatX M = point_velocity_map(chain.position()) * chain.jacobian();
  const Vec3 rhs = sc.tuning.gains[0].asDiagonal() *
                   (sc.goal_trajectories[0].final_position() - chain.position());
  const VecX expected = M.transpose() * (M * M.transpose()).ldlt().solve(VecX(rhs));
  CHECK((sol.theta_dot - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("tracking error contracts at roughly 1 - K dt") {
  Scenario sc = load("ckbot5_sphere.scn");
  sc.tuning.mode = ControlMode::kHardEquality;
  sc.raw_spheres.clear();  // free-space contraction
  // Keep the demand modest so the velocity bounds stay inactive; the
  // exact contraction factor only holds while tracking is unclipped.
  Planner probe(sc);
  sc.goal_trajectories[0].waypoints = {{0.0, probe.goal_position(0) + Vec3(0, 0.03, -0.007)}};
  Planner p(sc);
  const Vec3 dest = sc.goal_trajectories[0].final_position();
  double t = 0.0;
  double prev = (p.goal_position(0) - dest).norm();
  const double k = sc.tuning.gains[0].x();
  const auto lims = planner_limits(p);
  for (int step = 0; step < 10; ++step) {
    const StepSolution sol = p.plan_step(t);
    REQUIRE(sol.status == SolveStatus::kOptimal);
    VecX next = p.theta();
    integrate(&next, sol.theta_dot, sc.tuning.dt, lims);
    p.set_theta(next);
    t += sc.tuning.dt;
    const double err = (p.goal_position(0) - dest).norm();
    const double expected = (1.0 - k * sc.tuning.dt) * prev;
    CHECK(err == doctest::Approx(expected).epsilon(0.2));
    prev = err;
  }
}

TEST_CASE("velocity commands ride but never break descriptor limits") {
  Scenario sc = load("ckbot4_boundary.scn");
  // An aggressive gain and a distant destination demand speeds beyond
  // the +-3 rad/s limit; soft mode lets tracking yield to the bounds.
  sc.tuning.gains[0] = Vec3(40, 40, 40);
  sc.tuning.mode = ControlMode::kSequentialSoft;
  sc.goal_trajectories[0].waypoints = {{0.0, Vec3(0, 0.09, 0.21)}};
  Planner p(sc);
  bool saturated = false;
  double t = 0.0;
  const auto lims = planner_limits(p);
  for (int step = 0; step < 12; ++step) {
    const StepSolution sol = p.plan_step(t);
    if (sol.status != SolveStatus::kOptimal) break;  // may become infeasible; fine
    for (int kk = 0; kk < sol.theta_dot.size(); ++kk) {
      CHECK(std::abs(sol.theta_dot[kk]) <= 3.0 + 1e-9);
      if (std::abs(sol.theta_dot[kk]) > 3.0 - 1e-6) saturated = true;
    }
    VecX next = p.theta();
    integrate(&next, sol.theta_dot, sc.tuning.dt, lims);
    p.set_theta(next);
    t += sc.tuning.dt;
  }
  CHECK(saturated);
}

TEST_CASE("blocked goal exhausts the step budget") {
  Scenario sc = load("ckbot5_sphere.scn");
  // Goal far outside the reachable sphere of a 0.30 m chain.
  sc.goal_trajectories[0].waypoints = {{0.0, Vec3(0, 0.8, 0.1)}};
  sc.step_budget = 120;
  Planner p(sc);
  const RunResult result = p.run();
  CHECK(!result.success);
  CHECK(result.budget_exhausted);
  CHECK(result.log.records.size() == 120);
}

TEST_CASE("refined sets are recomputed as the robot moves") {
  Scenario sc = load("wholebody14.scn");
  Planner p(sc);
  const RunResult result = p.run();
  REQUIRE(result.success);
  // If pruning were cached from step 0, every kept count would be
  // constant across the run. The arms sweep past the boxes, so counts
  // must change.
  bool changed = false;
  const auto& first = result.log.records.front().kept_counts;
  for (const auto& rec : result.log.records) {
    if (rec.kept_counts != first) changed = true;
  }
  CHECK(changed);
}

TEST_CASE("per-step margins stay nonnegative within solver tolerance") {
  Scenario sc = load("ckbot5_sphere.scn");
  Planner p(sc);
  const RunResult result = p.run();
  REQUIRE(result.success);
  for (const auto& rec : result.log.records) {
    for (double m : rec.margins) CHECK(m >= -1e-8);
    CHECK(rec.kkt_residual <= 1e-7);
  }
}

TEST_CASE("runs are deterministic byte for byte") {
  const Scenario sc = load("branch9_dual.scn");
  auto run_once = [&](const fs::path& dir) {
    fs::create_directories(dir);
    Planner p(sc);
    std::ofstream publish(dir / "publish.txt");
    const RunResult result = p.run(&publish);
    REQUIRE(result.success);
    write_trajectory_csv(dir / "trajectory.csv", result, p.global_joints(), sc.goal_frames,
                         p.graph().modules());
  };
  const fs::path a = fs::temp_directory_path() / "modqp_det_a";
  const fs::path b = fs::temp_directory_path() / "modqp_det_b";
  run_once(a);
  run_once(b);
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  CHECK(slurp(a / "publish.txt") == slurp(b / "publish.txt"));
  CHECK(!slurp(a / "trajectory.csv").empty());
}
