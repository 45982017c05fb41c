#include "modqp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace modqp {

MotionGoal GoalTrajectory::sample(double t) const {
  if (waypoints.empty()) throw std::logic_error("empty goal trajectory");
  if (destination_only() || t >= waypoints.back().first) {
    return {waypoints.back().second, Vec3::Zero()};
  }
  if (t <= waypoints.front().first) {
    return {waypoints.front().second, Vec3::Zero()};
  }
  for (size_t i = 1; i < waypoints.size(); ++i) {
    if (t <= waypoints[i].first) {
      const auto& [t0, p0] = waypoints[i - 1];
      const auto& [t1, p1] = waypoints[i];
      const Vec3 v = (p1 - p0) / (t1 - t0);
      return {p0 + v * (t - t0), v};
    }
  }
  return {waypoints.back().second, Vec3::Zero()};
}

std::vector<ObstacleSphere> Scenario::all_spheres() const {
  std::vector<ObstacleSphere> out = raw_spheres;
  for (size_t i = 0; i < obstacle_boxes.size(); ++i) {
    auto gen = generate_spheres(obstacle_boxes[i], box_levels[i]);
    out.insert(out.end(), gen.begin(), gen.end());
  }
  return out;
}

bool integrate(VecX* theta, const VecX& theta_dot, double dt,
               const std::vector<JointLimits>& limits) {
  if (theta->size() != theta_dot.size()) {
    throw std::invalid_argument("integrate: dimension mismatch");
  }
  bool clamped = false;
  for (int k = 0; k < theta->size(); ++k) {
    double v = (*theta)[k] + theta_dot[k] * dt;
    const auto& lim = limits[static_cast<size_t>(k)];
    if (v < lim.pos_min) {
      v = lim.pos_min;
      clamped = true;
    } else if (v > lim.pos_max) {
      v = lim.pos_max;
      clamped = true;
    }
    (*theta)[k] = v;
  }
  return clamped;
}

Planner::Planner(const Scenario& scenario)
    : scenario_(scenario), gk_(KinematicsGraph::Build(scenario.config, scenario.library)) {
  if (scenario.goal_frames.size() != scenario.goal_trajectories.size() ||
      scenario.goal_frames.size() != scenario.tuning.gains.size()) {
    throw std::invalid_argument("scenario: goal frames, trajectories, and gains must align");
  }
  for (const auto& f : scenario.goal_frames) {
    if (!gk_.has_frame(f)) throw std::invalid_argument("goal frame '" + f + "' does not exist");
    goal_chains_.push_back(gk_.chain(f));
  }
  for (const auto& tr : scenario.goal_trajectories) {
    for (size_t i = 1; i < tr.waypoints.size(); ++i) {
      if (!(tr.waypoints[i - 1].first < tr.waypoints[i].first)) {
        throw std::invalid_argument("waypoint times must be strictly increasing");
      }
    }
  }

  // Global joint vector: union of goal-chain joints, BFS module order,
  // descriptor joint order within a module.
  for (const auto& info : gk_.all_joints()) {
    bool on_goal_chain = false;
    for (const auto& chain : goal_chains_) {
      for (const auto& j : chain.joints()) {
        if (j == info.ref) {
          on_goal_chain = true;
          break;
        }
      }
      if (on_goal_chain) break;
    }
    if (on_goal_chain) {
      global_index_[info.ref] = static_cast<int>(global_joints_.size());
      global_joints_.push_back(info.ref);
      limits_.push_back({info.pos_min, info.pos_max, info.vel_min, info.vel_max});
      joint_names_.push_back(info.ref.str());
    }
  }

  for (const auto& chain : goal_chains_) {
    std::vector<int> cols;
    for (const auto& j : chain.joints()) cols.push_back(global_index_.at(j));
    goal_cols_.push_back(std::move(cols));
  }
  for (const auto& m : gk_.modules()) {
    body_chains_.push_back(gk_.chain(m.id + ".M"));
    std::vector<int> cols;
    for (const auto& j : body_chains_.back().joints()) {
      auto it = global_index_.find(j);
      cols.push_back(it == global_index_.end() ? -1 : it->second);
    }
    body_cols_.push_back(std::move(cols));
  }

  spheres_ = scenario.all_spheres();

  theta_ = VecX::Zero(static_cast<int>(global_joints_.size()));
  for (size_t k = 0; k < global_joints_.size(); ++k) {
    auto it = scenario.initial_theta.find(global_joints_[k]);
    if (it != scenario.initial_theta.end()) theta_[static_cast<int>(k)] = it->second;
  }
  set_theta(theta_);
}

void Planner::set_theta(const VecX& theta) {
  theta_ = theta;
  std::map<JointRef, double> by_ref;
  for (size_t k = 0; k < global_joints_.size(); ++k) {
    by_ref[global_joints_[k]] = theta_[static_cast<int>(k)];
  }
  for (auto& c : goal_chains_) c.set_theta(by_ref);
  for (auto& c : body_chains_) c.set_theta(by_ref);
}

Vec3 Planner::goal_position(size_t goal) const { return goal_chains_[goal].position(); }

AssembleInputs Planner::make_inputs(double t) {
  AssembleInputs in;
  in.theta = theta_;
  in.limits = limits_;
  in.joint_names = joint_names_;
  for (size_t i = 0; i < goal_chains_.size(); ++i) {
    in.chains.push_back({&goal_chains_[i], goal_cols_[i]});
    in.goals.push_back(scenario_.goal_trajectories[i].sample(t));
  }
  if (!scenario_.boundary.faces.empty()) in.boundary = &scenario_.boundary;

  const int n = static_cast<int>(global_joints_.size());
  last_kept_counts_.clear();
  for (size_t b = 0; b < body_chains_.size(); ++b) {
    const auto& m = gk_.modules()[b];
    ModuleBodyState body;
    body.module_id = m.id;
    body.p = body_chains_[b].position();
    body.radius = gk_.descriptor(m.id).body_radius;
    body.J_global = MatX::Zero(6, n);
    const MatX& J = body_chains_[b].jacobian();
    for (int c = 0; c < J.cols(); ++c) {
      const int g = body_cols_[b][static_cast<size_t>(c)];
      if (g >= 0) body.J_global.col(g) = J.col(c);
    }
    auto it = prev_speed_.find(m.id);
    body.prev_speed = it == prev_speed_.end() ? 0.0 : it->second;

    // Split spheres into contacts and refinement candidates; the
    // refined set is recomputed from the current state, never cached.
    std::vector<ObstacleSphere> candidates;
    for (const auto& s : spheres_) {
      const double dist = (s.center - body.p).norm() - s.radius - body.radius;
      if (dist <= scenario_.tuning.contact_eps) {
        body.contacts.push_back(s);
      } else {
        candidates.push_back(s);
      }
    }
    RefineResult refined = refine_spheres(body.p, body.radius, candidates);
    body.kept = std::move(refined.kept);
    body.planes = std::move(refined.planes);
    last_kept_counts_.push_back(static_cast<int>(body.kept.size() + body.contacts.size()));
    in.bodies.push_back(std::move(body));
  }
  return in;
}

StepSolution Planner::plan_step(double t) {
  last_program_ = assemble(make_inputs(t), scenario_.tuning);
  return solve(last_program_);
}

RunResult Planner::run(std::ostream* publish_stream,
                       const std::function<void(int, const StepProgram&)>& on_step) {
  RunResult result;
  const double dt = scenario_.tuning.dt;
  double t = 0.0;
  for (int step = 0; step < scenario_.step_budget; ++step) {
    double err = 0.0;
    for (size_t i = 0; i < goal_chains_.size(); ++i) {
      err += (goal_position(i) - scenario_.goal_trajectories[i].final_position()).norm();
    }
    if (err < scenario_.tuning.epsilon) {
      // Terminal record: the converged state with a zero command.
      make_inputs(t);
      StepRecord rec;
      rec.t = t;
      rec.theta = theta_;
      rec.theta_dot = VecX::Zero(theta_.size());
      for (size_t i = 0; i < goal_chains_.size(); ++i) {
        rec.goal_positions.push_back(goal_position(i));
      }
      for (const auto& c : body_chains_) rec.module_positions.push_back(c.position());
      rec.kept_counts = last_kept_counts_;
      result.log.records.push_back(std::move(rec));
      result.success = true;
      return result;
    }

    StepSolution sol;
    try {
      sol = plan_step(t);
    } catch (const std::exception& e) {
      result.failure = e.what();
      return result;
    }
    if (on_step) on_step(step, last_program_);

    StepRecord rec;
    rec.t = t;
    rec.theta = theta_;
    rec.theta_dot = sol.theta_dot;
    rec.status = sol.status;
    rec.solve_time = sol.solve_time;
    rec.kkt_residual = sol.kkt_residual;
    for (size_t i = 0; i < goal_chains_.size(); ++i) rec.goal_positions.push_back(goal_position(i));
    for (const auto& c : body_chains_) rec.module_positions.push_back(c.position());
    rec.kept_counts = last_kept_counts_;
    if (last_program_.G.rows() > 0) {
      const VecX margins = last_program_.h - last_program_.G * sol.theta_dot;
      rec.margins.assign(margins.data(), margins.data() + margins.size());
      rec.margin_kinds = last_program_.ineq_kinds;
    }

    if (sol.status != SolveStatus::kOptimal) {
      result.failure = "solver returned " + to_string(sol.status) +
                       (sol.certificate.empty() ? "" : ": " + sol.certificate);
      result.log.records.push_back(std::move(rec));
      return result;
    }

    if (publish_stream != nullptr) {
      std::ostringstream line;
      line.setf(std::ios::fixed);
      line.precision(9);
      line << t;
      for (int k = 0; k < sol.theta_dot.size(); ++k) line << ", " << sol.theta_dot[k];
      *publish_stream << line.str() << "\n";
    }

    // Record module speeds for the next step's repulsive bounds.
    for (size_t b = 0; b < body_chains_.size(); ++b) {
      const MatX& J = body_chains_[b].jacobian();
      VecX local_dot(J.cols());
      for (int c = 0; c < J.cols(); ++c) {
        const int g = body_cols_[b][static_cast<size_t>(c)];
        local_dot[c] = g >= 0 ? sol.theta_dot[g] : 0.0;
      }
      prev_speed_[gk_.modules()[b].id] =
          frame_point_velocity(J, local_dot, body_chains_[b].position()).norm();
    }

    VecX next = theta_;
    integrate(&next, sol.theta_dot, dt, limits_);
    set_theta(next);
    t += dt;
    result.log.records.push_back(std::move(rec));
  }
  result.budget_exhausted = true;
  return result;
}

}  // namespace modqp
