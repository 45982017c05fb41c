// Acceptance suite: one pass/fail line per criterion, nonzero exit on
// any failure. Each criterion is independent and self-timed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "modqp/planner.hpp"
#include "modqp/scenario_io.hpp"

using namespace modqp;
namespace fs = std::filesystem;

namespace {

std::mt19937 rng(612);

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario load(const std::string& name) {
  return load_scenario(fs::path(MODQP_DATA_DIR) / "scenarios" / name);
}

const std::vector<std::string> kScenarios{"ckbot4_boundary.scn", "ckbot5_sphere.scn",
                                          "smores4_dest.scn", "branch9_dual.scn",
                                          "wholebody14.scn"};

// ---------------------------------------------------------------- 1
Outcome jacobian_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModuleLibrary lib = load_module_library(MODQP_DATA_DIR "/modules");
  const std::vector<std::string> pool{"ckbot_ubar", "smores_ep", "ckbot_cr"};
  std::uniform_int_distribution<int> pick(0, 2), len(3, 8), cs(0, 3);
  std::uniform_real_distribution<double> th(-1.2, 1.2);

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int L = len(rng);
    ConfigurationGraph cfg;
    for (int i = 0; i < L; ++i) {
      cfg.modules.push_back({"m" + std::to_string(i + 1), pool[static_cast<size_t>(pick(rng))]});
    }
    for (int i = 0; i + 1 < L; ++i) {
      cfg.connections.push_back(
          {"m" + std::to_string(i + 1), "T", "m" + std::to_string(i + 2), "B", cs(rng)});
    }
    cfg.base = {"m1", "B", Transform{rot_x(M_PI), Vec3::Zero()}};
    const KinematicsGraph gk = KinematicsGraph::Build(cfg, lib);
    const std::string tip_frame = "m" + std::to_string(L) + ".T";
    ChainState tip = gk.chain(tip_frame);
    VecX theta(tip.joint_count());
    for (int k = 0; k < theta.size(); ++k) {
      const JointInfo& info = gk.joint_info(tip.joints()[static_cast<size_t>(k)]);
      theta[k] = std::clamp(th(rng), info.pos_min + 0.05, info.pos_max - 0.05);
    }
    tip.set_theta(theta);

    const double h = 1e-6;
    auto fd_spatial = [&](ChainState& chain, int k) {
      VecX tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      // The body chains share the tip's joint ordering prefix; map by ref.
      std::map<JointRef, double> mp, mm;
      for (int q = 0; q < theta.size(); ++q) {
        mp[tip.joints()[static_cast<size_t>(q)]] = tp[q];
        mm[tip.joints()[static_cast<size_t>(q)]] = tm[q];
      }
      chain.set_theta(mp);
      const Mat4 gp = chain.transform().matrix();
      chain.set_theta(mm);
      const Mat4 gm = chain.transform().matrix();
      std::map<JointRef, double> mc;
      for (int q = 0; q < theta.size(); ++q) mc[tip.joints()[static_cast<size_t>(q)]] = theta[q];
      chain.set_theta(mc);
      const Mat4 dg = (gp - gm) / (2.0 * h);
      return vee(dg * chain.transform().matrix().inverse()).vector();
    };

    // Chain Jacobian columns.
    const MatX& J = tip.jacobian();
    for (int k = 0; k < tip.joint_count(); ++k) {
      const Vec6 fd = fd_spatial(tip, k);
      worst = std::max(worst, (J.col(k) - fd).norm() / std::max(1.0, fd.norm()));
    }

    // Module Jacobians for two bodies per configuration: velocity of
    // the body origin under each chain joint.
    for (int b : {1 + trial % L, L}) {
      const std::string id = "m" + std::to_string(b);
      const MatX Jm = tip.module_jacobian(id);
      ChainState body = gk.chain(id + ".M");
      std::map<JointRef, double> cur;
      for (int q = 0; q < theta.size(); ++q) cur[tip.joints()[static_cast<size_t>(q)]] = theta[q];
      body.set_theta(cur);
      const Vec3 p0 = body.position();
      for (int k = 0; k < tip.joint_count(); ++k) {
        std::map<JointRef, double> mp = cur, mm = cur;
        mp[tip.joints()[static_cast<size_t>(k)]] += h;
        mm[tip.joints()[static_cast<size_t>(k)]] -= h;
        body.set_theta(mp);
        const Vec3 pp = body.position();
        body.set_theta(mm);
        const Vec3 pm = body.position();
        body.set_theta(cur);
        const Vec3 fd = (pp - pm) / (2.0 * h);
        VecX e = VecX::Zero(theta.size());
        e[k] = 1.0;
        const Vec3 pred = point_velocity_map(p0) * Jm * e;
        worst = std::max(worst, (pred - fd).norm() / std::max(1.0, fd.norm()));
      }
    }
  }
  const double dt = seconds_since(t0);
  std::ostringstream oss;
  oss << "worst relative error " << worst << ", " << dt << " s";
  return {worst < 1e-6 && dt < 10.0, oss.str()};
}

// ---------------------------------------------------------------- 2
std::optional<VecX> brute_force(const StepProgram& qp) {
  struct Row {
    VecX a;
    double b;
  };
  std::vector<Row> ineqs;
  for (int j = 0; j < qp.G.rows(); ++j) ineqs.push_back({qp.G.row(j).transpose(), qp.h[j]});
  for (int k = 0; k < qp.n; ++k) {
    if (std::isfinite(qp.hi[k])) {
      VecX e = VecX::Zero(qp.n);
      e[k] = 1.0;
      ineqs.push_back({e, qp.hi[k]});
    }
    if (std::isfinite(qp.lo[k])) {
      VecX e = VecX::Zero(qp.n);
      e[k] = -1.0;
      ineqs.push_back({e, -qp.lo[k]});
    }
  }
  const int mi = static_cast<int>(ineqs.size());
  const int meq = static_cast<int>(qp.A.rows());
  std::optional<VecX> best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int j = 0; j < mi; ++j) {
      if (mask & (1u << j)) act.push_back(j);
    }
    const int q = meq + static_cast<int>(act.size());
    if (q > qp.n) continue;
    MatX K = MatX::Zero(qp.n + q, qp.n + q);
    VecX r = VecX::Zero(qp.n + q);
    K.topLeftCorner(qp.n, qp.n) = qp.H;
    r.head(qp.n) = -qp.f;
    for (int j = 0; j < meq; ++j) {
      K.block(qp.n + j, 0, 1, qp.n) = qp.A.row(j);
      K.block(0, qp.n + j, qp.n, 1) = qp.A.row(j).transpose();
      r[qp.n + j] = qp.b[j];
    }
    for (size_t j = 0; j < act.size(); ++j) {
      const auto& row = ineqs[static_cast<size_t>(act[j])];
      const int c = qp.n + meq + static_cast<int>(j);
      K.block(c, 0, 1, qp.n) = row.a.transpose();
      K.block(0, c, qp.n, 1) = row.a;
      r[c] = row.b;
    }
    Eigen::FullPivLU<MatX> lu(K);
    if (!lu.isInvertible()) continue;
    const VecX sol = lu.solve(r);
    const VecX x = sol.head(qp.n);
    bool ok = true;
    if (meq > 0 && (qp.A * x - qp.b).cwiseAbs().maxCoeff() > 1e-8) ok = false;
    for (int j = 0; j < mi && ok; ++j) {
      if (ineqs[static_cast<size_t>(j)].a.dot(x) > ineqs[static_cast<size_t>(j)].b + 1e-9)
        ok = false;
    }
    for (size_t j = 0; j < act.size() && ok; ++j) {
      if (sol[qp.n + meq + static_cast<int>(j)] < -1e-9) ok = false;
    }
    if (!ok) continue;
    const double obj = 0.5 * x.dot(qp.H * x) + qp.f.dot(x);
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

Outcome qp_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::uniform_int_distribution<int> dim(1, 6), gi(0, 4), ei(0, 2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double tol = 1e-9;
  double worst_gap = 0.0, worst_kkt = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = dim(rng);
    StepProgram qp;
    qp.n = n;
    MatX Q = MatX::NullaryExpr(n, n, [&](int, int) { return u(rng); });
    qp.H = Q.transpose() * Q + 0.3 * MatX::Identity(n, n);
    qp.f = VecX::NullaryExpr(n, [&](int) { return u(rng); });
    qp.lo = VecX::Constant(n, -1.5);
    qp.hi = VecX::Constant(n, 1.5);
    VecX x0 = VecX::NullaryExpr(n, [&](int) { return 0.8 * u(rng); });
    const int me = std::min(ei(rng), n - 1);
    qp.A = MatX::NullaryExpr(me, n, [&](int, int) { return u(rng); });
    qp.b = qp.A * x0;
    qp.eq_kinds.assign(static_cast<size_t>(me), RowKind::kControlGoal);
    const int mg = gi(rng);
    qp.G = MatX::NullaryExpr(mg, n, [&](int, int) { return u(rng); });
    qp.h = qp.G * x0 + VecX::NullaryExpr(mg, [&](int) { return 0.05 + 0.5 * std::abs(u(rng)); });
    qp.ineq_kinds.assign(static_cast<size_t>(mg), RowKind::kObstacle);

    const StepSolution sol = solve(qp, tol);
    if (sol.status != SolveStatus::kOptimal) return {false, "solver failed on a feasible program"};
    worst_kkt = std::max(worst_kkt, kkt_residual(qp, sol));
    const auto ref = brute_force(qp);
    if (!ref) return {false, "oracle found no feasible point"};
    worst_gap = std::max(worst_gap, (sol.theta_dot - *ref).cwiseAbs().maxCoeff());
  }
  const double dt = seconds_since(t0);
  std::ostringstream oss;
  oss << "500 programs, worst |x - x_oracle| " << worst_gap << ", worst KKT " << worst_kkt << ", "
      << dt << " s";
  return {worst_gap < 1e-8 && worst_kkt <= 10.0 * tol && dt < 30.0, oss.str()};
}

// ---------------------------------------------------------------- 3
Outcome tracking_reproduction() {
  Scenario sc = load("ckbot5_sphere.scn");
  if (sc.tuning.dt != 0.05) return {false, "scenario is not a 20 Hz loop"};
  if ((sc.tuning.gains[0] - Vec3::Ones()).norm() != 0.0) return {false, "gains are not diag(1,1,1)"};
  Planner p(sc);
  const Vec3 start = p.goal_position(0);
  const Vec3 dest = sc.goal_trajectories[0].final_position();
  if (std::abs((dest - start).y() - 0.15) > 1e-3) {
    return {false, "destination is not 0.15 m along +y from the start"};
  }
  const RunResult result = p.run();
  if (!result.success) return {false, "run failed: " + result.failure};

  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true, within_limits = true;
  for (size_t i = 0; i < result.log.records.size(); ++i) {
    const auto& rec = result.log.records[i];
    const double err = (rec.goal_positions[0] - dest).norm();
    if (i >= 5 && err > prev + 1e-12) monotone = false;
    prev = err;
    for (size_t k = 0; k < p.global_joints().size(); ++k) {
      const JointInfo& info = p.graph().joint_info(p.global_joints()[k]);
      const double v = rec.theta_dot[static_cast<int>(k)];
      if (v < info.vel_min - 1e-9 || v > info.vel_max + 1e-9) within_limits = false;
    }
  }
  const double final_err = (p.goal_position(0) - dest).norm();
  std::ostringstream oss;
  oss << result.log.records.size() << " steps, final error " << final_err << " m, monotone after 5 "
      << (monotone ? "yes" : "NO") << ", limits " << (within_limits ? "respected" : "VIOLATED");
  return {final_err < 1e-3 && monotone && within_limits, oss.str()};
}

// ---------------------------------------------------------------- 4
// Analytic per-step distances for one finished run.
bool check_safety(const Scenario& sc, const Planner& p, const RunResult& result,
                  std::string* why) {
  const auto spheres = sc.all_spheres();
  const auto& modules = p.graph().modules();
  for (const auto& rec : result.log.records) {
    if (rec.kkt_residual > 1e-8) {
      *why = "per-step KKT residual above 1e-8";
      return false;
    }
    for (double m : rec.margins) {
      if (m < -1e-8) {
        *why = "negative per-step constraint margin";
        return false;
      }
    }
    for (size_t b = 0; b < modules.size(); ++b) {
      const double r_i = p.graph().descriptor(modules[b].id).body_radius;
      const Vec3& pm = rec.module_positions[b];
      for (const auto& face : sc.boundary.faces) {
        if (face.normal.dot(pm) > face.offset - r_i + 1e-3) {
          *why = "boundary violation at module " + modules[b].id;
          return false;
        }
      }
      for (const auto& s : spheres) {
        if ((pm - s.center).norm() < s.radius + r_i - 1e-3) {
          *why = "obstacle violation at module " + modules[b].id + " vs " + s.source_id;
          return false;
        }
      }
    }
  }
  return true;
}

Outcome safety_suite() {
  for (const auto& name : kScenarios) {
    const Scenario sc = load(name);
    Planner p(sc);
    const RunResult result = p.run();
    if (!result.success) return {false, name + " failed: " + result.failure};
    std::string why;
    if (!check_safety(sc, p, result, &why)) return {false, name + ": " + why};
  }
  return {true, "all bundled scenarios within 1e-3 m Euler slack, residuals <= 1e-8"};
}

// ---------------------------------------------------------------- 5
Outcome pruning() {
  std::uniform_int_distribution<int> count(50, 400);
  std::uniform_real_distribution<double> pos(-0.6, 0.6), rad(0.01, 0.05);
  const double r_i = 0.05;
  for (int scene = 0; scene < 200; ++scene) {
    std::vector<ObstacleSphere> spheres;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      Vec3 c;
      do {
        c = Vec3(pos(rng), pos(rng), pos(rng));
      } while (c.norm() < 0.2);
      spheres.push_back({c, rad(rng), "s" + std::to_string(i)});
    }
    const RefineResult res = refine_spheres(Vec3::Zero(), r_i, spheres);
    for (const auto& s : spheres) {
      bool kept = false;
      for (const auto& k : res.kept) {
        if (k.source_id == s.source_id) kept = true;
      }
      if (kept) continue;
      bool separated = false;
      for (const auto& plane : res.planes) {
        const Vec3 point_on = plane.tangency_point - r_i * plane.normal;
        if (plane.normal.dot(s.center - point_on) - s.radius > 0.0) {
          separated = true;
          break;
        }
      }
      if (!separated) return {false, "pruned sphere not separated by any kept plane"};
    }
  }

  const EnvironmentData env = load_environment(MODQP_DATA_DIR "/env/cluttered.env");
  std::vector<ObstacleSphere> all;
  for (size_t i = 0; i < env.boxes.size(); ++i) {
    auto gen = generate_spheres(env.boxes[i], env.box_levels[i]);
    all.insert(all.end(), gen.begin(), gen.end());
  }
  const RefineResult res = refine_spheres(Vec3(0, 0, 0.1), 0.052, all);
  std::ostringstream oss;
  oss << "200 scenes sound; cluttered scene kept " << res.kept.size() << " of " << all.size();
  return {res.kept.size() * 10 <= all.size(), oss.str()};
}

// ---------------------------------------------------------------- 6
Outcome whole_body() {
  const Scenario sc = load("wholebody14.scn");
  Planner p(sc);
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult result = p.run();
  const double wall = seconds_since(t0);
  if (!result.success) return {false, "run failed: " + result.failure};
  std::string why;
  if (!check_safety(sc, p, result, &why)) return {false, why};
  double err = 0.0;
  for (size_t g = 0; g < sc.goal_frames.size(); ++g) {
    err += (p.goal_position(g) - sc.goal_trajectories[g].final_position()).norm();
  }
  const double per_step = wall / static_cast<double>(result.log.records.size());
  std::ostringstream oss;
  oss << result.log.records.size() << " steps, summed goal error " << err << " m, "
      << per_step * 1e3 << " ms per step (budget 50)";
  return {err < sc.tuning.epsilon && per_step <= 0.05, oss.str()};
}

// ---------------------------------------------------------------- 7
Outcome branch_coupling() {
  const Scenario sc = load("branch9_dual.scn");
  for (const auto& g : sc.tuning.gains) {
    if ((g - Vec3::Constant(0.1)).norm() != 0.0) return {false, "gains are not diag(0.1)"};
  }
  Planner p(sc);

  auto shared_columns_match = [&]() {
    const ChainState& a = p.goal_chain(0);
    const ChainState& b = p.goal_chain(1);
    int shared = 0;
    for (size_t i = 0; i < a.joints().size(); ++i) {
      for (size_t j = 0; j < b.joints().size(); ++j) {
        if (a.joints()[i] == b.joints()[j]) {
          ++shared;
          if ((a.jacobian().col(static_cast<int>(i)) - b.jacobian().col(static_cast<int>(j)))
                  .norm() > 1e-12) {
            return std::pair<bool, int>{false, shared};
          }
        }
      }
    }
    return std::pair<bool, int>{true, shared};
  };

  const auto [before_ok, shared] = shared_columns_match();
  if (shared == 0) return {false, "goal chains share no joints"};
  const RunResult result = p.run();
  if (!result.success) return {false, "run failed: " + result.failure};
  const auto [after_ok, shared2] = shared_columns_match();

  // Concurrent convergence: both goals end within epsilon of the summed
  // tolerance at the same final step.
  const double e0 = (p.goal_position(0) - sc.goal_trajectories[0].final_position()).norm();
  const double e1 = (p.goal_position(1) - sc.goal_trajectories[1].final_position()).norm();
  std::ostringstream oss;
  oss << shared << " shared joints, final errors " << e0 << " / " << e1 << " m";
  return {before_ok && after_ok && e0 + e1 < sc.tuning.epsilon, oss.str()};
}

// ---------------------------------------------------------------- 8
Outcome determinism() {
  for (const auto& name : kScenarios) {
    const Scenario sc = load(name);
    auto run_once = [&]() {
      Planner p(sc);
      std::ostringstream publish;
      const RunResult result = p.run(&publish);
      std::ostringstream csv;
      const fs::path tmp = fs::temp_directory_path() / "modqp_acc_det.csv";
      write_trajectory_csv(tmp, result, p.global_joints(), sc.goal_frames, p.graph().modules());
      std::ifstream in(tmp, std::ios::binary);
      csv << in.rdbuf();
      return publish.str() + "\n---\n" + csv.str();
    };
    if (run_once() != run_once()) return {false, name + " produced differing logs"};
  }
  return {true, "all bundled scenarios byte-identical across two runs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"jacobian fidelity vs finite differences", jacobian_fidelity},
      {"qp solver oracle equivalence", qp_oracle},
      {"tracking reproduction (5-module chain)", tracking_reproduction},
      {"safety suite across bundled scenarios", safety_suite},
      {"sphere pruning soundness and reduction", pruning},
      {"whole-body 14-module scenario", whole_body},
      {"branch coupling (9-module dual goal)", branch_coupling},
      {"determinism of bundled runs", determinism},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu %s: %s — %s\n", i + 1, out.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
