#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "modqp/planner.hpp"
#include "modqp/scenario_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitPlanning = 3;
constexpr int kExitIo = 4;

int cmd_validate(const std::string& scenario_path) {
  try {
    modqp::Scenario sc = modqp::load_scenario(scenario_path);
    modqp::Planner planner(sc);
    std::cout << "ok: " << sc.config.modules.size() << " modules, "
              << planner.global_joints().size() << " joints, " << sc.goal_frames.size()
              << " goal(s), " << sc.all_spheres().size() << " obstacle sphere(s)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  }
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const std::string& mode_override, bool dump_qp, std::optional<unsigned> seed) {
  modqp::Scenario sc;
  try {
    sc = modqp::load_scenario(scenario_path);
  } catch (const std::exception& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  }
  if (mode_override == "hard") sc.tuning.mode = modqp::ControlMode::kHardEquality;
  if (mode_override == "soft") sc.tuning.mode = modqp::ControlMode::kSequentialSoft;

  try {
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }

  try {
    modqp::Planner planner(sc);
    std::ofstream publish(fs::path(out_dir) / "publish.txt");

    std::function<void(int, const modqp::StepProgram&)> observer;
    if (dump_qp) {
      observer = [&](int step, const modqp::StepProgram& qp) {
        char name[32];
        std::snprintf(name, sizeof(name), "qp_%06d.txt", step);
        modqp::write_qp_dump(fs::path(out_dir) / name, qp);
      };
    }

    const auto t0 = std::chrono::steady_clock::now();
    modqp::RunResult result = planner.run(&publish, observer);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    modqp::write_trajectory_csv(fs::path(out_dir) / "trajectory.csv", result,
                                planner.global_joints(), sc.goal_frames,
                                planner.graph().modules());
    modqp::write_metrics(fs::path(out_dir) / "metrics.txt", result, wall);
    modqp::write_scenario(fs::path(out_dir) / "scenario", sc);

    // Per-goal traces: time, actual position, desired position.
    for (size_t g = 0; g < sc.goal_frames.size(); ++g) {
      std::string fname = "trace_" + sc.goal_frames[g] + ".csv";
      for (auto& ch : fname) {
        if (ch == '/' || ch == '\\') ch = '_';
      }
      std::ofstream trace(fs::path(out_dir) / fname);
      trace << "t,x,y,z,desired_x,desired_y,desired_z\n";
      for (const auto& rec : result.log.records) {
        const modqp::Vec3& p = rec.goal_positions[g];
        const modqp::MotionGoal want = sc.goal_trajectories[g].sample(rec.t);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", rec.t, p.x(),
                      p.y(), p.z(), want.position.x(), want.position.y(), want.position.z());
        trace << buf;
      }
    }

    if (seed) {
      std::ofstream(fs::path(out_dir) / "seed.txt") << *seed << "\n";
    }

    if (result.success) {
      std::cout << "success: " << result.log.records.size() << " steps\n";
      return kExitOk;
    }
    std::cerr << "planning failed"
              << (result.budget_exhausted ? " (step budget exhausted)" : "")
              << (result.failure.empty() ? "" : ": " + result.failure) << "\n";
    return kExitPlanning;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

int cmd_spheres(const std::string& env_path, int level, const std::string& out_path) {
  try {
    modqp::EnvironmentData env = modqp::load_environment(env_path);
    modqp::EnvironmentData flat;
    flat.boundary = env.boundary;
    flat.raw_spheres = env.raw_spheres;
    for (const auto& box : env.boxes) {
      auto spheres = modqp::generate_spheres(box, level);
      flat.raw_spheres.insert(flat.raw_spheres.end(), spheres.begin(), spheres.end());
    }
    if (out_path.empty()) {
      for (const auto& s : flat.raw_spheres) {
        std::printf("sphere id %s center %.17g %.17g %.17g radius %.17g\n", s.source_id.c_str(),
                    s.center.x(), s.center.y(), s.center.z(), s.radius);
      }
    } else {
      modqp::write_environment(out_path, flat);
    }
    return kExitOk;
  } catch (const modqp::LoadError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion planning and control for tree-topology modular robots"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", mode_override, env_path, spheres_out;
  bool dump_qp = false;
  int level = 1;
  std::optional<unsigned> seed;

  auto* run = app.add_subcommand("run", "Run a scenario and emit trajectory artifacts");
  run->add_option("scenario", scenario_path, "Scenario file (.scn)")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--mode", mode_override, "Override control mode")
      ->check(CLI::IsMember({"hard", "soft"}));
  run->add_flag("--dump-qp", dump_qp, "Write one QP dump file per step");
  run->add_option("--seed", seed, "Seed recorded with the run");

  auto* validate = app.add_subcommand("validate", "Validate a scenario file");
  validate->add_option("scenario", scenario_path, "Scenario file (.scn)")->required();

  auto* spheres = app.add_subcommand("spheres", "Emit the generated obstacle-sphere cover");
  spheres->add_option("env", env_path, "Environment file (.env)")->required();
  spheres->add_option("--level", level, "Octree subdivision level")->required();
  spheres->add_option("--out", spheres_out, "Write a flattened env file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;  // --help exits 0
  }

  if (run->parsed()) return cmd_run(scenario_path, out_dir, mode_override, dump_qp, seed);
  if (validate->parsed()) return cmd_validate(scenario_path);
  return cmd_spheres(env_path, level, spheres_out);
}
