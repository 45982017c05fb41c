#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "modqp/planner.hpp"

namespace modqp {

/// Parse/validation failure with file, line, and field context.
struct LoadError : std::runtime_error {
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

/// `modqp-module v1` descriptor file.
ModuleDescriptor load_module_descriptor(const std::filesystem::path& path);

void write_module_descriptor(const std::filesystem::path& path, const ModuleDescriptor& desc);

/// Loads every *.mod file in the directory.
ModuleLibrary load_module_library(const std::filesystem::path& dir);

/// `modqp-config v1` configuration file.
ConfigurationGraph load_config(const std::filesystem::path& path);
void write_config(const std::filesystem::path& path, const ConfigurationGraph& config);

struct EnvironmentData {
  BoundaryPolyhedron boundary;
  std::vector<OrientedBox> boxes;
  std::vector<int> box_levels;
  std::vector<ObstacleSphere> raw_spheres;
};

/// `modqp-env v1` environment file.
EnvironmentData load_environment(const std::filesystem::path& path);
void write_environment(const std::filesystem::path& path, const EnvironmentData& env);

/// `modqp-scenario v1` scenario file. Referenced config/env/module paths
/// resolve relative to the scenario file's directory. Cross-references
/// (kinds, connections, goal frames) are validated by building the
/// kinematics graph once.
Scenario load_scenario(const std::filesystem::path& path);

/// Writes a normalized, reloadable copy: <dir>/normalized.scn plus
/// config.cfg and environment.env beside it. Module descriptors are
/// copied into <dir>/modules/.
void write_scenario(const std::filesystem::path& dir, const Scenario& scenario);

void write_trajectory_csv(const std::filesystem::path& path, const RunResult& result,
                          const std::vector<JointRef>& joints,
                          const std::vector<std::string>& goal_frames,
                          const std::vector<ConfigModule>& modules);

/// Reads back the columns emitted by write_trajectory_csv.
struct ParsedTrajectory {
  std::vector<double> t;
  std::vector<VecX> theta, theta_dot;
  std::vector<std::vector<Vec3>> goal_positions;
  std::vector<std::vector<int>> kept_counts;
  std::vector<std::string> status;
};
ParsedTrajectory read_trajectory_csv(const std::filesystem::path& path);

void write_metrics(const std::filesystem::path& path, const RunResult& result, double wall_seconds);

void write_qp_dump(const std::filesystem::path& path, const StepProgram& qp);

}  // namespace modqp
